#pragma once

#include "epk/detections.hpp"
#include "epk/image.hpp"
#include "epk/matrix.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace epk::io {

namespace fs = std::filesystem;

// Frames: binary 8-bit PGM (P5), pixels mapped to [0, 1].
GrayFrame parse_pgm(std::string_view bytes, const std::string& name = "<pgm>");
GrayFrame read_pgm(const fs::path& path);
std::string format_pgm(const GrayFrame& frame);
void write_pgm(const fs::path& path, const GrayFrame& frame);

/// Sorted *.pgm files of a directory; all must share one size.
std::vector<fs::path> list_frames(const fs::path& dir);
std::vector<GrayFrame> read_frames(const fs::path& dir);
void write_frames(const fs::path& dir, const std::vector<GrayFrame>& frames);

// Matrices: "EPKMAT1\n", "rows cols\n", then little-endian float64 row-major.
Matrix parse_matrix(std::string_view bytes, const std::string& name = "<matrix>");
Matrix read_matrix(const fs::path& path);
std::string format_matrix(const Matrix& m);
void write_matrix(const fs::path& path, const Matrix& m);

// Detections: one JSON object per line.
std::vector<DetectionFrame> parse_detections(std::string_view text, const std::string& name = "<detections>");
std::vector<DetectionFrame> read_detections(const fs::path& path);
std::string format_detection(const DetectionFrame& frame);
void write_detections(const fs::path& path, const std::vector<DetectionFrame>& frames);

/// Boxes file for flow grouping: lines of {"frame": n, "boxes": [[x0,y0,x1,y1], ...]}
/// or detection lines, whose hand boxes are used.
std::vector<std::vector<Box>> parse_box_lists(std::string_view text, const std::string& name = "<boxes>");
std::vector<std::vector<Box>> read_box_lists(const fs::path& path);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view bytes);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

struct SvgSeries {
    std::string label;
    std::vector<double> values;
};

/// Line plot with axes, one polyline per series and dashed horizontal lines.
std::string line_plot_svg(const std::vector<SvgSeries>& series, const std::vector<double>& dashed_levels,
                          const std::string& title);

} // namespace epk::io
