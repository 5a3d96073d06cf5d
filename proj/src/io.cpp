#include "epk/io.hpp"

#include "epk/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace epk::io {

using nlohmann::json;

namespace {

[[noreturn]] void input_error(const std::string& name, std::size_t offset, const std::string& what) {
    throw InputError(name + ": byte " + std::to_string(offset) + ": " + what);
}

// --- tiny cursor for the text headers of PGM / EPKMAT1 ----------------------

struct Cursor {
    std::string_view data;
    std::size_t pos = 0;
    const std::string& name;

    void skip_space_and_comments() {
        while (pos < data.size()) {
            const char c = data[pos];
            if (c == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                ++pos;
            } else {
                break;
            }
        }
    }

    std::size_t number(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos;
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(data.data() + pos, data.data() + data.size(), v);
        if (ec != std::errc{} || ptr == data.data() + pos) input_error(name, start, std::string("expected ") + what);
        pos = static_cast<std::size_t>(ptr - data.data());
        return v;
    }
};

double read_le_double(const char* p) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(p[i]);
    return std::bit_cast<double>(bits);
}

void append_le_double(std::string& out, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>(bits & 0xFF));
        bits >>= 8;
    }
}

// --- JSON field helpers -----------------------------------------------------

struct LineContext {
    const std::string& name;
    std::size_t line;
    std::size_t offset;

    [[noreturn]] void fail(const std::string& what) const {
        throw InputError(name + ": line " + std::to_string(line) + " (byte " + std::to_string(offset) + "): " + what);
    }
};

double number_of(const json& j, const LineContext& ctx, const std::string& what) {
    if (!j.is_number()) ctx.fail(what + " must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) ctx.fail(what + " must be finite");
    return v;
}

double unit_of(const json& j, const LineContext& ctx, const std::string& what) {
    const double v = number_of(j, ctx, what);
    if (v < 0.0 || v > 1.0) ctx.fail(what + " must lie in [0, 1]");
    return v;
}

Box box_of(const json& j, const LineContext& ctx, const std::string& what) {
    if (!j.is_array() || j.size() != 4) ctx.fail(what + " must be [x0, y0, x1, y1]");
    Box b{number_of(j[0], ctx, what), number_of(j[1], ctx, what), number_of(j[2], ctx, what),
          number_of(j[3], ctx, what)};
    if (!b.valid()) ctx.fail(what + " needs x0 < x1 and y0 < y1");
    return b;
}

DetectionFrame detection_of(const json& j, const LineContext& ctx) {
    if (!j.is_object()) ctx.fail("expected a JSON object");
    DetectionFrame f;
    const auto frame = j.find("frame");
    if (frame == j.end() || !frame->is_number_unsigned()) ctx.fail("\"frame\" must be a non-negative integer");
    f.frame = frame->get<std::size_t>();
    f.pose.frame_index = f.frame;

    if (const auto pose = j.find("pose"); pose != j.end() && !pose->is_null()) {
        if (!pose->is_object()) ctx.fail("\"pose\" must be an object");
        const auto joints = pose->find("joints");
        if (joints != pose->end()) {
            if (!joints->is_object()) ctx.fail("\"pose.joints\" must be an object");
            for (const auto& [key, value] : joints->items()) {
                const auto joint = parse_joint(key);
                if (!joint) ctx.fail("unknown joint \"" + key + "\"");
                if (value.is_null()) continue;
                if (!value.is_array() || value.size() != 3) ctx.fail("joint " + key + " must be [x, y, score]");
                f.pose[*joint] = Keypoint{number_of(value[0], ctx, key), number_of(value[1], ctx, key),
                                          unit_of(value[2], ctx, key + " score")};
            }
        }
    }
    if (const auto hands = j.find("hands"); hands != j.end()) {
        if (!hands->is_array()) ctx.fail("\"hands\" must be an array");
        for (const json& h : *hands) {
            if (!h.is_object() || !h.contains("box") || !h.contains("score"))
                ctx.fail("each hand needs \"box\" and \"score\"");
            HandDetection d;
            d.box = box_of(h["box"], ctx, "hand box");
            d.score = unit_of(h["score"], ctx, "hand score");
            if (const auto side = h.find("side"); side != h.end()) {
                const auto parsed = side->is_string() ? parse_side(side->get<std::string>()) : std::nullopt;
                if (!parsed) ctx.fail("hand side must be \"left\", \"right\" or \"unknown\"");
                d.side = *parsed;
            }
            if (const auto q = h.find("side_score"); q != h.end()) d.side_score = unit_of(*q, ctx, "side_score");
            f.hands.push_back(d);
        }
    }
    if (const auto objects = j.find("objects"); objects != j.end()) {
        if (!objects->is_array()) ctx.fail("\"objects\" must be an array");
        for (const json& o : *objects) {
            if (!o.is_object() || !o.contains("label") || !o.contains("box") || !o["label"].is_string())
                ctx.fail("each object needs a string \"label\" and a \"box\"");
            ObjectDetection d;
            d.label = o["label"].get<std::string>();
            d.box = box_of(o["box"], ctx, "object box");
            d.score = o.contains("score") ? unit_of(o["score"], ctx, "object score") : 1.0;
            f.objects.push_back(std::move(d));
        }
    }
    return f;
}

json box_json(const Box& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

/// Calls fn(json, ctx) for each non-blank line.
template <class F>
void for_each_json_line(std::string_view text, const std::string& name, F&& fn) {
    std::size_t pos = 0;
    std::size_t line = 0;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        ++line;
        const std::string_view raw = text.substr(pos, end - pos);
        const LineContext ctx{name, line, pos};
        if (raw.find_first_not_of(" \t\r") != std::string_view::npos) {
            json j;
            try {
                j = json::parse(raw);
            } catch (const json::parse_error& e) {
                const std::size_t at = pos + (e.byte > 0 ? e.byte - 1 : 0);
                throw InputError(name + ": line " + std::to_string(line) + " (byte " + std::to_string(at) +
                                 "): invalid JSON");
            }
            fn(j, ctx);
        }
        pos = end + 1;
    }
}

} // namespace

// ---------------------------------------------------------------------------

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path.string() + ": cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw InputError(path.string() + ": read failed");
    return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(path.string() + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError(path.string() + ": write failed");
}

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

// --- PGM ----------------------------------------------------------------------

GrayFrame parse_pgm(std::string_view bytes, const std::string& name) {
    if (bytes.size() < 2 || bytes.substr(0, 2) != "P5") input_error(name, 0, "not a binary PGM (missing P5 magic)");
    Cursor c{bytes, 2, name};
    const std::size_t w = c.number("width");
    const std::size_t h = c.number("height");
    const std::size_t maxval = c.number("maxval");
    if (w == 0 || h == 0) input_error(name, c.pos, "empty image");
    if (maxval == 0 || maxval > 255) input_error(name, c.pos, "only 8-bit PGM (maxval 1..255) is supported");
    if (c.pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[c.pos])))
        input_error(name, c.pos, "expected whitespace after header");
    const std::size_t data = c.pos + 1;
    if (h > bytes.size() / w || bytes.size() - data < w * h)
        input_error(name, bytes.size(), "truncated pixel data (expected " + std::to_string(w * h) + " bytes)");
    std::vector<double> px(w * h);
    const double scale = static_cast<double>(maxval);
    for (std::size_t i = 0; i < px.size(); ++i) {
        const auto v = static_cast<unsigned char>(bytes[data + i]);
        if (v > maxval) input_error(name, data + i, "pixel exceeds maxval");
        px[i] = static_cast<double>(v) / scale;
    }
    return GrayFrame(w, h, std::move(px));
}

GrayFrame read_pgm(const fs::path& path) { return parse_pgm(read_file(path), path.string()); }

std::string format_pgm(const GrayFrame& frame) {
    std::string out = "P5\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) + "\n255\n";
    for (double v : frame.pixels()) out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    return out;
}

void write_pgm(const fs::path& path, const GrayFrame& frame) { write_file(path, format_pgm(frame)); }

std::vector<fs::path> list_frames(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw InputError(dir.string() + ": not a directory");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir, ec))
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") out.push_back(entry.path());
    if (ec) throw InputError(dir.string() + ": " + ec.message());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<GrayFrame> read_frames(const fs::path& dir) {
    const auto paths = list_frames(dir);
    if (paths.empty()) throw InputError(dir.string() + ": no .pgm frames found");
    std::vector<GrayFrame> frames;
    frames.reserve(paths.size());
    for (const auto& p : paths) {
        frames.push_back(read_pgm(p));
        if (frames.back().width() != frames.front().width() || frames.back().height() != frames.front().height())
            throw SchemaError(p.string() + ": frame size differs from " + paths.front().string());
    }
    return frames;
}

void write_frames(const fs::path& dir, const std::vector<GrayFrame>& frames) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.pgm", i);
        write_pgm(dir / name, frames[i]);
    }
}

// --- EPKMAT1 -----------------------------------------------------------------

Matrix parse_matrix(std::string_view bytes, const std::string& name) {
    constexpr std::string_view magic = "EPKMAT1\n";
    if (bytes.substr(0, magic.size()) != magic) input_error(name, 0, "missing EPKMAT1 magic");
    std::size_t pos = magic.size();
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) input_error(name, pos, "missing dimension line");
    const std::string_view dims = bytes.substr(pos, nl - pos);
    std::size_t rows = 0, cols = 0;
    const char* p = dims.data();
    const char* end = dims.data() + dims.size();
    auto r1 = std::from_chars(p, end, rows);
    if (r1.ec != std::errc{} || r1.ptr == end || *r1.ptr != ' ') input_error(name, pos, "dimension line must be \"rows cols\"");
    auto r2 = std::from_chars(r1.ptr + 1, end, cols);
    if (r2.ec != std::errc{} || r2.ptr != end) input_error(name, pos, "dimension line must be \"rows cols\"");
    if (rows == 0 || cols == 0) input_error(name, pos, "matrix dimensions must be positive");
    pos = nl + 1;
    if (cols > (bytes.size() / 8) / rows)
        input_error(name, magic.size(), "dimensions " + std::to_string(rows) + "x" + std::to_string(cols) +
                                            " exceed the file size");
    const std::size_t expected = rows * cols * 8;
    if (bytes.size() - pos != expected)
        input_error(name, std::min(bytes.size(), pos + expected),
                    "payload is " + std::to_string(bytes.size() - pos) + " bytes, expected " + std::to_string(expected));
    std::vector<double> values(rows * cols);
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = read_le_double(bytes.data() + pos + 8 * i);
        if (!std::isfinite(values[i])) input_error(name, pos + 8 * i, "non-finite entry");
    }
    return Matrix(rows, cols, std::move(values));
}

Matrix read_matrix(const fs::path& path) { return parse_matrix(read_file(path), path.string()); }

std::string format_matrix(const Matrix& m) {
    std::string out = "EPKMAT1\n" + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    out.reserve(out.size() + 8 * m.rows() * m.cols());
    for (double v : m.values()) append_le_double(out, v);
    return out;
}

void write_matrix(const fs::path& path, const Matrix& m) { write_file(path, format_matrix(m)); }

// --- detections --------------------------------------------------------------

std::vector<DetectionFrame> parse_detections(std::string_view text, const std::string& name) {
    std::vector<DetectionFrame> out;
    for_each_json_line(text, name, [&](const json& j, const LineContext& ctx) {
        DetectionFrame f = detection_of(j, ctx);
        if (!out.empty() && f.frame <= out.back().frame)
            throw SchemaError(name + ": line " + std::to_string(ctx.line) + ": frame " + std::to_string(f.frame) +
                              " does not follow frame " + std::to_string(out.back().frame));
        out.push_back(std::move(f));
    });
    return out;
}

std::vector<DetectionFrame> read_detections(const fs::path& path) {
    return parse_detections(read_file(path), path.string());
}

std::string format_detection(const DetectionFrame& f) {
    json joints = json::object();
    for (Joint j : kAllJoints)
        if (const auto& k = f.pose[j]) joints[std::string(joint_name(j))] = json::array({k->x, k->y, k->score});
    json hands = json::array();
    for (const HandDetection& h : f.hands)
        hands.push_back({{"box", box_json(h.box)}, {"score", h.score}, {"side", side_name(h.side)}, {"side_score", h.side_score}});
    json objects = json::array();
    for (const ObjectDetection& o : f.objects)
        objects.push_back({{"label", o.label}, {"box", box_json(o.box)}, {"score", o.score}});
    const json j{{"frame", f.frame}, {"pose", {{"joints", joints}}}, {"hands", hands}, {"objects", objects}};
    return j.dump();
}

void write_detections(const fs::path& path, const std::vector<DetectionFrame>& frames) {
    std::string out;
    for (const auto& f : frames) out += format_detection(f) + "\n";
    write_file(path, out);
}

std::vector<std::vector<Box>> parse_box_lists(std::string_view text, const std::string& name) {
    std::vector<std::vector<Box>> out;
    for_each_json_line(text, name, [&](const json& j, const LineContext& ctx) {
        if (!j.is_object()) ctx.fail("expected a JSON object");
        std::vector<Box> boxes;
        if (const auto b = j.find("boxes"); b != j.end()) {
            if (!b->is_array()) ctx.fail("\"boxes\" must be an array");
            for (const json& item : *b) boxes.push_back(box_of(item, ctx, "box"));
        } else {
            for (const HandDetection& h : detection_of(j, ctx).hands) boxes.push_back(h.box);
        }
        out.push_back(std::move(boxes));
    });
    return out;
}

std::vector<std::vector<Box>> read_box_lists(const fs::path& path) {
    return parse_box_lists(read_file(path), path.string());
}

// --- SVG -------------------------------------------------------------------

std::string line_plot_svg(const std::vector<SvgSeries>& series, const std::vector<double>& dashed_levels,
                          const std::string& title) {
    constexpr double W = 800, H = 300, L = 50, R = 15, T = 30, B = 35;
    std::size_t n = 0;
    double hi = 0.0;
    for (const auto& s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values) hi = std::max(hi, v);
    }
    for (double v : dashed_levels) hi = std::max(hi, v);
    if (!(hi > 0.0)) hi = 1.0;
    const auto px = [&](std::size_t i) { return L + (n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0) * (W - L - R); };
    const auto py = [&](double v) { return H - B - v / hi * (H - T - B); };
    const auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    static constexpr const char* kDash[] = {"#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"300\" viewBox=\"0 0 800 300\">\n";
    s += "<rect width=\"800\" height=\"300\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(L) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">" + title + "</text>\n";
    s += "<line x1=\"" + num(L) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(W - R) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(L) + "\" y1=\"" + num(T) + "\" x2=\"" + num(L) + "\" y2=\"" + num(H - B) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(L - 4) + "\" y=\"" + num(T + 4) + "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" +
         num(hi) + "</text>\n";
    s += "<text x=\"" + num(L - 4) + "\" y=\"" + num(H - B + 4) +
         "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">0</text>\n";
    s += "<text x=\"" + num(W - R) + "\" y=\"" + num(H - B + 16) +
         "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" + std::to_string(n > 0 ? n - 1 : 0) + "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        s += "<polyline fill=\"none\" stroke=\"" + std::string(kColors[k % 4]) + "\" stroke-width=\"1\" points=\"";
        for (std::size_t i = 0; i < series[k].values.size(); ++i) {
            if (i) s += ' ';
            s += num(px(i)) + "," + num(py(series[k].values[i]));
        }
        s += "\"><title>" + series[k].label + "</title></polyline>\n";
    }
    for (std::size_t k = 0; k < dashed_levels.size(); ++k) {
        const double y = py(dashed_levels[k]);
        s += "<line x1=\"" + num(L) + "\" y1=\"" + num(y) + "\" x2=\"" + num(W - R) + "\" y2=\"" + num(y) +
             "\" stroke=\"" + kDash[k % 4] + "\" stroke-dasharray=\"6,4\"><title>threshold " +
             format_double(dashed_levels[k]) + "</title></line>\n";
    }
    s += "</svg>\n";
    return s;
}

} // namespace epk::io
