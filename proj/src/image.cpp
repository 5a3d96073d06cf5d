#include "epk/image.hpp"

#include "epk/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace epk {

Plane::Plane(std::size_t width, std::size_t height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (values_.size() != width * height)
        throw ArgumentError("Plane: " + std::to_string(values_.size()) + " values for " +
                            std::to_string(width) + "x" + std::to_string(height));
}

double Plane::sample(double x, double y) const noexcept {
    const double maxx = static_cast<double>(width_ - 1);
    const double maxy = static_cast<double>(height_ - 1);
    x = std::clamp(x, 0.0, maxx);
    y = std::clamp(y, 0.0, maxy);
    const auto x0 = static_cast<std::size_t>(std::floor(x));
    const auto y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t x1 = std::min(x0 + 1, width_ - 1);
    const std::size_t y1 = std::min(y0 + 1, height_ - 1);
    const double fx = x - static_cast<double>(x0);
    const double fy = y - static_cast<double>(y0);
    const double top = at(x0, y0) + fx * (at(x1, y0) - at(x0, y0));
    const double bottom = at(x0, y1) + fx * (at(x1, y1) - at(x0, y1));
    return top + fy * (bottom - top);
}

GrayFrame::GrayFrame(std::size_t width, std::size_t height, double fill)
    : plane_(width, height, std::clamp(fill, 0.0, 1.0)) {}

GrayFrame::GrayFrame(std::size_t width, std::size_t height, std::vector<double> pixels)
    : GrayFrame(Plane(width, height, std::move(pixels))) {}

GrayFrame::GrayFrame(Plane plane) : plane_(std::move(plane)) {
    for (double v : plane_.values())
        if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("GrayFrame: pixel outside [0, 1]");
}

void GrayFrame::set(std::size_t x, std::size_t y, double v) noexcept {
    plane_.at(x, y) = std::clamp(v, 0.0, 1.0);
}

GrayFrame downscale_to_limit(const GrayFrame& frame, std::size_t limit) {
    if (limit == 0) throw ArgumentError("downscale_to_limit: limit must be positive");
    const std::size_t longest = std::max(frame.width(), frame.height());
    const std::size_t factor = (longest + limit - 1) / limit;
    if (factor <= 1) return frame;
    const std::size_t w = std::max<std::size_t>(1, frame.width() / factor);
    const std::size_t h = std::max<std::size_t>(1, frame.height() / factor);
    Plane out(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            std::size_t n = 0;
            for (std::size_t dy = 0; dy < factor && y * factor + dy < frame.height(); ++dy)
                for (std::size_t dx = 0; dx < factor && x * factor + dx < frame.width(); ++dx) {
                    acc += frame.at(x * factor + dx, y * factor + dy);
                    ++n;
                }
            out.at(x, y) = std::clamp(acc / static_cast<double>(n), 0.0, 1.0);
        }
    return GrayFrame(std::move(out));
}

} // namespace epk
