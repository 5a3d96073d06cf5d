#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace epk {

/// Real-valued 2-D array, row-major. Carries gradients and other derived
/// fields; grayscale frames use GrayFrame.
class Plane {
public:
    Plane() = default;
    Plane(std::size_t width, std::size_t height, double fill = 0.0)
        : width_(width), height_(height), values_(width * height, fill) {}
    Plane(std::size_t width, std::size_t height, std::vector<double> values);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    bool empty() const noexcept { return values_.empty(); }

    double& at(std::size_t x, std::size_t y) noexcept { return values_[y * width_ + x]; }
    double at(std::size_t x, std::size_t y) const noexcept { return values_[y * width_ + x]; }

    std::span<double> row(std::size_t y) noexcept { return {values_.data() + y * width_, width_}; }
    std::span<const double> row(std::size_t y) const noexcept { return {values_.data() + y * width_, width_}; }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    /// Bilinear sample with coordinates clamped to the plane.
    double sample(double x, double y) const noexcept;

    friend bool operator==(const Plane&, const Plane&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> values_;
};

/// Grayscale frame with pixels in [0, 1].
class GrayFrame {
public:
    GrayFrame() = default;
    GrayFrame(std::size_t width, std::size_t height, double fill = 0.0);
    /// Throws ArgumentError if the size mismatches or a pixel is outside [0, 1].
    GrayFrame(std::size_t width, std::size_t height, std::vector<double> pixels);
    explicit GrayFrame(Plane plane);

    std::size_t width() const noexcept { return plane_.width(); }
    std::size_t height() const noexcept { return plane_.height(); }
    double at(std::size_t x, std::size_t y) const noexcept { return plane_.at(x, y); }
    /// Writes are clamped to [0, 1].
    void set(std::size_t x, std::size_t y, double v) noexcept;
    double sample(double x, double y) const noexcept { return plane_.sample(x, y); }
    std::span<const double> pixels() const noexcept { return plane_.values(); }
    const Plane& plane() const noexcept { return plane_; }

    friend bool operator==(const GrayFrame&, const GrayFrame&) = default;

private:
    Plane plane_;
};

/// Box average by an integer factor so the longest side is ≤ limit.
GrayFrame downscale_to_limit(const GrayFrame& frame, std::size_t limit);

} // namespace epk
