#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace vcx {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster, row-major.
class RgbImage {
public:
    RgbImage(int height, int width);
    RgbImage(int height, int width, std::vector<Rgb> pixels);
    RgbImage(int height, int width, Rgb fill);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return pixels_.size(); }

    const Rgb& at(int y, int x) const { return pixels_[index(y, x)]; }
    Rgb& at(int y, int x) { return pixels_[index(y, x)]; }

    std::span<const Rgb> pixels() const noexcept { return pixels_; }
    std::span<Rgb> pixels() noexcept { return pixels_; }

    bool operator==(const RgbImage&) const = default;

private:
    std::size_t index(int y, int x) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int height_;
    int width_;
    std::vector<Rgb> pixels_;
};

/// Downscale divisors with their weights.
class ScaleSchedule {
public:
    ScaleSchedule(std::vector<int> scales, std::vector<double> weights);

    /// S = {1, 2, 4, 8}, W = {0.4, 0.3, 0.2, 0.1}.
    static ScaleSchedule standard();
    /// S = {1}, W = {1.0}.
    static ScaleSchedule single();

    const std::vector<int>& scales() const noexcept { return scales_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    std::size_t size() const noexcept { return scales_.size(); }

private:
    std::vector<int> scales_;
    std::vector<double> weights_;
};

/// Real-valued single-channel image, row-major.
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    double at(int y, int x) const {
        return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
    }
};

/// Integer-valued channel plus the divisor that maps it to [0, 1].
/// Box resizing sums integers exactly, so results do not depend on the
/// order in which pixels are visited.
struct IntPlane {
    int height = 0;
    int width = 0;
    std::int64_t denominator = 1;
    std::vector<std::int64_t> values;
};

RgbImage load_image(const std::filesystem::path& path);
RgbImage decode_image(std::span<const std::uint8_t> bytes);
void save_png(const RgbImage& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const RgbImage& img);

/// Area-average resize with 8-bit outputs rounded half away from zero.
RgbImage resize(const RgbImage& img, int target_h, int target_w);
/// Resize to max(1, H / s) x max(1, W / s).
RgbImage downscale_by(const RgbImage& img, int s);
/// Target size used by downscale_by.
std::pair<int, int> downscaled_dims(int height, int width, int s);

/// Area-average resize returning sum / (area * denominator) per pixel.
Plane resize_plane(const IntPlane& plane, int target_h, int target_w);

/// Channel c (0..2) with denominator 255.
IntPlane channel_plane(const RgbImage& img, int c);
/// Luma 0.299 R + 0.587 G + 0.114 B kept as the integer 299 R + 587 G + 114 B
/// over the denominator 255000.
IntPlane luma_plane(const RgbImage& img);
/// Luma rounded half away from zero to 8 bits.
std::vector<std::uint8_t> luma8(const RgbImage& img);

RgbImage flip_horizontal(const RgbImage& img);
RgbImage flip_vertical(const RgbImage& img);
RgbImage rotate90(const RgbImage& img);

}  // namespace vcx
