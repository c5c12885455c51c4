#pragma once

#include "vcx/image.hpp"

#include <cstddef>

namespace vcx {

/// Bits kept per channel when quantizing, 1..8.
class BitPrecision {
public:
    explicit BitPrecision(int bits);

    int bits() const noexcept { return bits_; }
    int shift() const noexcept { return 8 - bits_; }

    static constexpr int kDefault = 7;

private:
    int bits_;
};

/// Keeps the top b bits of every channel: (v >> (8 - b)) << (8 - b).
RgbImage quantize(const RgbImage& img, BitPrecision b);

/// Number of distinct R * 2^16 + G * 2^8 + B indices.
std::size_t unique_color_count(const RgbImage& img);

/// Multi-Scale Unique Color: per scale, downscale, quantize, count.
double muc_score(const RgbImage& img, BitPrecision b, const ScaleSchedule& schedule = ScaleSchedule::standard());

/// Unique quantized colours at full resolution.
double colorfulness(const RgbImage& img, BitPrecision b);

}  // namespace vcx
