#include "vcx/muc.hpp"

#include "vcx/error.hpp"

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace vcx {

BitPrecision::BitPrecision(int bits) : bits_(bits) {
    if (bits < 1 || bits > 8) {
        fail(ErrorCode::kInvalidArgument, "bit precision must be in 1..8, got " + std::to_string(bits));
    }
}

RgbImage quantize(const RgbImage& img, BitPrecision b) {
    RgbImage out = img;
    const int shift = b.shift();
    for (Rgb& p : out.pixels()) {
        for (auto& v : p) v = static_cast<std::uint8_t>((v >> shift) << shift);
    }
    return out;
}

std::size_t unique_color_count(const RgbImage& img) {
    std::vector<std::uint32_t> idx;
    idx.reserve(img.size());
    for (const Rgb& p : img.pixels()) {
        idx.push_back((static_cast<std::uint32_t>(p[0]) << 16) | (static_cast<std::uint32_t>(p[1]) << 8) | p[2]);
    }
    std::sort(idx.begin(), idx.end());
    return static_cast<std::size_t>(std::unique(idx.begin(), idx.end()) - idx.begin());
}

double muc_score(const RgbImage& img, BitPrecision b, const ScaleSchedule& schedule) {
    double muc = 0.0;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        const RgbImage scaled = downscale_by(img, schedule.scales()[k]);
        const auto n_unique = unique_color_count(quantize(scaled, b));
        muc += schedule.weights()[k] * static_cast<double>(n_unique);
    }
    return muc;
}

double colorfulness(const RgbImage& img, BitPrecision b) { return muc_score(img, b, ScaleSchedule::single()); }

}  // namespace vcx
