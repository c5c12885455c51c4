#pragma once

#include "vcx/image.hpp"

namespace vcx {

struct CannyParams {
    double sigma = 1.4;
    /// Thresholds apply to gradient magnitudes divided by 4*sqrt(2), the
    /// largest Sobel magnitude a [0,1] image can produce.
    double low = 0.1;
    double high = 0.2;
};

/// Binary edge map from the Canny pipeline on luma, row-major.
std::vector<std::uint8_t> canny_edges(const RgbImage& img, const CannyParams& params = {});

/// Fraction of pixels marked as Canny edges, in [0, 1].
double canny_edge_density(const RgbImage& img, const CannyParams& params = {});

/// Mean mirror symmetry of non-overlapping patch x patch luma blocks.
///
/// Each block scores 1 - mean|B - mirror(B)| / 255, averaged over the
/// left-right and top-bottom mirrors. Blocks are anchored at the top-left
/// corner and the remainder is discarded. When the patch exceeds the image
/// in either dimension the whole image is a single block.
double patch_symmetry(const RgbImage& img, int patch = 16);

}  // namespace vcx
