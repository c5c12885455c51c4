#pragma once

#include "vcx/image.hpp"

namespace vcx {

enum class SobelAxis { kHorizontal, kVertical };

/// 3x3 Sobel response with reflect-101 borders; output has the input's size.
Plane sobel(const Plane& channel, SobelAxis axis);

struct GradientPair {
    Plane gx;
    Plane gy;
};

GradientPair sobel_gradients(const Plane& channel);

/// Mean of sqrt(gx^2 + gy^2) over the plane.
///
/// Magnitudes are summed in ascending order, which makes the mean depend
/// only on the multiset of magnitudes. Flips and quarter turns permute the
/// magnitudes, so the score is exactly invariant under them.
double mean_gradient_magnitude(const Plane& channel);

/// Multi-Scale Sobel Gradient over the three RGB channels.
double msg_score(const RgbImage& img, const ScaleSchedule& schedule = ScaleSchedule::standard());

/// MSG on the luma channel 0.299 R + 0.587 G + 0.114 B.
double msg_score_grayscale(const RgbImage& img, const ScaleSchedule& schedule = ScaleSchedule::standard());

}  // namespace vcx
