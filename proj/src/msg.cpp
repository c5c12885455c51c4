#include "vcx/msg.hpp"

#include <algorithm>
#include <cmath>

namespace vcx {

namespace {

int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

}  // namespace

// Both kernels are evaluated as (outer pair + 2 * middle) on each side so
// that mirroring the neighbourhood yields the exact negated response.
Plane sobel(const Plane& channel, SobelAxis axis) {
    const int h = channel.height;
    const int w = channel.width;
    Plane out{h, w, std::vector<double>(channel.values.size())};
    for (int y = 0; y < h; ++y) {
        const int ym = reflect101(y - 1, h);
        const int yp = reflect101(y + 1, h);
        for (int x = 0; x < w; ++x) {
            const int xm = reflect101(x - 1, w);
            const int xp = reflect101(x + 1, w);
            double v;
            if (axis == SobelAxis::kHorizontal) {
                const double right = (channel.at(ym, xp) + channel.at(yp, xp)) + 2.0 * channel.at(y, xp);
                const double left = (channel.at(ym, xm) + channel.at(yp, xm)) + 2.0 * channel.at(y, xm);
                v = right - left;
            } else {
                const double below = (channel.at(yp, xm) + channel.at(yp, xp)) + 2.0 * channel.at(yp, x);
                const double above = (channel.at(ym, xm) + channel.at(ym, xp)) + 2.0 * channel.at(ym, x);
                v = below - above;
            }
            out.values[static_cast<std::size_t>(y) * w + x] = v;
        }
    }
    return out;
}

GradientPair sobel_gradients(const Plane& channel) {
    return {sobel(channel, SobelAxis::kHorizontal), sobel(channel, SobelAxis::kVertical)};
}

double mean_gradient_magnitude(const Plane& channel) {
    const auto [gx, gy] = sobel_gradients(channel);
    std::vector<double> mag(gx.values.size());
    for (std::size_t i = 0; i < mag.size(); ++i) {
        mag[i] = std::sqrt(gx.values[i] * gx.values[i] + gy.values[i] * gy.values[i]);
    }
    std::sort(mag.begin(), mag.end());
    double sum = 0.0;
    for (double m : mag) sum += m;
    return sum / static_cast<double>(mag.size());
}

double msg_score(const RgbImage& img, const ScaleSchedule& schedule) {
    const IntPlane channels[3] = {channel_plane(img, 0), channel_plane(img, 1), channel_plane(img, 2)};
    double msg = 0.0;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        const auto [h, w] = downscaled_dims(img.height(), img.width(), schedule.scales()[k]);
        double grad[3];
        for (int c = 0; c < 3; ++c) grad[c] = mean_gradient_magnitude(resize_plane(channels[c], h, w));
        const double scale_grad = (grad[0] + grad[1] + grad[2]) / 3.0;
        msg += schedule.weights()[k] * scale_grad;
    }
    return msg;
}

double msg_score_grayscale(const RgbImage& img, const ScaleSchedule& schedule) {
    const IntPlane luma = luma_plane(img);
    double msg = 0.0;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        const auto [h, w] = downscaled_dims(img.height(), img.width(), schedule.scales()[k]);
        msg += schedule.weights()[k] * mean_gradient_magnitude(resize_plane(luma, h, w));
    }
    return msg;
}

}  // namespace vcx
