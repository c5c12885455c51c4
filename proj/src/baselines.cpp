#include "vcx/baselines.hpp"

#include "vcx/error.hpp"
#include "vcx/msg.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

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

Plane gaussian_blur(const Plane& src, double sigma) {
    if (sigma <= 0.0) return src;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        total += kernel[i + radius];
    }
    for (double& k : kernel) k /= total;

    const int h = src.height;
    const int w = src.width;
    Plane tmp{h, w, std::vector<double>(src.values.size())};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * src.at(y, reflect101(x + i, w));
            tmp.values[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    Plane out{h, w, std::vector<double>(src.values.size())};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp.at(reflect101(y + i, h), x);
            out.values[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    return out;
}

}  // namespace

std::vector<std::uint8_t> canny_edges(const RgbImage& img, const CannyParams& params) {
    if (!(params.low > 0.0) || !(params.low < params.high)) {
        fail(ErrorCode::kInvalidArgument, "canny thresholds must satisfy 0 < low < high");
    }
    if (!(params.sigma >= 0.0)) fail(ErrorCode::kInvalidArgument, "canny sigma must be nonnegative");

    const IntPlane luma = luma_plane(img);
    Plane gray{luma.height, luma.width, std::vector<double>(luma.values.size())};
    for (std::size_t i = 0; i < luma.values.size(); ++i) {
        gray.values[i] = static_cast<double>(luma.values[i]) / static_cast<double>(luma.denominator);
    }
    const Plane blurred = gaussian_blur(gray, params.sigma);
    const auto [gx, gy] = sobel_gradients(blurred);

    const int h = img.height();
    const int w = img.width();
    const std::size_t n = gx.values.size();
    const double norm = 4.0 * std::numbers::sqrt2;
    std::vector<double> mag(n);
    for (std::size_t i = 0; i < n; ++i) mag[i] = std::hypot(gx.values[i], gy.values[i]) / norm;

    auto mag_at = [&](int y, int x) {
        if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
        return mag[static_cast<std::size_t>(y) * w + x];
    };

    // Non-maximum suppression along the gradient direction quantized to
    // 0/45/90/135 degrees. A plateau of equal maxima keeps its last pixel.
    std::vector<double> thin(n, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double m = mag[i];
            if (m <= 0.0) continue;
            double angle = std::atan2(gy.values[i], gx.values[i]) * 180.0 / std::numbers::pi;
            if (angle < 0.0) angle += 180.0;
            int dx;
            int dy;
            if (angle < 22.5 || angle >= 157.5) {
                dx = 1, dy = 0;
            } else if (angle < 67.5) {
                dx = 1, dy = 1;
            } else if (angle < 112.5) {
                dx = 0, dy = 1;
            } else {
                dx = -1, dy = 1;
            }
            if (m >= mag_at(y - dy, x - dx) && m > mag_at(y + dy, x + dx)) thin[i] = m;
        }
    }

    // Double threshold with 8-connected hysteresis from strong pixels.
    std::vector<std::uint8_t> edges(n, 0);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < n; ++i) {
        if (thin[i] >= params.high) {
            edges[i] = 1;
            stack.push_back(i);
        }
    }
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        const int y = static_cast<int>(i / w);
        const int x = static_cast<int>(i % w);
        for (int oy = -1; oy <= 1; ++oy) {
            for (int ox = -1; ox <= 1; ++ox) {
                const int ny = y + oy;
                const int nx = x + ox;
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
                if (!edges[j] && thin[j] >= params.low) {
                    edges[j] = 1;
                    stack.push_back(j);
                }
            }
        }
    }
    return edges;
}

double canny_edge_density(const RgbImage& img, const CannyParams& params) {
    const auto edges = canny_edges(img, params);
    std::size_t count = 0;
    for (auto e : edges) count += e;
    return static_cast<double>(count) / static_cast<double>(edges.size());
}

double patch_symmetry(const RgbImage& img, int patch) {
    if (patch < 2) fail(ErrorCode::kInvalidArgument, "patch side must be at least 2");
    const auto gray = luma8(img);
    const int h = img.height();
    const int w = img.width();
    int bh = patch;
    int bw = patch;
    if (patch > h || patch > w) {
        bh = h;
        bw = w;
    }
    const int rows = h / bh;
    const int cols = w / bw;
    auto g = [&](int y, int x) { return static_cast<std::int64_t>(gray[static_cast<std::size_t>(y) * w + x]); };

    // Integer totals keep the result independent of block visiting order.
    std::int64_t diff_lr = 0;
    std::int64_t diff_tb = 0;
    for (int by = 0; by < rows; ++by) {
        for (int bx = 0; bx < cols; ++bx) {
            const int y0 = by * bh;
            const int x0 = bx * bw;
            for (int y = 0; y < bh; ++y) {
                for (int x = 0; x < bw; ++x) {
                    const std::int64_t v = g(y0 + y, x0 + x);
                    diff_lr += std::abs(v - g(y0 + y, x0 + bw - 1 - x));
                    diff_tb += std::abs(v - g(y0 + bh - 1 - y, x0 + x));
                }
            }
        }
    }
    const double denom = 2.0 * 255.0 * static_cast<double>(bh) * bw * rows * cols;
    return 1.0 - static_cast<double>(diff_lr + diff_tb) / denom;
}

}  // namespace vcx
