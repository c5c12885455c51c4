#include "vcx/baselines.hpp"
#include "vcx/error.hpp"
#include "vcx/msg.hpp"
#include "vcx/muc.hpp"

#include "oracle.hpp"
#include "synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

using vcx::Rgb;
using vcx::RgbImage;
using vcx::ScaleSchedule;

namespace {

const std::vector<int> kScales{1, 2, 4, 8};
const std::vector<double> kWeights{0.4, 0.3, 0.2, 0.1};

vcx::Plane make_plane(int h, int w, const std::function<double(int, int)>& f) {
    vcx::Plane p{h, w, std::vector<double>(static_cast<std::size_t>(h * w))};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) p.values[y * w + x] = f(y, x);
    return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::max(std::abs(a), std::abs(b))); }

}  // namespace

// --- Sobel -----------------------------------------------------------------

TEST(Sobel, ConstantGivesZero) {
    const auto p = make_plane(5, 7, [](int, int) { return 0.3; });
    for (auto axis : {vcx::SobelAxis::kHorizontal, vcx::SobelAxis::kVertical}) {
        for (double v : vcx::sobel(p, axis).values) EXPECT_EQ(v, 0.0);
    }
}

TEST(Sobel, SymmetricNeighbourhoodCancels) {
    const auto p = make_plane(3, 3, [](int, int x) { return x == 1 ? 1.0 : 0.0; });
    EXPECT_EQ(vcx::sobel(p, vcx::SobelAxis::kHorizontal).at(1, 1), 0.0);
}

TEST(Sobel, RampInteriorMatchesDirectConvolution) {
    const auto p = make_plane(5, 5, [](int, int x) { return x / 4.0; });
    const auto gx = vcx::sobel(p, vcx::SobelAxis::kHorizontal);
    const int k[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    for (int y = 1; y < 4; ++y)
        for (int x = 1; x < 4; ++x) {
            double ref = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) ref += k[dy + 1][dx + 1] * p.at(y + dy, x + dx);
            EXPECT_NEAR(gx.at(y, x), ref, 1e-15);
            EXPECT_NEAR(gx.at(y, x), gx.at(1, 1), 1e-15);
        }
    const auto gy = vcx::sobel(p, vcx::SobelAxis::kVertical);
    for (double v : gy.values) EXPECT_EQ(v, 0.0);
}

TEST(Sobel, OutputKeepsShape) {
    for (auto [h, w] : {std::pair{1, 1}, std::pair{1, 5}, std::pair{4, 1}, std::pair{2, 2}}) {
        const auto p = make_plane(h, w, [](int y, int x) { return 0.1 * (y + 2 * x); });
        const auto g = vcx::sobel_gradients(p);
        EXPECT_EQ(g.gx.height, h);
        EXPECT_EQ(g.gx.width, w);
        EXPECT_EQ(g.gy.values.size(), p.values.size());
    }
}

TEST(Sobel, MeanMagnitudeMatchesOracle) {
    vcx::Rng rng(2);
    for (int k = 0; k < 20; ++k) {
        const int h = 1 + static_cast<int>(rng.below(12));
        const int w = 1 + static_cast<int>(rng.below(12));
        const auto p = make_plane(h, w, [&](int, int) { return rng.uniform(); });
        EXPECT_LT(rel_err(vcx::mean_gradient_magnitude(p), oracle::mean_sobel_magnitude(p.values, h, w)), 1e-12);
    }
}

// --- MSG -------------------------------------------------------------------

TEST(Msg, ConstantImageIsZero) {
    EXPECT_EQ(vcx::msg_score(RgbImage(17, 9, Rgb{12, 200, 99})), 0.0);
    EXPECT_EQ(vcx::msg_score_grayscale(RgbImage(17, 9, Rgb{12, 200, 99})), 0.0);
    EXPECT_EQ(vcx::msg_score(RgbImage(1, 1, Rgb{1, 2, 3})), 0.0);
}

TEST(Msg, CheckerboardMatchesOracle) {
    const RgbImage board = synth::checkerboard(24, 3, Rgb{0, 0, 0}, Rgb{255, 255, 255});
    const double expected = oracle::msg(board, kScales, kWeights);
    EXPECT_GT(expected, 0.0);
    EXPECT_LT(rel_err(vcx::msg_score(board), expected), 1e-12);
}

TEST(Msg, MatchesWeightedSumOfSingleScales) {
    vcx::Rng rng(4);
    const RgbImage img = synth::random_image(rng, 20, 40);
    double sum = 0.0;
    for (std::size_t k = 0; k < kScales.size(); ++k) {
        sum += kWeights[k] * oracle::msg(img, {kScales[k]}, {1.0});
    }
    EXPECT_LT(rel_err(vcx::msg_score(img), sum), 1e-12);
}

TEST(Msg, SingleScaleAblation) {
    vcx::Rng rng(6);
    const RgbImage img = synth::random_image(rng, 5, 30);
    EXPECT_LT(rel_err(vcx::msg_score(img, ScaleSchedule::single()), oracle::msg(img, {1}, {1.0})), 1e-12);
}

TEST(Msg, GrayImageAgreesWithColour) {
    vcx::Rng rng(8);
    RgbImage img(23, 31);
    for (auto& px : img.pixels()) {
        const auto v = static_cast<std::uint8_t>(rng.below(256));
        px = {v, v, v};
    }
    EXPECT_NEAR(vcx::msg_score_grayscale(img), vcx::msg_score(img), 1e-9);
}

TEST(Msg, EquiluminantCheckerboard) {
    // 299*243 == 587*123 + 114*4, so both colours have identical luma.
    const RgbImage board = synth::checkerboard(16, 2, Rgb{243, 0, 0}, Rgb{0, 123, 4});
    EXPECT_EQ(vcx::msg_score_grayscale(board, ScaleSchedule::single()), 0.0);
    EXPECT_GT(vcx::msg_score(board, ScaleSchedule::single()), 0.0);
}

TEST(Msg, GrayscaleMatchesOracle) {
    vcx::Rng rng(10);
    for (int k = 0; k < 5; ++k) {
        const RgbImage img = synth::random_image(rng, 1, 40);
        EXPECT_LT(rel_err(vcx::msg_score_grayscale(img), oracle::msg_gray(img, kScales, kWeights)), 1e-9);
    }
}

TEST(Msg, ExactGeometricInvariance) {
    vcx::Rng rng(12);
    for (int k = 0; k < 20; ++k) {
        const RgbImage img = k % 2 ? synth::random_image(rng, 1, 33) : synth::blocky_image(rng, 21, 34, 6);
        const double m = vcx::msg_score(img);
        EXPECT_EQ(vcx::msg_score(vcx::flip_horizontal(img)), m);
        EXPECT_EQ(vcx::msg_score(vcx::flip_vertical(img)), m);
        EXPECT_EQ(vcx::msg_score(vcx::flip_vertical(vcx::flip_horizontal(img))), m);
        EXPECT_GE(m, 0.0);
    }
    for (int k = 0; k < 10; ++k) {
        const RgbImage sq = synth::noise_image(rng, 19, 19);
        EXPECT_EQ(vcx::msg_score(vcx::rotate90(sq)), vcx::msg_score(sq));
    }
}

// --- MUC -------------------------------------------------------------------

TEST(Quantize, ShiftArithmeticForAllValues) {
    for (int b = 1; b <= 8; ++b) {
        RgbImage img(16, 16);
        for (int v = 0; v < 256; ++v) img.pixels()[v] = {static_cast<std::uint8_t>(v), 0, 0};
        const RgbImage q = vcx::quantize(img, vcx::BitPrecision(b));
        const int step = 1 << (8 - b);
        for (int v = 0; v < 256; ++v) EXPECT_EQ(q.pixels()[v][0], v - v % step) << "v=" << v << " b=" << b;
    }
    const RgbImage one(1, 1, Rgb{255, 130, 131});
    EXPECT_EQ(vcx::quantize(one, vcx::BitPrecision(1)).at(0, 0)[0], 128);
    EXPECT_EQ(vcx::quantize(one, vcx::BitPrecision(7)).at(0, 0)[1], 130);
    EXPECT_EQ(vcx::quantize(one, vcx::BitPrecision(7)).at(0, 0)[2], 130);
    EXPECT_EQ(vcx::quantize(one, vcx::BitPrecision(8)), one);
}

TEST(Quantize, BitPrecisionRange) {
    EXPECT_THROW(vcx::BitPrecision(0), vcx::Error);
    EXPECT_THROW(vcx::BitPrecision(9), vcx::Error);
    EXPECT_EQ(vcx::BitPrecision(vcx::BitPrecision::kDefault).bits(), 7);
}

TEST(UniqueColors, Counts) {
    EXPECT_EQ(vcx::unique_color_count(RgbImage(5, 5, Rgb{1, 2, 3})), 1u);
    const RgbImage four(2, 2, {Rgb{1, 0, 0}, Rgb{0, 1, 0}, Rgb{0, 0, 1}, Rgb{1, 1, 1}});
    EXPECT_EQ(vcx::unique_color_count(four), 4u);
    vcx::Rng rng(14);
    for (int k = 0; k < 10; ++k) {
        const RgbImage img = synth::noise_image(rng, 16, 16);
        EXPECT_EQ(vcx::unique_color_count(img), oracle::unique_triples(img));
    }
    // Channel order matters: (1,2,3) and (3,2,1) are different colours.
    EXPECT_EQ(vcx::unique_color_count(RgbImage(1, 2, {Rgb{1, 2, 3}, Rgb{3, 2, 1}})), 2u);
}

TEST(Muc, ConstantImageIsOne) {
    for (int b = 1; b <= 8; ++b) {
        EXPECT_DOUBLE_EQ(vcx::muc_score(RgbImage(10, 12, Rgb{9, 99, 199}), vcx::BitPrecision(b)), 1.0);
        EXPECT_EQ(vcx::colorfulness(RgbImage(3, 3, Rgb{9, 99, 199}), vcx::BitPrecision(b)), 1.0);
    }
}

TEST(Muc, FourColourTwoByTwo) {
    const RgbImage img(2, 2, {Rgb{255, 0, 0}, Rgb{0, 255, 0}, Rgb{0, 0, 255}, Rgb{255, 255, 255}});
    // Scale 1 keeps 4 colours; scales 2, 4 and 8 clamp to one averaged pixel.
    const double expected = 0.4 * 4 + 0.3 * 1 + 0.2 * 1 + 0.1 * 1;
    EXPECT_DOUBLE_EQ(vcx::muc_score(img, vcx::BitPrecision(8)), expected);
    EXPECT_DOUBLE_EQ(oracle::muc(img, 8, kScales, kWeights), expected);
}

TEST(Muc, MatchesPerScaleOracle) {
    vcx::Rng rng(16);
    for (int k = 0; k < 10; ++k) {
        const RgbImage img = k < 5 ? synth::noise_image(rng, 32, 32) : synth::random_image(rng, 1, 40);
        const int b = 1 + static_cast<int>(rng.below(8));
        EXPECT_LT(rel_err(vcx::muc_score(img, vcx::BitPrecision(b)), oracle::muc(img, b, kScales, kWeights)), 1e-12);
    }
}

TEST(Muc, ColorfulnessIsSingleScale) {
    vcx::Rng rng(18);
    for (int k = 0; k < 10; ++k) {
        const RgbImage img = synth::noise_image(rng, 16, 16);
        const double b4 = vcx::colorfulness(img, vcx::BitPrecision(4));
        const double b8 = vcx::colorfulness(img, vcx::BitPrecision(8));
        EXPECT_LE(b4, b8);
        EXPECT_EQ(b8, static_cast<double>(oracle::unique_triples(img)));
        EXPECT_EQ(b4, static_cast<double>(vcx::unique_color_count(vcx::quantize(img, vcx::BitPrecision(4)))));
    }
}

TEST(Muc, PixelPermutationInvarianceAtScaleOne) {
    vcx::Rng rng(20);
    RgbImage img = synth::noise_image(rng, 12, 12);
    const double before = vcx::muc_score(img, vcx::BitPrecision(6), ScaleSchedule::single());
    rng.shuffle(img.pixels());
    EXPECT_EQ(vcx::muc_score(img, vcx::BitPrecision(6), ScaleSchedule::single()), before);
}

TEST(Muc, BoundsAndMonotoneInBits) {
    vcx::Rng rng(22);
    for (int k = 0; k < 10; ++k) {
        const RgbImage img = synth::random_image(rng, 1, 30);
        double prev = 0.0;
        double cap = 0.0;
        for (std::size_t s = 0; s < kScales.size(); ++s) {
            const auto [h, w] = vcx::downscaled_dims(img.height(), img.width(), kScales[s]);
            cap += kWeights[s] * h * w;
        }
        for (int b = 1; b <= 8; ++b) {
            const double m = vcx::muc_score(img, vcx::BitPrecision(b));
            EXPECT_GE(m, prev);
            EXPECT_GE(m, 1.0 - 1e-12);
            EXPECT_LE(m, cap + 1e-9);
            prev = m;
        }
    }
}

// --- Baselines ---------------------------------------------------------------

TEST(Canny, TrivialImages) {
    EXPECT_EQ(vcx::canny_edge_density(RgbImage(20, 20, Rgb{7, 7, 7})), 0.0);
    EXPECT_EQ(vcx::canny_edge_density(RgbImage(1, 1, Rgb{255, 0, 0})), 0.0);
}

TEST(Canny, RejectsBadThresholds) {
    const RgbImage img(4, 4);
    EXPECT_THROW(vcx::canny_edge_density(img, {1.4, 0.2, 0.1}), vcx::Error);
    EXPECT_THROW(vcx::canny_edge_density(img, {1.4, 0.0, 0.1}), vcx::Error);
    EXPECT_THROW(vcx::canny_edge_density(img, {1.4, 0.1, 0.1}), vcx::Error);
}

TEST(Canny, VerticalStepEdge) {
    // The image is constant down each column, so the pipeline reduces to a
    // one-dimensional profile: blur across x, central difference scaled by
    // the Sobel column weights (1 + 2 + 1), suppression along x.
    const int n = 32;
    RgbImage img(n, n, Rgb{0, 0, 0});
    for (int y = 0; y < n; ++y)
        for (int x = n / 2; x < n; ++x) img.at(y, x) = {255, 255, 255};

    const double sigma = 1.4;
    const int radius = static_cast<int>(std::ceil(3 * sigma));
    std::vector<double> kernel;
    double ksum = 0.0;
    for (int d = -radius; d <= radius; ++d) {
        kernel.push_back(std::exp(-d * d / (2 * sigma * sigma)));
        ksum += kernel.back();
    }
    auto mirror = [n](int i) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };
    std::vector<double> blurred(n, 0.0);
    for (int x = 0; x < n; ++x)
        for (int d = -radius; d <= radius; ++d) blurred[x] += kernel[d + radius] / ksum * (mirror(x + d) >= n / 2 ? 1.0 : 0.0);
    std::vector<double> mag(n);
    for (int x = 0; x < n; ++x) mag[x] = 4.0 * std::abs(blurred[mirror(x + 1)] - blurred[mirror(x - 1)]) / (4 * std::sqrt(2.0));
    // Ridge columns: local maxima above the high threshold, a two-column
    // plateau counted once.
    int ridge = 0;
    for (int x = 1; x + 1 < n; ++x) {
        const bool peak = mag[x] >= mag[x - 1] - 1e-12 && mag[x] > mag[x + 1] + 1e-12;
        if (peak && mag[x] > 0.2) ++ridge;
    }
    ASSERT_EQ(ridge, 1);
    EXPECT_DOUBLE_EQ(vcx::canny_edge_density(img), ridge * static_cast<double>(n) / (n * n));
}

TEST(Canny, NonIncreasingInHighThreshold) {
    vcx::Rng rng(24);
    for (int k = 0; k < 5; ++k) {
        const RgbImage img = synth::blocky_image(rng, 40, 40, 12);
        double prev = 1.0;
        for (double high : {0.11, 0.15, 0.2, 0.3, 0.5, 0.9}) {
            const double d = vcx::canny_edge_density(img, {1.4, 0.1, high});
            EXPECT_LE(d, prev);
            EXPECT_GE(d, 0.0);
            prev = d;
        }
    }
}

TEST(PatchSymmetry, ConstantIsOne) {
    EXPECT_EQ(vcx::patch_symmetry(RgbImage(32, 32, Rgb{3, 4, 5})), 1.0);
    EXPECT_EQ(vcx::patch_symmetry(RgbImage(5, 3, Rgb{3, 4, 5})), 1.0);
}

TEST(PatchSymmetry, HalfBlackHalfWhiteBlock) {
    RgbImage img(4, 4, Rgb{0, 0, 0});
    for (int y = 0; y < 4; ++y)
        for (int x = 2; x < 4; ++x) img.at(y, x) = {255, 255, 255};
    // Left-right mirror differs everywhere by 255 (term 0); top-bottom is exact (term 1).
    EXPECT_DOUBLE_EQ(vcx::patch_symmetry(img, 4), 0.5);
}

TEST(PatchSymmetry, MirrorInvariantOnWholeTiles) {
    vcx::Rng rng(26);
    for (int k = 0; k < 10; ++k) {
        const RgbImage img = synth::noise_image(rng, 32, 48);
        const double s = vcx::patch_symmetry(img, 16);
        EXPECT_EQ(vcx::patch_symmetry(vcx::flip_horizontal(img), 16), s);
        EXPECT_EQ(vcx::patch_symmetry(vcx::flip_vertical(img), 16), s);
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
    }
}

TEST(PatchSymmetry, OversizedPatchUsesWholeImage) {
    vcx::Rng rng(28);
    const RgbImage img = synth::noise_image(rng, 7, 5);
    EXPECT_EQ(vcx::patch_symmetry(img, 16), vcx::patch_symmetry(img, 64));
    EXPECT_EQ(vcx::patch_symmetry(vcx::flip_horizontal(img), 16), vcx::patch_symmetry(img, 16));
    EXPECT_THROW(vcx::patch_symmetry(img, 1), vcx::Error);
}
