#include "vcx/image.hpp"

#include "vcx/error.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>

namespace vcx {

RgbImage::RgbImage(int height, int width) : RgbImage(height, width, Rgb{0, 0, 0}) {}

RgbImage::RgbImage(int height, int width, Rgb fill) : height_(height), width_(width) {
    if (height < 1 || width < 1) {
        fail(ErrorCode::kInvalidArgument, "image dimensions must be at least 1x1");
    }
    pixels_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

RgbImage::RgbImage(int height, int width, std::vector<Rgb> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
    if (height < 1 || width < 1) {
        fail(ErrorCode::kInvalidArgument, "image dimensions must be at least 1x1");
    }
    if (pixels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
        fail(ErrorCode::kInvalidArgument, "pixel count does not match height x width");
    }
}

ScaleSchedule::ScaleSchedule(std::vector<int> scales, std::vector<double> weights)
    : scales_(std::move(scales)), weights_(std::move(weights)) {
    if (scales_.empty() || scales_.size() != weights_.size()) {
        fail(ErrorCode::kInvalidArgument, "scale schedule needs equally many scales and weights");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < scales_.size(); ++i) {
        if (scales_[i] < 1) fail(ErrorCode::kInvalidArgument, "scales must be positive integers");
        if (i > 0 && scales_[i] <= scales_[i - 1]) {
            fail(ErrorCode::kInvalidArgument, "scales must be strictly increasing");
        }
        if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
            fail(ErrorCode::kInvalidArgument, "weights must be finite and nonnegative");
        }
        sum += weights_[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) fail(ErrorCode::kInvalidArgument, "weights must sum to 1");
}

ScaleSchedule ScaleSchedule::standard() { return ScaleSchedule({1, 2, 4, 8}, {0.4, 0.3, 0.2, 0.1}); }

ScaleSchedule ScaleSchedule::single() { return ScaleSchedule({1}, {1.0}); }

// ---------------------------------------------------------------------------
// Decoding

namespace {

bool is_png(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    return bytes.size() >= 8 && std::equal(std::begin(kSig), std::end(kSig), bytes.begin());
}

bool is_jpeg(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        std::string msg = image.message;
        png_image_free(&image);
        fail(ErrorCode::kDecode, "undecodable PNG: " + msg);
    }
    // Reading as RGBA keeps gray replication and lets us drop alpha
    // without compositing it into the colour channels.
    image.format = PNG_FORMAT_RGBA;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        fail(ErrorCode::kDecode, "undecodable PNG: " + msg);
    }
    const int h = static_cast<int>(image.height);
    const int w = static_cast<int>(image.width);
    std::vector<Rgb> px(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = {buffer[4 * i], buffer[4 * i + 1], buffer[4 * i + 2]};
    }
    return RgbImage(h, w, std::move(px));
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

RgbImage decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    // Declared before setjmp so nothing with a destructor is skipped by longjmp.
    std::vector<std::uint8_t> row;
    std::vector<Rgb> px;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        fail(ErrorCode::kDecode, std::string("undecodable JPEG: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    row.resize(static_cast<std::size_t>(w) * 3);
    px.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    while (cinfo.output_scanline < cinfo.output_height) {
        const auto y = cinfo.output_scanline;
        JSAMPROW rows[1] = {row.data()};
        jpeg_read_scanlines(&cinfo, rows, 1);
        for (int x = 0; x < w; ++x) {
            px[static_cast<std::size_t>(y) * w + x] = {row[3 * x], row[3 * x + 1], row[3 * x + 2]};
        }
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return RgbImage(h, w, std::move(px));
}

}  // namespace

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
    if (is_png(bytes)) return decode_png(bytes);
    if (is_jpeg(bytes)) return decode_jpeg(bytes);
    fail(ErrorCode::kDecode, "unrecognised image format (expected PNG or JPEG)");
}

RgbImage load_image(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        fail(ErrorCode::kNotFound, "image not found: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::kIo, "cannot open image: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_image(bytes);
    } catch (const Error& e) {
        fail(e.code(), path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_RGB;
    const auto* data = reinterpret_cast<const std::uint8_t*>(img.pixels().data());
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, data, 0, nullptr)) {
        fail(ErrorCode::kInternal, std::string("PNG encode failed: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0, nullptr)) {
        fail(ErrorCode::kInternal, std::string("PNG encode failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

void save_png(const RgbImage& img, const std::filesystem::path& path) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::kIo, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Resizing
//
// Along one axis, source pixel j covers [j*t, (j+1)*t) and output pixel i
// covers [i*n, (i+1)*n) in units of 1/(n*t) of the full extent. Overlaps are
// integers and the overlaps of one output pixel sum to n.

namespace {

struct Tap {
    int source;
    std::int64_t weight;
};

std::vector<std::vector<Tap>> axis_taps(int n, int t) {
    std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(t));
    const std::int64_t N = n;
    const std::int64_t T = t;
    for (std::int64_t i = 0; i < T; ++i) {
        const std::int64_t lo = i * N;
        const std::int64_t hi = (i + 1) * N;
        for (std::int64_t j = lo / T; j < n && j * T < hi; ++j) {
            const std::int64_t overlap = std::min((j + 1) * T, hi) - std::max(j * T, lo);
            if (overlap > 0) taps[static_cast<std::size_t>(i)].push_back({static_cast<int>(j), overlap});
        }
    }
    return taps;
}

void check_target(int target_h, int target_w) {
    if (target_h < 1 || target_w < 1) {
        fail(ErrorCode::kInvalidArgument, "resize target must be at least 1x1");
    }
}

}  // namespace

RgbImage resize(const RgbImage& img, int target_h, int target_w) {
    check_target(target_h, target_w);
    if (target_h == img.height() && target_w == img.width()) return img;
    const auto ty = axis_taps(img.height(), target_h);
    const auto tx = axis_taps(img.width(), target_w);
    const std::int64_t area = static_cast<std::int64_t>(img.height()) * img.width();
    RgbImage out(target_h, target_w);
    for (int y = 0; y < target_h; ++y) {
        for (int x = 0; x < target_w; ++x) {
            std::int64_t sum[3] = {0, 0, 0};
            for (const Tap& row : ty[y]) {
                for (const Tap& col : tx[x]) {
                    const std::int64_t w = row.weight * col.weight;
                    const Rgb& p = img.at(row.source, col.source);
                    for (int c = 0; c < 3; ++c) sum[c] += w * p[c];
                }
            }
            Rgb& dst = out.at(y, x);
            for (int c = 0; c < 3; ++c) {
                // Half away from zero on a nonnegative mean.
                dst[c] = static_cast<std::uint8_t>((2 * sum[c] + area) / (2 * area));
            }
        }
    }
    return out;
}

std::pair<int, int> downscaled_dims(int height, int width, int s) {
    if (s < 1) fail(ErrorCode::kInvalidArgument, "downscale divisor must be >= 1");
    return {std::max(1, height / s), std::max(1, width / s)};
}

RgbImage downscale_by(const RgbImage& img, int s) {
    const auto [h, w] = downscaled_dims(img.height(), img.width(), s);
    return resize(img, h, w);
}

Plane resize_plane(const IntPlane& plane, int target_h, int target_w) {
    check_target(target_h, target_w);
    const auto ty = axis_taps(plane.height, target_h);
    const auto tx = axis_taps(plane.width, target_w);
    const double divisor = static_cast<double>(static_cast<std::int64_t>(plane.height) * plane.width * plane.denominator);
    Plane out{target_h, target_w, std::vector<double>(static_cast<std::size_t>(target_h) * target_w)};
    for (int y = 0; y < target_h; ++y) {
        for (int x = 0; x < target_w; ++x) {
            std::int64_t sum = 0;
            for (const Tap& row : ty[y]) {
                const std::int64_t* src = plane.values.data() + static_cast<std::size_t>(row.source) * plane.width;
                std::int64_t acc = 0;
                for (const Tap& col : tx[x]) acc += col.weight * src[col.source];
                sum += row.weight * acc;
            }
            out.values[static_cast<std::size_t>(y) * target_w + x] = static_cast<double>(sum) / divisor;
        }
    }
    return out;
}

IntPlane channel_plane(const RgbImage& img, int c) {
    IntPlane plane{img.height(), img.width(), 255, std::vector<std::int64_t>(img.size())};
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) plane.values[i] = px[i][c];
    return plane;
}

IntPlane luma_plane(const RgbImage& img) {
    IntPlane plane{img.height(), img.width(), 255000, std::vector<std::int64_t>(img.size())};
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        plane.values[i] = 299 * px[i][0] + 587 * px[i][1] + 114 * px[i][2];
    }
    return plane;
}

std::vector<std::uint8_t> luma8(const RgbImage& img) {
    std::vector<std::uint8_t> out(img.size());
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        const int num = 299 * px[i][0] + 587 * px[i][1] + 114 * px[i][2];
        out[i] = static_cast<std::uint8_t>((num + 500) / 1000);
    }
    return out;
}

RgbImage flip_horizontal(const RgbImage& img) {
    RgbImage out(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) out.at(y, img.width() - 1 - x) = img.at(y, x);
    return out;
}

RgbImage flip_vertical(const RgbImage& img) {
    RgbImage out(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) out.at(img.height() - 1 - y, x) = img.at(y, x);
    return out;
}

// Clockwise quarter turn.
RgbImage rotate90(const RgbImage& img) {
    RgbImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) out.at(x, img.height() - 1 - y) = img.at(y, x);
    return out;
}

}  // namespace vcx
