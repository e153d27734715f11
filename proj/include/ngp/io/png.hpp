#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ngp/core/error.hpp"
#include "ngp/tensor/tensor.hpp"

namespace ngp {

/// Writes a [C,H,W] or [1,C,H,W] image (C = 1 or 3, values clamped to [0,1])
/// as an 8-bit PNG.
inline void write_png(const std::filesystem::path& path, const Tensor<float>& img) {
    Shape s = img.shape();
    if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
    if (s.size() != 3 || (s[0] != 1 && s[0] != 3)) throw ShapeError("write_png: expected [C,H,W] with C in {1,3}, got " + to_string(img.shape()));
    const auto C = s[0], H = s[1], W = s[2];
    std::vector<std::uint8_t> px(static_cast<std::size_t>(C * H * W));
    const auto d = img.data();
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x)
            for (std::int64_t c = 0; c < C; ++c) {
                const double v = std::clamp(static_cast<double>(d[static_cast<std::size_t>((c * H + y) * W + x)]), 0.0, 1.0);
                px[static_cast<std::size_t>((y * W + x) * C + c)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(W);
    image.height = static_cast<png_uint_32>(H);
    image.format = C == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, px.data(), 0, nullptr)) {
        throw IoError("cannot write PNG " + path.string() + ": " + image.message);
    }
}

/// Reads a PNG as a [1,3,H,W] float image in [0,1].
inline Tensor<float> read_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw IoError("cannot read PNG " + path.string() + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
        png_image_free(&image);
        throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
    }
    const std::int64_t H = image.height, W = image.width;
    std::vector<float> v(static_cast<std::size_t>(3 * H * W));
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x)
            for (std::int64_t c = 0; c < 3; ++c)
                v[static_cast<std::size_t>((c * H + y) * W + x)] = px[static_cast<std::size_t>((y * W + x) * 3 + c)] / 255.f;
    return Tensor<float>::from_data({1, 3, H, W}, std::move(v));
}

/// Every `*.png` in `dir`, sorted by name, stacked into [N,3,H,W].
inline Tensor<float> read_png_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    if (files.empty()) throw EmptyDatasetError("no PNG images in " + dir.string());
    std::sort(files.begin(), files.end());
    std::vector<Tensor<float>> imgs;
    for (const auto& f : files) {
        imgs.push_back(read_png(f));
        if (imgs.back().shape() != imgs.front().shape()) {
            throw ShapeError("images in " + dir.string() + " differ in size: " + f.string());
        }
    }
    NoGradGuard ng;
    return concat<float>(imgs, 0);
}

} // namespace ngp
