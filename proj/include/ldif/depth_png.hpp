#pragma once

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

#include "ldif/depth.hpp"

namespace ldif {

// 16-bit grayscale PNG depth input. Raw integer values divided by `scale`
// give depth in world units (scale 1000 reads millimeter PNGs as meters);
// zero stays the invalid sentinel.
inline DepthImage read_depth_png(const std::string& path, double scale = 1000.0) {
    if (scale <= 0) throw IoError("depth PNG scale must be positive");
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open depth PNG: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("failed decoding depth PNG: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_uint_32 width = png_get_image_width(png, info);
    png_uint_32 height = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);
    if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("depth PNG must be 16-bit grayscale: " + path);
    }
    png_set_swap(png);  // PNG is big-endian on disk
    png_read_update_info(png, info);
    std::vector<uint16_t> pixels(static_cast<size_t>(width) * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 r = 0; r < height; ++r)
        rows[r] = reinterpret_cast<png_bytep>(pixels.data() + static_cast<size_t>(r) * width);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    DepthImage img;
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.data.resize(pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i) img.data[i] = pixels[i] / scale;
    return img;
}

inline void write_depth_png(const std::string& path, const DepthImage& img, double scale = 1000.0) {
    if (scale <= 0) throw IoError("depth PNG scale must be positive");
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot open depth PNG for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("failed encoding depth PNG: " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);
    std::vector<uint16_t> pixels(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        double v = img.data[i];
        double scaled = std::isfinite(v) && v > 0 ? v * scale : 0.0;
        pixels[i] = static_cast<uint16_t>(std::clamp(scaled, 0.0, 65535.0) + 0.5);
    }
    std::vector<png_bytep> rows(img.height);
    for (int r = 0; r < img.height; ++r)
        rows[r] = reinterpret_cast<png_bytep>(pixels.data() + static_cast<size_t>(r) * img.width);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace ldif
