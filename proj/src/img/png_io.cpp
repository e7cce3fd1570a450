#include "ipaint/img/png_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include <png.h>

#include "ipaint/core/error.hpp"

namespace ipaint::img {

namespace {

struct FileHandle {
    std::FILE* f = nullptr;
    explicit FileHandle(const std::string& path, const char* mode)
        : f(std::fopen(path.c_str(), mode)) {}
    ~FileHandle() {
        if (f) std::fclose(f);
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
};

}  // namespace

GrayPng read_png_gray(const std::string& path) {
    FileHandle file(path, "rb");
    if (!file.f) throw DataError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng read init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("libpng read init failed");
    }

    // All C++ state lives outside the setjmp window; the error path only
    // tears down libpng structs and throws.
    GrayPng out;
    std::vector<uint8_t> raw;
    std::vector<png_bytep> rows;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("failed to decode PNG " + path);
    }

    png_init_io(png, file.f);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError(path + " is not a single-channel grayscale PNG");
    }
    if (depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
        depth = 8;
    }
    if (depth == 16) png_set_swap(png);  // file is big-endian
    png_read_update_info(png, info);

    const size_t rowbytes = png_get_rowbytes(png, info);
    raw.resize(rowbytes * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    out.h = h;
    out.w = w;
    out.bit_depth = depth;
    out.px.resize(static_cast<size_t>(h) * w);
    if (depth == 8) {
        for (size_t i = 0; i < out.px.size(); ++i) out.px[i] = raw[i];
    } else {
        std::memcpy(out.px.data(), raw.data(), out.px.size() * sizeof(uint16_t));
    }
    return out;
}

namespace {

void write_png(const std::string& path, int64_t h, int64_t w, int color_type,
               int bit_depth, const uint8_t* bytes, size_t rowbytes) {
    FileHandle file(path, "wb");
    if (!file.f) throw DataError("cannot write " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng write init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("libpng write init failed");
    }

    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int64_t y = 0; y < h; ++y)
        rows[static_cast<size_t>(y)] = const_cast<png_bytep>(bytes + y * rowbytes);

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("failed to encode PNG " + path);
    }

    png_init_io(png, file.f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_gray8(const std::string& path, int64_t h, int64_t w, const uint8_t* px) {
    write_png(path, h, w, PNG_COLOR_TYPE_GRAY, 8, px, static_cast<size_t>(w));
}

void write_png_gray16(const std::string& path, int64_t h, int64_t w, const uint16_t* px) {
    write_png(path, h, w, PNG_COLOR_TYPE_GRAY, 16,
              reinterpret_cast<const uint8_t*>(px), static_cast<size_t>(w) * 2);
}

void write_png_rgb8(const std::string& path, int64_t h, int64_t w, const uint8_t* px) {
    write_png(path, h, w, PNG_COLOR_TYPE_RGB, 8, px, static_cast<size_t>(w) * 3);
}

void save_slice_png(const ImageSlice& slice, const std::string& path) {
    const auto [lo, hi] = range_bounds(slice.range);
    const double scale = 65535.0 / (hi - lo);
    std::vector<uint16_t> buf(static_cast<size_t>(slice.pixels.numel()));
    for (int64_t i = 0; i < slice.pixels.numel(); ++i) {
        const double v = (static_cast<double>(slice.pixels[i]) - lo) * scale;
        buf[static_cast<size_t>(i)] =
            static_cast<uint16_t>(std::lround(std::min(65535.0, std::max(0.0, v))));
    }
    write_png_gray16(path, slice.h(), slice.w(), buf.data());
}

ImageSlice load_slice_png(const std::string& path) {
    GrayPng png = read_png_gray(path);
    Tensor<float> px({png.h, png.w});
    const float scale = png.bit_depth == 8 ? 257.0f : 1.0f;  // 255 -> 65535
    for (int64_t i = 0; i < px.numel(); ++i)
        px[i] = static_cast<float>(png.px[static_cast<size_t>(i)]) * scale;
    return ImageSlice::make(std::move(px), Range::RawU16);
}

}  // namespace ipaint::img
