#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ipaint/img/image.hpp"

namespace ipaint::img {

// Decoded single-channel PNG. 8-bit files keep their 0..255 values with
// bit_depth = 8; 16-bit files arrive host-endian with bit_depth = 16.
struct GrayPng {
    int64_t h = 0, w = 0;
    int bit_depth = 8;
    std::vector<uint16_t> px;
};

GrayPng read_png_gray(const std::string& path);

void write_png_gray8(const std::string& path, int64_t h, int64_t w, const uint8_t* px);
void write_png_gray16(const std::string& path, int64_t h, int64_t w, const uint16_t* px);
// px is packed RGBRGB..., used by the montage/plot writers.
void write_png_rgb8(const std::string& path, int64_t h, int64_t w, const uint8_t* px);

// Slice persistence: always 16-bit grayscale. The slice's tagged range maps
// linearly onto 0..65535. Loading yields a RawU16-tagged slice (8-bit files
// are scaled by 257 so 255 -> 65535).
void save_slice_png(const ImageSlice& slice, const std::string& path);
ImageSlice load_slice_png(const std::string& path);

}  // namespace ipaint::img
