#pragma once

#include <cstdint>
#include <string>

#include "ipaint/core/tensor.hpp"

namespace ipaint::img {

// Intensity convention a slice's pixel values follow.
enum class Range { RawU16, Unit, Signed };

const char* range_name(Range r);
Range range_from_name(const std::string& name);
// (lo, hi) endpoints of the convention.
std::pair<double, double> range_bounds(Range r);

// Single 2D grayscale slice, pixels stored [H, W]. H and W must be multiples
// of 16 so the slice survives four rounds of pooling.
struct ImageSlice {
    Tensor<float> pixels;
    Range range = Range::RawU16;
    // Set by normalize() when the source image was constant and the affine
    // map collapsed to the midpoint.
    bool degenerate = false;

    int64_t h() const { return pixels.dim(0); }
    int64_t w() const { return pixels.dim(1); }

    static ImageSlice make(Tensor<float> pixels, Range range);
};

// Affine map of the slice's own min/max onto the target convention's
// endpoints. A slice already tagged with `target` is returned unchanged.
// A constant slice maps to the target midpoint with `degenerate` set.
ImageSlice normalize(const ImageSlice& img, Range target);

// Exact affine between the tagged convention's endpoints and the target's,
// ignoring the data (the inverse of how slices are persisted). Use this to
// undo storage scaling; use normalize() to whiten raw acquisitions.
ImageSlice convert_range(const ImageSlice& img, Range target);

enum class MaskKind { Square, Arbitrary };

const char* mask_kind_name(MaskKind k);
MaskKind mask_kind_from_name(const std::string& name);

// Binary corruption stencil; bits[i] == 1 marks a corrupted pixel.
struct Mask {
    Tensor<uint8_t> bits;  // [H, W]
    double area_fraction = 0.0;
    uint64_t seed = 0;
    MaskKind kind = MaskKind::Square;

    int64_t h() const { return bits.dim(0); }
    int64_t w() const { return bits.dim(1); }
};

// Recomputes the corrupted-area fraction from the bits.
double mask_fraction(const Tensor<uint8_t>& bits);

// Target with the masked region replaced by a fill constant. The mask seed is
// carried for bookkeeping only; it is never an input to the generator.
struct CorruptedImage {
    Tensor<float> pixels;  // [H, W], signed convention
    uint64_t source_mask_seed = 0;
};

CorruptedImage apply_mask(const ImageSlice& target, const Mask& mask, float fill);

}  // namespace ipaint::img
