#include "ipaint/img/image.hpp"

#include <cmath>

#include "ipaint/core/error.hpp"

namespace ipaint::img {

const char* range_name(Range r) {
    switch (r) {
        case Range::RawU16: return "raw_u16";
        case Range::Unit: return "unit";
        case Range::Signed: return "signed";
    }
    return "?";
}

Range range_from_name(const std::string& name) {
    if (name == "raw_u16") return Range::RawU16;
    if (name == "unit") return Range::Unit;
    if (name == "signed") return Range::Signed;
    throw DataError("unknown intensity range '" + name + "'");
}

std::pair<double, double> range_bounds(Range r) {
    switch (r) {
        case Range::RawU16: return {0.0, 65535.0};
        case Range::Unit: return {0.0, 1.0};
        case Range::Signed: return {-1.0, 1.0};
    }
    return {0.0, 1.0};
}

ImageSlice ImageSlice::make(Tensor<float> pixels, Range range) {
    if (pixels.rank() != 2) throw DataError("image slice must be 2D");
    const int64_t h = pixels.dim(0), w = pixels.dim(1);
    if (h % 16 != 0 || w % 16 != 0)
        throw DataError("slice dimensions must be multiples of 16, got " +
                        std::to_string(h) + "x" + std::to_string(w));
    const auto [lo, hi] = range_bounds(range);
    for (int64_t i = 0; i < pixels.numel(); ++i) {
        const float v = pixels[i];
        if (!std::isfinite(v)) throw NumericError("non-finite pixel value in slice");
        if (range == Range::Signed && (v < lo || v > hi))
            throw DataError("signed slice has pixel outside [-1, 1]");
    }
    ImageSlice s;
    s.pixels = std::move(pixels);
    s.range = range;
    return s;
}

ImageSlice normalize(const ImageSlice& img, Range target) {
    if (img.range == target) return img;

    float lo = img.pixels[0], hi = img.pixels[0];
    for (int64_t i = 1; i < img.pixels.numel(); ++i) {
        lo = std::min(lo, img.pixels[i]);
        hi = std::max(hi, img.pixels[i]);
    }
    const auto [tlo, thi] = range_bounds(target);

    Tensor<float> out(img.pixels.shape());
    bool degenerate = false;
    if (lo == hi) {
        degenerate = true;
        out.fill(static_cast<float>(0.5 * (tlo + thi)));
    } else {
        const double scale = (thi - tlo) / (static_cast<double>(hi) - lo);
        for (int64_t i = 0; i < out.numel(); ++i)
            out[i] = static_cast<float>(tlo + (img.pixels[i] - static_cast<double>(lo)) * scale);
    }
    ImageSlice s = ImageSlice::make(std::move(out), target);
    s.degenerate = degenerate;
    return s;
}

ImageSlice convert_range(const ImageSlice& img, Range target) {
    if (img.range == target) return img;
    const auto [slo, shi] = range_bounds(img.range);
    const auto [tlo, thi] = range_bounds(target);
    const double scale = (thi - tlo) / (shi - slo);
    Tensor<float> out(img.pixels.shape());
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = static_cast<float>(tlo + (static_cast<double>(img.pixels[i]) - slo) * scale);
    ImageSlice s = ImageSlice::make(std::move(out), target);
    s.degenerate = img.degenerate;
    return s;
}

const char* mask_kind_name(MaskKind k) {
    return k == MaskKind::Square ? "square" : "arbitrary";
}

MaskKind mask_kind_from_name(const std::string& name) {
    if (name == "square") return MaskKind::Square;
    if (name == "arbitrary") return MaskKind::Arbitrary;
    throw DataError("unknown mask kind '" + name + "'");
}

double mask_fraction(const Tensor<uint8_t>& bits) {
    int64_t ones = 0;
    for (int64_t i = 0; i < bits.numel(); ++i) ones += bits[i] ? 1 : 0;
    return static_cast<double>(ones) / static_cast<double>(bits.numel());
}

CorruptedImage apply_mask(const ImageSlice& target, const Mask& mask, float fill) {
    if (target.range != Range::Signed)
        throw DataError("apply_mask expects a signed-range target");
    if (target.h() != mask.h() || target.w() != mask.w())
        throw DataError("mask/image shape mismatch: " + std::to_string(mask.h()) + "x" +
                        std::to_string(mask.w()) + " vs " + std::to_string(target.h()) +
                        "x" + std::to_string(target.w()));
    CorruptedImage out;
    out.pixels = Tensor<float>(target.pixels.shape());
    out.source_mask_seed = mask.seed;
    for (int64_t i = 0; i < out.pixels.numel(); ++i)
        out.pixels[i] = mask.bits[i] ? fill : target.pixels[i];
    return out;
}

}  // namespace ipaint::img
