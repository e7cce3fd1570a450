#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ipaint/core/tensor.hpp"

namespace ipaint::tool {

// 8-bit grayscale drawing surface for montages and metric curves.
struct Canvas {
    int64_t h = 0, w = 0;
    std::vector<uint8_t> px;

    Canvas(int64_t h_, int64_t w_, uint8_t fill = 0)
        : h(h_), w(w_), px(static_cast<size_t>(h_ * w_), fill) {}

    void set(int64_t r, int64_t c, uint8_t v) {
        if (r >= 0 && r < h && c >= 0 && c < w) px[static_cast<size_t>(r * w + c)] = v;
    }
    void fill_rect(int64_t r0, int64_t c0, int64_t hh, int64_t ww, uint8_t v);
    // frame holds display values 0..255 (the metric frame convention)
    void blit(int64_t r0, int64_t c0, const Tensor<double>& frame);
    // 5x7 bitmap font, scaled by an integer factor; unknown glyphs are blank
    void text(int64_t r0, int64_t c0, const std::string& s, uint8_t v, int scale = 1);
    void save(const std::string& path) const;
};

int64_t text_width(const std::string& s, int scale = 1);

// Polyline of ys across the panel, auto-scaled to [lo, hi]; used by the
// per-image metric curves.
void draw_series(Canvas& cv, int64_t r0, int64_t c0, int64_t hh, int64_t ww,
                 const std::vector<double>& ys, double lo, double hi);

}  // namespace ipaint::tool
