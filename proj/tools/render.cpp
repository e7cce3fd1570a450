#include "render.hpp"

#include <algorithm>
#include <cmath>

#include "ipaint/img/png_io.hpp"

namespace ipaint::tool {

namespace {

struct Glyph {
    char ch;
    uint8_t rows[7];  // 5 low bits per row, MSB-left
};

// Just the glyphs the montage headers and metric labels need.
constexpr Glyph kFont[] = {
    {' ', {0, 0, 0, 0, 0, 0, 0}},
    {'.', {0, 0, 0, 0, 0, 0x0C, 0x0C}},
    {'-', {0, 0, 0, 0x1F, 0, 0, 0}},
    {':', {0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0}},
    {'%', {0x19, 0x19, 0x02, 0x04, 0x08, 0x13, 0x13}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'a', {0, 0, 0x0E, 0x01, 0x0F, 0x11, 0x0F}},
    {'e', {0, 0, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
    {'g', {0, 0, 0x0F, 0x11, 0x0F, 0x01, 0x0E}},
    {'n', {0, 0, 0x16, 0x19, 0x11, 0x11, 0x11}},
    {'o', {0, 0, 0x0E, 0x11, 0x11, 0x11, 0x0E}},
    {'p', {0, 0, 0x1E, 0x11, 0x1E, 0x10, 0x10}},
    {'r', {0, 0, 0x16, 0x19, 0x10, 0x10, 0x10}},
    {'t', {0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06}},
    {'u', {0, 0, 0x11, 0x11, 0x11, 0x13, 0x0D}},
    {'x', {0, 0, 0x11, 0x0A, 0x04, 0x0A, 0x11}},
};

const uint8_t* glyph_rows(char ch) {
    for (const auto& g : kFont)
        if (g.ch == ch) return g.rows;
    return nullptr;
}

}  // namespace

void Canvas::fill_rect(int64_t r0, int64_t c0, int64_t hh, int64_t ww, uint8_t v) {
    for (int64_t r = r0; r < r0 + hh; ++r)
        for (int64_t c = c0; c < c0 + ww; ++c) set(r, c, v);
}

void Canvas::blit(int64_t r0, int64_t c0, const Tensor<double>& frame) {
    const int64_t fh = frame.dim(0), fw = frame.dim(1);
    for (int64_t r = 0; r < fh; ++r)
        for (int64_t c = 0; c < fw; ++c) {
            const double v = std::clamp(frame[r * fw + c], 0.0, 255.0);
            set(r0 + r, c0 + c, static_cast<uint8_t>(std::lround(v)));
        }
}

void Canvas::text(int64_t r0, int64_t c0, const std::string& s, uint8_t v, int scale) {
    int64_t cx = c0;
    for (char ch : s) {
        const uint8_t* rows = glyph_rows(ch);
        if (rows != nullptr)
            for (int gr = 0; gr < 7; ++gr)
                for (int gc = 0; gc < 5; ++gc)
                    if (rows[gr] >> (4 - gc) & 1)
                        fill_rect(r0 + gr * scale, cx + gc * scale, scale, scale, v);
        cx += 6 * scale;
    }
}

void Canvas::save(const std::string& path) const {
    img::write_png_gray8(path, h, w, px.data());
}

int64_t text_width(const std::string& s, int scale) {
    return static_cast<int64_t>(s.size()) * 6 * scale;
}

void draw_series(Canvas& cv, int64_t r0, int64_t c0, int64_t hh, int64_t ww,
                 const std::vector<double>& ys, double lo, double hi) {
    cv.fill_rect(r0, c0, hh, 1, 96);
    cv.fill_rect(r0 + hh - 1, c0, 1, ww, 96);
    if (ys.empty()) return;
    const double span = hi > lo ? hi - lo : 1.0;
    auto ypix = [&](double y) {
        const double t = std::clamp((y - lo) / span, 0.0, 1.0);
        return r0 + (hh - 1) - static_cast<int64_t>(std::lround(t * (hh - 1)));
    };
    auto xpix = [&](size_t i) {
        if (ys.size() == 1) return c0;
        return c0 + static_cast<int64_t>(std::lround(
                        static_cast<double>(i) / static_cast<double>(ys.size() - 1) *
                        static_cast<double>(ww - 1)));
    };
    for (size_t i = 0; i + 1 < ys.size() || i == 0; ++i) {
        const int64_t x0 = xpix(i), y0 = ypix(ys[i]);
        const int64_t x1 = (i + 1 < ys.size()) ? xpix(i + 1) : x0;
        const int64_t y1 = (i + 1 < ys.size()) ? ypix(ys[i + 1]) : y0;
        const int64_t steps = std::max<int64_t>({std::abs(x1 - x0), std::abs(y1 - y0), 1});
        for (int64_t s = 0; s <= steps; ++s) {
            const double t = static_cast<double>(s) / static_cast<double>(steps);
            cv.set(y0 + static_cast<int64_t>(std::lround(t * static_cast<double>(y1 - y0))),
                   x0 + static_cast<int64_t>(std::lround(t * static_cast<double>(x1 - x0))),
                   255);
        }
        if (i + 1 >= ys.size()) break;
    }
}

}  // namespace ipaint::tool
