#include "ipaint/core/reference.hpp"

#include <cmath>
#include <cstring>

namespace ipaint::ref {

template <typename T>
void conv2d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y) {
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t oc = 0; oc < s.oc; ++oc)
            for (int64_t oy = 0; oy < s.oh; ++oy)
                for (int64_t ox = 0; ox < s.ow; ++ox) {
                    T acc = b ? b[oc] : T(0);
                    for (int64_t ic = 0; ic < s.ic; ++ic)
                        for (int64_t ky = 0; ky < s.kh; ++ky)
                            for (int64_t kx = 0; kx < s.kw; ++kx) {
                                const int64_t iy = oy * s.stride - s.pad + ky;
                                const int64_t ix = ox * s.stride - s.pad + kx;
                                if (iy < 0 || iy >= s.ih || ix < 0 || ix >= s.iw) continue;
                                acc += x[((n * s.ic + ic) * s.ih + iy) * s.iw + ix] *
                                       w[((oc * s.ic + ic) * s.kh + ky) * s.kw + kx];
                            }
                    y[((n * s.oc + oc) * s.oh + oy) * s.ow + ox] = acc;
                }
}

template <typename T>
void conv2d_backward_data(const ConvShape& s, const T* dy, const T* w, T* dx) {
    std::memset(dx, 0, sizeof(T) * static_cast<size_t>(s.n * s.ic * s.ih * s.iw));
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t oc = 0; oc < s.oc; ++oc)
            for (int64_t oy = 0; oy < s.oh; ++oy)
                for (int64_t ox = 0; ox < s.ow; ++ox) {
                    const T g = dy[((n * s.oc + oc) * s.oh + oy) * s.ow + ox];
                    for (int64_t ic = 0; ic < s.ic; ++ic)
                        for (int64_t ky = 0; ky < s.kh; ++ky)
                            for (int64_t kx = 0; kx < s.kw; ++kx) {
                                const int64_t iy = oy * s.stride - s.pad + ky;
                                const int64_t ix = ox * s.stride - s.pad + kx;
                                if (iy < 0 || iy >= s.ih || ix < 0 || ix >= s.iw) continue;
                                dx[((n * s.ic + ic) * s.ih + iy) * s.iw + ix] +=
                                    g * w[((oc * s.ic + ic) * s.kh + ky) * s.kw + kx];
                            }
                }
}

template <typename T>
void conv2d_backward_filter(const ConvShape& s, const T* x, const T* dy, T* dw, T* db) {
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t oc = 0; oc < s.oc; ++oc)
            for (int64_t oy = 0; oy < s.oh; ++oy)
                for (int64_t ox = 0; ox < s.ow; ++ox) {
                    const T g = dy[((n * s.oc + oc) * s.oh + oy) * s.ow + ox];
                    if (db) db[oc] += g;
                    for (int64_t ic = 0; ic < s.ic; ++ic)
                        for (int64_t ky = 0; ky < s.kh; ++ky)
                            for (int64_t kx = 0; kx < s.kw; ++kx) {
                                const int64_t iy = oy * s.stride - s.pad + ky;
                                const int64_t ix = ox * s.stride - s.pad + kx;
                                if (iy < 0 || iy >= s.ih || ix < 0 || ix >= s.iw) continue;
                                dw[((oc * s.ic + ic) * s.kh + ky) * s.kw + kx] +=
                                    g * x[((n * s.ic + ic) * s.ih + iy) * s.iw + ix];
                            }
                }
}

template <typename T>
void deconv2d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y) {
    for (int64_t i = 0; i < s.n * s.oc * s.oh * s.ow; ++i)
        y[i] = b ? b[(i / (s.oh * s.ow)) % s.oc] : T(0);
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t ic = 0; ic < s.ic; ++ic)
            for (int64_t iy = 0; iy < s.ih; ++iy)
                for (int64_t ix = 0; ix < s.iw; ++ix) {
                    const T v = x[((n * s.ic + ic) * s.ih + iy) * s.iw + ix];
                    for (int64_t oc = 0; oc < s.oc; ++oc)
                        for (int64_t ky = 0; ky < s.kh; ++ky)
                            for (int64_t kx = 0; kx < s.kw; ++kx)
                                y[((n * s.oc + oc) * s.oh + iy * s.stride + ky) * s.ow +
                                  ix * s.stride + kx] +=
                                    v * w[((ic * s.oc + oc) * s.kh + ky) * s.kw + kx];
                }
}

template <typename T>
void batchnorm_forward(int64_t n, int64_t c, int64_t hw, const T* x, const T* gamma,
                       const T* beta, T eps, T* y) {
    for (int64_t ch = 0; ch < c; ++ch) {
        T mu(0);
        for (int64_t b = 0; b < n; ++b)
            for (int64_t j = 0; j < hw; ++j) mu += x[(b * c + ch) * hw + j];
        mu /= static_cast<T>(n * hw);
        T var(0);
        for (int64_t b = 0; b < n; ++b)
            for (int64_t j = 0; j < hw; ++j) {
                const T d = x[(b * c + ch) * hw + j] - mu;
                var += d * d;
            }
        var /= static_cast<T>(n * hw);
        const T istd = T(1) / std::sqrt(var + eps);
        for (int64_t b = 0; b < n; ++b)
            for (int64_t j = 0; j < hw; ++j)
                y[(b * c + ch) * hw + j] =
                    gamma[ch] * ((x[(b * c + ch) * hw + j] - mu) * istd) + beta[ch];
    }
}

template <typename T>
void gram(int64_t n, int64_t c, int64_t hw, const T* f, T* g) {
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ci = 0; ci < c; ++ci)
            for (int64_t cj = 0; cj < c; ++cj) {
                T acc(0);
                for (int64_t j = 0; j < hw; ++j)
                    acc += f[(b * c + ci) * hw + j] * f[(b * c + cj) * hw + j];
                g[(b * c + ci) * c + cj] = acc;
            }
}

#define IPAINT_INSTANTIATE_REF(T)                                                          \
    template void conv2d_forward<T>(const ConvShape&, const T*, const T*, const T*, T*);   \
    template void conv2d_backward_data<T>(const ConvShape&, const T*, const T*, T*);       \
    template void conv2d_backward_filter<T>(const ConvShape&, const T*, const T*, T*,      \
                                            T*);                                           \
    template void deconv2d_forward<T>(const ConvShape&, const T*, const T*, const T*, T*); \
    template void batchnorm_forward<T>(int64_t, int64_t, int64_t, const T*, const T*,      \
                                       const T*, T, T*);                                   \
    template void gram<T>(int64_t, int64_t, int64_t, const T*, T*);

IPAINT_INSTANTIATE_REF(float)
IPAINT_INSTANTIATE_REF(double)

}  // namespace ipaint::ref
