#include "ipaint/core/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "ipaint/core/error.hpp"

namespace ipaint::kern {

ConvShape ConvShape::conv(int64_t n, int64_t ic, int64_t ih, int64_t iw, int64_t oc,
                          int64_t k, int64_t stride, int64_t pad) {
    ConvShape s;
    s.n = n; s.ic = ic; s.ih = ih; s.iw = iw;
    s.oc = oc; s.kh = k; s.kw = k;
    s.stride = stride; s.pad = pad;
    s.oh = (ih + 2 * pad - k) / stride + 1;
    s.ow = (iw + 2 * pad - k) / stride + 1;
    if (s.oh < 1 || s.ow < 1)
        throw DataError("conv: output would be empty (input " + std::to_string(ih) + "x" +
                        std::to_string(iw) + ", kernel " + std::to_string(k) + ")");
    return s;
}

ConvShape ConvShape::deconv(int64_t n, int64_t ic, int64_t ih, int64_t iw, int64_t oc,
                            int64_t k, int64_t stride) {
    ConvShape s;
    s.n = n; s.ic = ic; s.ih = ih; s.iw = iw;
    s.oc = oc; s.kh = k; s.kw = k;
    s.stride = stride; s.pad = 0;
    s.oh = (ih - 1) * stride + k;
    s.ow = (iw - 1) * stride + k;
    return s;
}

template <typename T>
void im2col(const ConvShape& s, const T* x, T* col) {
    const int64_t M = s.m_cols();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < s.k_cols(); ++r) {
        const int64_t c = r / (s.kh * s.kw);
        const int64_t ky = (r / s.kw) % s.kh;
        const int64_t kx = r % s.kw;
        const T* xc = x + c * s.ih * s.iw;
        T* row = col + r * M;
        for (int64_t oy = 0; oy < s.oh; ++oy) {
            const int64_t iy = oy * s.stride - s.pad + ky;
            T* dst = row + oy * s.ow;
            if (iy < 0 || iy >= s.ih) {
                std::fill(dst, dst + s.ow, T(0));
                continue;
            }
            const T* src = xc + iy * s.iw;
            if (s.stride == 1) {
                // contiguous span, clamp against the left/right pad
                const int64_t ix0 = -s.pad + kx;
                int64_t o_lo = std::max<int64_t>(0, -ix0);
                int64_t o_hi = std::min<int64_t>(s.ow, s.iw - ix0);
                if (o_hi < o_lo) o_hi = o_lo;
                std::fill(dst, dst + o_lo, T(0));
                std::memcpy(dst + o_lo, src + ix0 + o_lo,
                            static_cast<size_t>(o_hi - o_lo) * sizeof(T));
                std::fill(dst + o_hi, dst + s.ow, T(0));
            } else {
                for (int64_t ox = 0; ox < s.ow; ++ox) {
                    const int64_t ix = ox * s.stride - s.pad + kx;
                    dst[ox] = (ix >= 0 && ix < s.iw) ? src[ix] : T(0);
                }
            }
        }
    }
}

template <typename T>
void col2im(const ConvShape& s, const T* col, T* x) {
    const int64_t M = s.m_cols();
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < s.ic; ++c) {
        T* xc = x + c * s.ih * s.iw;
        std::fill(xc, xc + s.ih * s.iw, T(0));
        for (int64_t ky = 0; ky < s.kh; ++ky) {
            for (int64_t kx = 0; kx < s.kw; ++kx) {
                const T* row = col + ((c * s.kh + ky) * s.kw + kx) * M;
                for (int64_t oy = 0; oy < s.oh; ++oy) {
                    const int64_t iy = oy * s.stride - s.pad + ky;
                    if (iy < 0 || iy >= s.ih) continue;
                    T* dst = xc + iy * s.iw;
                    const T* src = row + oy * s.ow;
                    for (int64_t ox = 0; ox < s.ow; ++ox) {
                        const int64_t ix = ox * s.stride - s.pad + kx;
                        if (ix >= 0 && ix < s.iw) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

template <typename T>
void gemm(int64_t M, int64_t N, int64_t K, const T* A, const T* B, T* C, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int64_t m = 0; m < M; ++m) {
        T* crow = C + m * N;
        if (!accumulate) std::fill(crow, crow + N, T(0));
        const T* arow = A + m * K;
        for (int64_t k = 0; k < K; ++k) {
            const T a = arow[k];
            const T* brow = B + k * N;
            for (int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

namespace {

// 8-lane blocked dot product; fixed combine order keeps it deterministic
// while still vectorizing without reassociation.
template <typename T>
T dot_blocked(const T* a, const T* b, int64_t n) {
    T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
    T tail(0);
    for (; i < n; ++i) tail += a[i] * b[i];
    return (((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]))) +
           tail;
}

template <typename T>
T sum_blocked(const T* a, int64_t n) {
    T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) acc[l] += a[i + l];
    T tail(0);
    for (; i < n; ++i) tail += a[i];
    return (((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]))) +
           tail;
}

}  // namespace

template <typename T>
void gemm_abt(int64_t M, int64_t N, int64_t P, const T* A, const T* B, T* C) {
#pragma omp parallel for schedule(static)
    for (int64_t m = 0; m < M; ++m) {
        const T* arow = A + m * P;
        T* crow = C + m * N;
        for (int64_t j = 0; j < N; ++j) crow[j] += dot_blocked(arow, B + j * P, P);
    }
}

template <typename T>
void conv2d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y) {
    const int64_t K = s.k_cols();
    const int64_t M = s.m_cols();
    std::vector<T> col(static_cast<size_t>(K * M));
    for (int64_t n = 0; n < s.n; ++n) {
        im2col(s, x + n * s.ic * s.ih * s.iw, col.data());
        T* yn = y + n * s.oc * M;
        gemm(s.oc, M, K, w, col.data(), yn, false);
        if (b) {
#pragma omp parallel for schedule(static)
            for (int64_t oc = 0; oc < s.oc; ++oc) {
                T* row = yn + oc * M;
                const T bias = b[oc];
                for (int64_t j = 0; j < M; ++j) row[j] += bias;
            }
        }
    }
}

template <typename T>
void conv2d_backward_data(const ConvShape& s, const T* dy, const T* w, T* dx) {
    const int64_t K = s.k_cols();
    const int64_t M = s.m_cols();
    // w (oc x K) transposed once so the gemm runs in axpy form
    std::vector<T> wt(static_cast<size_t>(K * s.oc));
    for (int64_t oc = 0; oc < s.oc; ++oc)
        for (int64_t k = 0; k < K; ++k) wt[static_cast<size_t>(k * s.oc + oc)] = w[oc * K + k];
    std::vector<T> col(static_cast<size_t>(K * M));
    for (int64_t n = 0; n < s.n; ++n) {
        gemm(K, M, s.oc, wt.data(), dy + n * s.oc * M, col.data(), false);
        col2im(s, col.data(), dx + n * s.ic * s.ih * s.iw);
    }
}

template <typename T>
void conv2d_backward_filter(const ConvShape& s, const T* x, const T* dy, T* dw, T* db) {
    const int64_t K = s.k_cols();
    const int64_t M = s.m_cols();
    std::vector<T> col(static_cast<size_t>(K * M));
    for (int64_t n = 0; n < s.n; ++n) {
        im2col(s, x + n * s.ic * s.ih * s.iw, col.data());
        const T* dyn = dy + n * s.oc * M;
        gemm_abt(s.oc, K, M, dyn, col.data(), dw);
        if (db) {
            for (int64_t oc = 0; oc < s.oc; ++oc) db[oc] += sum_blocked(dyn + oc * M, M);
        }
    }
}

template <typename T>
void deconv2d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y) {
    const int64_t in_hw = s.ih * s.iw;
    const int64_t out_hw = s.oh * s.ow;
#pragma omp parallel for schedule(static)
    for (int64_t noc = 0; noc < s.n * s.oc; ++noc) {
        const int64_t n = noc / s.oc;
        const int64_t oc = noc % s.oc;
        const T* xn = x + n * s.ic * in_hw;
        T* yrow = y + noc * out_hw;
        const T bias = b ? b[oc] : T(0);
        for (int64_t oy = 0; oy < s.oh; ++oy) {
            for (int64_t ox = 0; ox < s.ow; ++ox) {
                T acc = bias;
                for (int64_t ky = 0; ky < s.kh; ++ky) {
                    const int64_t ty = oy - ky;
                    if (ty < 0 || ty % s.stride) continue;
                    const int64_t iy = ty / s.stride;
                    if (iy >= s.ih) continue;
                    for (int64_t kx = 0; kx < s.kw; ++kx) {
                        const int64_t tx = ox - kx;
                        if (tx < 0 || tx % s.stride) continue;
                        const int64_t ix = tx / s.stride;
                        if (ix >= s.iw) continue;
                        const T* wp = w + (oc * s.kh + ky) * s.kw + kx;
                        const T* xp = xn + iy * s.iw + ix;
                        for (int64_t ic = 0; ic < s.ic; ++ic)
                            acc += xp[ic * in_hw] * wp[ic * s.oc * s.kh * s.kw];
                    }
                }
                yrow[oy * s.ow + ox] = acc;
            }
        }
    }
}

template <typename T>
void deconv2d_backward_data(const ConvShape& s, const T* dy, const T* w, T* dx) {
    const int64_t in_hw = s.ih * s.iw;
    const int64_t out_hw = s.oh * s.ow;
#pragma omp parallel for schedule(static)
    for (int64_t nic = 0; nic < s.n * s.ic; ++nic) {
        const int64_t n = nic / s.ic;
        const int64_t ic = nic % s.ic;
        const T* dyn = dy + n * s.oc * out_hw;
        const T* wrow = w + ic * s.oc * s.kh * s.kw;
        T* dxrow = dx + nic * in_hw;
        for (int64_t iy = 0; iy < s.ih; ++iy) {
            for (int64_t ix = 0; ix < s.iw; ++ix) {
                T acc(0);
                for (int64_t oc = 0; oc < s.oc; ++oc) {
                    const T* dyc = dyn + oc * out_hw;
                    const T* wk = wrow + oc * s.kh * s.kw;
                    for (int64_t ky = 0; ky < s.kh; ++ky)
                        for (int64_t kx = 0; kx < s.kw; ++kx)
                            acc += dyc[(iy * s.stride + ky) * s.ow + ix * s.stride + kx] *
                                   wk[ky * s.kw + kx];
                }
                dxrow[iy * s.iw + ix] = acc;
            }
        }
    }
}

template <typename T>
void deconv2d_backward_filter(const ConvShape& s, const T* x, const T* dy, T* dw, T* db) {
    const int64_t in_hw = s.ih * s.iw;
    const int64_t out_hw = s.oh * s.ow;
#pragma omp parallel for schedule(static)
    for (int64_t pair = 0; pair < s.ic * s.oc; ++pair) {
        const int64_t ic = pair / s.oc;
        const int64_t oc = pair % s.oc;
        T* wk = dw + pair * s.kh * s.kw;
        for (int64_t ky = 0; ky < s.kh; ++ky) {
            for (int64_t kx = 0; kx < s.kw; ++kx) {
                T acc(0);
                for (int64_t n = 0; n < s.n; ++n) {
                    const T* xc = x + (n * s.ic + ic) * in_hw;
                    const T* dyc = dy + (n * s.oc + oc) * out_hw;
                    for (int64_t iy = 0; iy < s.ih; ++iy)
                        for (int64_t ix = 0; ix < s.iw; ++ix)
                            acc += xc[iy * s.iw + ix] *
                                   dyc[(iy * s.stride + ky) * s.ow + ix * s.stride + kx];
                }
                wk[ky * s.kw + kx] += acc;
            }
        }
    }
    if (db) {
        for (int64_t oc = 0; oc < s.oc; ++oc) {
            T acc(0);
            for (int64_t n = 0; n < s.n; ++n)
                acc += sum_blocked(dy + (n * s.oc + oc) * out_hw, out_hw);
            db[oc] += acc;
        }
    }
}

template <typename T>
void maxpool2_forward(int64_t n, int64_t c, int64_t ih, int64_t iw, const T* x, T* y,
                      int32_t* idx) {
    const int64_t oh = ih / 2, ow = iw / 2;
#pragma omp parallel for schedule(static)
    for (int64_t plane = 0; plane < n * c; ++plane) {
        const T* xp = x + plane * ih * iw;
        T* yp = y + plane * oh * ow;
        int32_t* ip = idx + plane * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy) {
            for (int64_t ox = 0; ox < ow; ++ox) {
                const T* cell = xp + 2 * oy * iw + 2 * ox;
                T best = cell[0];
                int32_t arg = 0;
                if (cell[1] > best) { best = cell[1]; arg = 1; }
                if (cell[iw] > best) { best = cell[iw]; arg = 2; }
                if (cell[iw + 1] > best) { best = cell[iw + 1]; arg = 3; }
                yp[oy * ow + ox] = best;
                ip[oy * ow + ox] = arg;
            }
        }
    }
}

template <typename T>
void maxpool2_backward(int64_t n, int64_t c, int64_t ih, int64_t iw, const T* dy,
                       const int32_t* idx, T* dx) {
    const int64_t oh = ih / 2, ow = iw / 2;
#pragma omp parallel for schedule(static)
    for (int64_t plane = 0; plane < n * c; ++plane) {
        const T* dyp = dy + plane * oh * ow;
        const int32_t* ip = idx + plane * oh * ow;
        T* dxp = dx + plane * ih * iw;
        std::fill(dxp, dxp + ih * iw, T(0));
        for (int64_t oy = 0; oy < oh; ++oy) {
            for (int64_t ox = 0; ox < ow; ++ox) {
                const int32_t a = ip[oy * ow + ox];
                const int64_t iy = 2 * oy + (a >> 1);
                const int64_t ix = 2 * ox + (a & 1);
                dxp[iy * iw + ix] = dyp[oy * ow + ox];
            }
        }
    }
}

template <typename T>
void batchnorm_forward(int64_t n, int64_t c, int64_t hw, const T* x, const T* gamma,
                       const T* beta, T eps, T* y, T* mean, T* invstd, T* xhat) {
    const int64_t m = n * hw;
#pragma omp parallel for schedule(static)
    for (int64_t ch = 0; ch < c; ++ch) {
        T s(0);
        for (int64_t b = 0; b < n; ++b) s += sum_blocked(x + (b * c + ch) * hw, hw);
        const T mu = s / static_cast<T>(m);
        T v(0);
        for (int64_t b = 0; b < n; ++b) {
            const T* xp = x + (b * c + ch) * hw;
            T acc(0);
            for (int64_t j = 0; j < hw; ++j) {
                const T d = xp[j] - mu;
                acc += d * d;
            }
            v += acc;
        }
        const T istd = T(1) / std::sqrt(v / static_cast<T>(m) + eps);
        mean[ch] = mu;
        invstd[ch] = istd;
        const T g = gamma[ch], bt = beta[ch];
        for (int64_t b = 0; b < n; ++b) {
            const T* xp = x + (b * c + ch) * hw;
            T* xh = xhat + (b * c + ch) * hw;
            T* yp = y + (b * c + ch) * hw;
            for (int64_t j = 0; j < hw; ++j) {
                const T h = (xp[j] - mu) * istd;
                xh[j] = h;
                yp[j] = g * h + bt;
            }
        }
    }
}

template <typename T>
void batchnorm_backward(int64_t n, int64_t c, int64_t hw, const T* dy, const T* gamma,
                        const T* invstd, const T* xhat, T* dx, T* dgamma, T* dbeta) {
    const int64_t m = n * hw;
#pragma omp parallel for schedule(static)
    for (int64_t ch = 0; ch < c; ++ch) {
        T s1(0), s2(0);
        for (int64_t b = 0; b < n; ++b) {
            const T* dyp = dy + (b * c + ch) * hw;
            const T* xh = xhat + (b * c + ch) * hw;
            s1 += sum_blocked(dyp, hw);
            s2 += dot_blocked(dyp, xh, hw);
        }
        dgamma[ch] += s2;
        dbeta[ch] += s1;
        const T k = gamma[ch] * invstd[ch];
        const T c1 = s1 / static_cast<T>(m);
        const T c2 = s2 / static_cast<T>(m);
        for (int64_t b = 0; b < n; ++b) {
            const T* dyp = dy + (b * c + ch) * hw;
            const T* xh = xhat + (b * c + ch) * hw;
            T* dxp = dx + (b * c + ch) * hw;
            for (int64_t j = 0; j < hw; ++j) dxp[j] = k * (dyp[j] - c1 - xh[j] * c2);
        }
    }
}

template <typename T>
void gram(int64_t n, int64_t c, int64_t hw, const T* f, T* g) {
#pragma omp parallel for schedule(static)
    for (int64_t nc = 0; nc < n * c; ++nc) {
        const int64_t b = nc / c;
        const int64_t ci = nc % c;
        const T* fb = f + b * c * hw;
        T* grow = g + (b * c + ci) * c;
        // upper triangle only; mirror is exact because IEEE products commute.
        // Plain ascending-j accumulation so the result matches a naive
        // sum_{hw} loop bit for bit.
        for (int64_t cj = ci; cj < c; ++cj) {
            const T* fi = fb + ci * hw;
            const T* fj = fb + cj * hw;
            T acc(0);
            for (int64_t j = 0; j < hw; ++j) acc += fi[j] * fj[j];
            grow[cj] = acc;
        }
    }
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < n; ++b) {
        T* gb = g + b * c * c;
        for (int64_t ci = 1; ci < c; ++ci)
            for (int64_t cj = 0; cj < ci; ++cj) gb[ci * c + cj] = gb[cj * c + ci];
    }
}

template <typename T>
void gram_backward(int64_t n, int64_t c, int64_t hw, const T* f, const T* dg, T* df) {
#pragma omp parallel for schedule(static)
    for (int64_t nc = 0; nc < n * c; ++nc) {
        const int64_t b = nc / c;
        const int64_t ci = nc % c;
        const T* fb = f + b * c * hw;
        const T* dgb = dg + b * c * c;
        T* drow = df + nc * hw;
        std::fill(drow, drow + hw, T(0));
        for (int64_t cj = 0; cj < c; ++cj) {
            const T a = dgb[ci * c + cj] + dgb[cj * c + ci];
            const T* frow = fb + cj * hw;
            for (int64_t j = 0; j < hw; ++j) drow[j] += a * frow[j];
        }
    }
}

template <typename T>
T det_sum(const T* x, int64_t n) {
    constexpr int64_t kBlock = 4096;
    const int64_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<T> partial(static_cast<size_t>(nblocks));
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < nblocks; ++b) {
        const int64_t lo = b * kBlock;
        partial[static_cast<size_t>(b)] = sum_blocked(x + lo, std::min(kBlock, n - lo));
    }
    T total(0);
    for (int64_t b = 0; b < nblocks; ++b) total += partial[static_cast<size_t>(b)];
    return total;
}

#define IPAINT_INSTANTIATE_KERNELS(T)                                                        \
    template void im2col<T>(const ConvShape&, const T*, T*);                                 \
    template void col2im<T>(const ConvShape&, const T*, T*);                                 \
    template void gemm<T>(int64_t, int64_t, int64_t, const T*, const T*, T*, bool);          \
    template void gemm_abt<T>(int64_t, int64_t, int64_t, const T*, const T*, T*);            \
    template void conv2d_forward<T>(const ConvShape&, const T*, const T*, const T*, T*);     \
    template void conv2d_backward_data<T>(const ConvShape&, const T*, const T*, T*);         \
    template void conv2d_backward_filter<T>(const ConvShape&, const T*, const T*, T*, T*);   \
    template void deconv2d_forward<T>(const ConvShape&, const T*, const T*, const T*, T*);   \
    template void deconv2d_backward_data<T>(const ConvShape&, const T*, const T*, T*);       \
    template void deconv2d_backward_filter<T>(const ConvShape&, const T*, const T*, T*, T*); \
    template void maxpool2_forward<T>(int64_t, int64_t, int64_t, int64_t, const T*, T*,      \
                                      int32_t*);                                             \
    template void maxpool2_backward<T>(int64_t, int64_t, int64_t, int64_t, const T*,         \
                                       const int32_t*, T*);                                  \
    template void batchnorm_forward<T>(int64_t, int64_t, int64_t, const T*, const T*,        \
                                       const T*, T, T*, T*, T*, T*);                         \
    template void batchnorm_backward<T>(int64_t, int64_t, int64_t, const T*, const T*,       \
                                        const T*, const T*, T*, T*, T*);                     \
    template void gram<T>(int64_t, int64_t, int64_t, const T*, T*);                          \
    template void gram_backward<T>(int64_t, int64_t, int64_t, const T*, const T*, T*);       \
    template T det_sum<T>(const T*, int64_t);

IPAINT_INSTANTIATE_KERNELS(float)
IPAINT_INSTANTIATE_KERNELS(double)

}  // namespace ipaint::kern
