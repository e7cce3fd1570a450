#pragma once

#include <cstdint>

namespace ipaint::kern {

// Shape bundle shared by the direct and transposed convolution kernels.
// For conv: y[n,oc,oh,ow] from x[n,ic,ih,iw], w[oc,ic,kh,kw].
// For deconv (transposed conv, pad 0): w[ic,oc,kh,kw], oh = (ih-1)*stride + kh.
struct ConvShape {
    int64_t n = 1, ic = 1, ih = 1, iw = 1;
    int64_t oc = 1, kh = 1, kw = 1;
    int64_t stride = 1, pad = 0;
    int64_t oh = 0, ow = 0;

    static ConvShape conv(int64_t n, int64_t ic, int64_t ih, int64_t iw, int64_t oc,
                          int64_t k, int64_t stride, int64_t pad);
    static ConvShape deconv(int64_t n, int64_t ic, int64_t ih, int64_t iw, int64_t oc,
                            int64_t k, int64_t stride);

    int64_t k_cols() const { return ic * kh * kw; }
    int64_t m_cols() const { return oh * ow; }
};

// All kernels assign each output element to exactly one thread and keep a
// fixed accumulation order per element, so results are bit-identical across
// runs and across thread counts.

template <typename T>
void conv2d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y);
template <typename T>
void conv2d_backward_data(const ConvShape& s, const T* dy, const T* w, T* dx);
// Accumulates into dw/db (caller zeroes when starting a fresh gradient).
template <typename T>
void conv2d_backward_filter(const ConvShape& s, const T* x, const T* dy, T* dw, T* db);

template <typename T>
void deconv2d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y);
template <typename T>
void deconv2d_backward_data(const ConvShape& s, const T* dy, const T* w, T* dx);
template <typename T>
void deconv2d_backward_filter(const ConvShape& s, const T* x, const T* dy, T* dw, T* db);

// 2x2/stride-2 max pooling; spatial dims must be even. idx holds the flat
// in-window argmax (0..3) per output cell.
template <typename T>
void maxpool2_forward(int64_t n, int64_t c, int64_t ih, int64_t iw, const T* x, T* y,
                      int32_t* idx);
template <typename T>
void maxpool2_backward(int64_t n, int64_t c, int64_t ih, int64_t iw, const T* dy,
                       const int32_t* idx, T* dx);

// Per-channel normalization over the batch (N*H*W statistics). xhat, mean and
// invstd are written for the backward pass.
template <typename T>
void batchnorm_forward(int64_t n, int64_t c, int64_t hw, const T* x, const T* gamma,
                       const T* beta, T eps, T* y, T* mean, T* invstd, T* xhat);
template <typename T>
void batchnorm_backward(int64_t n, int64_t c, int64_t hw, const T* dy, const T* gamma,
                        const T* invstd, const T* xhat, T* dx, T* dgamma, T* dbeta);

// C[m,:] (+)= sum_k A[m,k] * B[k,:].  A: MxK, B: KxN, C: MxN.
template <typename T>
void gemm(int64_t M, int64_t N, int64_t K, const T* A, const T* B, T* C, bool accumulate);
// C[m,n] += sum_p A[m,p] * B[n,p].  A: MxP, B: NxP, C: MxN.
template <typename T>
void gemm_abt(int64_t M, int64_t N, int64_t P, const T* A, const T* B, T* C);

// Single-sample im2col / col2im for the shapes above. col is (ic*kh*kw) x (oh*ow).
template <typename T>
void im2col(const ConvShape& s, const T* x, T* col);
template <typename T>
void col2im(const ConvShape& s, const T* col, T* x);

// Per-sample channel Gram: g[n,c,c'] = sum_j f[n,c,j] * f[n,c',j].
template <typename T>
void gram(int64_t n, int64_t c, int64_t hw, const T* f, T* g);
// df[n,c,j] = sum_c' (dg[n,c,c'] + dg[n,c',c]) * f[n,c',j].
template <typename T>
void gram_backward(int64_t n, int64_t c, int64_t hw, const T* f, const T* dg, T* df);

// Blocked sum with a fixed combine order; same bits for any thread count.
template <typename T>
T det_sum(const T* x, int64_t n);

}  // namespace ipaint::kern
