#pragma once

#include "ipaint/core/kernels.hpp"

// Naive single-thread loop-nest implementations of the hot kernels. These are
// the ground truth the OpenMP kernels are tested against and the baseline the
// benchmark compares with. Do not optimize them.
namespace ipaint::ref {

using kern::ConvShape;

template <typename T>
void conv2d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y);
template <typename T>
void conv2d_backward_data(const ConvShape& s, const T* dy, const T* w, T* dx);
template <typename T>
void conv2d_backward_filter(const ConvShape& s, const T* x, const T* dy, T* dw, T* db);

template <typename T>
void deconv2d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y);

template <typename T>
void batchnorm_forward(int64_t n, int64_t c, int64_t hw, const T* x, const T* gamma,
                       const T* beta, T eps, T* y);

template <typename T>
void gram(int64_t n, int64_t c, int64_t hw, const T* f, T* g);

}  // namespace ipaint::ref
