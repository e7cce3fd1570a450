#pragma once

#include "ipaint/img/image.hpp"

namespace ipaint::img {

// Synthetic brain-like slice: dark background, one large head ellipse,
// 5-10 interior ellipses of varied intensity, a smooth multiplicative bias
// field and additive Gaussian noise (sigma = 1% of the intensity range).
// Deterministic per seed; result is tagged signed. If head_fraction is
// non-null it receives the exact fraction of pixels inside the head ellipse.
ImageSlice generate_phantom(uint64_t seed, int64_t h, int64_t w,
                            double* head_fraction = nullptr);

}  // namespace ipaint::img
