#pragma once

#include <array>

#include "ipaint/core/autograd.hpp"
#include "ipaint/nn/feature_stack.hpp"

namespace ipaint::loss {

// Objective weights: total = adv*L_adv + style*L_style + percep*L_percep +
// l1*L_L1, with per-tap weights inside the perceptual and style sums.
struct LossWeights {
    double adv = 1.0;
    double style = 10.0;
    double percep = 10.0;
    double l1 = 100.0;
    std::array<double, 4> percep_tap{1.0, 1.0, 1.0, 1.0};
    std::array<double, 6> style_tap{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};

    void validate() const;  // all weights nonnegative
};

// Clamp inside every log so saturated discriminators cannot produce inf.
constexpr double kLogEps = 1e-8;

// -[mean log sig(real) + mean log(1 - sig(fake))]; the discriminator
// maximizes the classic minimax objective, i.e. minimizes this.
template <typename T>
ag::Var<T> adversarial_loss_D(ag::Var<T> real_logits, ag::Var<T> fake_logits);

// Non-saturating generator loss, summed over the global and patch critics:
// -mean log sig(fake_g) - mean log sig(fake_p).
template <typename T>
ag::Var<T> adversarial_loss_G(ag::Var<T> fake_logits_global, ag::Var<T> fake_logits_patch);

// Sum_i lambda_i * MAE(taps_a[i], taps_b[i]) over patch-critic activations.
// Stacks must match in size (at most 4 taps) and shapes.
template <typename T>
ag::Var<T> perceptual_loss(const nn::FeatureStack<T>& taps_x,
                           const nn::FeatureStack<T>& taps_xhat,
                           const std::array<double, 4>& lambda);

// MAE(x, xhat) + 0.5 * MAE(x, xhat_intermediate), full image.
template <typename T>
ag::Var<T> pixel_l1(ag::Var<T> x, ag::Var<T> xhat, ag::Var<T> xhat_intermediate);

// Channel Gram of one feature map [c,h,w] (row-major M*M^T, no
// normalization), with the tap bookkeeping the style sum needs.
template <typename T>
struct GramMatrix {
    Tensor<T> values;  // [c, c]
    int tap_index = 0;
    int64_t d = 0;  // element count of the source map
};
template <typename T>
GramMatrix<T> gram_matrix(const Tensor<T>& fmap, int tap_index = 0);

// Sum_n lambda_n / (4*d_n^2) * ||Gram_n(xhat) - Gram_n(x)||_F^2, averaged
// over the batch. Stacks must match in size (at most 6 taps) and shapes.
template <typename T>
ag::Var<T> style_loss(const nn::FeatureStack<T>& taps_x,
                      const nn::FeatureStack<T>& taps_xhat,
                      const std::array<double, 6>& lambda);

// Same sum against precomputed target Grams (shape [n,c,c] per tap), letting
// the trainer cache them per image instead of re-running the extractor.
template <typename T>
ag::Var<T> style_loss_vs_grams(const std::vector<Tensor<T>>& target_grams,
                               const nn::FeatureStack<T>& taps_xhat,
                               const std::array<double, 6>& lambda);

template <typename T>
ag::Var<T> total_generator_loss(ag::Var<T> adv, ag::Var<T> style, ag::Var<T> percep,
                                ag::Var<T> l1, const LossWeights& w);

}  // namespace ipaint::loss
