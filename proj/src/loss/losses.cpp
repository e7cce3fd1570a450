#include "ipaint/loss/losses.hpp"

#include "ipaint/core/error.hpp"
#include "ipaint/core/kernels.hpp"

namespace ipaint::loss {

void LossWeights::validate() const {
    bool ok = adv >= 0 && style >= 0 && percep >= 0 && l1 >= 0;
    for (double v : percep_tap) ok = ok && v >= 0;
    for (double v : style_tap) ok = ok && v >= 0;
    if (!ok) throw DataError("loss weights must be nonnegative");
}

namespace {

template <typename T>
ag::Var<T> mean_log_sigmoid(ag::Var<T> logits) {
    return ag::mean_all(ag::log_clamped(ag::sigmoid(std::move(logits)), T(kLogEps)));
}

template <typename T>
ag::Var<T> mean_log_one_minus_sigmoid(ag::Var<T> logits) {
    auto flipped = ag::affine(ag::sigmoid(std::move(logits)), T(-1), T(1));
    return ag::mean_all(ag::log_clamped(std::move(flipped), T(kLogEps)));
}

}  // namespace

template <typename T>
ag::Var<T> adversarial_loss_D(ag::Var<T> real_logits, ag::Var<T> fake_logits) {
    return ag::weighted_sum<T>({{T(-1), mean_log_sigmoid(std::move(real_logits))},
                                {T(-1), mean_log_one_minus_sigmoid(std::move(fake_logits))}});
}

template <typename T>
ag::Var<T> adversarial_loss_G(ag::Var<T> fake_logits_global, ag::Var<T> fake_logits_patch) {
    return ag::weighted_sum<T>({{T(-1), mean_log_sigmoid(std::move(fake_logits_global))},
                                {T(-1), mean_log_sigmoid(std::move(fake_logits_patch))}});
}

template <typename T>
ag::Var<T> perceptual_loss(const nn::FeatureStack<T>& taps_x,
                           const nn::FeatureStack<T>& taps_xhat,
                           const std::array<double, 4>& lambda) {
    if (taps_x.size() != taps_xhat.size() || taps_x.size() < 1 || taps_x.size() > 4)
        throw DataError("perceptual loss expects matching stacks of 1..4 taps");
    std::vector<std::pair<T, ag::Var<T>>> terms;
    for (size_t i = 0; i < taps_x.size(); ++i) {
        if (!taps_x.taps[i]->value.same_shape(taps_xhat.taps[i]->value))
            throw DataError("perceptual loss tap " + std::to_string(i) + " shape mismatch");
        auto mae = ag::mean_all(ag::abs_op(ag::sub(taps_xhat.taps[i], taps_x.taps[i])));
        terms.push_back({static_cast<T>(lambda[i]), std::move(mae)});
    }
    return ag::weighted_sum<T>(terms);
}

template <typename T>
ag::Var<T> pixel_l1(ag::Var<T> x, ag::Var<T> xhat, ag::Var<T> xhat_intermediate) {
    auto final_term = ag::mean_all(ag::abs_op(ag::sub(x, std::move(xhat))));
    auto mid_term = ag::mean_all(ag::abs_op(ag::sub(x, std::move(xhat_intermediate))));
    return ag::weighted_sum<T>({{T(1), std::move(final_term)}, {T(0.5), std::move(mid_term)}});
}

template <typename T>
GramMatrix<T> gram_matrix(const Tensor<T>& fmap, int tap_index) {
    if (fmap.rank() != 3) throw DataError("gram_matrix expects a [c,h,w] map");
    const int64_t c = fmap.dim(0), hw = fmap.dim(1) * fmap.dim(2);
    GramMatrix<T> g;
    g.values = Tensor<T>({c, c});
    kern::gram(1, c, hw, fmap.data(), g.values.data());
    g.tap_index = tap_index;
    g.d = fmap.numel();
    return g;
}

template <typename T>
ag::Var<T> style_loss_vs_grams(const std::vector<Tensor<T>>& target_grams,
                               const nn::FeatureStack<T>& taps_xhat,
                               const std::array<double, 6>& lambda) {
    if (target_grams.size() != taps_xhat.size() || taps_xhat.size() < 1 ||
        taps_xhat.size() > 6)
        throw DataError("style loss expects matching stacks of 1..6 taps");
    std::vector<std::pair<T, ag::Var<T>>> terms;
    for (size_t n = 0; n < taps_xhat.size(); ++n) {
        auto gxh = ag::gram_op(taps_xhat.taps[n]);
        if (!gxh->value.same_shape(target_grams[n]))
            throw DataError("style loss tap " + std::to_string(n) + " shape mismatch");
        const int64_t batch = gxh->value.dim(0);
        auto fro2 = ag::sum_all(ag::square(ag::sub(gxh, ag::constant(target_grams[n]))));
        const double dn = static_cast<double>(taps_xhat.d[n]);
        terms.push_back({static_cast<T>(lambda[n] / (4.0 * dn * dn * batch)),
                         std::move(fro2)});
    }
    return ag::weighted_sum<T>(terms);
}

template <typename T>
ag::Var<T> style_loss(const nn::FeatureStack<T>& taps_x,
                      const nn::FeatureStack<T>& taps_xhat,
                      const std::array<double, 6>& lambda) {
    if (taps_x.size() != taps_xhat.size())
        throw DataError("style loss expects matching stacks of 1..6 taps");
    std::vector<Tensor<T>> target;
    for (size_t n = 0; n < taps_x.size(); ++n) {
        const auto& f = taps_x.taps[n]->value;
        if (!f.same_shape(taps_xhat.taps[n]->value))
            throw DataError("style loss tap " + std::to_string(n) + " shape mismatch");
        Tensor<T> g({f.dim(0), f.dim(1), f.dim(1)});
        kern::gram(f.dim(0), f.dim(1), f.dim(2) * f.dim(3), f.data(), g.data());
        target.push_back(std::move(g));
    }
    return style_loss_vs_grams(target, taps_xhat, lambda);
}

template <typename T>
ag::Var<T> total_generator_loss(ag::Var<T> adv, ag::Var<T> style, ag::Var<T> percep,
                                ag::Var<T> l1, const LossWeights& w) {
    w.validate();
    return ag::weighted_sum<T>({{static_cast<T>(w.adv), std::move(adv)},
                                {static_cast<T>(w.style), std::move(style)},
                                {static_cast<T>(w.percep), std::move(percep)},
                                {static_cast<T>(w.l1), std::move(l1)}});
}

#define IPAINT_INSTANTIATE_LOSS(T)                                                        \
    template ag::Var<T> adversarial_loss_D<T>(ag::Var<T>, ag::Var<T>);                    \
    template ag::Var<T> adversarial_loss_G<T>(ag::Var<T>, ag::Var<T>);                    \
    template ag::Var<T> perceptual_loss<T>(const nn::FeatureStack<T>&,                    \
                                           const nn::FeatureStack<T>&,                    \
                                           const std::array<double, 4>&);                 \
    template ag::Var<T> pixel_l1<T>(ag::Var<T>, ag::Var<T>, ag::Var<T>);                  \
    template GramMatrix<T> gram_matrix<T>(const Tensor<T>&, int);                         \
    template ag::Var<T> style_loss_vs_grams<T>(const std::vector<Tensor<T>>&,             \
                                               const nn::FeatureStack<T>&,                \
                                               const std::array<double, 6>&);             \
    template ag::Var<T> style_loss<T>(const nn::FeatureStack<T>&,                         \
                                      const nn::FeatureStack<T>&,                         \
                                      const std::array<double, 6>&);                      \
    template ag::Var<T> total_generator_loss<T>(ag::Var<T>, ag::Var<T>, ag::Var<T>,       \
                                                ag::Var<T>, const LossWeights&);

IPAINT_INSTANTIATE_LOSS(float)
IPAINT_INSTANTIATE_LOSS(double)

}  // namespace ipaint::loss
