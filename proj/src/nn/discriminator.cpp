#include "ipaint/nn/discriminator.hpp"

#include "ipaint/core/error.hpp"

namespace ipaint::nn {

template <typename T>
Discriminator<T>::Discriminator(DiscriminatorSpec spec, uint64_t seed)
    : spec_(std::move(spec)) {
    spec_.validate();
    Rng rng(seed);
    int64_t in_ch = 2;  // [candidate, condition]
    for (size_t i = 0; i < spec_.layers.size(); ++i) {
        const auto& l = spec_.layers[i];
        convs_.push_back(std::make_unique<Conv2d<T>>(in_ch, l.out_channels, l.kernel,
                                                     l.stride, /*pad=*/1, /*bias=*/true, rng));
        this->add_child("conv" + std::to_string(i), convs_.back().get());
        if (l.normalized) {
            norms_.push_back(std::make_unique<BatchNorm2d<T>>(l.out_channels));
            this->add_child("norm" + std::to_string(i), norms_.back().get());
        } else {
            norms_.push_back(nullptr);
        }
        in_ch = l.out_channels;
    }
}

template <typename T>
ag::Var<T> Discriminator<T>::forward(ag::Var<T> candidate, ag::Var<T> cond,
                                     FeatureStack<T>* taps) const {
    if (!candidate || !cond) throw DataError("discriminator needs candidate and condition");
    const auto& cs = candidate->value.shape();
    if (cs.size() != 4 || cs[1] != 1 || !candidate->value.same_shape(cond->value))
        throw DataError("discriminator inputs must be matching [n,1,h,w] batches");

    auto x = ag::concat_channels<T>({std::move(candidate), std::move(cond)});
    const size_t nf = static_cast<size_t>(spec_.feature_layers());
    for (size_t i = 0; i < spec_.layers.size(); ++i) {
        x = convs_[i]->forward(x);
        if (norms_[i]) x = norms_[i]->forward(x);
        if (spec_.layers[i].activation == Activation::LeakyRelu)
            x = ag::leaky_relu(x, T(0.2));
        if (taps && i < nf) taps->push(x);
    }
    if (spec_.kind == DiscKind::Global) x = ag::mean_per_sample(x);
    return x;
}

template class Discriminator<float>;
template class Discriminator<double>;

}  // namespace ipaint::nn
