#pragma once

#include <memory>

#include "ipaint/nn/disc_spec.hpp"
#include "ipaint/nn/feature_stack.hpp"
#include "ipaint/nn/module.hpp"

namespace ipaint::nn {

// Conditional discriminator over [candidate, condition] channel pairs.
// Patch kind returns the raw patch-logit map and exposes the four feature
// activations (the R_i taps of the perceptual loss); global kind averages
// its logits to one scalar per sample. Sigmoids are applied at loss time.
template <typename T>
class Discriminator : public Module<T> {
public:
    Discriminator(DiscriminatorSpec spec, uint64_t seed);

    // candidate and cond must both be [n,1,h,w] of identical shape.
    ag::Var<T> forward(ag::Var<T> candidate, ag::Var<T> cond,
                       FeatureStack<T>* taps = nullptr) const;

    const DiscriminatorSpec& spec() const { return spec_; }

private:
    DiscriminatorSpec spec_;
    std::vector<std::unique_ptr<Conv2d<T>>> convs_;
    std::vector<std::unique_ptr<BatchNorm2d<T>>> norms_;  // entry is null where unnormalized
};

}  // namespace ipaint::nn
