#pragma once

#include <array>
#include <memory>
#include <string>

#include "ipaint/nn/feature_stack.hpp"
#include "ipaint/nn/module.hpp"

namespace ipaint::nn {

// Frozen 16-conv feature extractor (the classic 19-layer ImageNet topology).
// Weights come from a named-array container produced by tools/export_vgg19.py;
// parameters take no gradients, but gradients flow through to the input.
template <typename T>
class Vgg19Extractor : public Module<T> {
public:
    static constexpr int kConvs = 16;
    static constexpr int kTaps = 6;

    // Output channels per conv layer; pools sit after convs 1, 3, 7 and 11.
    static const std::array<int64_t, kConvs>& conv_channels();
    // Conv indices whose rectified activation is tapped: the first conv of
    // each of the five blocks plus the last conv of block five.
    static const std::array<int, kTaps>& tap_convs();
    static const std::array<const char*, kTaps>& tap_names();

    explicit Vgg19Extractor(const std::string& weights_path);

    // img: [n,1,h,w] in signed range, h and w divisible by 16. Internally
    // maps to [0,1], replicates to 3 channels and applies the published
    // per-channel mean/std normalization.
    FeatureStack<T> extract(ag::Var<T> img) const;

    // SHA-256 of the weight container's payload (for pinning and the
    // frozen-weights audit).
    const std::string& weights_sha256() const { return weights_sha_; }

private:
    std::vector<std::unique_ptr<Conv2d<T>>> convs_;
    std::string weights_sha_;
};

}  // namespace ipaint::nn
