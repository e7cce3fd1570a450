#pragma once

#include <vector>

#include "ipaint/core/autograd.hpp"

namespace ipaint::nn {

// Ordered activation taps plus each tap's element count C*H*W (the d_n the
// style normalization divides by).
template <typename T>
struct FeatureStack {
    std::vector<ag::Var<T>> taps;
    std::vector<int64_t> d;

    void push(ag::Var<T> tap) {
        const auto& s = tap->value.shape();
        d.push_back(s[1] * s[2] * s[3]);
        taps.push_back(std::move(tap));
    }
    size_t size() const { return taps.size(); }
};

}  // namespace ipaint::nn
