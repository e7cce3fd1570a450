#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ipaint/core/autograd.hpp"
#include "ipaint/core/container.hpp"
#include "ipaint/core/rng.hpp"

namespace ipaint::nn {

template <typename T>
struct Param {
    std::string name;  // dotted path, e.g. "stage1.enc0.branch1.conv.w"
    ag::Var<T> var;
};

// Base for everything with trainable parameters. Parameters and children are
// registered in construction order, which fixes the RNG draw order, the
// optimizer update order and the container layout.
template <typename T>
class Module {
public:
    virtual ~Module() = default;
    Module() = default;
    Module(const Module&) = delete;
    Module& operator=(const Module&) = delete;

    std::vector<Param<T>> params() const;
    int64_t param_count() const;
    void zero_grad();
    // Drops requires_grad on every parameter (frozen networks).
    void freeze();

    void save_params(io::Container& c, const std::string& prefix) const;
    // Loads by name; throws DataError listing anything missing or mis-shaped.
    void load_params(const io::Container& c, const std::string& prefix);
    // Digest over parameter payloads in registration order.
    std::string params_sha256() const;

protected:
    ag::Var<T> add_param(const std::string& name, Tensor<T> init);
    void add_child(const std::string& name, Module<T>* m);

private:
    void collect(const std::string& prefix, std::vector<Param<T>>& out) const;
    std::vector<std::pair<std::string, ag::Var<T>>> params_;
    std::vector<std::pair<std::string, Module<T>*>> children_;
};

template <typename T>
class Conv2d : public Module<T> {
public:
    // Zero-mean Gaussian weights (std 0.02 by family convention), zero bias.
    Conv2d(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride, int64_t pad, bool bias,
           Rng& rng);
    ag::Var<T> forward(ag::Var<T> x) const;

    ag::Var<T> w, b;  // b may be null
    int64_t stride, pad;
};

template <typename T>
class ConvTranspose2d : public Module<T> {
public:
    ConvTranspose2d(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride, bool bias,
                    Rng& rng);
    ag::Var<T> forward(ag::Var<T> x) const;

    ag::Var<T> w, b;
    int64_t stride;
};

template <typename T>
class BatchNorm2d : public Module<T> {
public:
    explicit BatchNorm2d(int64_t channels, T eps = T(1e-5));
    ag::Var<T> forward(ag::Var<T> x) const;

    ag::Var<T> gamma, beta;
    T eps;
};

// Adam with decoupled per-network instances; moments are part of checkpoints.
template <typename T>
class Adam {
public:
    Adam(std::vector<Param<T>> params, T lr, T beta1, T beta2, T eps = T(1e-8));

    void step();
    void zero_grad();

    void save_state(io::Container& c, const std::string& prefix) const;
    void load_state(const io::Container& c, const std::string& prefix);

    int64_t t() const { return t_; }
    T lr;

private:
    std::vector<Param<T>> params_;
    std::vector<Tensor<T>> m_, v_;
    T beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

}  // namespace ipaint::nn
