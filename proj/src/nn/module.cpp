#include "ipaint/nn/module.hpp"

#include <cmath>

#include "ipaint/core/sha256.hpp"

namespace ipaint::nn {

template <typename T>
ag::Var<T> Module<T>::add_param(const std::string& name, Tensor<T> init) {
    auto v = ag::leaf(std::move(init), true);
    params_.emplace_back(name, v);
    return v;
}

template <typename T>
void Module<T>::add_child(const std::string& name, Module<T>* m) {
    children_.emplace_back(name, m);
}

template <typename T>
void Module<T>::collect(const std::string& prefix, std::vector<Param<T>>& out) const {
    for (const auto& [name, var] : params_)
        out.push_back({prefix.empty() ? name : prefix + "." + name, var});
    for (const auto& [name, child] : children_)
        child->collect(prefix.empty() ? name : prefix + "." + name, out);
}

template <typename T>
std::vector<Param<T>> Module<T>::params() const {
    std::vector<Param<T>> out;
    collect("", out);
    return out;
}

template <typename T>
int64_t Module<T>::param_count() const {
    int64_t n = 0;
    for (const auto& p : params()) n += p.var->value.numel();
    return n;
}

template <typename T>
void Module<T>::zero_grad() {
    for (auto& p : params()) p.var->zero_grad();
}

template <typename T>
void Module<T>::freeze() {
    for (auto& p : params()) p.var->requires_grad = false;
}

template <typename T>
void Module<T>::save_params(io::Container& c, const std::string& prefix) const {
    for (const auto& p : params())
        c.put(prefix.empty() ? p.name : prefix + "." + p.name, p.var->value);
}

template <typename T>
void Module<T>::load_params(const io::Container& c, const std::string& prefix) {
    std::string missing;
    for (auto& p : params()) {
        const std::string key = prefix.empty() ? p.name : prefix + "." + p.name;
        if (!c.has(key)) {
            missing += (missing.empty() ? "" : ", ") + key;
            continue;
        }
        Tensor<T> t = c.template get<T>(key);
        if (t.shape() != p.var->value.shape())
            throw DataError("load: shape mismatch for '" + key + "'");
        p.var->value = std::move(t);
    }
    if (!missing.empty()) throw DataError("load: missing arrays: " + missing);
}

template <typename T>
std::string Module<T>::params_sha256() const {
    Sha256 sha;
    for (const auto& p : params())
        sha.update(p.var->value.data(),
                   static_cast<size_t>(p.var->value.numel()) * sizeof(T));
    return sha.hex();
}

namespace {
template <typename T>
Tensor<T> gaussian_init(std::vector<int64_t> shape, Rng& rng, double stddev) {
    Tensor<T> t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal(0.0, stddev));
    return t;
}
}  // namespace

template <typename T>
Conv2d<T>::Conv2d(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride_, int64_t pad_,
                  bool bias, Rng& rng)
    : stride(stride_), pad(pad_) {
    w = this->add_param("w", gaussian_init<T>({out_ch, in_ch, k, k}, rng, 0.02));
    if (bias) b = this->add_param("b", Tensor<T>({out_ch}));
}

template <typename T>
ag::Var<T> Conv2d<T>::forward(ag::Var<T> x) const {
    return ag::conv2d(std::move(x), w, b, stride, pad);
}

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride_,
                                    bool bias, Rng& rng)
    : stride(stride_) {
    w = this->add_param("w", gaussian_init<T>({in_ch, out_ch, k, k}, rng, 0.02));
    if (bias) b = this->add_param("b", Tensor<T>({out_ch}));
}

template <typename T>
ag::Var<T> ConvTranspose2d<T>::forward(ag::Var<T> x) const {
    return ag::deconv2d(std::move(x), w, b, stride);
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(int64_t channels, T eps_) : eps(eps_) {
    gamma = this->add_param("gamma", Tensor<T>::full({channels}, T(1)));
    beta = this->add_param("beta", Tensor<T>({channels}));
}

template <typename T>
ag::Var<T> BatchNorm2d<T>::forward(ag::Var<T> x) const {
    return ag::batchnorm(std::move(x), gamma, beta, eps);
}

template <typename T>
Adam<T>::Adam(std::vector<Param<T>> params, T lr_, T beta1, T beta2, T eps)
    : lr(lr_), params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        m_.emplace_back(p.var->value.shape());
        v_.emplace_back(p.var->value.shape());
    }
}

template <typename T>
void Adam<T>::step() {
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i].var;
        if (!p->grad.numel()) continue;  // never touched by a backward pass
        T* w = p->value.data();
        const T* g = p->grad.data();
        T* m = m_[i].data();
        T* v = v_[i].data();
        const int64_t n = p->value.numel();
        for (int64_t j = 0; j < n; ++j) {
            m[j] = beta1_ * m[j] + (T(1) - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (T(1) - beta2_) * g[j] * g[j];
            w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
        }
    }
}

template <typename T>
void Adam<T>::zero_grad() {
    for (auto& p : params_) p.var->zero_grad();
}

template <typename T>
void Adam<T>::save_state(io::Container& c, const std::string& prefix) const {
    for (size_t i = 0; i < params_.size(); ++i) {
        c.put(prefix + ".m." + params_[i].name, m_[i]);
        c.put(prefix + ".v." + params_[i].name, v_[i]);
    }
    c.put(prefix + ".t", Tensor<T>::scalar(static_cast<T>(t_)));
}

template <typename T>
void Adam<T>::load_state(const io::Container& c, const std::string& prefix) {
    for (size_t i = 0; i < params_.size(); ++i) {
        m_[i] = c.template get<T>(prefix + ".m." + params_[i].name);
        v_[i] = c.template get<T>(prefix + ".v." + params_[i].name);
    }
    t_ = static_cast<int64_t>(c.template get<T>(prefix + ".t")[0]);
}

template class Module<float>;
template class Module<double>;
template class Conv2d<float>;
template class Conv2d<double>;
template class ConvTranspose2d<float>;
template class ConvTranspose2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class Adam<float>;
template class Adam<double>;

}  // namespace ipaint::nn
