#include "ipaint/core/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ipaint/core/error.hpp"
#include "ipaint/core/kernels.hpp"

namespace ipaint::ag {

namespace {

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
    T* d = dst.data();
    const T* s = src.data();
    const int64_t n = dst.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) d[i] += s[i];
}

template <typename T>
Var<T> make_node(Tensor<T> value, std::vector<Var<T>> parents,
                 std::function<void(Node<T>&)> backward_fn) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p && p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backward_fn = std::move(backward_fn);
    return n;
}

}  // namespace

template <typename T>
void backward(const Var<T>& root) {
    if (!root || root->value.numel() != 1)
        throw NumericError("backward: root must be a scalar");
    if (!root->requires_grad) return;

    // iterative post-order DFS; graphs get deep enough that recursion is out
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* p = node->parents[next++].get();
            if (p && p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad().fill(T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_fn && n->grad.numel()) n->backward_fn(*n);
    }
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int64_t stride, int64_t pad) {
    const auto& xs = x->value.shape();
    const auto& ws = w->value.shape();
    if (xs.size() != 4 || ws.size() != 4) throw DataError("conv2d: expected 4-d tensors");
    if (xs[1] != ws[1])
        throw DataError("conv2d: input has " + std::to_string(xs[1]) + " channels, filter expects " +
                        std::to_string(ws[1]));
    auto s = kern::ConvShape::conv(xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], stride, pad);
    Tensor<T> y({s.n, s.oc, s.oh, s.ow});
    kern::conv2d_forward(s, x->value.data(), w->value.data(), b ? b->value.data() : nullptr,
                         y.data());
    std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    return make_node<T>(std::move(y), std::move(parents), [s](Node<T>& self) {
        auto& x_ = self.parents[0];
        auto& w_ = self.parents[1];
        Var<T> b_ = self.parents.size() > 2 ? self.parents[2] : nullptr;
        if (x_->requires_grad) {
            Tensor<T> dx(x_->value.shape());
            kern::conv2d_backward_data(s, self.grad.data(), w_->value.data(), dx.data());
            accumulate(x_->ensure_grad(), dx);
        }
        if (w_->requires_grad)
            kern::conv2d_backward_filter(s, x_->value.data(), self.grad.data(),
                                         w_->ensure_grad().data(),
                                         (b_ && b_->requires_grad) ? b_->ensure_grad().data()
                                                                   : nullptr);
    });
}

template <typename T>
Var<T> deconv2d(Var<T> x, Var<T> w, Var<T> b, int64_t stride) {
    const auto& xs = x->value.shape();
    const auto& ws = w->value.shape();  // [ic, oc, kh, kw]
    if (xs[1] != ws[0]) throw DataError("deconv2d: channel mismatch");
    auto s = kern::ConvShape::deconv(xs[0], xs[1], xs[2], xs[3], ws[1], ws[2], stride);
    Tensor<T> y({s.n, s.oc, s.oh, s.ow});
    kern::deconv2d_forward(s, x->value.data(), w->value.data(), b ? b->value.data() : nullptr,
                           y.data());
    std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    return make_node<T>(std::move(y), std::move(parents), [s](Node<T>& self) {
        auto& x_ = self.parents[0];
        auto& w_ = self.parents[1];
        Var<T> b_ = self.parents.size() > 2 ? self.parents[2] : nullptr;
        if (x_->requires_grad) {
            Tensor<T> dx(x_->value.shape());
            kern::deconv2d_backward_data(s, self.grad.data(), w_->value.data(), dx.data());
            accumulate(x_->ensure_grad(), dx);
        }
        if (w_->requires_grad)
            kern::deconv2d_backward_filter(s, x_->value.data(), self.grad.data(),
                                           w_->ensure_grad().data(),
                                           (b_ && b_->requires_grad) ? b_->ensure_grad().data()
                                                                     : nullptr);
    });
}

template <typename T>
Var<T> maxpool2(Var<T> x) {
    const auto& xs = x->value.shape();
    if (xs[2] % 2 || xs[3] % 2) throw DataError("maxpool2: spatial dims must be even");
    const int64_t n = xs[0], c = xs[1], ih = xs[2], iw = xs[3];
    Tensor<T> y({n, c, ih / 2, iw / 2});
    auto idx = std::make_shared<Tensor<int32_t>>(y.shape());
    kern::maxpool2_forward(n, c, ih, iw, x->value.data(), y.data(), idx->data());
    return make_node<T>(std::move(y), {x}, [n, c, ih, iw, idx](Node<T>& self) {
        auto& x_ = self.parents[0];
        Tensor<T> dx(x_->value.shape());
        kern::maxpool2_backward(n, c, ih, iw, self.grad.data(), idx->data(), dx.data());
        accumulate(x_->ensure_grad(), dx);
    });
}

template <typename T>
Var<T> batchnorm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
    const auto& xs = x->value.shape();
    const int64_t n = xs[0], c = xs[1], hw = xs[2] * xs[3];
    if (gamma->value.numel() != c || beta->value.numel() != c)
        throw DataError("batchnorm: gamma/beta must have one entry per channel");
    Tensor<T> y(xs);
    auto mean = std::make_shared<Tensor<T>>(std::vector<int64_t>{c});
    auto invstd = std::make_shared<Tensor<T>>(std::vector<int64_t>{c});
    auto xhat = std::make_shared<Tensor<T>>(xs);
    kern::batchnorm_forward(n, c, hw, x->value.data(), gamma->value.data(), beta->value.data(),
                            eps, y.data(), mean->data(), invstd->data(), xhat->data());
    return make_node<T>(std::move(y), {x, gamma, beta}, [n, c, hw, invstd, xhat](Node<T>& self) {
        auto& x_ = self.parents[0];
        auto& g_ = self.parents[1];
        auto& b_ = self.parents[2];
        Tensor<T> dx(x_->value.shape());
        Tensor<T> dg({c}), db({c});
        kern::batchnorm_backward(n, c, hw, self.grad.data(), g_->value.data(), invstd->data(),
                                 xhat->data(), dx.data(), dg.data(), db.data());
        if (x_->requires_grad) accumulate(x_->ensure_grad(), dx);
        if (g_->requires_grad) accumulate(g_->ensure_grad(), dg);
        if (b_->requires_grad) accumulate(b_->ensure_grad(), db);
    });
}

namespace {

// Shared scaffolding for unary elementwise ops: fwd maps value, bwd returns
// the local derivative given (input, output).
template <typename T, typename F, typename G>
Var<T> unary_op(Var<T> x, F fwd, G dfdx) {
    const int64_t n = x->value.numel();
    Tensor<T> y(x->value.shape());
    const T* xp = x->value.data();
    T* yp = y.data();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) yp[i] = fwd(xp[i]);
    return make_node<T>(std::move(y), {x}, [dfdx](Node<T>& self) {
        auto& x_ = self.parents[0];
        T* gx = x_->ensure_grad().data();
        const T* gy = self.grad.data();
        const T* xp_ = x_->value.data();
        const T* yp_ = self.value.data();
        const int64_t m = self.value.numel();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < m; ++i) gx[i] += gy[i] * dfdx(xp_[i], yp_[i]);
    });
}

}  // namespace

template <typename T>
Var<T> relu(Var<T> x) {
    return unary_op<T>(
        x, [](T v) { return v > T(0) ? v : T(0); },
        [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(Var<T> x, T slope) {
    return unary_op<T>(
        x, [slope](T v) { return v > T(0) ? v : slope * v; },
        [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> tanh_op(Var<T> x) {
    return unary_op<T>(
        x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
    return unary_op<T>(
        x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> affine(Var<T> x, T alpha, T beta) {
    return unary_op<T>(
        x, [alpha, beta](T v) { return alpha * v + beta; },
        [alpha](T, T) { return alpha; });
}

template <typename T>
Var<T> abs_op(Var<T> x) {
    return unary_op<T>(
        x, [](T v) { return std::abs(v); },
        [](T v, T) { return v >= T(0) ? T(1) : T(-1); });
}

template <typename T>
Var<T> square(Var<T> x) {
    return unary_op<T>(
        x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Var<T> log_clamped(Var<T> x, T eps) {
    // clamp only real underflow; NaN must stay NaN so corrupted runs abort
    return unary_op<T>(
        x, [eps](T v) { return std::log(std::isnan(v) ? v : (v > eps ? v : eps)); },
        [eps](T v, T) { return v > eps ? T(1) / v : T(0); });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    if (!a->value.same_shape(b->value)) throw DataError("add: shape mismatch");
    Tensor<T> y(a->value.shape());
    const int64_t n = y.numel();
    const T* ap = a->value.data();
    const T* bp = b->value.data();
    T* yp = y.data();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) yp[i] = ap[i] + bp[i];
    return make_node<T>(std::move(y), {a, b}, [](Node<T>& self) {
        for (auto& p : self.parents)
            if (p->requires_grad) accumulate(p->ensure_grad(), self.grad);
    });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    if (!a->value.same_shape(b->value)) throw DataError("sub: shape mismatch");
    Tensor<T> y(a->value.shape());
    const int64_t n = y.numel();
    const T* ap = a->value.data();
    const T* bp = b->value.data();
    T* yp = y.data();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) yp[i] = ap[i] - bp[i];
    return make_node<T>(std::move(y), {a, b}, [](Node<T>& self) {
        auto& a_ = self.parents[0];
        auto& b_ = self.parents[1];
        if (a_->requires_grad) accumulate(a_->ensure_grad(), self.grad);
        if (b_->requires_grad) {
            T* g = b_->ensure_grad().data();
            const T* gy = self.grad.data();
            const int64_t m = self.grad.numel();
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < m; ++i) g[i] -= gy[i];
        }
    });
}

template <typename T>
Var<T> concat_channels(std::vector<Var<T>> xs) {
    if (xs.empty()) throw DataError("concat: no inputs");
    const auto& s0 = xs[0]->value.shape();
    int64_t ctotal = 0;
    for (const auto& v : xs) {
        const auto& s = v->value.shape();
        if (s.size() != 4 || s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3])
            throw DataError("concat: incompatible shapes");
        ctotal += s[1];
    }
    const int64_t n = s0[0], hw = s0[2] * s0[3];
    Tensor<T> y({n, ctotal, s0[2], s0[3]});
    int64_t coff = 0;
    for (const auto& v : xs) {
        const int64_t c = v->value.dim(1);
        for (int64_t b = 0; b < n; ++b)
            std::copy(v->value.data() + b * c * hw, v->value.data() + (b + 1) * c * hw,
                      y.data() + (b * ctotal + coff) * hw);
        coff += c;
    }
    return make_node<T>(std::move(y), std::move(xs), [ctotal, hw](Node<T>& self) {
        const int64_t n_ = self.value.dim(0);
        int64_t coff_ = 0;
        for (auto& p : self.parents) {
            const int64_t c = p->value.dim(1);
            if (p->requires_grad) {
                T* g = p->ensure_grad().data();
                const T* gy = self.grad.data();
                for (int64_t b = 0; b < n_; ++b) {
                    const T* src = gy + (b * ctotal + coff_) * hw;
                    T* dst = g + b * c * hw;
                    for (int64_t i = 0; i < c * hw; ++i) dst[i] += src[i];
                }
            }
            coff_ += c;
        }
    });
}

template <typename T>
Var<T> mean_all(Var<T> x) {
    const int64_t n = x->value.numel();
    Tensor<T> y = Tensor<T>::scalar(kern::det_sum(x->value.data(), n) / static_cast<T>(n));
    return make_node<T>(std::move(y), {x}, [n](Node<T>& self) {
        auto& x_ = self.parents[0];
        const T g = self.grad[0] / static_cast<T>(n);
        T* gx = x_->ensure_grad().data();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) gx[i] += g;
    });
}

template <typename T>
Var<T> sum_all(Var<T> x) {
    const int64_t n = x->value.numel();
    Tensor<T> y = Tensor<T>::scalar(kern::det_sum(x->value.data(), n));
    return make_node<T>(std::move(y), {x}, [n](Node<T>& self) {
        auto& x_ = self.parents[0];
        const T g = self.grad[0];
        T* gx = x_->ensure_grad().data();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) gx[i] += g;
    });
}

template <typename T>
Var<T> mean_per_sample(Var<T> x) {
    const auto& s = x->value.shape();
    if (s.size() != 4) throw DataError("mean_per_sample: expected 4-d tensor");
    const int64_t n = s[0], m = s[1] * s[2] * s[3];
    Tensor<T> y({n, 1, 1, 1});
    for (int64_t b = 0; b < n; ++b)
        y[b] = kern::det_sum(x->value.data() + b * m, m) / static_cast<T>(m);
    return make_node<T>(std::move(y), {x}, [n, m](Node<T>& self) {
        auto& x_ = self.parents[0];
        T* gx = x_->ensure_grad().data();
        const T* gy = self.grad.data();
#pragma omp parallel for schedule(static)
        for (int64_t b = 0; b < n; ++b) {
            const T g = gy[b] / static_cast<T>(m);
            for (int64_t i = 0; i < m; ++i) gx[b * m + i] += g;
        }
    });
}

template <typename T>
Var<T> gram_op(Var<T> f) {
    const auto& s = f->value.shape();
    if (s.size() != 4) throw DataError("gram: expected 4-d feature map");
    const int64_t n = s[0], c = s[1], hw = s[2] * s[3];
    Tensor<T> g({n, c, c});
    kern::gram(n, c, hw, f->value.data(), g.data());
    return make_node<T>(std::move(g), {f}, [n, c, hw](Node<T>& self) {
        auto& f_ = self.parents[0];
        Tensor<T> df(f_->value.shape());
        kern::gram_backward(n, c, hw, f_->value.data(), self.grad.data(), df.data());
        accumulate(f_->ensure_grad(), df);
    });
}

template <typename T>
Var<T> detach(Var<T> x) {
    return leaf(x->value, false);
}

template <typename T>
Var<T> weighted_sum(const std::vector<std::pair<T, Var<T>>>& terms) {
    T total(0);
    std::vector<Var<T>> parents;
    std::vector<T> coeffs;
    for (const auto& [w, v] : terms) {
        if (v->value.numel() != 1) throw DataError("weighted_sum: terms must be scalars");
        total += w * v->value[0];
        parents.push_back(v);
        coeffs.push_back(w);
    }
    return make_node<T>(Tensor<T>::scalar(total), std::move(parents),
                        [coeffs](Node<T>& self) {
                            const T g = self.grad[0];
                            for (size_t i = 0; i < self.parents.size(); ++i) {
                                auto& p = self.parents[i];
                                if (p->requires_grad) p->ensure_grad()[0] += coeffs[i] * g;
                            }
                        });
}

#define IPAINT_INSTANTIATE_AG(T)                                                      \
    template void backward<T>(const Var<T>&);                                         \
    template Var<T> conv2d<T>(Var<T>, Var<T>, Var<T>, int64_t, int64_t);              \
    template Var<T> deconv2d<T>(Var<T>, Var<T>, Var<T>, int64_t);                     \
    template Var<T> maxpool2<T>(Var<T>);                                              \
    template Var<T> batchnorm<T>(Var<T>, Var<T>, Var<T>, T);                          \
    template Var<T> relu<T>(Var<T>);                                                  \
    template Var<T> leaky_relu<T>(Var<T>, T);                                         \
    template Var<T> tanh_op<T>(Var<T>);                                               \
    template Var<T> sigmoid<T>(Var<T>);                                               \
    template Var<T> affine<T>(Var<T>, T, T);                                          \
    template Var<T> abs_op<T>(Var<T>);                                                \
    template Var<T> square<T>(Var<T>);                                                \
    template Var<T> log_clamped<T>(Var<T>, T);                                        \
    template Var<T> add<T>(Var<T>, Var<T>);                                           \
    template Var<T> sub<T>(Var<T>, Var<T>);                                           \
    template Var<T> concat_channels<T>(std::vector<Var<T>>);                          \
    template Var<T> mean_all<T>(Var<T>);                                              \
    template Var<T> sum_all<T>(Var<T>);                                               \
    template Var<T> mean_per_sample<T>(Var<T>);                                       \
    template Var<T> gram_op<T>(Var<T>);                                               \
    template Var<T> detach<T>(Var<T>);                                                \
    template Var<T> weighted_sum<T>(const std::vector<std::pair<T, Var<T>>>&);

IPAINT_INSTANTIATE_AG(float)
IPAINT_INSTANTIATE_AG(double)

}  // namespace ipaint::ag
