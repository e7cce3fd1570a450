#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "ipaint/core/tensor.hpp"

// Minimal reverse-mode tape over NCHW tensors. A forward call builds a fresh
// DAG; backward(root) runs the recorded closures in reverse topological
// order, accumulating into each node's grad. Leaves owned by modules keep
// their grad across steps until zero_grad().
namespace ipaint::ag {

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated on first use, same shape as value
    bool requires_grad = false;
    std::vector<Var<T>> parents;
    // Pulls this node's grad into the parents' grads.
    std::function<void(Node<T>&)> backward_fn;

    Tensor<T>& ensure_grad() {
        if (grad.numel() != value.numel()) grad = Tensor<T>(value.shape());
        return grad;
    }
    void zero_grad() {
        if (grad.numel()) grad.fill(T(0));
    }
};

template <typename T>
Var<T> leaf(Tensor<T> value, bool requires_grad) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

template <typename T>
Var<T> constant(Tensor<T> value) {
    return leaf(std::move(value), false);
}

// Reverse pass from a scalar root.
template <typename T>
void backward(const Var<T>& root);

// --- Op library -----------------------------------------------------------

// x[n,ic,h,w] * w[oc,ic,kh,kw] (+ b[oc]) -> [n,oc,oh,ow]
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int64_t stride, int64_t pad);
// transposed conv, w[ic,oc,kh,kw], pad 0
template <typename T>
Var<T> deconv2d(Var<T> x, Var<T> w, Var<T> b, int64_t stride);
template <typename T>
Var<T> maxpool2(Var<T> x);
// batch-statistics normalization; gamma/beta are [c]
template <typename T>
Var<T> batchnorm(Var<T> x, Var<T> gamma, Var<T> beta, T eps);

template <typename T>
Var<T> relu(Var<T> x);
template <typename T>
Var<T> leaky_relu(Var<T> x, T slope);
template <typename T>
Var<T> tanh_op(Var<T> x);
template <typename T>
Var<T> sigmoid(Var<T> x);

// alpha * x + beta, elementwise
template <typename T>
Var<T> affine(Var<T> x, T alpha, T beta);
template <typename T>
Var<T> abs_op(Var<T> x);
template <typename T>
Var<T> square(Var<T> x);
// log(max(x, eps))
template <typename T>
Var<T> log_clamped(Var<T> x, T eps);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> sub(Var<T> a, Var<T> b);

template <typename T>
Var<T> concat_channels(std::vector<Var<T>> xs);

template <typename T>
Var<T> mean_all(Var<T> x);
template <typename T>
Var<T> sum_all(Var<T> x);
// (n,c,h,w) -> (n,1,1,1), mean over each sample's elements
template <typename T>
Var<T> mean_per_sample(Var<T> x);

// (n,c,h,w) -> (n,c,c) channel Gram per sample
template <typename T>
Var<T> gram_op(Var<T> f);

// Cuts the tape: same value, no gradient flow.
template <typename T>
Var<T> detach(Var<T> x);

// Weighted sum of scalar vars: sum_i coeff_i * term_i  -> scalar
template <typename T>
Var<T> weighted_sum(const std::vector<std::pair<T, Var<T>>>& terms);

}  // namespace ipaint::ag
