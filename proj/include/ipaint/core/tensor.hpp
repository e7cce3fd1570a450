#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "ipaint/core/error.hpp"

namespace ipaint {

// Dense row-major tensor. Network code uses NCHW throughout.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(numel_of(shape_)), T(0));
    }

    Tensor(std::vector<int64_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<int64_t>(data_.size()) != numel_of(shape_))
            throw DataError("tensor: data size does not match shape");
    }

    static Tensor full(std::vector<int64_t> shape, T value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    static Tensor scalar(T value) { return full({1}, value); }

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t dim(size_t i) const { return shape_.at(i); }
    size_t rank() const { return shape_.size(); }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    T operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Slow indexed access, test and setup code only.
    T& at(std::initializer_list<int64_t> idx) {
        return data_[static_cast<size_t>(flat_index(idx))];
    }
    T at(std::initializer_list<int64_t> idx) const {
        return data_[static_cast<size_t>(flat_index(idx))];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
        return out;
    }

    static int64_t numel_of(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            if (d < 0) throw DataError("tensor: negative dimension");
            n *= d;
        }
        return n;
    }

private:
    int64_t flat_index(std::initializer_list<int64_t> idx) const {
        if (idx.size() != shape_.size()) throw DataError("tensor: index rank mismatch");
        int64_t flat = 0;
        size_t k = 0;
        for (int64_t i : idx) {
            flat = flat * shape_[k] + i;
            ++k;
        }
        return flat;
    }

    std::vector<int64_t> shape_;
    std::vector<T> data_;
};

}  // namespace ipaint
