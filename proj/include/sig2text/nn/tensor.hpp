#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <numeric>
#include <string>
#include <vector>

#include "sig2text/error.hpp"

namespace sig2text::nn {

// 64-byte aligned storage. Eigen peels unaligned heads differently depending
// on the address, which would make reductions vary from run to run.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};
    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major tensor. Every op in this library treats it as a matrix of
/// shape[0] rows by (product of the remaining dims) columns.
template <class T>
struct Tensor {
    std::vector<std::size_t> shape;
    AlignedVector<T> data;

    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, T fill = T(0)) : shape{rows, cols}, data(rows * cols, fill) {}
    explicit Tensor(std::vector<std::size_t> dims, T fill = T(0))
        : shape(std::move(dims)),
          data(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()), fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.empty() || shape[0] == 0 ? 0 : data.size() / shape[0]; }

    T& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    T operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
    T* row(std::size_t r) { return data.data() + r * cols(); }
    const T* row(std::size_t r) const { return data.data() + r * cols(); }

    bool all_finite() const {
        for (const T& v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

template <class T>
MatMap<T> as_matrix(Tensor<T>& t) {
    return MatMap<T>(t.data.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

template <class T>
ConstMatMap<T> as_matrix(const Tensor<T>& t) {
    return ConstMatMap<T>(t.data.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

template <class T>
std::string shape_string(const Tensor<T>& t) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(t.shape[i]);
    }
    return s + ")";
}

}  // namespace sig2text::nn
