#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "ffad/common.hpp"

// Dense row-major tensors, rank 1..3, double precision throughout.
// Complex values are (re, im) pairs; std::complex<double> guarantees
// that layout.

namespace ffad {

namespace detail {
inline size_t shape_numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}
}  // namespace detail

template <typename T>
struct basic_tensor {
  std::vector<size_t> shape;
  std::vector<T> data;  // row-major, size == product(shape)

  basic_tensor() = default;
  explicit basic_tensor(std::vector<size_t> s)
      : shape(std::move(s)), data(detail::shape_numel(shape)) {}
  basic_tensor(std::vector<size_t> s, std::vector<T> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != detail::shape_numel(shape))
      throw numeric_error("tensor data size does not match shape");
  }

  static basic_tensor zeros(std::vector<size_t> s) { return basic_tensor(std::move(s)); }
  static basic_tensor scalar(T v) {
    basic_tensor t({1});
    t.data[0] = v;
    return t;
  }

  size_t numel() const { return data.size(); }
  size_t rank() const { return shape.size(); }
  size_t dim(size_t i) const { return shape[i]; }

  T& at(size_t i) { return data[i]; }
  const T& at(size_t i) const { return data[i]; }
  T& at(size_t i, size_t j) { return data[i * shape[1] + j]; }
  const T& at(size_t i, size_t j) const { return data[i * shape[1] + j]; }
  T& at(size_t i, size_t j, size_t k) { return data[(i * shape[1] + j) * shape[2] + k]; }
  const T& at(size_t i, size_t j, size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }

  bool same_shape(const basic_tensor& o) const { return shape == o.shape; }
};

using real_tensor = basic_tensor<double>;
using complex_tensor = basic_tensor<std::complex<double>>;

inline real_tensor make_real(std::vector<size_t> shape, std::initializer_list<double> v) {
  return real_tensor(std::move(shape), std::vector<double>(v));
}

}  // namespace ffad
