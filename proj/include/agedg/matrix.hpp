#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "agedg/dual.hpp"
#include "agedg/error.hpp"
#include "agedg/kernels.hpp"

namespace agedg {

/// Dense row-major matrix. Rows are samples throughout the library.
template <class T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T(0.0)) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

template <class To, class From>
Matrix<To> matrix_cast(const Matrix<From>& m) {
  Matrix<To> out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) out.data[i] = To(m.data[i]);
  return out;
}

namespace linalg {

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  if constexpr (std::is_same_v<T, double>) {
    return kernels::dot(a, b);
  } else {
    T acc(0.0);
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
  }
}

template <class T>
void axpy(T alpha, std::span<const T> x, std::span<T> y) {
  if constexpr (std::is_same_v<T, double>) {
    kernels::axpy(alpha, x, y);
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
  }
}

/// y = x W^T + b, with W stored out x in.
template <class T>
void dense_forward(const Matrix<T>& x, std::span<const T> weight, std::span<const T> bias,
                   Matrix<T>& y) {
  const std::size_t in = x.cols;
  const std::size_t out = bias.size();
  if (weight.size() != in * out) {
    throw ShapeError("dense layer expects " + std::to_string(weight.size() / out) +
                     " inputs, got " + std::to_string(in));
  }
  y = Matrix<T>(x.rows, out);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto xr = x.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      y(r, o) = bias[o] + dot<T>(xr, weight.subspan(o * in, in));
    }
  }
}

/// Accumulates dW += dy^T x and db += colsum(dy); writes dx = dy W when requested.
template <class T>
void dense_backward(const Matrix<T>& x, std::span<const T> weight, const Matrix<T>& dy,
                    std::span<T> dweight, std::span<T> dbias, Matrix<T>* dx) {
  const std::size_t in = x.cols;
  const std::size_t out = dy.cols;
  if (dx != nullptr) *dx = Matrix<T>(x.rows, in);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto xr = x.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      const T g = dy(r, o);
      dbias[o] += g;
      axpy<T>(g, xr, dweight.subspan(o * in, in));
      if (dx != nullptr) axpy<T>(g, weight.subspan(o * in, in), dx->row(r));
    }
  }
}

}  // namespace linalg
}  // namespace agedg
