#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lincirc/util.hpp"

namespace lincirc {

inline std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) fail("shape-error", "non-positive dimension in shape");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor. Element type is float in the production pipeline;
// the double instantiation backs oracle tests and exact graph algebra.
template <class T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;
  TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<std::int64_t>(data.size()) != shape_numel(shape))
      fail("shape-error", "data length does not match shape " + shape_str(shape));
  }

  static TensorT zeros(std::vector<int> s) {
    std::int64_t n = shape_numel(s);
    return TensorT(std::move(s), std::vector<T>(static_cast<std::size_t>(n), T(0)));
  }
  static TensorT full(std::vector<int> s, T v) {
    std::int64_t n = shape_numel(s);
    return TensorT(std::move(s), std::vector<T>(static_cast<std::size_t>(n), v));
  }
  static TensorT scalar(T v) { return TensorT({1}, {v}); }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  bool is_scalar() const { return numel() == 1; }

  int rows() const {
    if (rank() != 2) fail("shape-error", "rows(): tensor is not 2-D: " + shape_str(shape));
    return shape[0];
  }
  int cols() const {
    if (rank() != 2) fail("shape-error", "cols(): tensor is not 2-D: " + shape_str(shape));
    return shape[1];
  }

  T& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  T at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }
  T* row(int r) { return data.data() + static_cast<std::size_t>(r) * shape.back(); }
  const T* row(int r) const { return data.data() + static_cast<std::size_t>(r) * shape.back(); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  void check_finite(const char* what) const {
    for (const T& v : data) {
      if (!std::isfinite(static_cast<double>(v)))
        fail("numeric-error", std::string("non-finite value in ") + what);
    }
  }

  template <class U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace lincirc
