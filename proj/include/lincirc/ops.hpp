#pragma once

#include <cblas.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "lincirc/tensor.hpp"

// Dense kernels used by the tape, the inference forward and the graph
// builder. Matrix products go through BLAS; everything else is plain loops
// with fixed accumulation order so results are reproducible.

namespace lincirc::ops {

inline void gemm_raw(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                     const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n,
              k, alpha, a, lda, b, ldb, beta, c, ldc);
}

inline void gemm_raw(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
                     const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n,
              k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// C = op(A)·op(B); op transposes when the flag is set.
template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b, bool ta = false, bool tb = false) {
  int am = a.rows(), an = a.cols(), bm = b.rows(), bn = b.cols();
  int m = ta ? an : am, k = ta ? am : an;
  int kb = tb ? bn : bm, n = tb ? bm : bn;
  if (k != kb)
    fail("shape-error",
         "matmul: inner dims disagree: " + shape_str(a.shape) + (ta ? "^T" : "") + " x " +
             shape_str(b.shape) + (tb ? "^T" : ""));
  TensorT<T> c = TensorT<T>::zeros({m, n});
  gemm_raw(ta, tb, m, n, k, T(1), a.data.data(), an, b.data.data(), bn, T(0), c.data.data(), n);
  return c;
}

// C += alpha * op(A)·op(B)
template <class T>
void matmul_acc(TensorT<T>& c, const TensorT<T>& a, const TensorT<T>& b, bool ta, bool tb,
                T alpha) {
  int am = a.rows(), an = a.cols(), bm = b.rows(), bn = b.cols();
  int m = ta ? an : am, k = ta ? am : an;
  int kb = tb ? bn : bm, n = tb ? bm : bn;
  if (k != kb || c.rows() != m || c.cols() != n) fail("shape-error", "matmul_acc: shape mismatch");
  gemm_raw(ta, tb, m, n, k, alpha, a.data.data(), an, b.data.data(), bn, T(1), c.data.data(), n);
}

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) fail("shape-error", "add: shape mismatch");
  TensorT<T> c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
  return c;
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) fail("shape-error", "sub: shape mismatch");
  TensorT<T> c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) fail("shape-error", "mul: shape mismatch");
  TensorT<T> c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

template <class T>
TensorT<T> scale(const TensorT<T>& a, T alpha) {
  TensorT<T> c = a;
  for (auto& v : c.data) v *= alpha;
  return c;
}

// rows of a get vector b added (bias)
template <class T>
TensorT<T> add_rowvec(const TensorT<T>& a, const TensorT<T>& b) {
  if (b.numel() != a.cols()) fail("shape-error", "add_rowvec: bias length mismatch");
  TensorT<T> c = a;
  int n = a.cols();
  for (int r = 0; r < a.rows(); ++r) {
    T* dst = c.row(r);
    for (int j = 0; j < n; ++j) dst[j] += b.data[static_cast<std::size_t>(j)];
  }
  return c;
}

// row r multiplied by scalar s[r]
template <class T>
TensorT<T> row_scale(const TensorT<T>& a, const TensorT<T>& s) {
  if (s.numel() != a.rows()) fail("shape-error", "row_scale: scale length mismatch");
  TensorT<T> c = a;
  int n = a.cols();
  for (int r = 0; r < a.rows(); ++r) {
    T* dst = c.row(r);
    T f = s.data[static_cast<std::size_t>(r)];
    for (int j = 0; j < n; ++j) dst[j] *= f;
  }
  return c;
}

// column j multiplied by scalar s[j]
template <class T>
TensorT<T> col_mul(const TensorT<T>& a, const TensorT<T>& s) {
  if (s.numel() != a.cols()) fail("shape-error", "col_mul: scale length mismatch");
  TensorT<T> c = a;
  int n = a.cols();
  for (int r = 0; r < a.rows(); ++r) {
    T* dst = c.row(r);
    for (int j = 0; j < n; ++j) dst[j] *= s.data[static_cast<std::size_t>(j)];
  }
  return c;
}

// subtract each row's mean
template <class T>
TensorT<T> center_rows(const TensorT<T>& a) {
  TensorT<T> c = a;
  int n = a.cols();
  for (int r = 0; r < a.rows(); ++r) {
    T* dst = c.row(r);
    double mean = 0;
    for (int j = 0; j < n; ++j) mean += dst[j];
    mean /= n;
    for (int j = 0; j < n; ++j) dst[j] -= static_cast<T>(mean);
  }
  return c;
}

template <class T>
TensorT<T> relu(const TensorT<T>& a) {
  TensorT<T> c = a;
  for (auto& v : c.data) v = v > T(0) ? v : T(0);
  return c;
}

template <class T>
inline T gelu_scalar(T x) {
  // tanh approximation
  const T c0 = T(0.7978845608028654);  // sqrt(2/pi)
  const T c1 = T(0.044715);
  T u = c0 * (x + c1 * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <class T>
inline T gelu_grad_scalar(T x) {
  const T c0 = T(0.7978845608028654);
  const T c1 = T(0.044715);
  T u = c0 * (x + c1 * x * x * x);
  T t = std::tanh(u);
  T sech2 = T(1) - t * t;
  return T(0.5) * (T(1) + t) + T(0.5) * x * sech2 * c0 * (T(1) + T(3) * c1 * x * x);
}

template <class T>
TensorT<T> gelu(const TensorT<T>& a) {
  TensorT<T> c = a;
  for (auto& v : c.data) v = gelu_scalar(v);
  return c;
}

// numerically stable row softmax; optional per-row prefix limit for causal
// masking (row r attends to columns [0, limit[r])).
template <class T>
TensorT<T> softmax_rows(const TensorT<T>& a, const std::vector<int>* row_limit = nullptr) {
  TensorT<T> c = TensorT<T>::zeros(a.shape);
  int n = a.cols();
  for (int r = 0; r < a.rows(); ++r) {
    int lim = row_limit ? (*row_limit)[static_cast<std::size_t>(r)] : n;
    const T* src = a.row(r);
    T* dst = c.row(r);
    T mx = src[0];
    for (int j = 1; j < lim; ++j) mx = std::max(mx, src[j]);
    double denom = 0;
    for (int j = 0; j < lim; ++j) denom += std::exp(static_cast<double>(src[j] - mx));
    for (int j = 0; j < lim; ++j)
      dst[j] = static_cast<T>(std::exp(static_cast<double>(src[j] - mx)) / denom);
  }
  return c;
}

struct LnStats {
  std::vector<double> inv_sigma;  // 1 / sqrt(var + eps) per row
};

// Pre-LN transformer layer norm: per row, y = g * (x - mean) / sqrt(var + eps) + b.
template <class T>
TensorT<T> layernorm(const TensorT<T>& x, const TensorT<T>& g, const TensorT<T>& b, double eps,
                     LnStats* stats = nullptr) {
  int n = x.cols();
  if (g.numel() != n || b.numel() != n) fail("shape-error", "layernorm: param length mismatch");
  TensorT<T> y = TensorT<T>::zeros(x.shape);
  if (stats) stats->inv_sigma.assign(static_cast<std::size_t>(x.rows()), 0.0);
  for (int r = 0; r < x.rows(); ++r) {
    const T* src = x.row(r);
    T* dst = y.row(r);
    double mean = 0;
    for (int j = 0; j < n; ++j) mean += src[j];
    mean /= n;
    double var = 0;
    for (int j = 0; j < n; ++j) {
      double d = src[j] - mean;
      var += d * d;
    }
    var /= n;
    double inv = 1.0 / std::sqrt(var + eps);
    if (stats) stats->inv_sigma[static_cast<std::size_t>(r)] = inv;
    for (int j = 0; j < n; ++j)
      dst[j] = static_cast<T>((src[j] - mean) * inv) * g.data[static_cast<std::size_t>(j)] +
               b.data[static_cast<std::size_t>(j)];
  }
  return y;
}

template <class T>
double l2_norm(const T* v, int n) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += static_cast<double>(v[i]) * static_cast<double>(v[i]);
  return std::sqrt(s);
}

// fixed-order dot product, the deterministic primitive behind edge kernels
template <class A, class B>
double dot(const A* a, const B* b, int n) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

}  // namespace lincirc::ops
