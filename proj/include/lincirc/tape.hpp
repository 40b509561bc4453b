#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lincirc/ops.hpp"
#include "lincirc/tensor.hpp"

namespace lincirc {

// Reverse-mode differentiation over an operation tape. A tape is rebuilt per
// forward pass; replaying it backward visits operations in exact reverse
// order and accumulates gradients additively per slot. Slots unreachable from
// the backward root keep an exactly-zero gradient.
template <class T>
class TapeT {
 public:
  enum class Op : std::uint8_t {
    Input,
    Constant,
    Matmul,
    Add,
    Sub,
    Mul,
    Scale,
    AddRowVec,
    RowScale,
    ColMul,
    CenterRows,
    Relu,
    Gelu,
    SoftmaxRows,
    LayerNorm,
    CrossEntropy,
    Embedding,
    CausalAttention,
    Sum,
    SelectScalar,
    Exp,
    ColMulVar,
  };

  int input(TensorT<T> v) { return add_slot(std::move(v), true, Op::Input, {}); }
  int constant(TensorT<T> v) { return add_slot(std::move(v), false, Op::Constant, {}); }

  int matmul(int a, int b, bool ta = false, bool tb = false) {
    TensorT<T> out = ops::matmul(value(a), value(b), ta, tb);
    int id = add_slot(std::move(out), grads_wanted(a) || grads_wanted(b), Op::Matmul, {a, b});
    recs_.back().flag_a = ta;
    recs_.back().flag_b = tb;
    return id;
  }

  int add(int a, int b) {
    return add_slot(ops::add(value(a), value(b)), grads_wanted(a) || grads_wanted(b), Op::Add, {a, b});
  }
  int sub(int a, int b) {
    return add_slot(ops::sub(value(a), value(b)), grads_wanted(a) || grads_wanted(b), Op::Sub, {a, b});
  }
  int mul(int a, int b) {
    return add_slot(ops::mul(value(a), value(b)), grads_wanted(a) || grads_wanted(b), Op::Mul, {a, b});
  }
  int scale(int a, T alpha) {
    int id = add_slot(ops::scale(value(a), alpha), grads_wanted(a), Op::Scale, {a});
    recs_.back().alpha = alpha;
    return id;
  }
  int add_rowvec(int a, int b) {
    return add_slot(ops::add_rowvec(value(a), value(b)), grads_wanted(a) || grads_wanted(b),
                    Op::AddRowVec, {a, b});
  }
  // per-row constant scale (no gradient to the scale vector)
  int row_scale(int a, TensorT<T> s) {
    int id = add_slot(ops::row_scale(value(a), s), grads_wanted(a), Op::RowScale, {a});
    recs_.back().aux = std::move(s);
    return id;
  }
  // per-column constant scale
  int col_mul(int a, TensorT<T> s) {
    int id = add_slot(ops::col_mul(value(a), s), grads_wanted(a), Op::ColMul, {a});
    recs_.back().aux = std::move(s);
    return id;
  }
  int center_rows(int a) {
    return add_slot(ops::center_rows(value(a)), grads_wanted(a), Op::CenterRows, {a});
  }
  int relu(int a) { return add_slot(ops::relu(value(a)), grads_wanted(a), Op::Relu, {a}); }
  int gelu(int a) { return add_slot(ops::gelu(value(a)), grads_wanted(a), Op::Gelu, {a}); }

  int softmax_rows(int a) {
    return add_slot(ops::softmax_rows(value(a)), grads_wanted(a), Op::SoftmaxRows, {a});
  }

  int layernorm(int x, int g, int b, double eps = 1e-5) {
    ops::LnStats st;
    TensorT<T> out = ops::layernorm(value(x), value(g), value(b), eps, &st);
    int id = add_slot(std::move(out), grads_wanted(x) || grads_wanted(g) || grads_wanted(b),
                      Op::LayerNorm, {x, g, b});
    auto& rec = recs_.back();
    rec.aux = TensorT<T>::zeros({value(x).rows()});
    for (int r = 0; r < value(x).rows(); ++r)
      rec.aux.data[static_cast<std::size_t>(r)] = static_cast<T>(st.inv_sigma[static_cast<std::size_t>(r)]);
    return id;
  }

  // mean negative log-likelihood over rows with mask != 0
  int cross_entropy(int logits, std::vector<int> targets, std::vector<std::uint8_t> mask) {
    const TensorT<T>& lg = value(logits);
    int n = lg.rows(), v = lg.cols();
    if (static_cast<int>(targets.size()) != n || static_cast<int>(mask.size()) != n)
      fail("shape-error", "cross_entropy: target/mask length mismatch");
    TensorT<T> probs = ops::softmax_rows(lg);
    double loss = 0;
    long count = 0;
    for (int r = 0; r < n; ++r) {
      if (!mask[static_cast<std::size_t>(r)]) continue;
      int t = targets[static_cast<std::size_t>(r)];
      if (t < 0 || t >= v) fail("shape-error", "cross_entropy: target out of range");
      double p = std::max(static_cast<double>(probs.at(r, t)), 1e-30);
      loss -= std::log(p);
      ++count;
    }
    if (count == 0) fail("config-error", "cross_entropy: empty mask");
    loss /= static_cast<double>(count);
    int id = add_slot(TensorT<T>::scalar(static_cast<T>(loss)), grads_wanted(logits),
                      Op::CrossEntropy, {logits});
    auto& rec = recs_.back();
    rec.aux = std::move(probs);
    rec.ids = std::move(targets);
    rec.mask = std::move(mask);
    rec.count = count;
    return id;
  }

  // gather rows of a [num, dim] table
  int embedding(int table, std::vector<int> ids) {
    const TensorT<T>& tb = value(table);
    TensorT<T> out = TensorT<T>::zeros({static_cast<int>(ids.size()), tb.cols()});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      int id = ids[i];
      if (id < 0 || id >= tb.rows()) fail("shape-error", "embedding: id out of range");
      const T* src = tb.row(id);
      T* dst = out.row(static_cast<int>(i));
      for (int j = 0; j < tb.cols(); ++j) dst[j] = src[j];
    }
    int slot = add_slot(std::move(out), grads_wanted(table), Op::Embedding, {table});
    recs_.back().ids = std::move(ids);
    return slot;
  }

  // Multi-head causal self-attention core: softmax(QK^T / sqrt(dh)) V per
  // (sequence, head). q,k,v are [batch*seq, n_heads*dh]; heads live in
  // contiguous column blocks. Patterns are saved for the backward pass.
  int causal_attention(int q, int k, int v, int n_heads, int batch, int seq) {
    const TensorT<T>&Q = value(q), &K = value(k), &V = value(v);
    int d = Q.cols();
    if (d % n_heads != 0) fail("shape-error", "causal_attention: d not divisible by heads");
    if (Q.rows() != batch * seq || !Q.same_shape(K) || !Q.same_shape(V))
      fail("shape-error", "causal_attention: bad input shapes");
    int dh = d / n_heads;
    T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    TensorT<T> out = TensorT<T>::zeros(Q.shape);
    TensorT<T> patterns = TensorT<T>::zeros({batch * n_heads, seq * seq});
    std::vector<int> limits(static_cast<std::size_t>(seq));
    for (int i = 0; i < seq; ++i) limits[static_cast<std::size_t>(i)] = i + 1;
    TensorT<T> qh = TensorT<T>::zeros({seq, dh}), kh = qh, vh = qh;
    for (int b = 0; b < batch; ++b) {
      for (int h = 0; h < n_heads; ++h) {
        copy_head(Q, b, seq, h, dh, qh);
        copy_head(K, b, seq, h, dh, kh);
        copy_head(V, b, seq, h, dh, vh);
        TensorT<T> scores = ops::matmul(qh, kh, false, true);
        for (auto& s : scores.data) s *= inv_sqrt;
        TensorT<T> p = ops::softmax_rows(scores, &limits);
        TensorT<T> ctx = ops::matmul(p, vh);
        paste_head(out, b, seq, h, dh, ctx);
        T* dst = patterns.row(b * n_heads + h);
        for (std::size_t i = 0; i < p.data.size(); ++i) dst[i] = p.data[i];
      }
    }
    int id = add_slot(std::move(out), grads_wanted(q) || grads_wanted(k) || grads_wanted(v),
                      Op::CausalAttention, {q, k, v});
    auto& rec = recs_.back();
    rec.aux = std::move(patterns);
    rec.i0 = n_heads;
    rec.i1 = batch;
    rec.i2 = seq;
    return id;
  }

  int exp(int a) {
    TensorT<T> out = value(a);
    for (auto& v : out.data) v = std::exp(v);
    return add_slot(std::move(out), grads_wanted(a), Op::Exp, {a});
  }

  // columns of a scaled by a differentiable [cols] vector
  int col_mul_var(int a, int v) {
    const TensorT<T>&A = value(a), &V = value(v);
    if (V.numel() != A.cols()) fail("shape-error", "col_mul_var: length mismatch");
    TensorT<T> out = A;
    for (int r = 0; r < A.rows(); ++r) {
      T* dst = out.row(r);
      for (int j = 0; j < A.cols(); ++j) dst[j] *= V.data[static_cast<std::size_t>(j)];
    }
    return add_slot(std::move(out), grads_wanted(a) || grads_wanted(v), Op::ColMulVar, {a, v});
  }

  int sum(int a) {
    double s = 0;
    for (const T& v : value(a).data) s += static_cast<double>(v);
    return add_slot(TensorT<T>::scalar(static_cast<T>(s)), grads_wanted(a), Op::Sum, {a});
  }

  int select_scalar(int a, int r, int c) {
    int id = add_slot(TensorT<T>::scalar(value(a).at(r, c)), grads_wanted(a), Op::SelectScalar, {a});
    recs_.back().i0 = r;
    recs_.back().i1 = c;
    return id;
  }

  // Backward from a scalar root. Gradients accumulate additively; a second
  // call on the same tape is an error (the tape is consumed).
  void backward(int root) {
    if (consumed_) fail("state-error", "tape already consumed by a previous backward");
    if (!value(root).is_scalar()) fail("shape-error", "backward: root is not a scalar");
    consumed_ = true;
    grads_.resize(slots_.size());
    for (std::size_t i = 0; i < slots_.size(); ++i)
      grads_[i] = TensorT<T>::zeros(slots_[i].shape);
    grads_[static_cast<std::size_t>(root)].data[0] = T(1);
    for (int ri = static_cast<int>(recs_.size()) - 1; ri >= 0; --ri) backward_one(recs_[static_cast<std::size_t>(ri)]);
  }

  const TensorT<T>& value(int id) const { return slots_[static_cast<std::size_t>(id)]; }
  const TensorT<T>& grad(int id) const {
    if (!consumed_) fail("state-error", "grad requested before backward");
    return grads_[static_cast<std::size_t>(id)];
  }
  std::size_t size() const { return slots_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Rec {
    Op op;
    std::array<int, 3> in{-1, -1, -1};
    int out = -1;
    bool flag_a = false, flag_b = false;
    T alpha{};
    int i0 = 0, i1 = 0, i2 = 0;
    long count = 0;
    std::vector<int> ids;
    std::vector<std::uint8_t> mask;
    TensorT<T> aux;
  };

  std::vector<TensorT<T>> slots_;
  std::vector<TensorT<T>> grads_;
  std::vector<bool> wants_grad_;
  std::vector<Rec> recs_;
  bool consumed_ = false;

  bool grads_wanted(int id) const { return wants_grad_[static_cast<std::size_t>(id)]; }

  int add_slot(TensorT<T> v, bool wants, Op op, std::initializer_list<int> ins) {
    v.check_finite(op_name(op));
    slots_.push_back(std::move(v));
    wants_grad_.push_back(wants);
    int id = static_cast<int>(slots_.size()) - 1;
    if (op != Op::Input && op != Op::Constant) {
      Rec r;
      r.op = op;
      int i = 0;
      for (int in : ins) r.in[static_cast<std::size_t>(i++)] = in;
      r.out = id;
      recs_.push_back(std::move(r));
    }
    return id;
  }

  static const char* op_name(Op op) {
    switch (op) {
      case Op::Matmul: return "matmul";
      case Op::Add: return "add";
      case Op::Sub: return "sub";
      case Op::Mul: return "mul";
      case Op::Scale: return "scale";
      case Op::AddRowVec: return "add_rowvec";
      case Op::RowScale: return "row_scale";
      case Op::ColMul: return "col_mul";
      case Op::CenterRows: return "center_rows";
      case Op::Relu: return "relu";
      case Op::Gelu: return "gelu";
      case Op::SoftmaxRows: return "softmax";
      case Op::LayerNorm: return "layernorm";
      case Op::CrossEntropy: return "cross_entropy";
      case Op::Embedding: return "embedding";
      case Op::CausalAttention: return "causal_attention";
      case Op::Sum: return "sum";
      case Op::SelectScalar: return "select_scalar";
      default: return "value";
    }
  }

  static void copy_head(const TensorT<T>& x, int b, int seq, int h, int dh, TensorT<T>& out) {
    for (int i = 0; i < seq; ++i) {
      const T* src = x.row(b * seq + i) + h * dh;
      T* dst = out.row(i);
      for (int j = 0; j < dh; ++j) dst[j] = src[j];
    }
  }
  static void paste_head(TensorT<T>& x, int b, int seq, int h, int dh, const TensorT<T>& in) {
    for (int i = 0; i < seq; ++i) {
      T* dst = x.row(b * seq + i) + h * dh;
      const T* src = in.row(i);
      for (int j = 0; j < dh; ++j) dst[j] = src[j];
    }
  }

  TensorT<T>& g(int id) { return grads_[static_cast<std::size_t>(id)]; }

  void backward_one(const Rec& rec) {
    const TensorT<T>& go = grads_[static_cast<std::size_t>(rec.out)];
    switch (rec.op) {
      case Op::Matmul: {
        int a = rec.in[0], b = rec.in[1];
        bool ta = rec.flag_a, tb = rec.flag_b;
        const TensorT<T>&A = value(a), &B = value(b);
        if (grads_wanted(a)) {
          // dA = (ta ? op(B)·dC^T : dC·op(B)^T) with op applying tb
          if (!ta) {
            ops::matmul_acc(g(a), go, B, false, !tb, T(1));
          } else {
            ops::matmul_acc(g(a), B, go, tb, true, T(1));
          }
        }
        if (grads_wanted(b)) {
          if (!tb) {
            ops::matmul_acc(g(b), A, go, !ta, false, T(1));
          } else {
            ops::matmul_acc(g(b), go, A, true, ta, T(1));
          }
        }
        break;
      }
      case Op::Add: {
        for (int s = 0; s < 2; ++s) {
          int id = rec.in[static_cast<std::size_t>(s)];
          if (!grads_wanted(id)) continue;
          auto& gi = g(id);
          for (std::size_t i = 0; i < gi.data.size(); ++i) gi.data[i] += go.data[i];
        }
        break;
      }
      case Op::Sub: {
        if (grads_wanted(rec.in[0])) {
          auto& ga = g(rec.in[0]);
          for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += go.data[i];
        }
        if (grads_wanted(rec.in[1])) {
          auto& gb = g(rec.in[1]);
          for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] -= go.data[i];
        }
        break;
      }
      case Op::Mul: {
        const TensorT<T>&A = value(rec.in[0]), &B = value(rec.in[1]);
        if (grads_wanted(rec.in[0])) {
          auto& ga = g(rec.in[0]);
          for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += go.data[i] * B.data[i];
        }
        if (grads_wanted(rec.in[1])) {
          auto& gb = g(rec.in[1]);
          for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += go.data[i] * A.data[i];
        }
        break;
      }
      case Op::Scale: {
        if (grads_wanted(rec.in[0])) {
          auto& ga = g(rec.in[0]);
          for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += go.data[i] * rec.alpha;
        }
        break;
      }
      case Op::AddRowVec: {
        if (grads_wanted(rec.in[0])) {
          auto& ga = g(rec.in[0]);
          for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += go.data[i];
        }
        if (grads_wanted(rec.in[1])) {
          auto& gb = g(rec.in[1]);
          int n = go.cols();
          for (int r = 0; r < go.rows(); ++r) {
            const T* src = go.row(r);
            for (int j = 0; j < n; ++j) gb.data[static_cast<std::size_t>(j)] += src[j];
          }
        }
        break;
      }
      case Op::RowScale: {
        if (grads_wanted(rec.in[0])) {
          auto& ga = g(rec.in[0]);
          int n = go.cols();
          for (int r = 0; r < go.rows(); ++r) {
            T f = rec.aux.data[static_cast<std::size_t>(r)];
            const T* src = go.row(r);
            T* dst = ga.row(r);
            for (int j = 0; j < n; ++j) dst[j] += f * src[j];
          }
        }
        break;
      }
      case Op::ColMul: {
        if (grads_wanted(rec.in[0])) {
          auto& ga = g(rec.in[0]);
          int n = go.cols();
          for (int r = 0; r < go.rows(); ++r) {
            const T* src = go.row(r);
            T* dst = ga.row(r);
            for (int j = 0; j < n; ++j) dst[j] += rec.aux.data[static_cast<std::size_t>(j)] * src[j];
          }
        }
        break;
      }
      case Op::CenterRows: {
        if (grads_wanted(rec.in[0])) {
          auto& ga = g(rec.in[0]);
          int n = go.cols();
          for (int r = 0; r < go.rows(); ++r) {
            const T* src = go.row(r);
            double mean = 0;
            for (int j = 0; j < n; ++j) mean += src[j];
            mean /= n;
            T* dst = ga.row(r);
            for (int j = 0; j < n; ++j) dst[j] += src[j] - static_cast<T>(mean);
          }
        }
        break;
      }
      case Op::Relu: {
        if (grads_wanted(rec.in[0])) {
          const TensorT<T>& x = value(rec.in[0]);
          auto& ga = g(rec.in[0]);
          for (std::size_t i = 0; i < ga.data.size(); ++i)
            if (x.data[i] > T(0)) ga.data[i] += go.data[i];
        }
        break;
      }
      case Op::Gelu: {
        if (grads_wanted(rec.in[0])) {
          const TensorT<T>& x = value(rec.in[0]);
          auto& ga = g(rec.in[0]);
          for (std::size_t i = 0; i < ga.data.size(); ++i)
            ga.data[i] += go.data[i] * ops::gelu_grad_scalar(x.data[i]);
        }
        break;
      }
      case Op::SoftmaxRows: {
        if (grads_wanted(rec.in[0])) {
          const TensorT<T>& y = value(rec.out);
          auto& ga = g(rec.in[0]);
          int n = y.cols();
          for (int r = 0; r < y.rows(); ++r) {
            const T* yr = y.row(r);
            const T* gr = go.row(r);
            double dotv = 0;
            for (int j = 0; j < n; ++j) dotv += static_cast<double>(gr[j]) * yr[j];
            T* dst = ga.row(r);
            for (int j = 0; j < n; ++j)
              dst[j] += yr[j] * (gr[j] - static_cast<T>(dotv));
          }
        }
        break;
      }
      case Op::LayerNorm: {
        const TensorT<T>& x = value(rec.in[0]);
        const TensorT<T>& gamma = value(rec.in[1]);
        int n = x.cols();
        for (int r = 0; r < x.rows(); ++r) {
          const T* xr = x.row(r);
          const T* gr = go.row(r);
          double inv = static_cast<double>(rec.aux.data[static_cast<std::size_t>(r)]);
          double mean = 0;
          for (int j = 0; j < n; ++j) mean += xr[j];
          mean /= n;
          // xhat recomputed from saved inv_sigma
          if (grads_wanted(rec.in[1])) {
            auto& gg = g(rec.in[1]);
            for (int j = 0; j < n; ++j)
              gg.data[static_cast<std::size_t>(j)] +=
                  gr[j] * static_cast<T>((xr[j] - mean) * inv);
          }
          if (grads_wanted(rec.in[2])) {
            auto& gb = g(rec.in[2]);
            for (int j = 0; j < n; ++j) gb.data[static_cast<std::size_t>(j)] += gr[j];
          }
          if (grads_wanted(rec.in[0])) {
            auto& gx = g(rec.in[0]);
            double m1 = 0, m2 = 0;  // mean(gy*g), mean(gy*g*xhat)
            for (int j = 0; j < n; ++j) {
              double gyg = static_cast<double>(gr[j]) * gamma.data[static_cast<std::size_t>(j)];
              double xh = (xr[j] - mean) * inv;
              m1 += gyg;
              m2 += gyg * xh;
            }
            m1 /= n;
            m2 /= n;
            T* dst = gx.row(r);
            for (int j = 0; j < n; ++j) {
              double gyg = static_cast<double>(gr[j]) * gamma.data[static_cast<std::size_t>(j)];
              double xh = (xr[j] - mean) * inv;
              dst[j] += static_cast<T>((gyg - m1 - xh * m2) * inv);
            }
          }
        }
        break;
      }
      case Op::CrossEntropy: {
        if (grads_wanted(rec.in[0])) {
          auto& gl = g(rec.in[0]);
          const TensorT<T>& probs = rec.aux;
          T gscale = go.data[0] / static_cast<T>(rec.count);
          int v = probs.cols();
          for (int r = 0; r < probs.rows(); ++r) {
            if (!rec.mask[static_cast<std::size_t>(r)]) continue;
            const T* pr = probs.row(r);
            T* dst = gl.row(r);
            int t = rec.ids[static_cast<std::size_t>(r)];
            for (int j = 0; j < v; ++j) dst[j] += gscale * pr[j];
            dst[t] -= gscale;
          }
        }
        break;
      }
      case Op::Embedding: {
        if (grads_wanted(rec.in[0])) {
          auto& gt = g(rec.in[0]);
          int n = go.cols();
          for (std::size_t i = 0; i < rec.ids.size(); ++i) {
            T* dst = gt.row(rec.ids[i]);
            const T* src = go.row(static_cast<int>(i));
            for (int j = 0; j < n; ++j) dst[j] += src[j];
          }
        }
        break;
      }
      case Op::CausalAttention: {
        int n_heads = rec.i0, batch = rec.i1, seq = rec.i2;
        const TensorT<T>&Q = value(rec.in[0]), &K = value(rec.in[1]), &V = value(rec.in[2]);
        int dh = Q.cols() / n_heads;
        T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
        TensorT<T> qh = TensorT<T>::zeros({seq, dh}), kh = qh, vh = qh, dctx = qh;
        TensorT<T> p = TensorT<T>::zeros({seq, seq});
        for (int b = 0; b < batch; ++b) {
          for (int h = 0; h < n_heads; ++h) {
            copy_head(Q, b, seq, h, dh, qh);
            copy_head(K, b, seq, h, dh, kh);
            copy_head(V, b, seq, h, dh, vh);
            copy_head(go, b, seq, h, dh, dctx);
            const T* psrc = rec.aux.row(b * n_heads + h);
            for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = psrc[i];
            if (grads_wanted(rec.in[2])) {
              TensorT<T> dv = ops::matmul(p, dctx, true, false);
              add_head_grad(g(rec.in[2]), b, seq, h, dh, dv);
            }
            if (grads_wanted(rec.in[0]) || grads_wanted(rec.in[1])) {
              TensorT<T> dp = ops::matmul(dctx, vh, false, true);
              // softmax backward per row, then scale by 1/sqrt(dh)
              TensorT<T> ds = TensorT<T>::zeros({seq, seq});
              for (int i = 0; i < seq; ++i) {
                const T* pr = p.row(i);
                const T* dpr = dp.row(i);
                double dotv = 0;
                for (int j = 0; j <= i; ++j) dotv += static_cast<double>(dpr[j]) * pr[j];
                T* dst = ds.row(i);
                for (int j = 0; j <= i; ++j)
                  dst[j] = pr[j] * (dpr[j] - static_cast<T>(dotv)) * inv_sqrt;
              }
              if (grads_wanted(rec.in[0])) {
                TensorT<T> dq = ops::matmul(ds, kh);
                add_head_grad(g(rec.in[0]), b, seq, h, dh, dq);
              }
              if (grads_wanted(rec.in[1])) {
                TensorT<T> dk = ops::matmul(ds, qh, true, false);
                add_head_grad(g(rec.in[1]), b, seq, h, dh, dk);
              }
            }
          }
        }
        break;
      }
      case Op::Sum: {
        if (grads_wanted(rec.in[0])) {
          auto& ga = g(rec.in[0]);
          T gv = go.data[0];
          for (auto& v : ga.data) v += gv;
        }
        break;
      }
      case Op::SelectScalar: {
        if (grads_wanted(rec.in[0])) g(rec.in[0]).at(rec.i0, rec.i1) += go.data[0];
        break;
      }
      case Op::Exp: {
        if (grads_wanted(rec.in[0])) {
          const TensorT<T>& y = value(rec.out);
          auto& ga = g(rec.in[0]);
          for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += go.data[i] * y.data[i];
        }
        break;
      }
      case Op::ColMulVar: {
        const TensorT<T>&A = value(rec.in[0]), &V = value(rec.in[1]);
        int n = A.cols();
        if (grads_wanted(rec.in[0])) {
          auto& ga = g(rec.in[0]);
          for (int r = 0; r < A.rows(); ++r) {
            const T* src = go.row(r);
            T* dst = ga.row(r);
            for (int j = 0; j < n; ++j) dst[j] += src[j] * V.data[static_cast<std::size_t>(j)];
          }
        }
        if (grads_wanted(rec.in[1])) {
          auto& gv = g(rec.in[1]);
          for (int r = 0; r < A.rows(); ++r) {
            const T* src = go.row(r);
            const T* ar = A.row(r);
            for (int j = 0; j < n; ++j) gv.data[static_cast<std::size_t>(j)] += src[j] * ar[j];
          }
        }
        break;
      }
      default:
        break;
    }
  }

  static void add_head_grad(TensorT<T>& acc, int b, int seq, int h, int dh, const TensorT<T>& in) {
    for (int i = 0; i < seq; ++i) {
      T* dst = acc.row(b * seq + i) + h * dh;
      const T* src = in.row(i);
      for (int j = 0; j < dh; ++j) dst[j] += src[j];
    }
  }
};

using Tape = TapeT<float>;
using TapeD = TapeT<double>;

}  // namespace lincirc
