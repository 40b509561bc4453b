#pragma once

#include <cmath>
#include <vector>

#include "lincirc/tensor.hpp"

namespace lincirc {

template <class T>
struct AdamConfigT {
  T lr = T(4e-4);
  T beta1 = T(0);
  T beta2 = T(0.9999);
  T eps = T(1e-8);
};

using AdamConfig = AdamConfigT<float>;

// Adam with bias correction. Moment buffers mirror the registered parameter
// shapes; the step counter increases strictly by one per step() across all
// parameters.
template <class T>
class AdamT {
 public:
  explicit AdamT(AdamConfigT<T> cfg = {}) : cfg_(cfg) {}

  void register_params(const std::vector<TensorT<T>*>& params) {
    params_ = params;
    m_.clear();
    v_.clear();
    for (auto* p : params_) {
      m_.push_back(TensorT<T>::zeros(p->shape));
      v_.push_back(TensorT<T>::zeros(p->shape));
    }
    step_count_ = 0;
  }

  void step(const std::vector<const TensorT<T>*>& grads) {
    if (grads.size() != params_.size()) fail("shape-error", "adam: grad count mismatch");
    ++step_count_;
    double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), step_count_);
    double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), step_count_);
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      TensorT<T>& p = *params_[pi];
      const TensorT<T>& gt = *grads[pi];
      if (!p.same_shape(gt)) fail("shape-error", "adam: grad shape mismatch");
      TensorT<T>& m = m_[pi];
      TensorT<T>& v = v_[pi];
      for (std::size_t i = 0; i < p.data.size(); ++i) {
        double gd = static_cast<double>(gt.data[i]);
        double md = cfg_.beta1 * static_cast<double>(m.data[i]) + (1.0 - cfg_.beta1) * gd;
        double vd = cfg_.beta2 * static_cast<double>(v.data[i]) + (1.0 - cfg_.beta2) * gd * gd;
        m.data[i] = static_cast<T>(md);
        v.data[i] = static_cast<T>(vd);
        double mhat = md / bc1;
        double vhat = vd / bc2;
        p.data[i] -= static_cast<T>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

  long step_count() const { return step_count_; }
  const AdamConfigT<T>& config() const { return cfg_; }
  void set_lr(T lr) { cfg_.lr = lr; }

 private:
  AdamConfigT<T> cfg_;
  std::vector<TensorT<T>*> params_;
  std::vector<TensorT<T>> m_, v_;
  long step_count_ = 0;
};

using Adam = AdamT<float>;

}  // namespace lincirc
