#pragma once

#include <cmath>
#include <vector>

#include "smpriv/common.hpp"
#include "smpriv/nets.hpp"

namespace smpriv {

// RMSprop: v <- alpha v + (1 - alpha) g^2; p <- p - lr g / (sqrt(v) + eps).
template <class S>
class RmsProp {
 public:
  RmsProp() = default;
  RmsProp(double lr, double alpha, double eps) : lr_(lr), alpha_(alpha), eps_(eps) {}

  void step(std::vector<Mat<S>*> params, const SeqNetGrads<S>& grads) {
    if (params.size() != grads.g.size()) throw ValidationError("optimizer: param/grad mismatch");
    if (v_.empty()) {
      for (const auto* p : params) v_.push_back(Mat<S>::Zero(p->rows(), p->cols()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& v = v_[i];
      const auto& g = grads.g[i];
      v = S(alpha_) * v + S(1 - alpha_) * g.array().square().matrix();
      params[i]->array() -= S(lr_) * g.array() / (v.array().sqrt() + S(eps_));
    }
  }

  double learning_rate() const { return lr_; }
  double alpha() const { return alpha_; }
  double eps() const { return eps_; }
  std::vector<Mat<S>>& accumulators() { return v_; }
  const std::vector<Mat<S>>& accumulators() const { return v_; }

 private:
  double lr_ = 1e-3;
  double alpha_ = 0.9;
  double eps_ = 1e-8;
  std::vector<Mat<S>> v_;
};

}  // namespace smpriv
