#pragma once

// Losses and metrics: normalized distortion, adversary log-loss, the CAL and
// DI releaser losses, NE2 and balanced accuracy. Natural-log units
// throughout. Probabilities are floored at 1e-7 before logs; the floor only
// guards the vanishing side, so a perfect prediction still scores exactly 0.

#include <cmath>
#include <cstdint>

#include "smpriv/common.hpp"
#include "smpriv/core_types.hpp"
#include "smpriv/nets.hpp"

namespace smpriv {

inline constexpr double kProbFloor = 1e-7;

struct LossReport {
  double total = 0.0;
  double distortion_term = 0.0;
  double privacy_term = 0.0;
  double regularization_term = 0.0;
};

inline LossReport make_loss_report(double distortion, double privacy, double regularization) {
  LossReport r;
  r.distortion_term = distortion;
  r.privacy_term = privacy;
  r.regularization_term = regularization;
  r.total = distortion + privacy + regularization;
  return r;
}

// ---------------------------------------------------------------------------
// Distortion: per-sequence sum of squared per-step differences, divided by T,
// averaged over the batch.

template <class S>
S distortion(const Mat<S>& z, const Mat<S>& y) {
  if (z.rows() != y.rows() || z.cols() != y.cols()) {
    throw ValidationError("distortion: shape mismatch");
  }
  return (z - y).array().square().sum() / S(z.rows() * z.cols());
}

template <class S>
Mat<S> distortion_grad_z(const Mat<S>& z, const Mat<S>& y) {
  if (z.rows() != y.rows() || z.cols() != y.cols()) {
    throw ValidationError("distortion: shape mismatch");
  }
  return (S(2) / S(z.rows() * z.cols())) * (z - y);
}

// ---------------------------------------------------------------------------
// Adversary loss: (1/T) sum_t E[-log q at the true label], expectations as
// batch means.

template <class S>
S adversary_loss(const Mat<S>& q, const Mat<S>& x) {
  if (q.rows() != x.rows() || q.cols() != x.cols()) {
    throw ValidationError("adversary_loss: shape mismatch");
  }
  S sum = S(0);
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const S qv = q(i, j);
      if (!(qv >= S(0) && qv <= S(1))) {
        throw NumericError("adversary_loss: probability outside [0, 1]");
      }
      const S p_true = x(i, j) > S(0.5) ? qv : S(1) - qv;
      sum -= std::log(std::max(p_true, S(kProbFloor)));
    }
  }
  return sum / S(q.rows() * q.cols());
}

template <class S>
Mat<S> adversary_loss_grad_q(const Mat<S>& q, const Mat<S>& x) {
  if (q.rows() != x.rows() || q.cols() != x.cols()) {
    throw ValidationError("adversary_loss: shape mismatch");
  }
  const S scale = S(1) / S(q.rows() * q.cols());
  Mat<S> g(q.rows(), q.cols());
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const S qv = q(i, j);
      const bool positive = x(i, j) > S(0.5);
      const S p_true = positive ? qv : S(1) - qv;
      if (p_true < S(kProbFloor)) {
        g(i, j) = S(0);  // inside the floored region the loss is flat
      } else {
        g(i, j) = scale * (positive ? -S(1) / qv : S(1) / (S(1) - qv));
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Binary entropy in nats, with 0 log 0 := 0.

inline double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw NumericError("binary_entropy: p outside [0, 1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
}

template <class S>
S mean_binary_entropy(const Mat<S>& q) {
  S sum = S(0);
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const S p = q(i, j);
      if (!(p >= S(0) && p <= S(1))) throw NumericError("entropy: probability outside [0, 1]");
      if (p > S(0) && p < S(1)) sum -= p * std::log(p) + (S(1) - p) * std::log(S(1) - p);
    }
  }
  return sum / S(q.rows() * q.cols());
}

// ---------------------------------------------------------------------------
// Ridge: beta times the mean squared parameter value. The per-parameter
// normalization keeps beta = 1.5 from drowning the data terms while
// preserving the L2 pull toward zero.

template <class S>
double ridge_penalty(double beta, const SeqNet<S>& net) {
  if (net.param_count() == 0) return 0.0;
  return beta * double(net.param_sum_squares()) / double(net.param_count());
}

// ---------------------------------------------------------------------------
// Releaser losses. The CAL privacy term is the exact negative of the
// adversary loss scaled by lambda; the DI privacy term is the negative mean
// predictive entropy scaled by lambda, in [-lambda ln 2, 0].

template <class S>
LossReport cal_releaser_loss(const Mat<S>& z, const Mat<S>& y, const Mat<S>& q, const Mat<S>& x,
                             double lambda, double beta, const SeqNet<S>& theta) {
  const double d = double(distortion(z, y));
  const double privacy = -lambda * double(adversary_loss(q, x));
  return make_loss_report(d, privacy, ridge_penalty(beta, theta));
}

template <class S>
LossReport di_releaser_loss(const Mat<S>& z, const Mat<S>& y, const Mat<S>& q, double lambda,
                            double beta, const SeqNet<S>& theta) {
  const double d = double(distortion(z, y));
  const double privacy = -lambda * double(mean_binary_entropy(q));
  return make_loss_report(d, privacy, ridge_penalty(beta, theta));
}

// Gradients of the privacy terms w.r.t. q, for backpropagation through the
// (frozen) adversary into the released series.

template <class S>
Mat<S> cal_privacy_grad_q(const Mat<S>& q, const Mat<S>& x, double lambda) {
  return (-S(lambda)) * adversary_loss_grad_q(q, x);
}

template <class S>
Mat<S> di_privacy_grad_q(const Mat<S>& q, double lambda) {
  const S scale = -S(lambda) / S(q.rows() * q.cols());
  Mat<S> g(q.rows(), q.cols());
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const S p = std::min(std::max(q(i, j), S(kProbFloor)), S(1) - S(kProbFloor));
      g(i, j) = scale * std::log((S(1) - p) / p);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// NE2: E[||Y - Z||_2] / E[||Y||_2], expectations as batch means.

template <class S>
double ne2(const Mat<S>& z, const Mat<S>& y) {
  if (z.rows() != y.rows() || z.cols() != y.cols()) throw ValidationError("ne2: shape mismatch");
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    num += std::sqrt(double((y.row(i) - z.row(i)).array().square().sum()));
    den += std::sqrt(double(y.row(i).array().square().sum()));
  }
  if (den == 0.0) throw NumericError("ne2: zero reference energy");
  return num / den;
}

// ---------------------------------------------------------------------------
// Balanced accuracy: mean of per-class recalls.

inline double balanced_accuracy(const ConfusionCounts& c) {
  const auto row1 = c.c11 + c.c12;
  const auto row2 = c.c21 + c.c22;
  if (row1 <= 0 || row2 <= 0) throw ValidationError("balanced_accuracy: empty class");
  return 0.5 * (double(c.c11) / double(row1) + double(c.c22) / double(row2));
}

}  // namespace smpriv
