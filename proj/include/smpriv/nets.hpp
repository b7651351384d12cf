#pragma once

// Recurrent sequence models: releaser, adversary and attacker. Stacked LSTM
// layers with a per-step linear head, explicit forward/backward passes
// (backpropagation through time) on Eigen matrices. Outputs at step t depend
// on inputs at steps 1..t only.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smpriv/common.hpp"
#include "smpriv/core_types.hpp"
#include "smpriv/rng.hpp"

namespace smpriv {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
Mat<S> sigmoid(const Mat<S>& x) {
  return x.unaryExpr([](S v) {
    return v >= S(0) ? S(1) / (S(1) + std::exp(-v)) : std::exp(v) / (S(1) + std::exp(v));
  });
}

// ---------------------------------------------------------------------------
// One LSTM layer. Gates are packed in column blocks [input, forget, cell,
// output] of the pre-activation matrix A = X Wx^T + H_prev Wh^T + b.

template <class S>
struct LstmLayerCache {
  std::vector<Mat<S>> gi, gf, gg, go;  // post-activation gates, B x H per step
  std::vector<Mat<S>> c, tanh_c, h;
};

template <class S>
struct LstmLayerGrads {
  Mat<S> Wx, Wh, b;
};

template <class S>
class LstmLayer {
 public:
  LstmLayer(int input_dim, int hidden_dim)
      : in_(input_dim), hid_(hidden_dim), Wx(4 * hidden_dim, input_dim),
        Wh(4 * hidden_dim, hidden_dim), b(4 * hidden_dim, 1) {
    Wx.setZero();
    Wh.setZero();
    b.setZero();
  }

  // All weights and biases uniform in (-1/sqrt(H), 1/sqrt(H)).
  void init_params(Rng& rng) {
    const double a = 1.0 / std::sqrt(double(hid_));
    auto fill = [&](Mat<S>& m) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = S(rng.uniform(-a, a));
      }
    };
    fill(Wx);
    fill(Wh);
    fill(b);
  }

  std::vector<Mat<S>> forward(const std::vector<Mat<S>>& xs, LstmLayerCache<S>* cache) const {
    const int T = static_cast<int>(xs.size());
    const auto B = xs.empty() ? 0 : xs[0].rows();
    Mat<S> h = Mat<S>::Zero(B, hid_);
    Mat<S> c = Mat<S>::Zero(B, hid_);
    std::vector<Mat<S>> hs(T);
    if (cache) {
      cache->gi.resize(T);
      cache->gf.resize(T);
      cache->gg.resize(T);
      cache->go.resize(T);
      cache->c.resize(T);
      cache->tanh_c.resize(T);
      cache->h.resize(T);
    }
    Mat<S> A;
    for (int t = 0; t < T; ++t) {
      if (xs[t].cols() != in_) {
        throw ValidationError("lstm input dim mismatch: got " + std::to_string(xs[t].cols()) +
                              ", expected " + std::to_string(in_));
      }
      A.noalias() = xs[t] * Wx.transpose();
      A.noalias() += h * Wh.transpose();
      A.rowwise() += b.col(0).transpose();
      Mat<S> i = sigmoid<S>(A.middleCols(0 * hid_, hid_));
      Mat<S> f = sigmoid<S>(A.middleCols(1 * hid_, hid_));
      Mat<S> g = A.middleCols(2 * hid_, hid_).array().tanh().matrix();
      Mat<S> o = sigmoid<S>(A.middleCols(3 * hid_, hid_));
      c = (f.array() * c.array() + i.array() * g.array()).matrix();
      Mat<S> tanh_c = c.array().tanh().matrix();
      h = (o.array() * tanh_c.array()).matrix();
      hs[t] = h;
      if (cache) {
        cache->gi[t] = std::move(i);
        cache->gf[t] = std::move(f);
        cache->gg[t] = std::move(g);
        cache->go[t] = std::move(o);
        cache->c[t] = c;
        cache->tanh_c[t] = std::move(tanh_c);
        cache->h[t] = h;
      }
    }
    return hs;
  }

  // dhs: gradients w.r.t. this layer's outputs. Accumulates parameter grads;
  // fills per-step input gradients when dxs is non-null.
  void backward(const std::vector<Mat<S>>& xs, const LstmLayerCache<S>& cache,
                const std::vector<Mat<S>>& dhs, LstmLayerGrads<S>& grads,
                std::vector<Mat<S>>* dxs) const {
    const int T = static_cast<int>(xs.size());
    const auto B = xs.empty() ? 0 : xs[0].rows();
    if (dxs) dxs->resize(T);
    Mat<S> dh_next = Mat<S>::Zero(B, hid_);
    Mat<S> dc_next = Mat<S>::Zero(B, hid_);
    Mat<S> dA(B, 4 * hid_);
    for (int t = T - 1; t >= 0; --t) {
      const Mat<S> dh = dhs[t] + dh_next;
      const auto& i = cache.gi[t];
      const auto& f = cache.gf[t];
      const auto& g = cache.gg[t];
      const auto& o = cache.go[t];
      const auto& tanh_c = cache.tanh_c[t];

      Mat<S> dc = (dh.array() * o.array() * (S(1) - tanh_c.array().square())).matrix();
      dc += dc_next;

      dA.middleCols(3 * hid_, hid_) =
          (dh.array() * tanh_c.array() * o.array() * (S(1) - o.array())).matrix();
      if (t > 0) {
        const auto& c_prev = cache.c[t - 1];
        dA.middleCols(1 * hid_, hid_) =
            (dc.array() * c_prev.array() * f.array() * (S(1) - f.array())).matrix();
      } else {
        dA.middleCols(1 * hid_, hid_).setZero();  // c_prev = 0
      }
      dA.middleCols(0 * hid_, hid_) =
          (dc.array() * g.array() * i.array() * (S(1) - i.array())).matrix();
      dA.middleCols(2 * hid_, hid_) =
          (dc.array() * i.array() * (S(1) - g.array().square())).matrix();

      dc_next = (dc.array() * f.array()).matrix();

      grads.Wx.noalias() += dA.transpose() * xs[t];
      if (t > 0) {
        grads.Wh.noalias() += dA.transpose() * cache.h[t - 1];
        dh_next.noalias() = dA * Wh;
      } else {
        dh_next.setZero();
      }
      grads.b.col(0) += dA.colwise().sum().transpose();
      if (dxs) (*dxs)[t].noalias() = dA * Wx;
    }
  }

  int input_dim() const { return in_; }
  int hidden_dim() const { return hid_; }

  int in_, hid_;
  Mat<S> Wx, Wh, b;
};

// ---------------------------------------------------------------------------
// Stacked LSTM with a per-step linear head (head outputs are pre-activation).

template <class S>
struct SeqNetCache {
  std::vector<Mat<S>> inputs;  // original per-step inputs
  std::vector<LstmLayerCache<S>> layers;
};

// Gradients in param_list() order: per layer Wx, Wh, b; then head W, head b.
template <class S>
struct SeqNetGrads {
  std::vector<Mat<S>> g;
};

template <class S>
class SeqNet {
 public:
  SeqNet() = default;
  SeqNet(int input_dim, int hidden_dim, int n_layers, int output_dim)
      : hid_(hidden_dim), out_(output_dim), head_W(output_dim, hidden_dim),
        head_b(output_dim, 1) {
    if (n_layers <= 0) throw ValidationError("n_layers must be positive");
    layers_.reserve(n_layers);
    for (int l = 0; l < n_layers; ++l) {
      layers_.emplace_back(l == 0 ? input_dim : hidden_dim, hidden_dim);
    }
    head_W.setZero();
    head_b.setZero();
  }

  void init_params(Rng& rng) {
    for (auto& l : layers_) l.init_params(rng);
    const double a = 1.0 / std::sqrt(double(hid_));
    for (Eigen::Index r = 0; r < head_W.rows(); ++r) {
      for (Eigen::Index c = 0; c < head_W.cols(); ++c) head_W(r, c) = S(rng.uniform(-a, a));
    }
    for (Eigen::Index r = 0; r < head_b.rows(); ++r) head_b(r, 0) = S(rng.uniform(-a, a));
  }

  // xs: T matrices of B x input_dim. Returns T matrices of B x output_dim.
  std::vector<Mat<S>> forward(const std::vector<Mat<S>>& xs, SeqNetCache<S>* cache = nullptr) const {
    if (xs.empty()) throw ValidationError("empty input sequence");
    if (cache) {
      cache->inputs = xs;
      cache->layers.resize(layers_.size());
    }
    std::vector<Mat<S>> hs = xs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      hs = layers_[l].forward(hs, cache ? &cache->layers[l] : nullptr);
    }
    std::vector<Mat<S>> ys(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) {
      ys[t].noalias() = hs[t] * head_W.transpose();
      ys[t].rowwise() += head_b.col(0).transpose();
    }
    return ys;
  }

  // dys: gradients w.r.t. head outputs. Accumulates into grads (param_list
  // order); fills gradients w.r.t. the original inputs when dxs is non-null.
  void backward(const SeqNetCache<S>& cache, const std::vector<Mat<S>>& dys,
                SeqNetGrads<S>& grads, std::vector<Mat<S>>* dxs = nullptr) const {
    const int T = static_cast<int>(dys.size());
    const std::size_t L = layers_.size();
    auto& g = grads.g;

    const auto& top_h = cache.layers[L - 1].h;
    std::vector<Mat<S>> dh(T);
    for (int t = 0; t < T; ++t) {
      g[3 * L].noalias() += dys[t].transpose() * top_h[t];
      g[3 * L + 1].col(0) += dys[t].colwise().sum().transpose();
      dh[t].noalias() = dys[t] * head_W;
    }

    for (std::size_t l = L; l-- > 0;) {
      const auto& layer_in = (l == 0) ? cache.inputs : cache.layers[l - 1].h;
      LstmLayerGrads<S> lgrads;
      lgrads.Wx = std::move(g[3 * l]);
      lgrads.Wh = std::move(g[3 * l + 1]);
      lgrads.b = std::move(g[3 * l + 2]);
      std::vector<Mat<S>> dbelow;
      const bool want_dx = (l > 0) || (dxs != nullptr);
      layers_[l].backward(layer_in, cache.layers[l], dh, lgrads, want_dx ? &dbelow : nullptr);
      g[3 * l] = std::move(lgrads.Wx);
      g[3 * l + 1] = std::move(lgrads.Wh);
      g[3 * l + 2] = std::move(lgrads.b);
      if (l > 0) {
        dh = std::move(dbelow);
      } else if (dxs) {
        *dxs = std::move(dbelow);
      }
    }
  }

  std::vector<Mat<S>*> param_list() {
    std::vector<Mat<S>*> out;
    for (auto& l : layers_) {
      out.push_back(&l.Wx);
      out.push_back(&l.Wh);
      out.push_back(&l.b);
    }
    out.push_back(&head_W);
    out.push_back(&head_b);
    return out;
  }

  std::vector<const Mat<S>*> param_list() const {
    std::vector<const Mat<S>*> out;
    for (const auto& l : layers_) {
      out.push_back(&l.Wx);
      out.push_back(&l.Wh);
      out.push_back(&l.b);
    }
    out.push_back(&head_W);
    out.push_back(&head_b);
    return out;
  }

  SeqNetGrads<S> zero_grads() const {
    SeqNetGrads<S> grads;
    for (const auto* p : param_list()) grads.g.push_back(Mat<S>::Zero(p->rows(), p->cols()));
    return grads;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto* p : param_list()) n += p->size();
    return n;
  }

  S param_sum_squares() const {
    S s = S(0);
    for (const auto* p : param_list()) s += p->array().square().sum();
    return s;
  }

  int n_layers() const { return static_cast<int>(layers_.size()); }
  int input_dim() const { return layers_.empty() ? 0 : layers_[0].input_dim(); }
  int hidden_dim() const { return hid_; }
  int output_dim() const { return out_; }

  std::vector<LstmLayer<S>> layers_;
  int hid_ = 0, out_ = 0;
  Mat<S> head_W, head_b;
};

// ---------------------------------------------------------------------------
// The three networks of the framework.

// Maps (X^T, Y^T, U^T [, S]) causally to the normalized released series.
template <class S>
struct ReleaserNet {
  SeqNet<S> net;
  int noise_dim = 8;
  SiCase si_case = SiCase::none;
};

// Predicts P(X_t = 1 | X^{t-1}, Z^t, S); trained inside the min-max loop.
template <class S>
struct AdversaryNet {
  SeqNet<S> net;
  SiCase si_case = SiCase::none;
};

// Evaluation-only classifier; never receives the true labels as input.
template <class S>
struct AttackerNet {
  SeqNet<S> net;
  SiCase si_case = SiCase::none;
};

inline constexpr int kReleaserHidden = 64;
inline constexpr int kReleaserLayers = 4;
inline constexpr int kAdversaryHidden = 32;
inline constexpr int kAttackerHidden = 32;
inline constexpr int kAttackerLayers = 3;

// Adversary depth per the architecture prose: 2 recurrent layers without
// side information, 3 with it.
inline int adversary_layers(SiCase c) { return c == SiCase::none ? 2 : 3; }

template <class S = double>
std::pair<ReleaserNet<S>, AdversaryNet<S>> init_networks(const ExperimentConfig& cfg) {
  ReleaserNet<S> rel;
  rel.noise_dim = cfg.noise_dim;
  rel.si_case = cfg.si_case;
  rel.net = SeqNet<S>(2 + cfg.noise_dim + releaser_si_dim(cfg.si_case), kReleaserHidden,
                      kReleaserLayers, 1);
  Rng rel_rng(derive_seed(cfg.rng_seed, 11));
  rel.net.init_params(rel_rng);

  AdversaryNet<S> adv;
  adv.si_case = cfg.si_case;
  adv.net = SeqNet<S>(2 + si_dim(cfg.si_case), kAdversaryHidden, adversary_layers(cfg.si_case), 1);
  Rng adv_rng(derive_seed(cfg.rng_seed, 12));
  adv.net.init_params(adv_rng);

  return {std::move(rel), std::move(adv)};
}

template <class S = double>
AttackerNet<S> init_attacker(SiCase si_case, std::uint64_t seed) {
  AttackerNet<S> att;
  att.si_case = si_case;
  att.net = SeqNet<S>(1 + si_dim(si_case), kAttackerHidden, kAttackerLayers, 1);
  Rng rng(derive_seed(seed, 13));
  att.net.init_params(rng);
  return att;
}

// ---------------------------------------------------------------------------
// Batched forwards. B sequences at a time; per-step inputs are concatenated
// column blocks. Side information is appended at every time step.

template <class S>
struct SeqBatch {
  Mat<S> x;                   // B x T true labels
  Mat<S> y;                   // B x T normalized power
  Mat<S> si;                  // B x si_dim encoded side info (adversary view)
  std::vector<Mat<S>> noise;  // T matrices of B x m
};

// True labels shifted one step; column 0 is the x_0 placeholder (zero).
template <class S>
Mat<S> shifted_labels(const Mat<S>& x) {
  Mat<S> past = Mat<S>::Zero(x.rows(), x.cols());
  if (x.cols() > 1) past.rightCols(x.cols() - 1) = x.leftCols(x.cols() - 1);
  return past;
}

template <class S>
Mat<S> releaser_forward_batch(const ReleaserNet<S>& rel, const SeqBatch<S>& batch,
                              SeqNetCache<S>* cache = nullptr) {
  const auto B = batch.x.rows();
  const auto T = batch.x.cols();
  if (batch.y.rows() != B || batch.y.cols() != T) throw ValidationError("x/y shape mismatch");
  if (static_cast<Eigen::Index>(batch.noise.size()) != T) {
    throw ValidationError("noise must have one matrix per step");
  }
  const int m = rel.noise_dim;
  const int sdim = releaser_si_dim(rel.si_case);
  if (sdim > 0 && (batch.si.rows() != B || batch.si.cols() < sdim)) {
    throw ValidationError("side info shape mismatch for releaser input");
  }
  std::vector<Mat<S>> xs(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    if (batch.noise[t].rows() != B || batch.noise[t].cols() != m) {
      throw ValidationError("noise shape mismatch");
    }
    Mat<S> in(B, 2 + m + sdim);
    in.col(0) = batch.x.col(t);
    in.col(1) = batch.y.col(t);
    in.middleCols(2, m) = batch.noise[t];
    if (sdim > 0) in.middleCols(2 + m, sdim) = batch.si.leftCols(sdim);
    xs[t] = std::move(in);
  }
  const auto ys = rel.net.forward(xs, cache);
  Mat<S> z(B, T);
  for (Eigen::Index t = 0; t < T; ++t) z.col(t) = ys[t].col(0);
  return z;
}

template <class S>
Mat<S> adversary_forward_batch(const AdversaryNet<S>& adv, const Mat<S>& z, const Mat<S>& x_past,
                               const Mat<S>& si, SeqNetCache<S>* cache = nullptr) {
  const auto B = z.rows();
  const auto T = z.cols();
  if (x_past.rows() != B || x_past.cols() != T) throw ValidationError("z/x_past shape mismatch");
  const int sdim = si_dim(adv.si_case);
  if (sdim > 0 && (si.rows() != B || si.cols() != sdim)) {
    throw ValidationError("side info shape mismatch for adversary input");
  }
  std::vector<Mat<S>> xs(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    Mat<S> in(B, 2 + sdim);
    in.col(0) = z.col(t);
    in.col(1) = x_past.col(t);
    if (sdim > 0) in.middleCols(2, sdim) = si;
    xs[t] = std::move(in);
  }
  const auto ys = adv.net.forward(xs, cache);
  Mat<S> q(B, T);
  for (Eigen::Index t = 0; t < T; ++t) q.col(t) = sigmoid<S>(ys[t]).col(0);
  return q;
}

template <class S>
Mat<S> attacker_forward_batch(const AttackerNet<S>& att, const Mat<S>& z, const Mat<S>& si,
                              SeqNetCache<S>* cache = nullptr) {
  const auto B = z.rows();
  const auto T = z.cols();
  const int sdim = si_dim(att.si_case);
  if (sdim > 0 && (si.rows() != B || si.cols() != sdim)) {
    throw ValidationError("side info shape mismatch for attacker input");
  }
  std::vector<Mat<S>> xs(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    Mat<S> in(B, 1 + sdim);
    in.col(0) = z.col(t);
    if (sdim > 0) in.middleCols(1, sdim) = si;
    xs[t] = std::move(in);
  }
  const auto ys = att.net.forward(xs, cache);
  Mat<S> q(B, T);
  for (Eigen::Index t = 0; t < T; ++t) q.col(t) = sigmoid<S>(ys[t]).col(0);
  return q;
}

// ---------------------------------------------------------------------------
// Single-sequence interfaces.

inline ReleasedSequence releaser_forward(const ReleaserNet<double>& rel,
                                         const std::vector<int>& x,
                                         const std::vector<double>& y_norm, const NoiseSeed& u,
                                         const std::vector<double>& s_vec) {
  const int T = static_cast<int>(x.size());
  if (static_cast<int>(y_norm.size()) != T) throw ValidationError("x/y length mismatch");
  if (u.u.rows() != T || u.u.cols() != rel.noise_dim) {
    throw ValidationError("noise seed shape mismatch");
  }
  SeqBatch<double> b;
  b.x.resize(1, T);
  b.y.resize(1, T);
  for (int t = 0; t < T; ++t) {
    b.x(0, t) = x[t];
    b.y(0, t) = y_norm[t];
  }
  b.si.resize(1, static_cast<Eigen::Index>(s_vec.size()));
  for (std::size_t i = 0; i < s_vec.size(); ++i) b.si(0, static_cast<Eigen::Index>(i)) = s_vec[i];
  b.noise.resize(T);
  for (int t = 0; t < T; ++t) b.noise[t] = u.u.row(t);
  const Mat<double> z = releaser_forward_batch(rel, b);
  ReleasedSequence out;
  out.z.resize(T);
  for (int t = 0; t < T; ++t) out.z[t] = z(0, t);
  return out;
}

inline Mat<double> row_from(const std::vector<double>& v) {
  Mat<double> m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

// x_past: true labels shifted one step, x_0 placeholder = 0.
inline AdversaryOutput adversary_forward(const AdversaryNet<double>& adv,
                                         const std::vector<double>& z,
                                         const std::vector<double>& x_past,
                                         const std::vector<double>& s_vec) {
  if (z.size() != x_past.size()) throw ValidationError("z/x_past length mismatch");
  const Mat<double> q = adversary_forward_batch(adv, row_from(z), row_from(x_past), row_from(s_vec));
  AdversaryOutput out;
  out.q.resize(q.cols());
  for (Eigen::Index t = 0; t < q.cols(); ++t) out.q[t] = q(0, t);
  return out;
}

inline AdversaryOutput attacker_forward(const AttackerNet<double>& att,
                                        const std::vector<double>& z,
                                        const std::vector<double>& s_vec) {
  const Mat<double> q = attacker_forward_batch(att, row_from(z), row_from(s_vec));
  AdversaryOutput out;
  out.q.resize(q.cols());
  for (Eigen::Index t = 0; t < q.cols(); ++t) out.q[t] = q(0, t);
  return out;
}

}  // namespace smpriv
