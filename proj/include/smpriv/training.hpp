#pragma once

// Alternating adversarial training: k adversary steps against a frozen
// releaser, then one releaser step with gradients flowing through the frozen
// adversary's outputs into the released series. Plus the lambda-sweep runner
// and the loss-history export.

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "smpriv/common.hpp"
#include "smpriv/core_types.hpp"
#include "smpriv/data.hpp"
#include "smpriv/nets.hpp"
#include "smpriv/objectives.hpp"
#include "smpriv/optimizer.hpp"

namespace smpriv {

struct EpochStats {
  int epoch = 0;  // 1-based
  LossReport releaser;            // train mean over releaser phases
  double adversary_loss = 0.0;    // train mean over adversary steps
  double val_releaser_total = 0.0;
  double val_distortion = 0.0;
  double val_adversary_loss = 0.0;
};

template <class S>
struct TrainState {
  ExperimentConfig cfg;
  ReleaserNet<S> releaser;
  AdversaryNet<S> adversary;
  RmsProp<S> releaser_opt;
  RmsProp<S> adversary_opt;
  int epoch = 0;  // completed epochs
  Rng rng;
  std::vector<EpochStats> history;
};

// ---------------------------------------------------------------------------
// Partition tensors: sequences flattened to N x T matrices in normalized
// power units, with the encoded side information per sequence.

template <class S>
struct PartitionTensors {
  Mat<S> x;   // N x T
  Mat<S> y;   // N x T, normalized
  Mat<S> si;  // N x si_dim
};

template <class S>
PartitionTensors<S> make_tensors(const std::vector<LoadSequence>& seqs, double norm_mean,
                                 double norm_std, SiCase si_case, int seq_len) {
  PartitionTensors<S> out;
  const auto N = static_cast<Eigen::Index>(seqs.size());
  out.x.resize(N, seq_len);
  out.y.resize(N, seq_len);
  out.si.resize(N, si_dim(si_case));
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& s = seqs[i];
    if (s.length() != seq_len) {
      throw ValidationError("sequence " + sequence_id(s) + " has length " +
                            std::to_string(s.length()) + ", expected " + std::to_string(seq_len));
    }
    const auto yn = normalize(s.y, norm_mean, norm_std);
    for (int t = 0; t < seq_len; ++t) {
      out.x(i, t) = S(s.x[t]);
      out.y(i, t) = S(yn[t]);
    }
    const auto enc = encode_side_info(s.side, si_case);
    for (std::size_t j = 0; j < enc.size(); ++j) out.si(i, static_cast<Eigen::Index>(j)) = S(enc[j]);
  }
  return out;
}

// Gather a minibatch with fresh uniform seed noise.
template <class S>
SeqBatch<S> gather_batch(const PartitionTensors<S>& data, const std::vector<std::size_t>& idx,
                         int noise_dim, Rng& rng) {
  SeqBatch<S> b;
  const auto B = static_cast<Eigen::Index>(idx.size());
  const auto T = data.x.cols();
  b.x.resize(B, T);
  b.y.resize(B, T);
  b.si.resize(B, data.si.cols());
  for (Eigen::Index i = 0; i < B; ++i) {
    b.x.row(i) = data.x.row(static_cast<Eigen::Index>(idx[i]));
    b.y.row(i) = data.y.row(static_cast<Eigen::Index>(idx[i]));
    b.si.row(i) = data.si.row(static_cast<Eigen::Index>(idx[i]));
  }
  b.noise.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    b.noise[t].resize(B, noise_dim);
    for (Eigen::Index i = 0; i < B; ++i) {
      for (int j = 0; j < noise_dim; ++j) b.noise[t](i, j) = S(rng.uniform01());
    }
  }
  return b;
}

inline void check_finite(double v, int epoch, const char* phase) {
  if (!std::isfinite(v)) {
    throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", " + phase +
                       " phase");
  }
}

// Re-throws numeric failures with the epoch and phase they occurred in.
template <class F>
auto with_phase_diagnostic(int epoch, const char* phase, F&& body) {
  try {
    return body();
  } catch (const NumericError& e) {
    throw NumericError("numeric failure at epoch " + std::to_string(epoch) + ", " +
                       std::string(phase) + " phase: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Loss + gradient computations shared by the phases and the gradient checks.

// Adversary cross-entropy on a fixed release; fills d(loss)/d(phi).
template <class S>
double adversary_loss_and_grads(const AdversaryNet<S>& adv, const Mat<S>& z, const Mat<S>& x,
                                const Mat<S>& si, SeqNetGrads<S>& grads) {
  SeqNetCache<S> cache;
  const Mat<S> q = adversary_forward_batch(adv, z, shifted_labels(x), si, &cache);
  const double loss = double(adversary_loss(q, x));
  const Mat<S> dq = adversary_loss_grad_q(q, x);
  const Mat<S> da = (dq.array() * q.array() * (S(1) - q.array())).matrix();
  std::vector<Mat<S>> dys(da.cols());
  for (Eigen::Index t = 0; t < da.cols(); ++t) dys[t] = da.col(t);
  adv.net.backward(cache, dys, grads);
  return loss;
}

// Releaser loss through the frozen adversary; fills d(total)/d(theta),
// including the ridge term. The adversary parameters receive no update here:
// its backward pass only routes gradients into the released series.
template <class S>
LossReport releaser_loss_and_grads(const ReleaserNet<S>& rel, const AdversaryNet<S>& adv,
                                   const SeqBatch<S>& batch, Method method, double lambda,
                                   double beta, SeqNetGrads<S>& grads) {
  SeqNetCache<S> rel_cache;
  const Mat<S> z = releaser_forward_batch(rel, batch, &rel_cache);
  const Mat<S> x_past = shifted_labels(batch.x);
  SeqNetCache<S> adv_cache;
  const Mat<S> q = adversary_forward_batch(adv, z, x_past, batch.si, &adv_cache);

  const LossReport report =
      method == Method::CAL ? cal_releaser_loss(z, batch.y, q, batch.x, lambda, beta, rel.net)
                            : di_releaser_loss(z, batch.y, q, lambda, beta, rel.net);

  const Mat<S> dq = method == Method::CAL ? cal_privacy_grad_q(q, batch.x, lambda)
                                          : di_privacy_grad_q(q, lambda);
  const Mat<S> da = (dq.array() * q.array() * (S(1) - q.array())).matrix();
  std::vector<Mat<S>> adv_dys(da.cols());
  for (Eigen::Index t = 0; t < da.cols(); ++t) adv_dys[t] = da.col(t);
  auto adv_scratch = adv.net.zero_grads();  // discarded
  std::vector<Mat<S>> adv_dxs;
  adv.net.backward(adv_cache, adv_dys, adv_scratch, &adv_dxs);

  Mat<S> dz = distortion_grad_z(z, batch.y);
  for (Eigen::Index t = 0; t < dz.cols(); ++t) dz.col(t) += adv_dxs[t].col(0);

  std::vector<Mat<S>> rel_dys(dz.cols());
  for (Eigen::Index t = 0; t < dz.cols(); ++t) rel_dys[t] = dz.col(t);
  rel.net.backward(rel_cache, rel_dys, grads);

  // d(ridge)/d(theta) = 2 beta theta / P
  const auto params = rel.net.param_list();
  const S ridge_scale = S(2.0 * beta / double(rel.net.param_count()));
  for (std::size_t i = 0; i < params.size(); ++i) grads.g[i] += ridge_scale * (*params[i]);
  return report;
}

// ---------------------------------------------------------------------------
// Algorithm phases.

// k adversary steps; the releaser parameters are not touched.
template <class S>
double adversary_phase(TrainState<S>& st, const PartitionTensors<S>& train,
                       const ExperimentConfig& cfg) {
  return with_phase_diagnostic(st.epoch + 1, "adversary", [&]() {
    const std::size_t n = static_cast<std::size_t>(train.x.rows());
    const std::size_t B = std::min<std::size_t>(cfg.batch_size, n);
    double loss_sum = 0.0;
    for (int step = 0; step < cfg.adversary_steps; ++step) {
      const auto idx = st.rng.sample_indices(n, B);
      const auto batch = gather_batch(train, idx, cfg.noise_dim, st.rng);
      const Mat<S> z = releaser_forward_batch(st.releaser, batch);
      auto grads = st.adversary.net.zero_grads();
      const double loss = adversary_loss_and_grads(st.adversary, z, batch.x, batch.si, grads);
      check_finite(loss, st.epoch + 1, "adversary");
      loss_sum += loss;
      st.adversary_opt.step(st.adversary.net.param_list(), grads);
    }
    return loss_sum / double(cfg.adversary_steps);
  });
}

// One releaser step; the adversary parameters are not touched, but gradients
// flow through its outputs into z and theta.
template <class S>
LossReport releaser_phase(TrainState<S>& st, const PartitionTensors<S>& train,
                          const ExperimentConfig& cfg) {
  return with_phase_diagnostic(st.epoch + 1, "releaser", [&]() {
    const std::size_t n = static_cast<std::size_t>(train.x.rows());
    const std::size_t B = std::min<std::size_t>(cfg.batch_size, n);
    const auto idx = st.rng.sample_indices(n, B);
    const auto batch = gather_batch(train, idx, cfg.noise_dim, st.rng);

    auto grads = st.releaser.net.zero_grads();
    const LossReport report = releaser_loss_and_grads(
        st.releaser, st.adversary, batch, cfg.method, cfg.lambda, cfg.ridge_coeff, grads);
    check_finite(report.total, st.epoch + 1, "releaser");
    st.releaser_opt.step(st.releaser.net.param_list(), grads);
    return report;
  });
}

// ---------------------------------------------------------------------------
// Full training run.

template <class S>
struct ValStats {
  LossReport releaser;
  double adversary_loss = 0.0;
};

template <class S>
ValStats<S> validation_stats(TrainState<S>& st, const PartitionTensors<S>& val,
                             const ExperimentConfig& cfg) {
  const std::size_t n = static_cast<std::size_t>(val.x.rows());
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  const auto batch = gather_batch(val, idx, cfg.noise_dim, st.rng);
  const Mat<S> z = releaser_forward_batch(st.releaser, batch);
  const Mat<S> x_past = shifted_labels(batch.x);
  const Mat<S> q = adversary_forward_batch(st.adversary, z, x_past, batch.si);
  ValStats<S> out;
  out.releaser = cfg.method == Method::CAL
                     ? cal_releaser_loss(z, batch.y, q, batch.x, cfg.lambda, cfg.ridge_coeff,
                                         st.releaser.net)
                     : di_releaser_loss(z, batch.y, q, cfg.lambda, cfg.ridge_coeff,
                                        st.releaser.net);
  out.adversary_loss = double(adversary_loss(q, batch.x));
  return out;
}

template <class S = double>
TrainState<S> init_train_state(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = validate_config(cfg_in);
  TrainState<S> st;
  st.cfg = cfg;
  auto [rel, adv] = init_networks<S>(cfg);
  st.releaser = std::move(rel);
  st.adversary = std::move(adv);
  st.releaser_opt = RmsProp<S>(cfg.learning_rate, cfg.rmsprop_alpha, cfg.rmsprop_eps);
  st.adversary_opt = RmsProp<S>(cfg.learning_rate, cfg.rmsprop_alpha, cfg.rmsprop_eps);
  st.rng = Rng(derive_seed(cfg.rng_seed, 21));
  return st;
}

// Runs (or resumes) training until cfg.epochs or early stopping on the
// validation releaser loss. patience = 0 disables early stopping.
template <class S>
void run_training(TrainState<S>& st, const DatasetSplit& data) {
  const ExperimentConfig& cfg = st.cfg;
  if (data.train.empty()) throw ValidationError("empty training set");
  const auto train = make_tensors<S>(data.train, data.norm_mean, data.norm_std, cfg.si_case,
                                     cfg.seq_len);
  const bool has_val = !data.validation.empty();
  PartitionTensors<S> val;
  if (has_val) {
    val = make_tensors<S>(data.validation, data.norm_mean, data.norm_std, cfg.si_case,
                          cfg.seq_len);
  }

  const int iters_per_epoch =
      std::max<int>(1, static_cast<int>(train.x.rows()) / cfg.batch_size);

  // The min-max loss drifts upward early on while the adversary catches up
  // (an untrained adversary makes the privacy term look maximally good), so
  // the stopping tracker only engages after a warmup of `patience` epochs.
  const int warmup = cfg.patience;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  for (const auto& h : st.history) {  // resume support
    if (h.epoch > warmup && h.val_releaser_total < best_val) {
      best_val = h.val_releaser_total;
      best_epoch = h.epoch;
    }
  }

  while (st.epoch < cfg.epochs) {
    double adv_sum = 0.0;
    LossReport rel_sum;
    for (int it = 0; it < iters_per_epoch; ++it) {
      adv_sum += adversary_phase(st, train, cfg);
      const LossReport r = releaser_phase(st, train, cfg);
      rel_sum.total += r.total;
      rel_sum.distortion_term += r.distortion_term;
      rel_sum.privacy_term += r.privacy_term;
      rel_sum.regularization_term += r.regularization_term;
    }
    st.epoch += 1;

    EpochStats e;
    e.epoch = st.epoch;
    e.releaser.total = rel_sum.total / iters_per_epoch;
    e.releaser.distortion_term = rel_sum.distortion_term / iters_per_epoch;
    e.releaser.privacy_term = rel_sum.privacy_term / iters_per_epoch;
    e.releaser.regularization_term = rel_sum.regularization_term / iters_per_epoch;
    e.adversary_loss = adv_sum / iters_per_epoch;

    if (has_val) {
      const auto vs = with_phase_diagnostic(st.epoch, "validation",
                                            [&]() { return validation_stats(st, val, cfg); });
      e.val_releaser_total = vs.releaser.total;
      e.val_distortion = vs.releaser.distortion_term;
      e.val_adversary_loss = vs.adversary_loss;
      check_finite(e.val_releaser_total, st.epoch, "validation");
    }
    st.history.push_back(e);

    if (has_val && cfg.patience > 0 && st.epoch > warmup) {
      if (e.val_releaser_total < best_val) {
        best_val = e.val_releaser_total;
        best_epoch = st.epoch;
      } else if (best_epoch > 0 && st.epoch - best_epoch >= cfg.patience) {
        break;
      }
    }
  }
}

template <class S = double>
TrainState<S> run_training(const ExperimentConfig& cfg, const DatasetSplit& data) {
  TrainState<S> st = init_train_state<S>(cfg);
  run_training(st, data);
  return st;
}

// ---------------------------------------------------------------------------
// Lambda sweep. Each grid point trains independently with a seed derived from
// the base seed and the index of the lambda value in the sorted unique grid,
// so repeated values reproduce identical runs. Results are ordered by lambda.

template <class S>
struct SweepRun {
  double lambda = 0.0;
  bool ok = false;
  std::string error;
  TrainState<S> state;
};

// Seed for one grid point, derived from the index of the lambda value in the
// sorted unique grid so that repeated values reproduce identical runs.
inline std::uint64_t sweep_point_seed(std::uint64_t base_seed, const std::vector<double>& grid,
                                      double lambda) {
  std::vector<double> unique_sorted = grid;
  std::sort(unique_sorted.begin(), unique_sorted.end());
  unique_sorted.erase(std::unique(unique_sorted.begin(), unique_sorted.end()),
                      unique_sorted.end());
  const auto idx = static_cast<std::uint64_t>(
      std::lower_bound(unique_sorted.begin(), unique_sorted.end(), lambda) -
      unique_sorted.begin());
  return derive_seed(base_seed, 1000 + idx);
}

template <class S = double>
std::vector<SweepRun<S>> sweep_lambda(const ExperimentConfig& base_cfg,
                                      const std::vector<double>& grid, const DatasetSplit& data,
                                      int n_threads = 1) {
  if (grid.empty()) throw ValidationError("lambda grid must be non-empty");
  std::vector<double> ordered = grid;
  std::sort(ordered.begin(), ordered.end());

  std::vector<SweepRun<S>> runs(ordered.size());
  auto run_one = [&](std::size_t i) {
    runs[i].lambda = ordered[i];
    ExperimentConfig cfg = base_cfg;
    cfg.lambda = ordered[i];
    cfg.rng_seed = static_cast<std::int64_t>(
        sweep_point_seed(static_cast<std::uint64_t>(base_cfg.rng_seed), grid, ordered[i]));
    try {
      runs[i].state = run_training<S>(cfg, data);
      runs[i].ok = true;
    } catch (const Error& e) {
      runs[i].ok = false;
      runs[i].error = e.what();
    }
  };

  if (n_threads <= 1) {
    for (std::size_t i = 0; i < runs.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mu;
    for (int w = 0; w < n_threads; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= runs.size()) return;
            i = next++;
          }
          run_one(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Loss-history export.

inline std::string loss_curves_csv(const std::vector<EpochStats>& history) {
  if (history.empty()) throw ValidationError("empty loss history");
  std::string s =
      "epoch,releaser_total,distortion_term,privacy_term,regularization_term,adversary_loss\n";
  for (const auto& e : history) {
    s += std::to_string(e.epoch) + ',' + format_double(e.releaser.total) + ',' +
         format_double(e.releaser.distortion_term) + ',' + format_double(e.releaser.privacy_term) +
         ',' + format_double(e.releaser.regularization_term) + ',' +
         format_double(e.adversary_loss) + '\n';
  }
  return s;
}

inline void export_loss_curves(const std::vector<EpochStats>& history, const std::string& path) {
  write_file(path, loss_curves_csv(history));
}

struct LossCurveRow {
  int epoch = 0;
  double releaser_total = 0.0;
  double distortion_term = 0.0;
  double privacy_term = 0.0;
  double regularization_term = 0.0;
  double adversary_loss = 0.0;
};

inline std::vector<LossCurveRow> parse_loss_curves_csv(const std::string& text) {
  const auto lines = split(text, '\n');
  if (lines.empty() ||
      trim(lines[0]) !=
          "epoch,releaser_total,distortion_term,privacy_term,regularization_term,adversary_loss") {
    throw FormatError("bad loss-curve CSV header");
  }
  std::vector<LossCurveRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw FormatError("bad loss-curve CSV line " + std::to_string(i + 1));
    LossCurveRow r;
    r.epoch = static_cast<int>(parse_int(f[0]));
    r.releaser_total = parse_double(f[1]);
    r.distortion_term = parse_double(f[2]);
    r.privacy_term = parse_double(f[3]);
    r.regularization_term = parse_double(f[4]);
    r.adversary_loss = parse_double(f[5]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace smpriv
