#pragma once

// Evaluation side of the framework: generate releases from a trained
// releaser, train an independent attacker on them (optionally with side
// information, optionally with the release channel zeroed for the SI-only
// baseline), and assemble privacy-utility trade-off points.

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "smpriv/common.hpp"
#include "smpriv/core_types.hpp"
#include "smpriv/data.hpp"
#include "smpriv/nets.hpp"
#include "smpriv/objectives.hpp"
#include "smpriv/optimizer.hpp"
#include "smpriv/training.hpp"

namespace smpriv {

struct AttackReport {
  double balanced_accuracy = 0.0;
  ConfusionCounts confusion;
  SiCase si_case = SiCase::none;
  bool uses_si = false;
  std::int64_t n_examples = 0;  // (sequence, t) pairs
};

inline std::string attack_report_json(const AttackReport& r) {
  nlohmann::json j;
  j["balanced_accuracy"] = r.balanced_accuracy;
  j["confusion"] = {{"c11", r.confusion.c11}, {"c12", r.confusion.c12},
                    {"c21", r.confusion.c21}, {"c22", r.confusion.c22}};
  j["si_case"] = to_string(r.si_case);
  j["uses_si"] = r.uses_si;
  j["n_examples"] = r.n_examples;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Release generation: one sanitized sequence per input sequence, fresh seeded
// noise, denormalized to kW and clipped at zero for reporting.

template <class S>
std::vector<ReleasedSequence> generate_release(const ReleaserNet<S>& releaser,
                                               const std::vector<LoadSequence>& seqs,
                                               double norm_mean, double norm_std,
                                               const ExperimentConfig& cfg,
                                               std::uint64_t stream_seed) {
  std::vector<ReleasedSequence> out;
  if (seqs.empty()) return out;
  const auto tensors =
      make_tensors<S>(seqs, norm_mean, norm_std, releaser.si_case, cfg.seq_len);
  Rng rng(derive_seed(stream_seed, 31));
  std::vector<std::size_t> idx(seqs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto batch = gather_batch(tensors, idx, cfg.noise_dim, rng);
  const Mat<S> z = releaser_forward_batch(releaser, batch);

  out.resize(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    out[i].z.resize(cfg.seq_len);
    for (int t = 0; t < cfg.seq_len; ++t) {
      out[i].z[t] = std::max(0.0, double(z(static_cast<Eigen::Index>(i), t)) * norm_std + norm_mean);
    }
  }
  return out;
}

// NE2 between released kW series and the original loads.
inline double release_ne2(const std::vector<ReleasedSequence>& released,
                          const std::vector<LoadSequence>& seqs) {
  if (released.size() != seqs.size()) throw ValidationError("release/sequence count mismatch");
  if (seqs.empty()) throw ValidationError("ne2 of empty partition");
  const int T = seqs[0].length();
  Mat<double> z(seqs.size(), T), y(seqs.size(), T);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (static_cast<int>(released[i].z.size()) != T || seqs[i].length() != T) {
      throw ValidationError("ne2: length mismatch");
    }
    for (int t = 0; t < T; ++t) {
      z(static_cast<Eigen::Index>(i), t) = released[i].z[t];
      y(static_cast<Eigen::Index>(i), t) = seqs[i].y[t];
    }
  }
  return ne2(z, y);
}

// ---------------------------------------------------------------------------
// Attacker data: released series (normalized), labels and encoded SI.

template <class S>
struct AttackTensors {
  Mat<S> z;   // N x T normalized released power
  Mat<S> x;   // N x T true labels
  Mat<S> si;  // N x si_dim
};

template <class S>
AttackTensors<S> make_attack_tensors(const std::vector<ReleasedSequence>& released,
                                     const std::vector<LoadSequence>& seqs, double norm_mean,
                                     double norm_std, SiCase si_case) {
  if (released.size() != seqs.size()) throw ValidationError("release/sequence count mismatch");
  AttackTensors<S> out;
  if (seqs.empty()) return out;
  const int T = seqs[0].length();
  const auto N = static_cast<Eigen::Index>(seqs.size());
  out.z.resize(N, T);
  out.x.resize(N, T);
  out.si.resize(N, si_dim(si_case));
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto zn = normalize(released[i].z, norm_mean, norm_std);
    for (int t = 0; t < T; ++t) {
      out.z(i, t) = S(zn[t]);
      out.x(i, t) = S(seqs[i].x[t]);
    }
    const auto enc = encode_side_info(seqs[i].side, si_case);
    for (std::size_t j = 0; j < enc.size(); ++j) out.si(i, static_cast<Eigen::Index>(j)) = S(enc[j]);
  }
  return out;
}

// Pass-through variant: the "released" series is the raw load itself.
template <class S>
AttackTensors<S> make_attack_tensors_raw(const std::vector<LoadSequence>& seqs, double norm_mean,
                                         double norm_std, SiCase si_case) {
  std::vector<ReleasedSequence> passthrough(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) passthrough[i].z = seqs[i].y;
  return make_attack_tensors<S>(passthrough, seqs, norm_mean, norm_std, si_case);
}

template <class S>
ConfusionCounts confusion_from_predictions(const Mat<S>& q, const Mat<S>& x, double threshold) {
  ConfusionCounts c;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const bool pred = double(q(i, j)) >= threshold;
      const bool truth = x(i, j) > S(0.5);
      if (truth && pred) ++c.c11;
      else if (truth && !pred) ++c.c12;
      else if (!truth && pred) ++c.c21;
      else ++c.c22;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Attacker training: per-step cross-entropy, RMSprop, early stopping on
// validation balanced accuracy. zero_z trains the SI-only variant.

template <class S>
AttackerNet<S> train_attacker(const AttackTensors<S>& train, const AttackTensors<S>& val,
                              SiCase si_case, const ExperimentConfig& cfg, std::uint64_t seed,
                              bool zero_z = false) {
  const auto n = train.x.rows();
  if (n == 0) throw ValidationError("empty attacker training set");
  const double label_sum = double(train.x.sum());
  if (label_sum == 0.0 || label_sum == double(train.x.size())) {
    throw ValidationError("degenerate labels: single class in attacker training set");
  }

  AttackerNet<S> att = init_attacker<S>(si_case, seed);
  RmsProp<S> opt(cfg.learning_rate, cfg.rmsprop_alpha, cfg.rmsprop_eps);
  Rng rng(derive_seed(seed, 41));

  Mat<S> train_z = train.z;
  Mat<S> val_z = val.z;
  if (zero_z) {
    train_z.setZero();
    val_z.setZero();
  }

  const std::size_t B = std::min<std::size_t>(cfg.batch_size, static_cast<std::size_t>(n));
  const int iters = std::max<int>(1, static_cast<int>(n) / static_cast<int>(B));
  const bool has_val = val.x.rows() > 0;

  AttackerNet<S> best = att;
  double best_val = -1.0;
  int best_epoch = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (int it = 0; it < iters; ++it) {
      const auto idx = rng.sample_indices(static_cast<std::size_t>(n), B);
      Mat<S> zb(idx.size(), train_z.cols()), xb(idx.size(), train.x.cols()),
          sib(idx.size(), train.si.cols());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        zb.row(static_cast<Eigen::Index>(i)) = train_z.row(static_cast<Eigen::Index>(idx[i]));
        xb.row(static_cast<Eigen::Index>(i)) = train.x.row(static_cast<Eigen::Index>(idx[i]));
        sib.row(static_cast<Eigen::Index>(i)) = train.si.row(static_cast<Eigen::Index>(idx[i]));
      }
      SeqNetCache<S> cache;
      const Mat<S> q = attacker_forward_batch(att, zb, sib, &cache);
      const double loss = double(adversary_loss(q, xb));
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite attacker loss at epoch " + std::to_string(epoch));
      }
      const Mat<S> dq = adversary_loss_grad_q(q, xb);
      const Mat<S> da = (dq.array() * q.array() * (S(1) - q.array())).matrix();
      std::vector<Mat<S>> dys(da.cols());
      for (Eigen::Index t = 0; t < da.cols(); ++t) dys[t] = da.col(t);
      auto grads = att.net.zero_grads();
      att.net.backward(cache, dys, grads);
      opt.step(att.net.param_list(), grads);
    }

    if (has_val && cfg.patience > 0) {
      const Mat<S> qv = attacker_forward_batch(att, val_z, val.si);
      double bacc = 0.5;
      try {
        bacc = balanced_accuracy(confusion_from_predictions(qv, val.x, 0.5));
      } catch (const ValidationError&) {
        // single-class validation slice: keep chance level
      }
      if (bacc > best_val) {
        best_val = bacc;
        best = att;
        best_epoch = epoch;
      } else if (epoch - best_epoch >= cfg.patience) {
        return best;
      }
    }
  }
  return (has_val && cfg.patience > 0) ? best : att;
}

// ---------------------------------------------------------------------------
// Attacker evaluation at the fixed 0.5 threshold.

template <class S>
AttackReport evaluate_attacker(const AttackerNet<S>& att, const AttackTensors<S>& test,
                               double threshold = 0.5, bool zero_z = false) {
  if (test.x.rows() == 0) throw ValidationError("empty evaluation partition");
  Mat<S> z = test.z;
  if (zero_z) z.setZero();
  const Mat<S> q = attacker_forward_batch(att, z, test.si);
  AttackReport r;
  r.confusion = confusion_from_predictions(q, test.x, threshold);
  r.balanced_accuracy = balanced_accuracy(r.confusion);
  r.si_case = att.si_case;
  r.uses_si = si_dim(att.si_case) > 0;
  r.n_examples = static_cast<std::int64_t>(test.x.size());
  return r;
}

// SI-only baseline: attacker input is the side information alone (release
// channel zeroed) on both sides of train and test.
template <class S = double>
AttackReport si_only_baseline(const DatasetSplit& data, SiCase si_case,
                              const ExperimentConfig& cfg, std::uint64_t seed) {
  if (si_case != SiCase::day && si_case != SiCase::day_month) {
    throw ValidationError("si_only_baseline requires si_case 2 or 3");
  }
  const auto train =
      make_attack_tensors_raw<S>(data.train, data.norm_mean, data.norm_std, si_case);
  const auto val =
      make_attack_tensors_raw<S>(data.validation, data.norm_mean, data.norm_std, si_case);
  const auto test = make_attack_tensors_raw<S>(data.test, data.norm_mean, data.norm_std, si_case);
  const auto att = train_attacker<S>(train, val, si_case, cfg, seed, /*zero_z=*/true);
  return evaluate_attacker<S>(att, test, 0.5, /*zero_z=*/true);
}

// ---------------------------------------------------------------------------
// Trade-off assembly.

struct TradeoffKey {
  Method method = Method::CAL;
  SiCase si_case = SiCase::none;
  double lambda = 0.0;
};

inline std::vector<TradeoffPoint> assemble_tradeoff(const std::vector<TradeoffKey>& keys,
                                                    const std::vector<double>& ne2_values,
                                                    const std::vector<AttackReport>& attacks,
                                                    const std::vector<double>& baselines) {
  if (keys.size() != ne2_values.size() || keys.size() != attacks.size() ||
      keys.size() != baselines.size()) {
    throw ValidationError("assemble_tradeoff: input length mismatch");
  }
  std::vector<TradeoffPoint> out(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out[i].method = keys[i].method;
    out[i].si_case = keys[i].si_case;
    out[i].lambda = keys[i].lambda;
    out[i].ne2 = ne2_values[i];
    out[i].attacker_balanced_accuracy = attacks[i].balanced_accuracy;
    out[i].si_only_baseline = baselines[i];
  }
  return out;
}

// Trade-off CSV. The first six columns are the stable interface; status marks
// sweep points whose training failed (their metric fields are left empty).
inline std::string tradeoff_csv_header() {
  return "method,si_case,lambda,ne2,attacker_bacc,si_only_baseline,status";
}

struct TradeoffRow {
  TradeoffPoint point;
  bool ok = true;
};

inline std::string write_tradeoff_csv(const std::vector<TradeoffRow>& rows) {
  std::string s = tradeoff_csv_header() + "\n";
  for (const auto& r : rows) {
    s += to_string(r.point.method) + ',' + to_string(r.point.si_case) + ',' +
         format_double(r.point.lambda) + ',';
    if (r.ok) {
      s += format_double(r.point.ne2) + ',' + format_double(r.point.attacker_balanced_accuracy) +
           ',' + format_double(r.point.si_only_baseline) + ",ok\n";
    } else {
      s += ",,,failed\n";
    }
  }
  return s;
}

inline std::vector<TradeoffRow> parse_tradeoff_csv(const std::string& text) {
  const auto lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != tradeoff_csv_header()) {
    throw FormatError("bad trade-off CSV header");
  }
  std::vector<TradeoffRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) throw FormatError("bad trade-off CSV line " + std::to_string(i + 1));
    TradeoffRow r;
    r.point.method = parse_method(f[0]);
    r.point.si_case = parse_si_case(f[1]);
    r.point.lambda = parse_double(f[2]);
    r.ok = (f[6] == "ok");
    if (r.ok) {
      r.point.ne2 = parse_double(f[3]);
      r.point.attacker_balanced_accuracy = parse_double(f[4]);
      r.point.si_only_baseline = parse_double(f[5]);
    }
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Day-of-week predictability probe: sequence classifier from (X^T, Y^T) to
// the day of the week; reports mean per-class recall on the test partition.

template <class S = double>
double si_predictability_probe(const DatasetSplit& data, const ExperimentConfig& cfg,
                               std::uint64_t seed) {
  const int n_classes = 7;
  auto dow_labels = [](const std::vector<LoadSequence>& seqs) {
    std::vector<int> out;
    out.reserve(seqs.size());
    for (const auto& s : seqs) out.push_back(s.side.day_of_week);
    return out;
  };
  const auto train_labels = dow_labels(data.train);
  {
    std::set<int> classes(train_labels.begin(), train_labels.end());
    if (classes.size() < 2) throw ValidationError("probe needs at least two day classes");
  }

  const auto train = make_tensors<S>(data.train, data.norm_mean, data.norm_std, SiCase::none,
                                     cfg.seq_len);
  const auto val = make_tensors<S>(data.validation, data.norm_mean, data.norm_std, SiCase::none,
                                   cfg.seq_len);
  const auto test = make_tensors<S>(data.test, data.norm_mean, data.norm_std, SiCase::none,
                                    cfg.seq_len);
  const auto val_labels = dow_labels(data.validation);
  const auto test_labels = dow_labels(data.test);

  SeqNet<S> net(2, 32, 3, n_classes);
  Rng init_rng(derive_seed(seed, 51));
  net.init_params(init_rng);
  RmsProp<S> opt(cfg.learning_rate, cfg.rmsprop_alpha, cfg.rmsprop_eps);
  Rng rng(derive_seed(seed, 52));

  auto make_inputs = [](const PartitionTensors<S>& p, const std::vector<std::size_t>& idx) {
    std::vector<Mat<S>> xs(p.x.cols());
    for (Eigen::Index t = 0; t < p.x.cols(); ++t) {
      Mat<S> in(idx.size(), 2);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        in(static_cast<Eigen::Index>(i), 0) = p.x(static_cast<Eigen::Index>(idx[i]), t);
        in(static_cast<Eigen::Index>(i), 1) = p.y(static_cast<Eigen::Index>(idx[i]), t);
      }
      xs[t] = std::move(in);
    }
    return xs;
  };

  auto all_indices = [](std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  };

  // mean per-class recall of last-step argmax predictions
  auto mean_recall = [&](const PartitionTensors<S>& p, const std::vector<int>& labels) {
    const auto idx = all_indices(labels.size());
    const auto ys = net.forward(make_inputs(p, idx));
    const Mat<S>& logits = ys.back();
    std::array<std::int64_t, 7> hit{}, total{};
    for (std::size_t i = 0; i < labels.size(); ++i) {
      Eigen::Index arg = 0;
      logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
      total[labels[i]] += 1;
      if (static_cast<int>(arg) == labels[i]) hit[labels[i]] += 1;
    }
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < n_classes; ++c) {
      if (total[c] > 0) {
        sum += double(hit[c]) / double(total[c]);
        ++present;
      }
    }
    if (present == 0) throw ValidationError("no classes present");
    return sum / double(present);
  };

  const std::size_t n = train_labels.size();
  const std::size_t B = std::min<std::size_t>(cfg.batch_size, n);
  const int iters = std::max<int>(1, static_cast<int>(n / B));
  const bool has_val = !val_labels.empty();

  SeqNet<S> best_net = net;
  double best_val = -1.0;
  int best_epoch = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (int it = 0; it < iters; ++it) {
      const auto idx = rng.sample_indices(n, B);
      SeqNetCache<S> cache;
      const auto ys = net.forward(make_inputs(train, idx), &cache);
      const Mat<S>& logits = ys.back();
      // softmax cross-entropy on the final step
      Mat<S> p = logits;
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const S mx = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - mx).exp();
        p.row(i) /= p.row(i).sum();
      }
      Mat<S> dlast = p;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        dlast(static_cast<Eigen::Index>(i), train_labels[idx[i]]) -= S(1);
      }
      dlast /= S(idx.size());
      std::vector<Mat<S>> dys(ys.size());
      for (std::size_t t = 0; t + 1 < ys.size(); ++t) dys[t] = Mat<S>::Zero(p.rows(), n_classes);
      dys.back() = dlast;
      auto grads = net.zero_grads();
      net.backward(cache, dys, grads);
      opt.step(net.param_list(), grads);
    }
    if (has_val && cfg.patience > 0) {
      const double r = mean_recall(val, val_labels);
      if (r > best_val) {
        best_val = r;
        best_net = net;
        best_epoch = epoch;
      } else if (epoch - best_epoch >= cfg.patience) {
        net = best_net;
        break;
      }
    }
  }
  if (has_val && cfg.patience > 0 && best_val >= 0.0) net = best_net;
  return mean_recall(test, test_labels);
}

}  // namespace smpriv
