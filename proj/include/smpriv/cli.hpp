#pragma once

// Command-line pipeline: prepare-data, synth, train, sweep, evaluate, plot,
// report. Exit codes: 0 success, 2 input error, 3 numeric failure, 4
// internal error. All randomness is funneled through --seed; sub-streams are
// derived per purpose so results do not depend on thread scheduling.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "smpriv/checkpoint.hpp"
#include "smpriv/common.hpp"
#include "smpriv/core_types.hpp"
#include "smpriv/data.hpp"
#include "smpriv/evaluation.hpp"
#include "smpriv/nets.hpp"
#include "smpriv/objectives.hpp"
#include "smpriv/plot.hpp"
#include "smpriv/training.hpp"

namespace smpriv::cli {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "smpriv 0.1.0";

using Real = double;

// ---------------------------------------------------------------------------
// Run manifest: config snapshot, input hashes, outputs, timings.

class ManifestWriter {
 public:
  ManifestWriter(std::string command, fs::path out_dir)
      : command_(std::move(command)), out_dir_(std::move(out_dir)),
        start_(std::chrono::steady_clock::now()) {}

  void add_input(const fs::path& p, const std::string& content) {
    inputs_[p.string()] = hex64(fnv1a64(content));
  }
  void add_output(const fs::path& p) { outputs_.push_back(p.string()); }
  void set_config(const std::string& text) { config_ = text; }

  void finalize() const {
    nlohmann::json j;
    j["tool_version"] = kToolVersion;
    j["command"] = command_;
    j["inputs"] = inputs_;
    for (const auto& o : outputs_) {
      if (!fs::exists(o)) throw Error("manifest lists missing output: " + o);
    }
    j["outputs"] = outputs_;
    if (!config_.empty()) j["config"] = config_;
    j["wall_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start_)
                       .count();
    write_file((out_dir_ / "manifest.json").string(), j.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path out_dir_;
  std::chrono::steady_clock::time_point start_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
  std::string config_;
};

// ---------------------------------------------------------------------------
// Shared helpers.

inline fs::path resolve_out_dir(const std::string& out) {
  fs::path p(out);
  if (const char* root = std::getenv("SMPRIV_OUT_ROOT"); root && *root && p.is_relative()) {
    p = fs::path(root) / p;
  }
  fs::create_directories(p);
  return p;
}

inline int default_parallelism() {
  if (const char* env = std::getenv("SMPRIV_PARALLEL"); env && *env) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

struct LoadedData {
  DatasetSplit split;
  std::string dataset_text;
  std::string manifest_text;
  fs::path dataset_path;
  fs::path manifest_path;
};

inline LoadedData load_data_dir(const std::string& dir) {
  LoadedData d;
  d.dataset_path = fs::path(dir) / "dataset.csv";
  d.manifest_path = fs::path(dir) / "split.json";
  d.dataset_text = read_file(d.dataset_path.string());
  d.manifest_text = read_file(d.manifest_path.string());
  d.split = load_split(d.dataset_text, d.manifest_text);
  return d;
}

inline void write_dataset_dir(const fs::path& out_dir, const std::vector<LoadSequence>& all,
                              const DatasetSplit& split, ManifestWriter& manifest) {
  const auto csv_path = out_dir / "dataset.csv";
  const auto split_path = out_dir / "split.json";
  write_file(csv_path.string(), write_dataset_csv(all));
  write_file(split_path.string(), write_split_manifest(split));
  manifest.add_output(csv_path);
  manifest.add_output(split_path);
}

inline std::string sanitize_component(std::string s) {
  for (auto& c : s) {
    if (c == '*') c = 's';
    if (c == '.' || c == '/' || c == ' ') c = '_';
  }
  return s;
}

// ---------------------------------------------------------------------------
// prepare-data

inline void cmd_prepare_data(const std::string& input, const std::string& out,
                             const std::string& house_id, int seq_len, std::uint64_t seed) {
  const fs::path out_dir = resolve_out_dir(out);
  ManifestWriter manifest("prepare-data", out_dir);
  const std::string raw_text = read_file(input);
  manifest.add_input(input, raw_text);

  const auto raw = load_raw_csv(input);
  const auto hourly = resample_hourly(raw.records);
  const auto windows = window_days(hourly.records, seq_len, house_id);
  if (windows.sequences.size() < 20) {
    throw ValidationError("only " + std::to_string(windows.sequences.size()) +
                          " complete days; need at least 20");
  }
  const auto split = split_dataset(windows.sequences, seed);

  std::cout << "rows: " << raw.records.size() << " (malformed: " << raw.malformed << ")\n"
            << "hourly records: " << hourly.records.size() << " (gap hours: " << hourly.gap_hours
            << ")\n"
            << "days: " << windows.sequences.size() << " (dropped: " << windows.dropped_days
            << ")\n"
            << "split: train " << split.train.size() << ", validation "
            << split.validation.size() << ", test " << split.test.size() << "\n";

  write_dataset_dir(out_dir, windows.sequences, split, manifest);
  manifest.finalize();
}

// ---------------------------------------------------------------------------
// synth

inline void cmd_synth(const SynthParams& params, const std::string& profile,
                      const std::string& out) {
  SynthParams p = params;
  if (profile == "dow") {
    const SynthParams base = synth_params_dow_profile();
    p.arrive = base.arrive;
    p.depart = base.depart;
  } else if (profile == "flat") {
    const SynthParams base = synth_params_flat_profile();
    p.arrive = base.arrive;
    p.depart = base.depart;
  } else {
    throw ValidationError("unknown profile '" + profile + "' (expected dow or flat)");
  }
  validate_synth_params(p);

  const fs::path out_dir = resolve_out_dir(out);
  ManifestWriter manifest("synth", out_dir);
  const auto seqs = synthesize_dataset(p);
  const auto split = split_dataset(seqs, p.rng_seed);
  std::cout << "synthesized " << seqs.size() << " days; split: train " << split.train.size()
            << ", validation " << split.validation.size() << ", test " << split.test.size()
            << "\n";
  write_dataset_dir(out_dir, seqs, split, manifest);
  manifest.finalize();
}

// ---------------------------------------------------------------------------
// train

inline void cmd_train(const ExperimentConfig& cfg, const std::string& config_text,
                      const std::string& data_dir, const std::string& out,
                      const std::string& resume_path) {
  const fs::path out_dir = resolve_out_dir(out);
  ManifestWriter manifest("train", out_dir);
  const auto data = load_data_dir(data_dir);
  manifest.add_input(data.dataset_path, data.dataset_text);
  manifest.add_input(data.manifest_path, data.manifest_text);

  TrainState<Real> st;
  if (!resume_path.empty()) {
    const std::string ckpt_text = read_file(resume_path);
    manifest.add_input(resume_path, ckpt_text);
    st = load_checkpoint<Real>(ckpt_text);
    st.cfg.epochs = cfg.epochs;  // allow extending a finished run
  } else {
    st = init_train_state<Real>(cfg);
  }
  manifest.set_config(write_config(st.cfg));

  run_training(st, data.split);
  std::cout << "trained " << st.epoch << " epochs";
  if (!st.history.empty()) {
    std::cout << "; final train loss " << format_double(st.history.back().releaser.total)
              << ", validation loss " << format_double(st.history.back().val_releaser_total);
  }
  std::cout << "\n";

  const auto ckpt_path = out_dir / "checkpoint.json";
  const auto loss_path = out_dir / "loss_curves.csv";
  write_file(ckpt_path.string(), save_checkpoint(st));
  export_loss_curves(st.history, loss_path.string());
  manifest.add_output(ckpt_path);
  manifest.add_output(loss_path);
  manifest.finalize();
}

// ---------------------------------------------------------------------------
// evaluate

inline void cmd_evaluate(const std::string& checkpoint_path, const std::string& data_dir,
                         const std::string& out, bool si_only, std::uint64_t seed) {
  const fs::path out_dir = resolve_out_dir(out);
  ManifestWriter manifest("evaluate", out_dir);
  const std::string ckpt_text = read_file(checkpoint_path);
  manifest.add_input(checkpoint_path, ckpt_text);
  const auto data = load_data_dir(data_dir);
  manifest.add_input(data.dataset_path, data.dataset_text);
  manifest.add_input(data.manifest_path, data.manifest_text);

  const auto st = load_checkpoint<Real>(ckpt_text);
  const auto& split = data.split;
  const auto report_path = out_dir / "attack_report.json";

  if (si_only) {
    const auto report = si_only_baseline<Real>(split, st.cfg.si_case, st.cfg, derive_seed(seed, 61));
    write_file(report_path.string(), attack_report_json(report));
    std::cout << "si-only baseline balanced accuracy: "
              << format_double(report.balanced_accuracy) << "\n";
    manifest.add_output(report_path);
    manifest.finalize();
    return;
  }

  const auto rel_train = generate_release(st.releaser, split.train, split.norm_mean,
                                          split.norm_std, st.cfg, derive_seed(seed, 62));
  const auto rel_val = generate_release(st.releaser, split.validation, split.norm_mean,
                                        split.norm_std, st.cfg, derive_seed(seed, 63));
  const auto rel_test = generate_release(st.releaser, split.test, split.norm_mean, split.norm_std,
                                         st.cfg, derive_seed(seed, 64));

  const auto att_train = make_attack_tensors<Real>(rel_train, split.train, split.norm_mean,
                                                   split.norm_std, st.cfg.si_case);
  const auto att_val = make_attack_tensors<Real>(rel_val, split.validation, split.norm_mean,
                                                 split.norm_std, st.cfg.si_case);
  const auto att_test = make_attack_tensors<Real>(rel_test, split.test, split.norm_mean,
                                                  split.norm_std, st.cfg.si_case);

  const auto attacker = train_attacker<Real>(att_train, att_val, st.cfg.si_case, st.cfg,
                                             derive_seed(seed, 65));
  const auto report = evaluate_attacker<Real>(attacker, att_test);
  const double test_ne2 = release_ne2(rel_test, split.test);

  std::cout << "test NE2: " << format_double(test_ne2)
            << ", attacker balanced accuracy: " << format_double(report.balanced_accuracy)
            << "\n";

  write_file(report_path.string(), attack_report_json(report));
  manifest.add_output(report_path);

  std::string release_csv = "seq_id,t,z_kw\n";
  for (std::size_t i = 0; i < rel_test.size(); ++i) {
    const auto id = sequence_id(split.test[i]);
    for (std::size_t t = 0; t < rel_test[i].z.size(); ++t) {
      release_csv += id + ',' + std::to_string(t) + ',' + format_double(rel_test[i].z[t]) + '\n';
    }
  }
  const auto release_path = out_dir / "release.csv";
  write_file(release_path.string(), release_csv);
  manifest.add_output(release_path);
  manifest.finalize();
}

// ---------------------------------------------------------------------------
// sweep

struct SweepPointOutcome {
  Method method = Method::CAL;
  SiCase si_case = SiCase::none;
  double lambda = 0.0;
  bool ok = false;
  std::string error;
  double ne2_value = 0.0;
  double bacc = 0.0;
  double baseline = 0.5;
  TrainState<Real> state;
  AttackReport report;
};

// One full trade-off point: train the releaser, release the partitions, train
// and evaluate the attacker. Seeds depend only on (method, case, lambda).
inline SweepPointOutcome run_sweep_point(ExperimentConfig cfg, const DatasetSplit& split,
                                         std::uint64_t point_seed, double baseline) {
  SweepPointOutcome o;
  o.method = cfg.method;
  o.si_case = cfg.si_case;
  o.lambda = cfg.lambda;
  o.baseline = baseline;
  cfg.rng_seed = static_cast<std::int64_t>(point_seed);
  try {
    o.state = run_training<Real>(cfg, split);
    const auto rel_train = generate_release(o.state.releaser, split.train, split.norm_mean,
                                            split.norm_std, cfg, derive_seed(point_seed, 62));
    const auto rel_val = generate_release(o.state.releaser, split.validation, split.norm_mean,
                                          split.norm_std, cfg, derive_seed(point_seed, 63));
    const auto rel_test = generate_release(o.state.releaser, split.test, split.norm_mean,
                                           split.norm_std, cfg, derive_seed(point_seed, 64));
    const auto att_train = make_attack_tensors<Real>(rel_train, split.train, split.norm_mean,
                                                     split.norm_std, cfg.si_case);
    const auto att_val = make_attack_tensors<Real>(rel_val, split.validation, split.norm_mean,
                                                   split.norm_std, cfg.si_case);
    const auto att_test = make_attack_tensors<Real>(rel_test, split.test, split.norm_mean,
                                                    split.norm_std, cfg.si_case);
    const auto attacker =
        train_attacker<Real>(att_train, att_val, cfg.si_case, cfg, derive_seed(point_seed, 65));
    o.report = evaluate_attacker<Real>(attacker, att_test);
    o.bacc = o.report.balanced_accuracy;
    o.ne2_value = release_ne2(rel_test, split.test);
    o.ok = true;
  } catch (const Error& e) {
    o.ok = false;
    o.error = e.what();
  }
  return o;
}

inline void cmd_sweep(const ExperimentConfig& base_cfg, const std::string& data_dir,
                      const std::string& out, const std::vector<double>& lambdas,
                      const std::vector<Method>& methods, const std::vector<SiCase>& cases,
                      int parallel) {
  if (lambdas.empty()) throw ValidationError("lambda grid must be non-empty");
  const fs::path out_dir = resolve_out_dir(out);
  ManifestWriter manifest("sweep", out_dir);
  const auto data = load_data_dir(data_dir);
  manifest.add_input(data.dataset_path, data.dataset_text);
  manifest.add_input(data.manifest_path, data.manifest_text);
  manifest.set_config(write_config(base_cfg));

  const auto base_seed = static_cast<std::uint64_t>(base_cfg.rng_seed);

  // SI-only baselines, one per case that actually has side information.
  std::map<SiCase, double> baselines;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const SiCase c = cases[ci];
    if (baselines.count(c)) continue;
    if (si_dim(c) == 0) {
      baselines[c] = 0.5;  // chance: nothing to exploit without SI
      continue;
    }
    ExperimentConfig cfg = base_cfg;
    cfg.si_case = c;
    const auto report =
        si_only_baseline<Real>(data.split, c, cfg, derive_seed(base_seed, 500 + ci));
    baselines[c] = report.balanced_accuracy;
    std::cout << "si-only baseline, case " << to_string(c) << ": "
              << format_double(report.balanced_accuracy) << "\n";
  }

  std::vector<double> grid = lambdas;
  std::sort(grid.begin(), grid.end());

  struct Job {
    ExperimentConfig cfg;
    std::uint64_t seed;
    double baseline;
  };
  std::vector<Job> jobs;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
      const std::uint64_t mc_seed =
          derive_seed(derive_seed(base_seed, 100 + mi), 200 + ci);
      for (double l : grid) {
        ExperimentConfig cfg = base_cfg;
        cfg.method = methods[mi];
        cfg.si_case = cases[ci];
        cfg.lambda = l;
        jobs.push_back(Job{cfg, sweep_point_seed(mc_seed, grid, l), baselines.at(cases[ci])});
      }
    }
  }

  std::vector<SweepPointOutcome> outcomes(jobs.size());
  {
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&]() {
      while (true) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= jobs.size()) return;
          i = next++;
        }
        outcomes[i] = run_sweep_point(jobs[i].cfg, data.split, jobs[i].seed, jobs[i].baseline);
      }
    };
    const int n_threads = std::max(1, parallel);
    std::vector<std::thread> pool;
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<TradeoffRow> rows;
  const fs::path points_dir = out_dir / "points";
  fs::create_directories(points_dir);
  for (const auto& o : outcomes) {
    TradeoffRow row;
    row.ok = o.ok;
    row.point.method = o.method;
    row.point.si_case = o.si_case;
    row.point.lambda = o.lambda;
    row.point.ne2 = o.ne2_value;
    row.point.attacker_balanced_accuracy = o.bacc;
    row.point.si_only_baseline = o.baseline;
    rows.push_back(row);

    const auto point_dir =
        points_dir / (to_string(o.method) + "_case" + sanitize_component(to_string(o.si_case)) +
                      "_l" + sanitize_component(format_double(o.lambda)));
    fs::create_directories(point_dir);
    nlohmann::json meta;
    meta["method"] = to_string(o.method);
    meta["si_case"] = to_string(o.si_case);
    meta["lambda"] = o.lambda;
    meta["status"] = o.ok ? "ok" : "failed";
    if (!o.ok) meta["error"] = o.error;
    write_file((point_dir / "point.json").string(), meta.dump(2) + "\n");
    manifest.add_output(point_dir / "point.json");
    if (o.ok) {
      write_file((point_dir / "checkpoint.json").string(), save_checkpoint(o.state));
      export_loss_curves(o.state.history, (point_dir / "loss_curves.csv").string());
      write_file((point_dir / "attack_report.json").string(), attack_report_json(o.report));
      manifest.add_output(point_dir / "checkpoint.json");
      manifest.add_output(point_dir / "loss_curves.csv");
      manifest.add_output(point_dir / "attack_report.json");
      std::cout << to_string(o.method) << " case " << to_string(o.si_case) << " lambda "
                << format_double(o.lambda) << ": NE2 " << format_double(o.ne2_value)
                << ", attacker bacc " << format_double(o.bacc) << "\n";
    } else {
      std::cout << to_string(o.method) << " case " << to_string(o.si_case) << " lambda "
                << format_double(o.lambda) << ": FAILED (" << o.error << ")\n";
    }
  }

  const auto csv_path = out_dir / "tradeoff.csv";
  write_file(csv_path.string(), write_tradeoff_csv(rows));
  manifest.add_output(csv_path);
  manifest.finalize();
}

// ---------------------------------------------------------------------------
// plot

inline void cmd_plot(const std::string& tradeoff_path, const std::vector<std::string>& loss_paths,
                     const std::string& out) {
  const fs::path out_dir = resolve_out_dir(out);
  ManifestWriter manifest("plot", out_dir);

  if (!tradeoff_path.empty()) {
    const std::string text = read_file(tradeoff_path);
    manifest.add_input(tradeoff_path, text);
    const auto rows = parse_tradeoff_csv(text);
    std::vector<TradeoffRow> ok_rows;
    for (const auto& r : rows) {
      if (r.ok) ok_rows.push_back(r);
    }
    if (ok_rows.empty()) throw FormatError("trade-off CSV has no usable rows");

    for (Method m : {Method::CAL, Method::DI}) {
      std::vector<PlotSeries> series;
      std::vector<SiCase> case_order = {SiCase::none, SiCase::day, SiCase::day_month,
                                        SiCase::day_star};
      double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
      for (SiCase c : case_order) {
        PlotSeries s;
        s.label = "case " + to_string(c);
        for (const auto& r : ok_rows) {
          if (r.point.method == m && r.point.si_case == c) {
            s.points.emplace_back(r.point.ne2, r.point.attacker_balanced_accuracy);
            xmin = std::min(xmin, r.point.ne2);
            xmax = std::max(xmax, r.point.ne2);
          }
        }
        std::sort(s.points.begin(), s.points.end());
        if (!s.points.empty()) series.push_back(std::move(s));
      }
      if (series.empty()) continue;
      // dashed SI-only baselines per case with side information
      for (SiCase c : case_order) {
        if (si_dim(c) == 0) continue;
        for (const auto& r : ok_rows) {
          if (r.point.method == m && r.point.si_case == c) {
            PlotSeries b;
            b.label = "case " + to_string(c) + " SI-only";
            b.dashed = true;
            b.markers = false;
            b.points.emplace_back(xmin, r.point.si_only_baseline);
            b.points.emplace_back(xmax, r.point.si_only_baseline);
            series.push_back(std::move(b));
            break;
          }
        }
      }
      const std::string svg = render_svg_plot(
          to_string(m) + " privacy-utility trade-off", "NE2", "attacker balanced accuracy",
          series);
      const auto path = out_dir / ("tradeoff_" + to_string(m) + ".svg");
      write_file(path.string(), svg);
      manifest.add_output(path);
      std::cout << "wrote " << path.string() << "\n";
    }
  }

  for (const auto& lp : loss_paths) {
    const std::string text = read_file(lp);
    manifest.add_input(lp, text);
    const auto rows = parse_loss_curves_csv(text);
    if (rows.empty()) throw FormatError("loss CSV has no rows: " + lp);
    auto series_of = [&](const char* label, auto getter) {
      PlotSeries s;
      s.label = label;
      s.markers = false;
      for (const auto& r : rows) s.points.emplace_back(double(r.epoch), getter(r));
      return s;
    };
    std::vector<PlotSeries> series;
    series.push_back(series_of("releaser total", [](const LossCurveRow& r) { return r.releaser_total; }));
    series.push_back(series_of("distortion", [](const LossCurveRow& r) { return r.distortion_term; }));
    series.push_back(series_of("privacy", [](const LossCurveRow& r) { return r.privacy_term; }));
    series.push_back(
        series_of("regularization", [](const LossCurveRow& r) { return r.regularization_term; }));
    series.push_back(
        series_of("adversary", [](const LossCurveRow& r) { return r.adversary_loss; }));
    const std::string svg =
        render_svg_plot("releaser loss vs epoch", "epoch", "loss (nats)", series);
    const auto stem = fs::path(lp).stem().string();
    const auto path = out_dir / ("loss_" + sanitize_component(stem) + ".svg");
    write_file(path.string(), svg);
    manifest.add_output(path);
    std::cout << "wrote " << path.string() << "\n";
  }
  manifest.finalize();
}

// ---------------------------------------------------------------------------
// report: last-N-epoch loss variance per sweep point (CAL instability
// diagnostic; reported, not pass/fail).

inline void cmd_report(const std::string& sweep_dir, const std::string& out, int window) {
  const fs::path out_dir = resolve_out_dir(out);
  ManifestWriter manifest("report", out_dir);
  const fs::path points_dir = fs::path(sweep_dir) / "points";
  if (!fs::is_directory(points_dir)) {
    throw IoError("no points directory under " + sweep_dir);
  }

  struct Entry {
    std::string method;
    std::string si_case;
    double lambda;
    int epochs;
    double variance;
  };
  std::vector<Entry> entries;
  std::vector<fs::path> point_dirs;
  for (const auto& e : fs::directory_iterator(points_dir)) {
    if (e.is_directory()) point_dirs.push_back(e.path());
  }
  std::sort(point_dirs.begin(), point_dirs.end());

  for (const auto& dir : point_dirs) {
    const auto meta_path = dir / "point.json";
    const auto loss_path = dir / "loss_curves.csv";
    if (!fs::exists(meta_path) || !fs::exists(loss_path)) continue;
    const auto meta = nlohmann::json::parse(read_file(meta_path.string()));
    if (meta.value("status", "") != "ok") continue;
    const std::string loss_text = read_file(loss_path.string());
    manifest.add_input(loss_path, loss_text);
    const auto rows = parse_loss_curves_csv(loss_text);
    const int n = static_cast<int>(rows.size());
    const int w = std::min(window, n);
    double mean = 0.0;
    for (int i = n - w; i < n; ++i) mean += rows[i].releaser_total;
    mean /= w;
    double var = 0.0;
    for (int i = n - w; i < n; ++i) {
      var += (rows[i].releaser_total - mean) * (rows[i].releaser_total - mean);
    }
    var /= w;
    entries.push_back(Entry{meta.at("method").get<std::string>(),
                            meta.at("si_case").get<std::string>(),
                            meta.at("lambda").get<double>(), n, var});
  }
  if (entries.empty()) throw IoError("no completed sweep points under " + sweep_dir);

  std::string csv = "method,si_case,lambda,epochs,last" + std::to_string(window) +
                    "_variance\n";
  std::cout << "method  case  lambda      epochs  loss variance (last " << window << ")\n";
  for (const auto& e : entries) {
    csv += e.method + ',' + e.si_case + ',' + format_double(e.lambda) + ',' +
           std::to_string(e.epochs) + ',' + format_double(e.variance) + '\n';
    std::printf("%-7s %-5s %-11s %-7d %s\n", e.method.c_str(), e.si_case.c_str(),
                format_double(e.lambda).c_str(), e.epochs, format_double(e.variance).c_str());
  }
  const auto csv_path = out_dir / "variance_report.csv";
  write_file(csv_path.string(), csv);
  manifest.add_output(csv_path);
  manifest.finalize();
}

// ---------------------------------------------------------------------------
// Argument wiring.

// Config-override flags shared by train and sweep. CLI flags take precedence
// over config-file values.
struct ConfigFlags {
  std::string config_path;
  std::string method;
  std::string si_case;
  double lambda = 0.0;
  int epochs = 0;
  std::int64_t seed = 0;
  CLI::Option* method_opt = nullptr;
  CLI::Option* si_case_opt = nullptr;
  CLI::Option* lambda_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file (key = value lines)");
    method_opt = cmd->add_option("--method", method, "CAL or DI");
    si_case_opt = cmd->add_option("--si-case", si_case, "side-information case: 1, 2, 3 or 2*");
    lambda_opt = cmd->add_option("--lambda", lambda, "privacy weight");
    epochs_opt = cmd->add_option("--epochs", epochs, "max training epochs");
    seed_opt = cmd->add_option("--seed", seed, "experiment seed");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = parse_config(read_file(config_path));
    if (method_opt && method_opt->count()) cfg.method = parse_method(method);
    if (si_case_opt && si_case_opt->count()) cfg.si_case = parse_si_case(si_case);
    if (lambda_opt && lambda_opt->count()) cfg.lambda = lambda;
    if (epochs_opt && epochs_opt->count()) cfg.epochs = epochs;
    if (seed_opt && seed_opt->count()) cfg.rng_seed = seed;
    return validate_config(cfg);
  }
};

inline int run_cli(std::vector<std::string> args) {
  CLI::App app{"Privacy-preserving smart-meter data release: adversarially trained "
               "recurrent releasers (CAL and DI objectives), attacker-side evaluation "
               "with side information, and privacy-utility trade-off sweeps.",
               "smpriv"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // prepare-data
  auto* prep = app.add_subcommand("prepare-data", "Ingest a raw CSV into day windows + split");
  std::string prep_input, prep_out, prep_house = "house";
  int prep_seq_len = 24;
  std::uint64_t prep_seed = 1;
  prep->add_option("--input", prep_input, "raw CSV (timestamp,power,occupancy)")->required();
  prep->add_option("--out", prep_out, "output directory")->required();
  prep->add_option("--house-id", prep_house, "house identifier for sequence ids");
  prep->add_option("--seq-len", prep_seq_len, "hours per day window (default 24)");
  prep->add_option("--seed", prep_seed, "split shuffle seed");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  SynthParams synth_params;
  std::string synth_out, synth_profile = "dow", synth_start = "2024-01-01";
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--days", synth_params.n_days, "number of days (default 400)");
  synth->add_option("--seed", synth_params.rng_seed, "generator seed");
  synth->add_option("--profile", synth_profile, "occupancy profile: dow or flat");
  synth->add_option("--base-load", synth_params.base_load, "baseline load, kW");
  synth->add_option("--occupied-load", synth_params.occupied_load_mean,
                    "extra load when occupied, kW");
  synth->add_option("--noise-std", synth_params.noise_std, "load noise std, kW");
  synth->add_option("--house-id", synth_params.house_id, "house identifier");
  synth->add_option("--start-date", synth_start, "first day (YYYY-MM-DD)");

  // train
  auto* train = app.add_subcommand("train", "Train a releaser/adversary pair");
  std::string train_data, train_out, train_resume;
  ConfigFlags train_flags;
  train_flags.attach(train);
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--resume", train_resume, "checkpoint to resume from");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Train across a lambda grid and evaluate attackers");
  std::string sweep_data, sweep_out;
  ConfigFlags sweep_flags;
  std::vector<double> sweep_lambdas;
  std::vector<std::string> sweep_methods = {"CAL", "DI"};
  std::vector<std::string> sweep_cases = {"1"};
  int sweep_parallel = default_parallelism();
  sweep_flags.attach(sweep);
  sweep->add_option("--data", sweep_data, "dataset directory")->required();
  sweep->add_option("--out", sweep_out, "output directory")->required();
  sweep->add_option("--lambdas", sweep_lambdas, "lambda grid")->required()->delimiter(',');
  sweep->add_option("--methods", sweep_methods, "methods, e.g. CAL,DI")->delimiter(',');
  sweep->add_option("--cases", sweep_cases, "SI cases, e.g. 1,2,3")->delimiter(',');
  sweep->add_option("--parallel", sweep_parallel, "worker threads (default SMPRIV_PARALLEL or 1)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Train and score an attacker on a checkpoint");
  std::string eval_ckpt, eval_data, eval_out;
  bool eval_si_only = false;
  std::uint64_t eval_seed = 1;
  eval->add_option("--checkpoint", eval_ckpt, "trained checkpoint")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--out", eval_out, "output directory")->required();
  eval->add_flag("--si-only", eval_si_only, "score the SI-only baseline attacker instead");
  eval->add_option("--seed", eval_seed, "evaluation seed");

  // plot
  auto* plot = app.add_subcommand("plot", "Render trade-off and loss figures (SVG)");
  std::string plot_tradeoff;
  std::vector<std::string> plot_loss;
  std::string plot_out;
  plot->add_option("--tradeoff", plot_tradeoff, "trade-off CSV");
  plot->add_option("--loss", plot_loss, "loss-curve CSV (repeatable)");
  plot->add_option("--out", plot_out, "output directory")->required();

  // report
  auto* report = app.add_subcommand("report", "Loss-variance diagnostic table for a sweep");
  std::string report_sweep_dir, report_out;
  int report_window = 20;
  report->add_option("--sweep-dir", report_sweep_dir, "sweep output directory")->required();
  report->add_option("--out", report_out, "output directory")->required();
  report->add_option("--window", report_window, "trailing epochs in the variance window");

  std::vector<const char*> argv;
  argv.push_back("smpriv");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (prep->parsed()) {
      cmd_prepare_data(prep_input, prep_out, prep_house, prep_seq_len, prep_seed);
    } else if (synth->parsed()) {
      synth_params.start_date = parse_date(synth_start);
      cmd_synth(synth_params, synth_profile, synth_out);
    } else if (train->parsed()) {
      const auto cfg = train_flags.resolve();
      cmd_train(cfg, write_config(cfg), train_data, train_out, train_resume);
    } else if (sweep->parsed()) {
      const auto cfg = sweep_flags.resolve();
      std::vector<Method> methods;
      for (const auto& m : sweep_methods) methods.push_back(parse_method(m));
      std::vector<SiCase> cases;
      for (const auto& c : sweep_cases) cases.push_back(parse_si_case(c));
      cmd_sweep(cfg, sweep_data, sweep_out, sweep_lambdas, methods, cases, sweep_parallel);
    } else if (eval->parsed()) {
      cmd_evaluate(eval_ckpt, eval_data, eval_out, eval_si_only, eval_seed);
    } else if (plot->parsed()) {
      if (plot_tradeoff.empty() && plot_loss.empty()) {
        throw ValidationError("plot needs --tradeoff and/or --loss");
      }
      cmd_plot(plot_tradeoff, plot_loss, plot_out);
    } else if (report->parsed()) {
      cmd_report(report_sweep_dir, report_out, report_window);
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

}  // namespace smpriv::cli
