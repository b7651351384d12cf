#pragma once

// Shared data model: load sequences, side information, experiment
// configuration. All types are immutable value objects once constructed.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smpriv/common.hpp"
#include "smpriv/rng.hpp"

namespace smpriv {

enum class Method { CAL, DI };

// Side-information cases. "day_star" is case 2*: day-of-week is fed to the
// adversary/attacker as in case 2 and additionally to the releaser input.
enum class SiCase { none, day, day_month, day_star };

inline std::string to_string(Method m) { return m == Method::CAL ? "CAL" : "DI"; }

inline Method parse_method(std::string_view s) {
  if (s == "CAL" || s == "cal") return Method::CAL;
  if (s == "DI" || s == "di") return Method::DI;
  throw ValidationError("method must be CAL or DI, got '" + std::string(s) + "'");
}

inline std::string to_string(SiCase c) {
  switch (c) {
    case SiCase::none: return "1";
    case SiCase::day: return "2";
    case SiCase::day_month: return "3";
    case SiCase::day_star: return "2*";
  }
  return "?";
}

inline SiCase parse_si_case(std::string_view s) {
  if (s == "1") return SiCase::none;
  if (s == "2") return SiCase::day;
  if (s == "3") return SiCase::day_month;
  if (s == "2*") return SiCase::day_star;
  throw ValidationError("si_case must be one of 1, 2, 3, 2*, got '" + std::string(s) + "'");
}

// Dimension of the encoded side-information vector seen by adversary/attacker.
inline int si_dim(SiCase c) {
  switch (c) {
    case SiCase::none: return 0;
    case SiCase::day: return 7;
    case SiCase::day_star: return 7;
    case SiCase::day_month: return 19;
  }
  return 0;
}

// Dimension of the side-information vector appended to the releaser input
// (nonzero only for case 2*).
inline int releaser_si_dim(SiCase c) { return c == SiCase::day_star ? 7 : 0; }

// ---------------------------------------------------------------------------
// Calendar date (civil, no time zone).

struct Date {
  int year = 2024;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  auto operator<=>(const Date&) const = default;
};

inline std::chrono::year_month_day to_ymd(const Date& d) {
  return std::chrono::year{d.year} / d.month / d.day;
}

inline Date date_from_days(std::chrono::sys_days sd) {
  const std::chrono::year_month_day ymd{sd};
  return Date{int(ymd.year()), int(unsigned(ymd.month())), int(unsigned(ymd.day()))};
}

inline bool date_valid(const Date& d) { return to_ymd(d).ok(); }

// Monday = 0 ... Sunday = 6.
inline int day_of_week_monday0(const Date& d) {
  const std::chrono::weekday wd{std::chrono::sys_days{to_ymd(d)}};
  return static_cast<int>(wd.iso_encoding()) - 1;
}

// January = 0 ... December = 11.
inline int month_index0(const Date& d) { return d.month - 1; }

inline std::string to_string(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

inline Date parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
    throw FormatError("bad date: '" + std::string(s) + "'");
  }
  Date d;
  d.year = static_cast<int>(parse_int(s.substr(0, 4)));
  d.month = static_cast<int>(parse_int(s.substr(5, 2)));
  d.day = static_cast<int>(parse_int(s.substr(8, 2)));
  if (!date_valid(d)) throw FormatError("invalid date: '" + std::string(s) + "'");
  return d;
}

// ---------------------------------------------------------------------------
// Domain types.

struct SideInfo {
  int day_of_week = 0;  // Monday = 0
  int month = 0;        // January = 0
};

inline SideInfo side_info_from_date(const Date& d) {
  return SideInfo{day_of_week_monday0(d), month_index0(d)};
}

inline void check_side_info(const SideInfo& s) {
  if (s.day_of_week < 0 || s.day_of_week > 6) {
    throw ValidationError("day_of_week must be in 0..6");
  }
  if (s.month < 0 || s.month > 11) throw ValidationError("month must be in 0..11");
}

// One day of aligned power readings and sensitive labels.
struct LoadSequence {
  std::vector<double> y;  // power, kW, hourly mean
  std::vector<int> x;     // occupancy labels in {0,1}
  SideInfo side;
  std::string house_id;
  Date date;

  LoadSequence() = default;
  LoadSequence(std::vector<double> y_, std::vector<int> x_, SideInfo side_,
               std::string house_id_, Date date_)
      : y(std::move(y_)), x(std::move(x_)), side(side_),
        house_id(std::move(house_id_)), date(date_) {
    if (y.size() != x.size()) throw ValidationError("y and x must have equal length");
    if (y.empty()) throw ValidationError("sequence must be non-empty");
    for (double v : y) {
      if (!(v >= 0.0)) throw ValidationError("power readings must be >= 0");
    }
    for (int v : x) {
      if (v != 0 && v != 1) throw ValidationError("occupancy labels must be 0 or 1");
    }
    check_side_info(side);
    if (!date_valid(date)) throw ValidationError("invalid date");
  }

  int length() const { return static_cast<int>(y.size()); }
};

inline std::string sequence_id(const LoadSequence& s) {
  return s.house_id + "/" + to_string(s.date);
}

// Sanitized series produced by the releaser (kW scale after denormalization).
struct ReleasedSequence {
  std::vector<double> z;
};

// Per-sequence uniform seed noise, shape (T, m), entries in [0, 1).
struct NoiseSeed {
  Eigen::MatrixXd u;

  NoiseSeed() = default;
  explicit NoiseSeed(Eigen::MatrixXd u_) : u(std::move(u_)) {
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      for (Eigen::Index j = 0; j < u.cols(); ++j) {
        if (!(u(i, j) >= 0.0 && u(i, j) < 1.0)) {
          throw ValidationError("noise entries must be in [0, 1)");
        }
      }
    }
  }

  static NoiseSeed draw(int seq_len, int noise_dim, Rng& rng) {
    Eigen::MatrixXd u(seq_len, noise_dim);
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      for (Eigen::Index j = 0; j < u.cols(); ++j) u(i, j) = rng.uniform01();
    }
    NoiseSeed seed;
    seed.u = std::move(u);
    return seed;
  }
};

// Per-step probabilities q_t = predicted P(X_t = 1 | inputs up to t).
struct AdversaryOutput {
  std::vector<double> q;
};

// Class 1 = occupied (x = 1), class 2 = unoccupied (x = 0);
// c_ij counts class-i examples classified as class j.
struct ConfusionCounts {
  std::int64_t c11 = 0;
  std::int64_t c12 = 0;
  std::int64_t c21 = 0;
  std::int64_t c22 = 0;
};

struct TradeoffPoint {
  Method method = Method::CAL;
  SiCase si_case = SiCase::none;
  double lambda = 0.0;
  double ne2 = 0.0;
  double attacker_balanced_accuracy = 0.0;
  double si_only_baseline = 0.0;
};

// ---------------------------------------------------------------------------
// Experiment configuration.

struct ExperimentConfig {
  Method method = Method::CAL;
  SiCase si_case = SiCase::none;
  double lambda = 0.0;
  int batch_size = 128;      // B
  int adversary_steps = 4;   // k
  int noise_dim = 8;         // m
  double ridge_coeff = 1.5;  // beta
  int seq_len = 24;          // T
  double learning_rate = 1e-3;
  double rmsprop_alpha = 0.9;
  double rmsprop_eps = 1e-8;
  int epochs = 300;
  int patience = 30;  // early stopping on validation releaser loss
  std::int64_t rng_seed = 1;
  int sensitive_alphabet_size = 2;
};

inline ExperimentConfig validate_config(ExperimentConfig cfg) {
  if (!(cfg.lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (cfg.batch_size <= 0) throw ValidationError("batch_size must be positive");
  if (cfg.adversary_steps <= 0) throw ValidationError("adversary_steps must be >= 1");
  if (cfg.noise_dim <= 0) throw ValidationError("noise_dim must be positive");
  if (!(cfg.ridge_coeff >= 0.0)) throw ValidationError("ridge_coeff must be >= 0");
  if (cfg.seq_len <= 0) throw ValidationError("seq_len must be positive");
  if (!(cfg.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(cfg.rmsprop_alpha > 0.0 && cfg.rmsprop_alpha < 1.0)) {
    throw ValidationError("rmsprop_alpha must be in (0, 1)");
  }
  if (!(cfg.rmsprop_eps > 0.0)) throw ValidationError("rmsprop_eps must be positive");
  if (cfg.epochs <= 0) throw ValidationError("epochs must be positive");
  if (cfg.patience < 0) throw ValidationError("patience must be >= 0");
  if (cfg.sensitive_alphabet_size != 2) {
    throw ValidationError("sensitive_alphabet_size: only 2 is supported");
  }
  return cfg;
}

// Structured key-value text format: one `key = value` per line, '#' comments.
inline std::string write_config(const ExperimentConfig& c) {
  std::string s;
  auto kv = [&s](std::string_view k, const std::string& v) {
    s += std::string(k) + " = " + v + "\n";
  };
  kv("method", to_string(c.method));
  kv("si_case", to_string(c.si_case));
  kv("lambda", format_double(c.lambda));
  kv("batch_size", std::to_string(c.batch_size));
  kv("adversary_steps", std::to_string(c.adversary_steps));
  kv("noise_dim", std::to_string(c.noise_dim));
  kv("ridge_coeff", format_double(c.ridge_coeff));
  kv("seq_len", std::to_string(c.seq_len));
  kv("learning_rate", format_double(c.learning_rate));
  kv("rmsprop_alpha", format_double(c.rmsprop_alpha));
  kv("rmsprop_eps", format_double(c.rmsprop_eps));
  kv("epochs", std::to_string(c.epochs));
  kv("patience", std::to_string(c.patience));
  kv("rng_seed", std::to_string(c.rng_seed));
  kv("sensitive_alphabet_size", std::to_string(c.sensitive_alphabet_size));
  return s;
}

inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::size_t line_no = 0;
  for (const auto& raw_line : split(text, '\n')) {
    ++line_no;
    auto line = trim(raw_line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key{trim(line.substr(0, eq))};
    const std::string val{trim(line.substr(eq + 1))};
    if (key == "method") c.method = parse_method(val);
    else if (key == "si_case") c.si_case = parse_si_case(val);
    else if (key == "lambda") c.lambda = parse_double(val);
    else if (key == "batch_size") c.batch_size = static_cast<int>(parse_int(val));
    else if (key == "adversary_steps") c.adversary_steps = static_cast<int>(parse_int(val));
    else if (key == "noise_dim") c.noise_dim = static_cast<int>(parse_int(val));
    else if (key == "ridge_coeff") c.ridge_coeff = parse_double(val);
    else if (key == "seq_len") c.seq_len = static_cast<int>(parse_int(val));
    else if (key == "learning_rate") c.learning_rate = parse_double(val);
    else if (key == "rmsprop_alpha") c.rmsprop_alpha = parse_double(val);
    else if (key == "rmsprop_eps") c.rmsprop_eps = parse_double(val);
    else if (key == "epochs") c.epochs = static_cast<int>(parse_int(val));
    else if (key == "patience") c.patience = static_cast<int>(parse_int(val));
    else if (key == "rng_seed") c.rng_seed = parse_int(val);
    else if (key == "sensitive_alphabet_size") {
      c.sensitive_alphabet_size = static_cast<int>(parse_int(val));
    } else {
      throw FormatError("unknown config key '" + key + "'");
    }
  }
  return c;
}

inline std::string config_hash(const ExperimentConfig& c) {
  return hex64(fnv1a64(write_config(c)));
}

}  // namespace smpriv
