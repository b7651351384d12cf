#pragma once

// ECO-style data pipeline: 1 Hz CSV -> hourly records -> day windows ->
// train/validation/test split, plus side-information encoding, power
// normalization and a seed-deterministic synthetic generator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "smpriv/common.hpp"
#include "smpriv/core_types.hpp"
#include "smpriv/rng.hpp"

namespace smpriv {

struct RawRecord {
  std::int64_t timestamp = 0;  // epoch seconds, civil time treated as UTC
  double power = 0.0;          // kW after ingestion
  int occupancy = 0;
};

struct RawLoadResult {
  std::vector<RawRecord> records;
  std::size_t malformed = 0;  // skipped rows (bad fields or non-increasing time)
};

struct HourlyResult {
  std::vector<RawRecord> records;  // one per qualifying hour, timestamp = hour start
  std::size_t gap_hours = 0;       // hours with < 10% of the expected sample count
};

struct DatasetSplit {
  std::vector<LoadSequence> train;
  std::vector<LoadSequence> validation;
  std::vector<LoadSequence> test;
  double norm_mean = 0.0;  // computed from train power values only
  double norm_std = 1.0;
};

// ---------------------------------------------------------------------------
// Timestamps: "YYYY-MM-DD HH:MM:SS" or with 'T' separator.

inline std::int64_t parse_timestamp(std::string_view s) {
  if (s.size() < 19 || (s[10] != ' ' && s[10] != 'T')) {
    throw FormatError("bad timestamp: '" + std::string(s) + "'");
  }
  const Date d = parse_date(s.substr(0, 10));
  const auto hh = parse_int(s.substr(11, 2));
  const auto mm = parse_int(s.substr(14, 2));
  const auto ss = parse_int(s.substr(17, 2));
  if (s[13] != ':' || s[16] != ':' || hh > 23 || mm > 59 || ss > 59 || hh < 0 || mm < 0 ||
      ss < 0) {
    throw FormatError("bad timestamp: '" + std::string(s) + "'");
  }
  const auto days = std::chrono::sys_days{to_ymd(d)}.time_since_epoch().count();
  return std::int64_t{days} * 86400 + hh * 3600 + mm * 60 + ss;
}

inline std::string format_timestamp(std::int64_t t) {
  const auto days = static_cast<std::int64_t>(std::floor(double(t) / 86400.0));
  const auto rem = t - days * 86400;
  const Date d = date_from_days(std::chrono::sys_days{std::chrono::days{days}});
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s %02d:%02d:%02d", to_string(d).c_str(),
                int(rem / 3600), int((rem % 3600) / 60), int(rem % 60));
  return buf;
}

// ---------------------------------------------------------------------------
// Raw CSV ingestion. Expected header: timestamp,power,occupancy.
// A `# units: W` or `# units: kW` comment declares the power unit (default kW);
// values are converted to kW here.

inline RawLoadResult load_raw_csv(const std::string& path) {
  const std::string text = read_file(path);
  if (trim(text).empty()) throw FormatError("empty input file: " + path);

  double unit_scale = 1.0;  // kW by default
  RawLoadResult out;
  std::size_t data_rows = 0;
  bool header_seen = false;

  for (const auto& raw_line : split(text, '\n')) {
    const auto line = trim(raw_line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      if (body.rfind("units:", 0) == 0) {
        const auto unit = trim(body.substr(6));
        if (unit == "W" || unit == "w") unit_scale = 1e-3;
        else if (unit == "kW" || unit == "kw") unit_scale = 1.0;
        else throw FormatError("unknown units '" + std::string(unit) + "' in " + path);
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      if (trim(line) != "timestamp,power,occupancy") {
        throw FormatError("expected header 'timestamp,power,occupancy' in " + path);
      }
      continue;
    }
    ++data_rows;
    const auto fields = split(line, ',');
    try {
      if (fields.size() != 3) throw FormatError("wrong field count");
      RawRecord r;
      r.timestamp = parse_timestamp(trim(fields[0]));
      r.power = parse_double(trim(fields[1])) * unit_scale;
      r.occupancy = static_cast<int>(parse_int(trim(fields[2])));
      if (!(r.power >= 0.0)) throw FormatError("negative power");
      if (r.occupancy != 0 && r.occupancy != 1) throw FormatError("bad occupancy");
      if (!out.records.empty() && r.timestamp <= out.records.back().timestamp) {
        throw FormatError("non-increasing timestamp");
      }
      out.records.push_back(r);
    } catch (const FormatError&) {
      ++out.malformed;
    }
  }

  if (data_rows == 0) throw FormatError("no data rows in " + path);
  if (double(out.malformed) > 0.05 * double(data_rows)) {
    throw FormatError(path + ": " + std::to_string(out.malformed) + " of " +
                      std::to_string(data_rows) + " rows malformed (> 5%)");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hourly resampling: power = in-hour arithmetic mean, occupancy = majority
// vote with ties counted as occupied. Hours holding fewer than 10% of the
// expected sample count are gaps and are not emitted; days touched by a gap
// fall out in window_days.

inline HourlyResult resample_hourly(const std::vector<RawRecord>& records) {
  HourlyResult out;
  if (records.empty()) return out;

  std::vector<std::int64_t> diffs;
  diffs.reserve(records.size());
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto d = records[i].timestamp - records[i - 1].timestamp;
    if (d > 0) diffs.push_back(d);
  }
  std::int64_t dt = 1;
  if (!diffs.empty()) {
    std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
    dt = std::max<std::int64_t>(1, diffs[diffs.size() / 2]);
  }
  const double expected_per_hour = 3600.0 / double(dt);

  struct Bucket {
    double power_sum = 0.0;
    std::int64_t n = 0;
    std::int64_t occupied = 0;
  };
  std::map<std::int64_t, Bucket> buckets;  // key: hour index = floor(ts / 3600)
  for (const auto& r : records) {
    auto& b = buckets[r.timestamp / 3600];
    b.power_sum += r.power;
    b.n += 1;
    b.occupied += r.occupancy;
  }

  for (const auto& [hour, b] : buckets) {
    if (double(b.n) < 0.1 * expected_per_hour) {
      ++out.gap_hours;
      continue;
    }
    RawRecord r;
    r.timestamp = hour * 3600;
    r.power = b.power_sum / double(b.n);
    r.occupancy = (2 * b.occupied >= b.n) ? 1 : 0;
    out.records.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Day windows: one LoadSequence per day whose first T hours are all present.

struct WindowResult {
  std::vector<LoadSequence> sequences;
  std::size_t dropped_days = 0;
};

inline WindowResult window_days(const std::vector<RawRecord>& hourly, int seq_len,
                                const std::string& house_id = "house") {
  if (seq_len <= 0 || seq_len > 24) throw ValidationError("seq_len must be in 1..24");
  std::map<std::int64_t, std::map<int, const RawRecord*>> days;
  for (const auto& r : hourly) {
    const auto day = r.timestamp / 86400;
    const int hour = int((r.timestamp % 86400) / 3600);
    days[day][hour] = &r;
  }

  WindowResult out;
  for (const auto& [day, hours] : days) {
    bool complete = true;
    for (int h = 0; h < seq_len; ++h) {
      if (!hours.count(h)) {
        complete = false;
        break;
      }
    }
    if (!complete) {
      ++out.dropped_days;
      continue;
    }
    std::vector<double> y(seq_len);
    std::vector<int> x(seq_len);
    for (int h = 0; h < seq_len; ++h) {
      y[h] = std::max(0.0, hours.at(h)->power);
      x[h] = hours.at(h)->occupancy;
    }
    const Date date = date_from_days(std::chrono::sys_days{std::chrono::days{day}});
    out.sequences.emplace_back(std::move(y), std::move(x), side_info_from_date(date),
                               house_id, date);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split: shuffle by seed, floor(0.15 N) test first, then floor(0.10 remainder)
// validation; normalization stats from the final train set only.

inline DatasetSplit split_dataset(std::vector<LoadSequence> seqs, std::uint64_t seed) {
  const std::size_t n = seqs.size();
  if (n < 20) {
    throw ValidationError("need at least 20 sequences to split, got " + std::to_string(n));
  }
  Rng rng(derive_seed(seed, 0x5817));
  rng.shuffle(seqs);

  const std::size_t n_test = static_cast<std::size_t>(0.15 * double(n));
  const std::size_t n_val = static_cast<std::size_t>(0.10 * double(n - n_test));

  DatasetSplit split;
  split.test.assign(seqs.begin(), seqs.begin() + n_test);
  split.validation.assign(seqs.begin() + n_test, seqs.begin() + n_test + n_val);
  split.train.assign(seqs.begin() + n_test + n_val, seqs.end());

  double sum = 0.0, sq = 0.0;
  std::size_t cnt = 0;
  for (const auto& s : split.train) {
    for (double v : s.y) {
      sum += v;
      sq += v * v;
      ++cnt;
    }
  }
  split.norm_mean = sum / double(cnt);
  split.norm_std = std::sqrt(std::max(0.0, sq / double(cnt) - split.norm_mean * split.norm_mean));
  return split;
}

// ---------------------------------------------------------------------------
// Side-information encoding.
//   case 1  -> empty vector
//   case 2/2* -> 7-dim day-of-week one-hot (Monday = index 0)
//   case 3  -> 19-dim: day one-hot followed by 12-dim month one-hot

inline std::vector<double> encode_side_info(const SideInfo& side, SiCase si_case) {
  check_side_info(side);
  switch (si_case) {
    case SiCase::none: return {};
    case SiCase::day:
    case SiCase::day_star: {
      std::vector<double> v(7, 0.0);
      v[side.day_of_week] = 1.0;
      return v;
    }
    case SiCase::day_month: {
      std::vector<double> v(19, 0.0);
      v[side.day_of_week] = 1.0;
      v[7 + side.month] = 1.0;
      return v;
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Normalization of power values. Sequences keep raw kW; normalized values are
// produced on demand when assembling network inputs.

inline std::vector<double> normalize(const std::vector<double>& y, double mean, double std) {
  if (!(std > 0.0)) throw ValidationError("normalization std must be > 0");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - mean) / std;
  return out;
}

inline std::vector<double> denormalize(const std::vector<double>& z, double mean, double std) {
  if (!(std > 0.0)) throw ValidationError("normalization std must be > 0");
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * std + mean;
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator. Occupancy follows a two-state Markov chain whose
// transition probabilities depend on hour-of-day and day-of-week; the load is
// base_load + x_t * occupied_load_mean + Gaussian noise, clipped at zero.

struct SynthParams {
  int n_days = 400;
  // arrive[h][d] = P(X_t = 1 | X_{t-1} = 0), depart[h][d] = P(X_t = 0 | X_{t-1} = 1)
  std::array<std::array<double, 7>, 24> arrive{};
  std::array<std::array<double, 7>, 24> depart{};
  double base_load = 0.2;
  double occupied_load_mean = 0.4;
  double noise_std = 0.12;
  std::uint64_t rng_seed = 1;
  std::string house_id = "synth";
  Date start_date{2024, 1, 1};  // a Monday
};

// Occupancy level differs per day of week (weekends high, weekdays low and
// varied) but is flat across hours, so hour-of-day alone carries no signal
// while day-of-week side information does.
inline SynthParams synth_params_dow_profile() {
  SynthParams p;
  const std::array<double, 7> level = {0.15, 0.30, 0.45, 0.30, 0.15, 0.75, 0.90};
  const double mixing = 0.5;
  for (int h = 0; h < 24; ++h) {
    for (int d = 0; d < 7; ++d) {
      p.arrive[h][d] = mixing * level[d];
      p.depart[h][d] = mixing * (1.0 - level[d]);
    }
  }
  return p;
}

// Occupancy independent of the calendar: side information is uninformative.
inline SynthParams synth_params_flat_profile(double level = 0.5) {
  SynthParams p;
  const double mixing = 0.5;
  for (int h = 0; h < 24; ++h) {
    for (int d = 0; d < 7; ++d) {
      p.arrive[h][d] = mixing * level;
      p.depart[h][d] = mixing * (1.0 - level);
    }
  }
  return p;
}

inline void validate_synth_params(const SynthParams& p) {
  if (p.n_days <= 0) throw ValidationError("n_days must be positive");
  if (!(p.noise_std > 0.0)) throw ValidationError("noise_std must be > 0");
  if (!(p.base_load >= 0.0)) throw ValidationError("base_load must be >= 0");
  for (int h = 0; h < 24; ++h) {
    for (int d = 0; d < 7; ++d) {
      if (!(p.arrive[h][d] >= 0.0 && p.arrive[h][d] <= 1.0) ||
          !(p.depart[h][d] >= 0.0 && p.depart[h][d] <= 1.0)) {
        throw ValidationError("transition probabilities must be in [0, 1]");
      }
    }
  }
  if (!date_valid(p.start_date)) throw ValidationError("invalid start_date");
}

// Stationary occupancy probability of the hour-h/day-d transition pair.
inline double synth_stationary(const SynthParams& p, int hour, int dow) {
  const double a = p.arrive[hour][dow];
  const double q = p.depart[hour][dow];
  return (a + q > 0.0) ? a / (a + q) : 0.5;
}

inline std::vector<LoadSequence> synthesize_dataset(const SynthParams& params) {
  validate_synth_params(params);
  Rng rng(derive_seed(params.rng_seed, 0xda7a));
  const int T = 24;

  std::vector<LoadSequence> out;
  out.reserve(params.n_days);
  const auto start = std::chrono::sys_days{to_ymd(params.start_date)};
  for (int day = 0; day < params.n_days; ++day) {
    const Date date = date_from_days(start + std::chrono::days{day});
    const int dow = day_of_week_monday0(date);

    std::vector<int> x(T);
    x[0] = rng.bernoulli(synth_stationary(params, 0, dow)) ? 1 : 0;
    for (int t = 1; t < T; ++t) {
      if (x[t - 1] == 1) {
        x[t] = rng.bernoulli(params.depart[t][dow]) ? 0 : 1;
      } else {
        x[t] = rng.bernoulli(params.arrive[t][dow]) ? 1 : 0;
      }
    }

    std::vector<double> y(T);
    for (int t = 0; t < T; ++t) {
      const double load =
          params.base_load + x[t] * params.occupied_load_mean + rng.normal(0.0, params.noise_std);
      y[t] = std::max(0.0, load);
    }
    out.emplace_back(std::move(y), std::move(x), side_info_from_date(date), params.house_id,
                     date);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset serialization: one CSV row per (sequence, t) plus a JSON split
// manifest listing sequence ids per partition and the normalization stats.

inline std::string dataset_csv_header() {
  return "seq_id,house_id,date,day_of_week,month,t,power_kw,occupancy";
}

inline std::string write_dataset_csv(const std::vector<LoadSequence>& seqs) {
  std::string s = dataset_csv_header() + "\n";
  for (const auto& q : seqs) {
    const std::string id = sequence_id(q);
    for (int t = 0; t < q.length(); ++t) {
      s += id + ',' + q.house_id + ',' + to_string(q.date) + ',' +
           std::to_string(q.side.day_of_week) + ',' + std::to_string(q.side.month) + ',' +
           std::to_string(t) + ',' + format_double(q.y[t]) + ',' + std::to_string(q.x[t]) +
           '\n';
    }
  }
  return s;
}

inline std::vector<LoadSequence> read_dataset_csv(const std::string& text) {
  const auto lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != dataset_csv_header()) {
    throw FormatError("bad dataset CSV header");
  }
  std::vector<LoadSequence> out;
  std::string cur_id;
  std::vector<double> y;
  std::vector<int> x;
  std::string house;
  Date date;

  auto flush = [&]() {
    if (cur_id.empty()) return;
    out.emplace_back(std::move(y), std::move(x), side_info_from_date(date), house, date);
    y.clear();
    x.clear();
  };

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8) throw FormatError("dataset CSV line " + std::to_string(i + 1));
    if (f[0] != cur_id) {
      flush();
      cur_id = f[0];
      house = f[1];
      date = parse_date(f[2]);
      const auto side = side_info_from_date(date);
      if (parse_int(f[3]) != side.day_of_week || parse_int(f[4]) != side.month) {
        throw FormatError("side info disagrees with date on line " + std::to_string(i + 1));
      }
    }
    if (parse_int(f[5]) != std::int64_t(y.size())) {
      throw FormatError("non-contiguous t on line " + std::to_string(i + 1));
    }
    y.push_back(parse_double(f[6]));
    x.push_back(static_cast<int>(parse_int(f[7])));
  }
  flush();
  return out;
}

inline std::string write_split_manifest(const DatasetSplit& split) {
  nlohmann::json j;
  j["format"] = "smpriv-split";
  auto ids = [](const std::vector<LoadSequence>& v) {
    std::vector<std::string> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(sequence_id(s));
    return out;
  };
  j["train"] = ids(split.train);
  j["validation"] = ids(split.validation);
  j["test"] = ids(split.test);
  j["norm_mean"] = split.norm_mean;
  j["norm_std"] = split.norm_std;
  return j.dump(2) + "\n";
}

// Rebuild a DatasetSplit from a dataset CSV and its split manifest.
inline DatasetSplit load_split(const std::string& dataset_csv_text,
                               const std::string& manifest_text) {
  const auto seqs = read_dataset_csv(dataset_csv_text);
  std::map<std::string, const LoadSequence*> by_id;
  for (const auto& s : seqs) by_id[sequence_id(s)] = &s;

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(manifest_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad split manifest: ") + e.what());
  }
  if (!j.contains("format") || j["format"] != "smpriv-split") {
    throw FormatError("not a split manifest");
  }

  DatasetSplit split;
  auto fill = [&](const char* key, std::vector<LoadSequence>& dst) {
    for (const auto& id : j.at(key)) {
      const auto it = by_id.find(id.get<std::string>());
      if (it == by_id.end()) {
        throw FormatError("manifest references unknown sequence " + id.get<std::string>());
      }
      dst.push_back(*it->second);
    }
  };
  fill("train", split.train);
  fill("validation", split.validation);
  fill("test", split.test);
  split.norm_mean = j.at("norm_mean").get<double>();
  split.norm_std = j.at("norm_std").get<double>();
  return split;
}

}  // namespace smpriv
