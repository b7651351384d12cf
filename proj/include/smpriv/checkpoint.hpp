#pragma once

// Checkpoints: self-describing JSON container with architecture descriptors,
// parameter arrays, optimizer accumulators, config snapshot + hash, rng state
// and loss history. Loading rejects mismatched descriptors.

#include <string>
#include <vector>

#include "json.hpp"

#include "smpriv/common.hpp"
#include "smpriv/core_types.hpp"
#include "smpriv/nets.hpp"
#include "smpriv/training.hpp"

namespace smpriv {

inline constexpr const char* kCheckpointFormat = "smpriv-checkpoint";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

template <class S>
nlohmann::json matrix_to_json(const Mat<S>& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(double(m(r, c)));
  }
  j["data"] = std::move(data);
  return j;
}

template <class S>
Mat<S> matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw FormatError("checkpoint: matrix size mismatch");
  }
  Mat<S> m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = S(data[k++].get<double>());
  }
  return m;
}

template <class S>
nlohmann::json net_to_json(const SeqNet<S>& net) {
  nlohmann::json j;
  j["arch"] = {{"input_dim", net.input_dim()},
               {"hidden_dim", net.hidden_dim()},
               {"n_layers", net.n_layers()},
               {"output_dim", net.output_dim()}};
  nlohmann::json params = nlohmann::json::array();
  for (const auto* p : net.param_list()) params.push_back(matrix_to_json(*p));
  j["params"] = std::move(params);
  return j;
}

template <class S>
SeqNet<S> net_from_json(const nlohmann::json& j) {
  const auto& a = j.at("arch");
  SeqNet<S> net(a.at("input_dim").get<int>(), a.at("hidden_dim").get<int>(),
                a.at("n_layers").get<int>(), a.at("output_dim").get<int>());
  auto params = net.param_list();
  const auto& stored = j.at("params");
  if (stored.size() != params.size()) throw FormatError("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat<S> m = matrix_from_json<S>(stored[i]);
    if (m.rows() != params[i]->rows() || m.cols() != params[i]->cols()) {
      throw FormatError("checkpoint: parameter shape mismatch");
    }
    *params[i] = std::move(m);
  }
  return net;
}

template <class S>
nlohmann::json opt_to_json(const RmsProp<S>& opt) {
  nlohmann::json j;
  j["lr"] = opt.learning_rate();
  j["alpha"] = opt.alpha();
  j["eps"] = opt.eps();
  nlohmann::json acc = nlohmann::json::array();
  for (const auto& m : opt.accumulators()) acc.push_back(matrix_to_json(m));
  j["acc"] = std::move(acc);
  return j;
}

template <class S>
RmsProp<S> opt_from_json(const nlohmann::json& j) {
  RmsProp<S> opt(j.at("lr").get<double>(), j.at("alpha").get<double>(), j.at("eps").get<double>());
  for (const auto& m : j.at("acc")) opt.accumulators().push_back(matrix_from_json<S>(m));
  return opt;
}

}  // namespace detail

template <class S>
std::string save_checkpoint(const TrainState<S>& st) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = write_config(st.cfg);
  j["config_hash"] = config_hash(st.cfg);
  j["epoch"] = st.epoch;
  j["rng_state"] = st.rng.state();
  j["releaser"] = detail::net_to_json(st.releaser.net);
  j["adversary"] = detail::net_to_json(st.adversary.net);
  j["releaser_opt"] = detail::opt_to_json(st.releaser_opt);
  j["adversary_opt"] = detail::opt_to_json(st.adversary_opt);
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& e : st.history) {
    hist.push_back({{"epoch", e.epoch},
                    {"releaser_total", e.releaser.total},
                    {"distortion_term", e.releaser.distortion_term},
                    {"privacy_term", e.releaser.privacy_term},
                    {"regularization_term", e.releaser.regularization_term},
                    {"adversary_loss", e.adversary_loss},
                    {"val_releaser_total", e.val_releaser_total},
                    {"val_distortion", e.val_distortion},
                    {"val_adversary_loss", e.val_adversary_loss}});
  }
  j["history"] = std::move(hist);
  return j.dump() + "\n";
}

template <class S = double>
TrainState<S> load_checkpoint(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint: ") + e.what());
  }
  if (!j.contains("format") || j["format"] != kCheckpointFormat) {
    throw FormatError("not a checkpoint file");
  }
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version");
  }

  TrainState<S> st;
  st.cfg = validate_config(parse_config(j.at("config").get<std::string>()));
  if (j.at("config_hash").get<std::string>() != config_hash(st.cfg)) {
    throw FormatError("checkpoint config hash mismatch");
  }

  st.releaser.si_case = st.cfg.si_case;
  st.releaser.noise_dim = st.cfg.noise_dim;
  st.releaser.net = detail::net_from_json<S>(j.at("releaser"));
  st.adversary.si_case = st.cfg.si_case;
  st.adversary.net = detail::net_from_json<S>(j.at("adversary"));

  // descriptor consistency with the config-implied architecture
  if (st.releaser.net.input_dim() != 2 + st.cfg.noise_dim + releaser_si_dim(st.cfg.si_case) ||
      st.releaser.net.hidden_dim() != kReleaserHidden ||
      st.releaser.net.n_layers() != kReleaserLayers || st.releaser.net.output_dim() != 1) {
    throw FormatError("checkpoint releaser architecture does not match config");
  }
  if (st.adversary.net.input_dim() != 2 + si_dim(st.cfg.si_case) ||
      st.adversary.net.hidden_dim() != kAdversaryHidden ||
      st.adversary.net.n_layers() != adversary_layers(st.cfg.si_case) ||
      st.adversary.net.output_dim() != 1) {
    throw FormatError("checkpoint adversary architecture does not match config");
  }

  st.releaser_opt = detail::opt_from_json<S>(j.at("releaser_opt"));
  st.adversary_opt = detail::opt_from_json<S>(j.at("adversary_opt"));
  st.epoch = j.at("epoch").get<int>();
  st.rng.set_state(j.at("rng_state").get<Rng::State>());
  for (const auto& h : j.at("history")) {
    EpochStats e;
    e.epoch = h.at("epoch").get<int>();
    e.releaser.total = h.at("releaser_total").get<double>();
    e.releaser.distortion_term = h.at("distortion_term").get<double>();
    e.releaser.privacy_term = h.at("privacy_term").get<double>();
    e.releaser.regularization_term = h.at("regularization_term").get<double>();
    e.adversary_loss = h.at("adversary_loss").get<double>();
    e.val_releaser_total = h.at("val_releaser_total").get<double>();
    e.val_distortion = h.at("val_distortion").get<double>();
    e.val_adversary_loss = h.at("val_adversary_loss").get<double>();
    st.history.push_back(e);
  }
  return st;
}

}  // namespace smpriv
