#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "smpriv/training.hpp"

using namespace smpriv;
using Catch::Approx;

namespace {

DatasetSplit tiny_split(int days = 30, std::uint64_t seed = 7) {
  auto p = synth_params_dow_profile();
  p.n_days = days;
  p.rng_seed = seed;
  return split_dataset(synthesize_dataset(p), seed);
}

ExperimentConfig tiny_cfg() {
  ExperimentConfig cfg;
  cfg.batch_size = 16;
  cfg.epochs = 3;
  cfg.patience = 0;  // run all epochs
  return cfg;
}

bool params_equal(const SeqNet<double>& a, const SeqNet<double>& b) {
  const auto pa = a.param_list();
  const auto pb = b.param_list();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (*pa[i] != *pb[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("adversary_phase freezes the releaser and releaser_phase freezes the adversary",
          "[integration]") {
  const auto data = tiny_split();
  auto cfg = tiny_cfg();
  auto st = init_train_state<double>(cfg);
  const auto train =
      make_tensors<double>(data.train, data.norm_mean, data.norm_std, cfg.si_case, cfg.seq_len);

  const auto theta_before = st.releaser;
  adversary_phase(st, train, st.cfg);
  REQUIRE(params_equal(theta_before.net, st.releaser.net));

  const auto phi_before = st.adversary;
  releaser_phase(st, train, st.cfg);
  REQUIRE(params_equal(phi_before.net, st.adversary.net));
  REQUIRE_FALSE(params_equal(theta_before.net, st.releaser.net));
}

TEST_CASE("adversary loss falls on a separable toy problem", "[integration]") {
  // occupied load far above the noise floor: the release (untrained releaser
  // passes distorted y through) still separates the classes
  const auto data = tiny_split(40, 3);
  auto cfg = tiny_cfg();
  cfg.epochs = 12;
  auto st = init_train_state<double>(cfg);
  const auto train =
      make_tensors<double>(data.train, data.norm_mean, data.norm_std, cfg.si_case, cfg.seq_len);

  double first = 0.0, last = 0.0;
  for (int i = 0; i < 12; ++i) {
    const double loss = adversary_phase(st, train, st.cfg);
    if (i == 0) first = loss;
    last = loss;
  }
  REQUIRE(last < first);
  REQUIRE(last < std::log(2.0));
}

TEST_CASE("ridge-only dynamics shrink the parameter norm monotonically") {
  // zero data gradient: only the ridge pull remains
  SeqNet<double> net(2, 4, 1, 1);
  Rng rng(11);
  net.init_params(rng);
  RmsProp<double> opt(1e-3, 0.9, 1e-8);
  const double beta = 1.5;
  double prev = double(net.param_sum_squares());
  for (int step = 0; step < 50; ++step) {
    auto grads = net.zero_grads();
    const auto params = net.param_list();
    const double scale = 2.0 * beta / double(net.param_count());
    for (std::size_t i = 0; i < params.size(); ++i) grads.g[i] = scale * (*params[i]);
    opt.step(net.param_list(), grads);
    const double cur = double(net.param_sum_squares());
    REQUIRE(cur < prev);
    prev = cur;
  }
}

TEST_CASE("training is deterministic per config and seed", "[integration]") {
  const auto data = tiny_split();
  const auto cfg = tiny_cfg();
  const auto a = run_training<double>(cfg, data);
  const auto b = run_training<double>(cfg, data);
  REQUIRE(params_equal(a.releaser.net, b.releaser.net));
  REQUIRE(params_equal(a.adversary.net, b.adversary.net));
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    REQUIRE(a.history[i].releaser.total == b.history[i].releaser.total);
    REQUIRE(a.history[i].val_releaser_total == b.history[i].val_releaser_total);
  }
}

TEST_CASE("lambda zero trains identically under CAL and DI", "[integration]") {
  const auto data = tiny_split();
  auto cfg = tiny_cfg();
  cfg.lambda = 0.0;
  cfg.method = Method::CAL;
  const auto cal = run_training<double>(cfg, data);
  cfg.method = Method::DI;
  const auto di = run_training<double>(cfg, data);
  REQUIRE(params_equal(cal.releaser.net, di.releaser.net));
  for (std::size_t i = 0; i < cal.history.size(); ++i) {
    REQUIRE(cal.history[i].releaser.total == di.history[i].releaser.total);
  }
}

TEST_CASE("training aborts with a diagnostic on non-finite losses", "[integration]") {
  const auto data = tiny_split();
  auto cfg = tiny_cfg();
  cfg.lambda = 1e308;  // privacy term overflows
  try {
    run_training<double>(cfg, data);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("epoch") != std::string::npos);
    REQUIRE(msg.find("phase") != std::string::npos);
  }
}

TEST_CASE("train state history matches the completed epochs", "[integration]") {
  const auto data = tiny_split();
  auto cfg = tiny_cfg();
  cfg.epochs = 4;
  const auto st = run_training<double>(cfg, data);
  REQUIRE(st.epoch == 4);
  REQUIRE(st.history.size() == 4);
  for (int i = 0; i < 4; ++i) REQUIRE(st.history[i].epoch == i + 1);
}

TEST_CASE("releaser gradients match finite differences through both objectives") {
  // tiny nets: 1 layer x 4 cells, T=3, double precision
  const int T = 3, B = 2, m = 2;
  ReleaserNet<double> rel;
  rel.noise_dim = m;
  rel.si_case = SiCase::none;
  rel.net = SeqNet<double>(2 + m, 4, 1, 1);
  AdversaryNet<double> adv;
  adv.si_case = SiCase::none;
  adv.net = SeqNet<double>(2, 4, 1, 1);
  Rng rng(5);
  rel.net.init_params(rng);
  adv.net.init_params(rng);

  SeqBatch<double> batch;
  batch.x.resize(B, T);
  batch.y.resize(B, T);
  batch.si.resize(B, 0);
  batch.noise.resize(T);
  for (int t = 0; t < T; ++t) {
    batch.noise[t].resize(B, m);
    for (int i = 0; i < B; ++i) {
      for (int j = 0; j < m; ++j) batch.noise[t](i, j) = rng.uniform01();
    }
  }
  for (int i = 0; i < B; ++i) {
    for (int t = 0; t < T; ++t) {
      batch.x(i, t) = rng.bernoulli(0.5) ? 1.0 : 0.0;
      batch.y(i, t) = rng.normal();
    }
  }

  for (const Method method : {Method::CAL, Method::DI}) {
    const double lambda = 1.3, beta = 0.7;
    auto grads = rel.net.zero_grads();
    releaser_loss_and_grads(rel, adv, batch, method, lambda, beta, grads);
    auto loss = [&]() {
      const Mat<double> z = releaser_forward_batch(rel, batch);
      const Mat<double> q =
          adversary_forward_batch(adv, z, shifted_labels(batch.x), batch.si);
      const auto r = method == Method::CAL
                         ? cal_releaser_loss(z, batch.y, q, batch.x, lambda, beta, rel.net)
                         : di_releaser_loss(z, batch.y, q, lambda, beta, rel.net);
      return r.total;
    };
    REQUIRE(oracles::max_param_grad_error(rel.net, grads, loss) < 1e-4);
  }

  // adversary gradients w.r.t. phi at a fixed release
  {
    const Mat<double> z = releaser_forward_batch(rel, batch);
    auto grads = adv.net.zero_grads();
    adversary_loss_and_grads(adv, z, batch.x, batch.si, grads);
    auto loss = [&]() {
      const Mat<double> q =
          adversary_forward_batch(adv, z, shifted_labels(batch.x), batch.si);
      return double(adversary_loss(q, batch.x));
    };
    REQUIRE(oracles::max_param_grad_error(adv.net, grads, loss) < 1e-4);
  }
}

TEST_CASE("loss curve export and parse") {
  std::vector<EpochStats> history;
  Rng rng(13);
  for (int e = 1; e <= 10; ++e) {
    EpochStats s;
    s.epoch = e;
    s.releaser = make_loss_report(rng.normal(), rng.normal(), rng.uniform(0.0, 1.0));
    s.adversary_loss = rng.uniform(0.0, 1.0);
    history.push_back(s);
  }
  const auto csv = loss_curves_csv(history);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 11);  // header + 10 rows
  const auto rows = parse_loss_curves_csv(csv);
  REQUIRE(rows.size() == 10);
  for (int i = 0; i < 10; ++i) {
    REQUIRE(rows[i].epoch == i + 1);
    REQUIRE(rows[i].releaser_total == Approx(history[i].releaser.total).margin(1e-12));
    REQUIRE(rows[i].privacy_term == Approx(history[i].releaser.privacy_term).margin(1e-12));
    REQUIRE(rows[i].adversary_loss == Approx(history[i].adversary_loss).margin(1e-12));
  }
  REQUIRE_THROWS_AS(loss_curves_csv({}), ValidationError);
}

TEST_CASE("sweep runs the grid in lambda order with derived seeds", "[integration]") {
  const auto data = tiny_split();
  auto cfg = tiny_cfg();
  cfg.epochs = 2;

  {  // single-point grid
    const auto runs = sweep_lambda<double>(cfg, {0.0}, data);
    REQUIRE(runs.size() == 1);
    REQUIRE(runs[0].ok);
    REQUIRE(runs[0].lambda == 0.0);
  }
  {  // repeated value reproduces the identical run
    const auto runs = sweep_lambda<double>(cfg, {1.0, 1.0}, data);
    REQUIRE(runs.size() == 2);
    REQUIRE(runs[0].ok);
    REQUIRE(runs[1].ok);
    REQUIRE(params_equal(runs[0].state.releaser.net, runs[1].state.releaser.net));
  }
  {  // one failing point does not break the sweep
    const auto runs = sweep_lambda<double>(cfg, {1e308, 0.0}, data);
    REQUIRE(runs.size() == 2);
    REQUIRE(runs[0].lambda == 0.0);  // ordered by lambda
    REQUIRE(runs[0].ok);
    REQUIRE_FALSE(runs[1].ok);
    REQUIRE(!runs[1].error.empty());
  }
  {  // parallel execution returns the same results
    const auto serial = sweep_lambda<double>(cfg, {0.0, 1.0}, data, 1);
    const auto parallel = sweep_lambda<double>(cfg, {0.0, 1.0}, data, 2);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
      REQUIRE(serial[i].ok == parallel[i].ok);
      REQUIRE(params_equal(serial[i].state.releaser.net, parallel[i].state.releaser.net));
    }
  }
}

TEST_CASE("early stopping halts after patience epochs without improvement", "[integration]") {
  const auto data = tiny_split();
  auto cfg = tiny_cfg();
  cfg.epochs = 60;
  cfg.patience = 2;
  cfg.learning_rate = 1e-9;  // training cannot improve: stop fires quickly
  const auto st = run_training<double>(cfg, data);
  REQUIRE(st.epoch < 60);
  REQUIRE(st.history.size() == std::size_t(st.epoch));
}
