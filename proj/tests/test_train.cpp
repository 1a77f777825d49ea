#include <doctest.h>

#include <cmath>
#include <random>

#include "nmstpp/train.hpp"

using namespace nmstpp;
using features::ClassWeights;
using train::BatchTargets;
using train::LossBreakdown;

namespace {

SequenceWindow make_window(int seqlen, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> zone(1, kNumZones);
  std::uniform_int_distribution<int> action(1, kNumActions);
  SequenceWindow w;
  w.history.resize(seqlen, kWindowCols);
  for (int r = 0; r < seqlen; ++r) {
    w.history(r, 0) = u(rng);
    w.history(r, 1) = zone(rng);
    w.history(r, 2) = action(rng);
    for (int c = 3; c < kWindowCols; ++c) w.history(r, c) = u(rng) - 0.5;
  }
  w.target_t = u(rng);
  w.target_zone = zone(rng);
  w.target_action = action(rng);
  w.match_id = "m";
  return w;
}

model::ModelConfig tiny_config(int seqlen = 3) {
  model::ModelConfig c;
  c.seqlen = seqlen;
  c.zone_emb_dim = 2;
  c.action_emb_dim = 1;
  c.continuous_dense_dim = 1;
  c.dim_feedforward = 8;
  c.history_dim = 5;
  return c;
}

BatchTargets targets_of(double t, int zone, int action) {
  BatchTargets tg;
  tg.t.resize(1);
  tg.t[0] = t;
  tg.zone = {zone};
  tg.action = {action};
  return tg;
}

}  // namespace

TEST_CASE("perfect predictions drive the total loss to zero") {
  Eigen::VectorXd t_pred(1);
  t_pred << 0.3;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, 20);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(1, 5);
  z(0, 4) = 1000.0;  // saturated correct logits
  m(0, 2) = 1000.0;
  const auto loss = train::compute_loss(t_pred, z, m, targets_of(0.3, 5, 3),
                                        ClassWeights::uniform());
  CHECK(loss.total < 1e-4);
}

TEST_CASE("single-sample analytic loss: rmse 0.1, uniform logits") {
  Eigen::VectorXd t_pred(1);
  t_pred << 0.2;
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, 20);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Zero(1, 5);
  const auto loss = train::compute_loss(t_pred, z, m, targets_of(0.1, 1, 1),
                                        ClassWeights::uniform());
  CHECK(loss.rmse_t == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(loss.cel_zone == doctest::Approx(std::log(20.0)).epsilon(1e-9));
  CHECK(loss.cel_action == doctest::Approx(std::log(5.0)).epsilon(1e-9));
  CHECK(loss.total ==
        doctest::Approx(1.0 + std::log(20.0) + std::log(5.0)).epsilon(1e-9));
}

TEST_CASE("random batch matches an independent scalar-loop oracle") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const int b = 13;
  Eigen::VectorXd t_pred(b);
  Eigen::MatrixXd z(b, 20), m(b, 5);
  BatchTargets tg;
  tg.t.resize(b);
  std::uniform_int_distribution<int> zone(1, 20), action(1, 5);
  for (int i = 0; i < b; ++i) {
    t_pred[i] = u(rng);
    tg.t[i] = u(rng);
    for (int c = 0; c < 20; ++c) z(i, c) = u(rng);
    for (int c = 0; c < 5; ++c) m(i, c) = u(rng);
    tg.zone.push_back(zone(rng));
    tg.action.push_back(action(rng));
  }
  ClassWeights w;
  w.zone.resize(20);
  w.action.resize(5);
  std::uniform_real_distribution<double> wu(0.2, 3.0);
  for (int i = 0; i < 20; ++i) w.zone[i] = wu(rng);
  for (int i = 0; i < 5; ++i) w.action[i] = wu(rng);

  const auto loss = train::compute_loss(t_pred, z, m, tg, w, 10.0);

  // straight-line recomputation
  double sq = 0.0;
  for (int i = 0; i < b; ++i) sq += (t_pred[i] - tg.t[i]) * (t_pred[i] - tg.t[i]);
  const double rmse = std::sqrt(sq / b);
  auto wce = [&](const Eigen::MatrixXd& logits, const std::vector<int>& y,
                 const Eigen::VectorXd& weights) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < b; ++i) {
      double lse = 0.0;
      for (int c = 0; c < logits.cols(); ++c) lse += std::exp(logits(i, c));
      num += weights[y[static_cast<std::size_t>(i)] - 1] *
             (std::log(lse) - logits(i, y[static_cast<std::size_t>(i)] - 1));
      den += weights[y[static_cast<std::size_t>(i)] - 1];
    }
    return num / den;
  };
  CHECK(loss.rmse_t == doctest::Approx(rmse).epsilon(1e-9));
  CHECK(loss.cel_zone == doctest::Approx(wce(z, tg.zone, w.zone)).epsilon(1e-9));
  CHECK(loss.cel_action ==
        doctest::Approx(wce(m, tg.action, w.action)).epsilon(1e-9));
  // composition identity
  CHECK(loss.total ==
        doctest::Approx(10.0 * loss.rmse_t + loss.cel_zone + loss.cel_action)
            .epsilon(1e-9));
}

TEST_CASE("unit weights reproduce unweighted cross entropy") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const int b = 9;
  Eigen::VectorXd t_pred = Eigen::VectorXd::Zero(b);
  Eigen::MatrixXd z(b, 20), m(b, 5);
  BatchTargets tg;
  tg.t = Eigen::VectorXd::Zero(b);
  for (int i = 0; i < b; ++i) {
    for (int c = 0; c < 20; ++c) z(i, c) = u(rng);
    for (int c = 0; c < 5; ++c) m(i, c) = u(rng);
    tg.zone.push_back(1 + (i % 20));
    tg.action.push_back(1 + (i % 5));
  }
  const auto weighted =
      train::compute_loss(t_pred, z, m, tg, ClassWeights::uniform());
  double plain = 0.0;
  for (int i = 0; i < b; ++i) {
    double lse = 0.0;
    for (int c = 0; c < 20; ++c) lse += std::exp(z(i, c));
    plain += std::log(lse) - z(i, tg.zone[static_cast<std::size_t>(i)] - 1);
  }
  CHECK(weighted.cel_zone == doctest::Approx(plain / b).epsilon(1e-9));
}

TEST_CASE("empty batch is an error") {
  CHECK_THROWS_AS(train::compute_loss(Eigen::VectorXd(), Eigen::MatrixXd(),
                                      Eigen::MatrixXd(), BatchTargets{},
                                      ClassWeights::uniform()),
                  Error);
}

TEST_CASE("learning rate 0 leaves parameters unchanged") {
  std::mt19937_64 rng(44);
  std::vector<SequenceWindow> windows;
  for (int i = 0; i < 6; ++i) windows.push_back(make_window(3, rng));
  auto net = model::Nmstpp::init(tiny_config(), 5);
  const auto before = net.params();
  train::TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  train::train(net, windows, {}, ClassWeights::uniform(), cfg);
  for (const auto& [name, tensor] : before)
    CHECK((net.params().at(name) - tensor).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("seeded training is bit-reproducible") {
  std::mt19937_64 rng(45);
  std::vector<SequenceWindow> windows;
  for (int i = 0; i < 10; ++i) windows.push_back(make_window(3, rng));
  train::TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 4;
  cfg.seed = 9;

  auto run = [&]() {
    auto net = model::Nmstpp::init(tiny_config(), 5);
    return train::train(net, windows, {}, ClassWeights::uniform(), cfg);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train.total == b.history[i].train.total);
    CHECK(a.history[i].valid.total == b.history[i].valid.total);
  }
}

TEST_CASE("selected checkpoint has the best recorded validation loss") {
  std::mt19937_64 rng(46);
  std::vector<SequenceWindow> train_w, valid_w;
  for (int i = 0; i < 12; ++i) train_w.push_back(make_window(3, rng));
  for (int i = 0; i < 6; ++i) valid_w.push_back(make_window(3, rng));
  auto net = model::Nmstpp::init(tiny_config(), 5);
  train::TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 6;
  const auto result =
      train::train(net, train_w, valid_w, ClassWeights::uniform(), cfg);
  const auto selected = train::evaluate_model(net, valid_w,
                                              ClassWeights::uniform());
  for (const auto& rec : result.history)
    CHECK(selected.total <= rec.valid.total + 1e-9);
}

TEST_CASE("small overfit run reduces training loss sharply") {
  std::mt19937_64 rng(47);
  std::vector<SequenceWindow> windows;
  for (int i = 0; i < 8; ++i) windows.push_back(make_window(3, rng));
  auto net = model::Nmstpp::init(tiny_config(), 5);
  train::TrainConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 8;
  cfg.learning_rate = 3e-3;
  cfg.patience = 150;
  const auto result =
      train::train(net, windows, {}, ClassWeights::uniform(), cfg);
  const double initial = result.history.front().train.total;
  const double best = result.best_valid.total;
  CHECK(best < 0.5 * initial);
}

TEST_CASE("nan in inputs aborts with epoch and batch diagnostics") {
  std::mt19937_64 rng(48);
  std::vector<SequenceWindow> windows;
  for (int i = 0; i < 4; ++i) windows.push_back(make_window(3, rng));
  auto net = model::Nmstpp::init(tiny_config(), 5);
  net.params().at("post.W")(0, 0) = std::numeric_limits<double>::quiet_NaN();
  train::TrainConfig cfg;
  cfg.epochs = 1;
  // The pre-training evaluation hits the NaN first; either way the error
  // carries context.
  CHECK_THROWS_AS(train::train(net, windows, {}, ClassWeights::uniform(), cfg),
                  Error);
}

TEST_CASE("grid with one configuration equals a direct train call") {
  // Build a tiny processed-event corpus directly, covering every class.
  std::vector<ProcessedEvent> rows;
  for (int i = 0; i < 120; ++i) {
    ProcessedEvent r;
    r.match_id = "m1";
    r.team_id = "A";
    r.seconds = i;
    r.t = 1.0;
    r.zone = i % 20 + 1;
    r.action = static_cast<ActionClass>(i % 5 + 1);
    rows.push_back(r);
  }
  train::GridSpec spec;  // empty candidate lists keep the base everywhere
  train::TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  const auto base = tiny_config();
  const auto cells = train::grid_search(spec, base, tc, rows, rows, 1.0);
  REQUIRE(cells.size() == 1);
  REQUIRE(cells[0].ok);

  const auto windows = features::build_windows_all(rows, base.seqlen, 1.0);
  const auto weights =
      features::class_weights_for(windows, tc.dribble_multiplier);
  auto net = model::Nmstpp::init(base, tc.seed);
  const auto direct = train::train(net, windows, windows, weights, tc);
  CHECK(cells[0].valid.total == doctest::Approx(direct.best_valid.total));
}

TEST_CASE("order grid expands to six valid rows") {
  train::GridSpec spec;
  for (const char* o : {"t,z,m", "t,m,z", "z,t,m", "z,m,t", "m,t,z", "m,z,t"})
    spec.order.push_back(*model::order_from_string(o));
  const auto configs = spec.expand(tiny_config());
  CHECK(configs.size() == 6);
}

TEST_CASE("two-point seqlen grid yields both configs") {
  train::GridSpec spec;
  spec.seqlen = {1, 40};
  const auto configs = spec.expand(tiny_config());
  REQUIRE(configs.size() == 2);
  CHECK(configs[0].seqlen == 1);
  CHECK(configs[1].seqlen == 40);
}

TEST_CASE("failed grid cells are recorded, not fatal") {
  std::vector<ProcessedEvent> rows;  // too short for seqlen 50
  for (int i = 0; i < 10; ++i) {
    ProcessedEvent r;
    r.match_id = "m1";
    r.zone = 1;
    r.action = ActionClass::Pass;
    rows.push_back(r);
  }
  train::GridSpec spec;
  spec.seqlen = {50};
  train::TrainConfig tc;
  tc.epochs = 1;
  const auto cells = train::grid_search(spec, tiny_config(), tc, rows, rows, 1.0);
  REQUIRE(cells.size() == 1);
  CHECK_FALSE(cells[0].ok);
  CHECK_FALSE(cells[0].error.empty());
}
