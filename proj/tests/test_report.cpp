#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "nmstpp/report.hpp"

using namespace nmstpp;

TEST_CASE("oracle predictor yields an identity confusion matrix") {
  const int k = 5, n = 40;
  Eigen::MatrixXd pmfs = Eigen::MatrixXd::Zero(n, k);
  std::vector<int> truth;
  for (int i = 0; i < n; ++i) {
    truth.push_back(i % k + 1);
    pmfs(i, i % k) = 1.0;
  }
  const auto cm = report::confusion(pmfs, truth);
  CHECK((cm.mean_prob - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() ==
        0.0);
  for (int c = 0; c < k; ++c) CHECK(cm.accuracy[c] == doctest::Approx(1.0));
}

TEST_CASE("uniform predictor yields uniform confusion rows") {
  const int k = 4, n = 37;
  Eigen::MatrixXd pmfs = Eigen::MatrixXd::Constant(n, k, 1.0 / k);
  std::vector<int> truth;
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> cls(1, k);
  for (int i = 0; i < n; ++i) truth.push_back(cls(rng));
  const auto cm = report::confusion(pmfs, truth);
  for (int r = 0; r < k; ++r) {
    if (cm.support[static_cast<std::size_t>(r)] == 0) continue;
    for (int c = 0; c < k; ++c)
      CHECK(cm.mean_prob(r, c) == doctest::Approx(1.0 / k).epsilon(1e-12));
    CHECK(cm.mean_prob.row(r).sum() == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("absent classes are flagged by support 0, not fabricated") {
  const int k = 3;
  Eigen::MatrixXd pmfs = Eigen::MatrixXd::Constant(2, k, 1.0 / k);
  const std::vector<int> truth = {1, 1};  // classes 2 and 3 unseen
  const auto cm = report::confusion(pmfs, truth);
  CHECK(cm.support[0] == 2);
  CHECK(cm.support[1] == 0);
  CHECK(cm.support[2] == 0);
}

TEST_CASE("KS distance endpoints") {
  CHECK(report::ks_distance({1, 2, 3}, {1, 2, 3}) == doctest::Approx(0.0));
  CHECK(report::ks_distance({0.0, 0.0}, {1.0, 1.0}) == doctest::Approx(1.0));
}

TEST_CASE("KS matches a brute-force sup-difference oracle") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> a, b;
  for (int i = 0; i < 83; ++i) a.push_back(u(rng));
  for (int i = 0; i < 61; ++i) b.push_back(u(rng) * u(rng));

  auto ecdf = [](const std::vector<double>& sorted, double x) {
    return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x) -
                               sorted.begin()) /
           static_cast<double>(sorted.size());
  };
  auto sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double oracle = 0.0;
  for (double x : sa) oracle = std::max(oracle, std::abs(ecdf(sa, x) - ecdf(sb, x)));
  for (double x : sb) oracle = std::max(oracle, std::abs(ecdf(sa, x) - ecdf(sb, x)));

  CHECK(report::ks_distance(a, b) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("cdf_compare sorts and carries the KS value") {
  const auto cmp = report::cdf_compare({3, 1, 2}, {2, 2, 2});
  CHECK(std::is_sorted(cmp.predicted_sorted.begin(), cmp.predicted_sorted.end()));
  CHECK(cmp.ks == doctest::Approx(report::ks_distance({3, 1, 2}, {2, 2, 2})));
  CHECK(cmp.ks >= 0.0);
  CHECK(cmp.ks <= 1.0);
}

TEST_CASE("model evaluation is pure in the parameters") {
  model::ModelConfig c;
  c.seqlen = 3;
  c.zone_emb_dim = 2;
  c.action_emb_dim = 1;
  c.continuous_dense_dim = 1;
  c.dim_feedforward = 8;
  c.history_dim = 5;
  auto net = model::Nmstpp::init(c, 9);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> zone(1, 20), action(1, 5);
  std::vector<SequenceWindow> windows;
  for (int i = 0; i < 12; ++i) {
    SequenceWindow w;
    w.history.resize(3, kWindowCols);
    for (int r = 0; r < 3; ++r) {
      w.history(r, 0) = u(rng);
      w.history(r, 1) = zone(rng);
      w.history(r, 2) = action(rng);
      for (int col = 3; col < kWindowCols; ++col) w.history(r, col) = u(rng);
    }
    w.target_t = u(rng);
    w.target_zone = zone(rng);
    w.target_action = action(rng);
    w.match_id = "m";
    windows.push_back(std::move(w));
  }
  const auto weights = features::ClassWeights::uniform();
  const auto a = report::evaluate(net, windows, weights);
  const auto b = report::evaluate(net, windows, weights);
  CHECK(a.loss.total == b.loss.total);
  CHECK((a.zone.mean_prob - b.zone.mean_prob).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.cdf.ks == b.cdf.ks);
  CHECK((a.attention_mean - b.attention_mean).cwiseAbs().maxCoeff() == 0.0);

  // exported attention row sums to 1
  CHECK(a.attention_mean.sum() == doctest::Approx(1.0).epsilon(1e-6));
  // confusion rows with support sum to 1 (mean of PMFs)
  for (int r = 0; r < 20; ++r)
    if (a.zone.support[static_cast<std::size_t>(r)] > 0)
      CHECK(a.zone.mean_prob.row(r).sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("seqlen 1 attention export is the single value 1") {
  model::ModelConfig c;
  c.seqlen = 1;
  c.zone_emb_dim = 2;
  c.action_emb_dim = 1;
  c.continuous_dense_dim = 1;
  c.dim_feedforward = 4;
  c.history_dim = 4;
  auto net = model::Nmstpp::init(c, 4);
  SequenceWindow w;
  w.history.resize(1, kWindowCols);
  w.history << 0.5, 3, 2, 0, 0, 0, 1, 0.5;
  w.target_t = 0.1;
  w.target_zone = 1;
  w.target_action = 1;
  const auto ev =
      report::evaluate(net, std::vector{w}, features::ClassWeights::uniform());
  REQUIRE(ev.attention_mean.size() == 1);
  CHECK(ev.attention_mean[0] == doctest::Approx(1.0));
}
