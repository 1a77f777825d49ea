#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <random>

#include <Eigen/Dense>

#include "nmstpp/baselines.hpp"

using namespace nmstpp;

TEST_CASE("AR(2) recovers coefficients from a noiseless series") {
  std::vector<double> series = {0.4, 0.7};
  for (int i = 2; i < 60; ++i)
    series.push_back(0.5 * series[i - 1] + 0.3 * series[i - 2]);
  const auto m = baselines::fit_ar2({series});
  CHECK(m.intercept == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(m.phi1 == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(m.phi2 == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("constant series predicts the constant") {
  const std::vector<double> series(20, 0.7);
  const auto m = baselines::fit_ar2({series});
  CHECK(m.predict(0.7, 0.7) == doctest::Approx(0.7).epsilon(1e-8));
}

TEST_CASE("AR(2) matches the closed-form normal-equation oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> series(3);
  for (auto& s : series)
    for (int i = 0; i < 40; ++i) s.push_back(u(rng));

  const auto m = baselines::fit_ar2(series);

  // explicit 3x3 normal equations
  Eigen::Matrix3d xtx = Eigen::Matrix3d::Zero();
  Eigen::Vector3d xty = Eigen::Vector3d::Zero();
  for (const auto& s : series) {
    for (std::size_t i = 2; i < s.size(); ++i) {
      Eigen::Vector3d x(1.0, s[i - 1], s[i - 2]);
      xtx += x * x.transpose();
      xty += x * s[i];
    }
  }
  const Eigen::Vector3d beta = xtx.ldlt().solve(xty);
  CHECK(m.intercept == doctest::Approx(beta[0]).epsilon(1e-9));
  CHECK(m.phi1 == doctest::Approx(beta[1]).epsilon(1e-9));
  CHECK(m.phi2 == doctest::Approx(beta[2]).epsilon(1e-9));
}

TEST_CASE("triplets never span match boundaries") {
  // Two matches of 3 events each yield 2 triplets, not 4.
  const std::vector<std::vector<double>> ok = {{1, 2, 3}, {4, 5, 6}};
  CHECK_THROWS_AS(baselines::fit_ar2({{1, 2, 3}}), Error);  // only 1 triplet
  CHECK_NOTHROW(baselines::fit_ar2({{1, 2, 3, 4}, {4, 5, 6, 7}}));  // 4
  (void)ok;
}

TEST_CASE("AR(2) fits are translation-consistent") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> series;
  for (int i = 0; i < 50; ++i) series.push_back(u(rng));
  std::vector<double> shifted = series;
  for (auto& v : shifted) v += 2.5;

  const auto a = baselines::fit_ar2({series});
  const auto b = baselines::fit_ar2({shifted});
  std::uniform_real_distribution<double> p(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const double t1 = p(rng), t2 = p(rng);
    CHECK(b.predict(t1 + 2.5, t2 + 2.5) ==
          doctest::Approx(a.predict(t1, t2) + 2.5).epsilon(1e-8));
  }
}

TEST_CASE("transition counting without smoothing") {
  const auto m = baselines::fit_transitions({{1, 2, 1, 2}}, 2, 0.0);
  CHECK(m.probs()(0, 1) == doctest::Approx(1.0));
  CHECK(m.probs()(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("unseen state with alpha 1 gets a uniform row") {
  const auto m = baselines::fit_transitions({{1, 1, 1}}, 4, 1.0);
  for (int j = 0; j < 4; ++j)
    CHECK(m.probs()(2, j) == doctest::Approx(0.25));
}

TEST_CASE("transition rows match a dictionary-of-counts oracle") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> cls(1, 6);
  std::vector<std::vector<int>> seqs(4);
  for (auto& s : seqs)
    for (int i = 0; i < 100; ++i) s.push_back(cls(rng));
  const double alpha = 0.5;
  const auto m = baselines::fit_transitions(seqs, 6, alpha);

  std::map<std::pair<int, int>, double> counts;
  std::map<int, double> totals;
  for (const auto& s : seqs)
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      counts[{s[i], s[i + 1]}] += 1.0;
      totals[s[i]] += 1.0;
    }
  for (int i = 1; i <= 6; ++i) {
    double row_sum = 0.0;
    for (int j = 1; j <= 6; ++j) {
      const double expected =
          (counts[{i, j}] + alpha) / (totals[i] + alpha * 6.0);
      CHECK(m.probs()(i - 1, j - 1) == doctest::Approx(expected).epsilon(1e-12));
      row_sum += m.probs()(i - 1, j - 1);
    }
    CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("rows sum to one for various K and alpha") {
  std::mt19937_64 rng(8);
  for (int k : {2, 5, 20}) {
    std::uniform_int_distribution<int> cls(1, k);
    std::vector<int> seq;
    for (int i = 0; i < 50; ++i) seq.push_back(cls(rng));
    for (double alpha : {0.1, 1.0, 7.0}) {
      const auto m = baselines::fit_transitions({seq}, k, alpha);
      for (int r = 0; r < k; ++r)
        CHECK(m.probs().row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

namespace {

std::vector<ProcessedEvent> cycle_rows(int n) {
  // deterministic 2-state cycle over zones 1,2 and actions pass/dribble
  std::vector<ProcessedEvent> rows;
  for (int i = 0; i < n; ++i) {
    ProcessedEvent r;
    r.match_id = "m1";
    r.team_id = "A";
    r.seconds = i;
    r.t = 1.0;
    r.zone = i % 2 + 1;
    r.action = i % 2 == 0 ? ActionClass::Pass : ActionClass::Dribble;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_CASE("deterministic cycle scores zero cross entropy at alpha 0") {
  const auto rows = cycle_rows(40);
  baselines::BaselineModel model{
      baselines::fit_ar2({{std::vector<double>(40, 0.5)}}),
      baselines::fit_transitions({{[&] {
        std::vector<int> zs;
        for (const auto& r : rows) zs.push_back(r.zone);
        return zs;
      }()}}, kNumZones, 0.0),
      baselines::fit_transitions({{[&] {
        std::vector<int> ms;
        for (const auto& r : rows) ms.push_back(static_cast<int>(r.action));
        return ms;
      }()}}, kNumActions, 0.0)};

  const auto windows = features::build_windows_all(rows, 4, 1.0);
  REQUIRE_FALSE(windows.empty());
  const auto loss = baselines::evaluate_baseline(model, windows,
                                                 features::ClassWeights::uniform());
  CHECK(loss.cel_zone == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(loss.cel_action == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("uniform transition rows give ln K cross entropies") {
  baselines::BaselineModel model{
      baselines::Ar2Model{0.0, 0.0, 0.0},
      baselines::TransitionMatrix(
          Eigen::MatrixXd::Constant(kNumZones, kNumZones, 1.0 / kNumZones), 1.0),
      baselines::TransitionMatrix(
          Eigen::MatrixXd::Constant(kNumActions, kNumActions, 1.0 / kNumActions),
          1.0)};
  const auto rows = cycle_rows(30);
  const auto windows = features::build_windows_all(rows, 3, 1.0);
  const auto loss = baselines::evaluate_baseline(model, windows,
                                                 features::ClassWeights::uniform());
  CHECK(loss.cel_zone == doctest::Approx(std::log(20.0)).epsilon(1e-9));
  CHECK(loss.cel_action == doctest::Approx(std::log(5.0)).epsilon(1e-9));
}

TEST_CASE("baseline evaluation is the shared loss on its own predictions") {
  const auto rows = cycle_rows(50);
  const auto model = baselines::fit_baseline(rows, 1.0, 1.0);
  const auto windows = features::build_windows_all(rows, 4, 1.0);
  const auto weights = features::ClassWeights::uniform();

  const auto preds = baselines::predict(model, windows);
  const auto direct = train::compute_loss(
      preds.t, preds.z_logprobs, preds.m_logprobs,
      train::BatchTargets::from_windows(windows), weights);
  const auto via = baselines::evaluate_baseline(model, windows, weights);
  CHECK(via.total == direct.total);
  CHECK(via.rmse_t == direct.rmse_t);
  CHECK(via.cel_zone == direct.cel_zone);
  CHECK(via.cel_action == direct.cel_action);
}

TEST_CASE("baseline JSON round trip") {
  const auto rows = cycle_rows(50);
  const auto model = baselines::fit_baseline(rows, 1.0, 1.0);
  const auto dir = std::filesystem::temp_directory_path() / "nmstpp_base_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "baseline.json").string();
  baselines::save_baseline(model, path, 3);
  const auto back = baselines::load_baseline(path);
  CHECK(back.ar2.intercept == model.ar2.intercept);
  CHECK((back.zones.probs() - model.zones.probs()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.actions.probs() - model.actions.probs()).cwiseAbs().maxCoeff() ==
        0.0);
  std::filesystem::remove_all(dir);
}
