#include <benchmark/benchmark.h>

#include <random>

#include "nmstpp/autodiff.hpp"
#include "nmstpp/features.hpp"
#include "nmstpp/model.hpp"
#include "nmstpp/report.hpp"
#include "nmstpp/train.hpp"

using namespace nmstpp;

namespace {

SequenceWindow random_window(int seqlen, std::mt19937_64& rng) {
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
  return w;
}

std::vector<SequenceWindow> window_batch(int n, int seqlen) {
  std::mt19937_64 rng(7);
  std::vector<SequenceWindow> windows;
  for (int i = 0; i < n; ++i) windows.push_back(random_window(seqlen, rng));
  return windows;
}

}  // namespace

static void ForwardSingleWindow(benchmark::State& state) {
  model::ModelConfig c;  // published defaults, seqlen 40
  auto net = model::Nmstpp::init(c, 1);
  const auto windows = window_batch(1, c.seqlen);
  for (auto _ : state) {
    auto out = net.forecast(windows[0]);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(ForwardSingleWindow);

static void ForwardBatch(benchmark::State& state) {
  model::ModelConfig c;
  auto net = model::Nmstpp::init(c, 1);
  const auto windows = window_batch(static_cast<int>(state.range(0)), c.seqlen);
  for (auto _ : state) {
    auto out = net.forecast_batch(windows);
    benchmark::DoNotOptimize(out);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(ForwardBatch)->Arg(32)->Arg(128);

static void TrainStep(benchmark::State& state) {
  model::ModelConfig c;
  c.dim_feedforward = 256;
  auto net = model::Nmstpp::init(c, 1);
  const auto windows = window_batch(static_cast<int>(state.range(0)), c.seqlen);
  const auto weights = features::ClassWeights::uniform();
  const auto targets = train::BatchTargets::from_windows(windows);
  std::mt19937_64 rng(3);
  for (auto _ : state) {
    ad::Tape tape;
    const auto bound = net.bind(tape, true);
    const auto out = net.forward(tape, bound, windows, true, &rng);
    ad::Var rmse = tape.rmse_column(out.t_hat, targets.t);
    ad::Var cz =
        tape.weighted_cross_entropy(out.z_logits, targets.zone, weights.zone);
    ad::Var cm = tape.weighted_cross_entropy(out.m_logits, targets.action,
                                             weights.action);
    ad::Var total = tape.add(tape.scale(rmse, 10.0), tape.add(cz, cm));
    tape.backward(total);
    benchmark::DoNotOptimize(tape.grad(bound.at("post.W")));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(TrainStep)->Arg(64);

static void ZoneLookup(benchmark::State& state) {
  const auto map = features::ZoneMap::juego_de_posicion();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(map.zone_of(u(rng), u(rng)));
  }
}
BENCHMARK(ZoneLookup);

static void KsDistance(benchmark::State& state) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> a, b;
  for (int i = 0; i < state.range(0); ++i) {
    a.push_back(u(rng));
    b.push_back(u(rng) * u(rng));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(report::ks_distance(a, b));
  }
}
BENCHMARK(KsDistance)->Arg(10000);

BENCHMARK_MAIN();
