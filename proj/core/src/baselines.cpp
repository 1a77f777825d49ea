#include "nmstpp/baselines.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nmstpp/io.hpp"
#include "nmstpp/version.hpp"

namespace nmstpp::baselines {

Ar2Model fit_ar2(const std::vector<std::vector<double>>& series_per_match) {
  std::vector<std::array<double, 3>> rows;  // (1 implied) t_{i-1}, t_{i-2}, y
  for (const auto& series : series_per_match)
    for (std::size_t i = 2; i < series.size(); ++i)
      rows.push_back({series[i - 1], series[i - 2], series[i]});
  if (rows.size() < 3)
    throw Error("fit_ar2: need at least 3 usable (t_{i-2},t_{i-1},t_i) triplets");

  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    design(r, 0) = 1.0;
    design(r, 1) = rows[i][0];
    design(r, 2) = rows[i][1];
    y[r] = rows[i][2];
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  if (cod.rank() == 0) throw Error("fit_ar2: degenerate design matrix");
  const Eigen::VectorXd beta = cod.solve(y);
  if (!beta.allFinite()) throw Error("fit_ar2: singular design matrix");
  return Ar2Model{beta[0], beta[1], beta[2]};
}

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd probs, double alpha)
    : probs_(std::move(probs)), alpha_(alpha) {
  if (probs_.rows() != probs_.cols() || probs_.rows() < 1)
    throw Error("TransitionMatrix: must be square");
  for (Eigen::Index r = 0; r < probs_.rows(); ++r) {
    if (probs_.row(r).minCoeff() < 0.0)
      throw Error("TransitionMatrix: negative entry");
    if (std::abs(probs_.row(r).sum() - 1.0) > 1e-9)
      throw Error("TransitionMatrix: row " + std::to_string(r + 1) +
                  " does not sum to 1");
  }
}

Eigen::VectorXd TransitionMatrix::row(int state) const {
  if (state < 1 || state > states())
    throw Error("TransitionMatrix: state out of range");
  return probs_.row(state - 1).transpose();
}

TransitionMatrix fit_transitions(const std::vector<std::vector<int>>& sequences,
                                 int k, double alpha) {
  if (k < 1) throw Error("fit_transitions: k must be >= 1");
  if (alpha < 0.0) throw Error("fit_transitions: alpha must be >= 0");
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k, k);
  for (const auto& seq : sequences) {
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      if (seq[i] < 1 || seq[i] > k || seq[i + 1] < 1 || seq[i + 1] > k)
        throw Error("fit_transitions: class id out of range 1.." +
                    std::to_string(k));
      counts(seq[i] - 1, seq[i + 1] - 1) += 1.0;
    }
  }
  Eigen::MatrixXd probs(k, k);
  for (int i = 0; i < k; ++i) {
    const double denom = counts.row(i).sum() + alpha * k;
    if (denom == 0.0) {
      probs.row(i).setConstant(1.0 / k);  // unseen state, alpha = 0
    } else {
      probs.row(i) = (counts.row(i).array() + alpha) / denom;
    }
  }
  return TransitionMatrix(std::move(probs), alpha);
}

BaselineModel fit_baseline(const std::vector<ProcessedEvent>& train_rows,
                           double t_scale, double alpha) {
  std::vector<std::vector<double>> t_series;
  std::vector<std::vector<int>> zone_seqs, action_seqs;
  std::size_t start = 0;
  while (start < train_rows.size()) {
    std::size_t end = start;
    std::vector<double> ts;
    std::vector<int> zs, ms;
    while (end < train_rows.size() &&
           train_rows[end].match_id == train_rows[start].match_id) {
      ts.push_back(train_rows[end].t * t_scale);
      zs.push_back(train_rows[end].zone);
      ms.push_back(static_cast<int>(train_rows[end].action));
      ++end;
    }
    t_series.push_back(std::move(ts));
    zone_seqs.push_back(std::move(zs));
    action_seqs.push_back(std::move(ms));
    start = end;
  }
  return BaselineModel{fit_ar2(t_series),
                       fit_transitions(zone_seqs, kNumZones, alpha),
                       fit_transitions(action_seqs, kNumActions, alpha)};
}

BaselinePredictions predict(const BaselineModel& model,
                            std::span<const SequenceWindow> windows) {
  if (windows.empty()) throw Error("baseline predict: empty batch");
  const auto n = static_cast<Eigen::Index>(windows.size());
  BaselinePredictions out;
  out.t.resize(n);
  out.z_logprobs.resize(n, kNumZones);
  out.m_logprobs.resize(n, kNumActions);
  // Zero probabilities (alpha = 0 edge) are floored before the log so the
  // cross entropy stays finite.
  constexpr double kFloor = 1e-300;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& hist = windows[static_cast<std::size_t>(i)].history;
    const auto s = hist.rows();
    const double t1 = hist(s - 1, 0);
    const double t2 = s >= 2 ? hist(s - 2, 0) : 0.0;
    out.t[i] = model.ar2.predict(t1, t2);
    const int last_zone = static_cast<int>(hist(s - 1, 1));
    const int last_action = static_cast<int>(hist(s - 1, 2));
    out.z_logprobs.row(i) =
        model.zones.row(last_zone).cwiseMax(kFloor).array().log();
    out.m_logprobs.row(i) =
        model.actions.row(last_action).cwiseMax(kFloor).array().log();
  }
  return out;
}

train::LossBreakdown evaluate_baseline(const BaselineModel& model,
                                       std::span<const SequenceWindow> windows,
                                       const features::ClassWeights& weights,
                                       double time_weight) {
  const auto preds = predict(model, windows);
  return train::compute_loss(preds.t, preds.z_logprobs, preds.m_logprobs,
                             train::BatchTargets::from_windows(windows),
                             weights, time_weight);
}

namespace {

nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.size();
  if (rows == 0) throw Error("baseline: empty matrix");
  const auto cols = j.at(0).size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j.at(r).at(c).get<double>();
  return m;
}

}  // namespace

void save_baseline(const BaselineModel& model, const std::string& path,
                   std::uint64_t config_hash) {
  nlohmann::ordered_json j;
  j["tool"] = "nmstpp";
  j["version"] = kVersion;
  j["config_hash"] = io::hex64(config_hash);
  j["ar2"] = {{"intercept", model.ar2.intercept},
              {"phi1", model.ar2.phi1},
              {"phi2", model.ar2.phi2}};
  j["alpha"] = model.zones.alpha();
  j["zone_transitions"] = matrix_to_json(model.zones.probs());
  j["action_transitions"] = matrix_to_json(model.actions.probs());
  io::write_text_atomic(path, j.dump(2) + "\n");
}

BaselineModel load_baseline(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open baseline " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("baseline: invalid JSON: " + std::string(e.what()));
  }
  try {
    const double alpha = j.at("alpha").get<double>();
    return BaselineModel{
        Ar2Model{j.at("ar2").at("intercept").get<double>(),
                 j.at("ar2").at("phi1").get<double>(),
                 j.at("ar2").at("phi2").get<double>()},
        TransitionMatrix(matrix_from_json(j.at("zone_transitions")), alpha),
        TransitionMatrix(matrix_from_json(j.at("action_transitions")), alpha)};
  } catch (const nlohmann::json::exception& e) {
    throw Error("baseline: missing field: " + std::string(e.what()));
  }
}

}  // namespace nmstpp::baselines
