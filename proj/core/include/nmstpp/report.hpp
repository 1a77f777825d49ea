#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nmstpp/baselines.hpp"
#include "nmstpp/model.hpp"
#include "nmstpp/train.hpp"
#include "nmstpp/types.hpp"

namespace nmstpp::report {

/// Mean predicted probability of class j over samples whose true class is i,
/// plus per-class argmax accuracy. Classes with no samples are flagged by
/// support = 0 and left out of the CSV rather than fabricated.
struct ConfusionSummary {
  Eigen::MatrixXd mean_prob;         // K x K
  Eigen::VectorXd accuracy;          // K
  std::vector<std::size_t> support;  // K
};

ConfusionSummary confusion(const Eigen::MatrixXd& pmfs,
                           const std::vector<int>& truth);

/// Two-sample Kolmogorov-Smirnov distance between empirical CDFs.
double ks_distance(std::vector<double> a, std::vector<double> b);

struct CdfComparison {
  std::vector<double> predicted_sorted;
  std::vector<double> true_sorted;
  double ks = 0.0;
};

CdfComparison cdf_compare(std::vector<double> predicted,
                          std::vector<double> truth);

/// One scored window, joined back to its source row for the metrics stage.
struct WindowForecastRow {
  const SequenceWindow* window = nullptr;
  double t_hat = 0.0;  // scaled
  Eigen::VectorXd zone_pmf;
  Eigen::VectorXd action_pmf;
};

struct Evaluation {
  train::LossBreakdown loss;
  ConfusionSummary zone;
  ConfusionSummary action;
  CdfComparison cdf;  // scaled interevent times
  Eigen::RowVectorXd attention_mean;  // empty for the statistical baseline
  std::vector<WindowForecastRow> rows;
};

/// Streams windows through the model and aggregates all verification
/// artifacts. `attention_sample` caps how many windows feed the attention
/// average (0 = all).
Evaluation evaluate(const model::Nmstpp& model,
                    std::span<const SequenceWindow> windows,
                    const features::ClassWeights& weights,
                    double time_weight = 10.0, std::size_t attention_sample = 0);

Evaluation evaluate(const baselines::BaselineModel& baseline,
                    std::span<const SequenceWindow> windows,
                    const features::ClassWeights& weights,
                    double time_weight = 10.0);

void write_loss_csv(const std::string& path, const train::LossBreakdown& loss,
                    std::uint64_t config_hash);
void write_confusion_csv(const std::string& path, const ConfusionSummary& cm,
                         std::uint64_t config_hash);
void write_cdf_csv(const std::string& path, const CdfComparison& cdf,
                   std::uint64_t config_hash);
void write_attention_csv(const std::string& path,
                         const Eigen::RowVectorXd& mean_last_row,
                         std::uint64_t config_hash);
/// Per-window forecasts with provenance; input to `metrics --predictions`.
void write_predictions_csv(const std::string& path,
                           std::span<const WindowForecastRow> rows,
                           double t_scale, std::uint64_t config_hash);

struct PredictionRow {
  std::string match_id;
  std::size_t target_row = 0;
  double t_hat_seconds = 0.0;
  Eigen::VectorXd zone_pmf;
  Eigen::VectorXd action_pmf;
};
std::vector<PredictionRow> read_predictions_csv(const std::string& path);

}  // namespace nmstpp::report
