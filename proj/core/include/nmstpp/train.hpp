#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nmstpp/features.hpp"
#include "nmstpp/model.hpp"
#include "nmstpp/types.hpp"

namespace nmstpp::train {

/// Composite loss: total = time_weight * rmse_t + cel_zone + cel_action.
struct LossBreakdown {
  double total = 0.0;
  double rmse_t = 0.0;
  double cel_zone = 0.0;
  double cel_action = 0.0;
};

/// Batch targets in plain form, shared by the model and the baselines.
struct BatchTargets {
  Eigen::VectorXd t;           // scaled interevent times
  std::vector<int> zone;       // 1..20
  std::vector<int> action;     // 1..5

  static BatchTargets from_windows(std::span<const SequenceWindow> windows);
};

/// Scores plain predictions with the same tape ops used during training, so
/// the model and the statistical baseline share one loss implementation.
LossBreakdown compute_loss(const Eigen::VectorXd& t_pred,
                           const Eigen::MatrixXd& z_logits,
                           const Eigen::MatrixXd& m_logits,
                           const BatchTargets& targets,
                           const features::ClassWeights& weights,
                           double time_weight = 10.0);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 256;
  int epochs = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 42;
  int patience = 10;               // early stop on validation total loss
  double dribble_multiplier = 1.16;
  double time_weight = 10.0;       // Eq. 4 multiplier on the time term

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 0 is the pre-training evaluation
  LossBreakdown train;
  LossBreakdown valid;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  LossBreakdown best_valid;
};

/// Adam with bias correction; state keyed by parameter name.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double epsilon);
  void step(model::Parameters& params,
            const std::vector<std::pair<std::string, Eigen::MatrixXd>>& grads);

 private:
  double lr_, beta1_, beta2_, epsilon_;
  long long t_ = 0;
  std::map<std::string, Eigen::MatrixXd> m_, v_;
};

/// Seeded mini-batch training. The model is left holding the parameters of
/// the best-validation epoch (best train loss when `valid` is empty).
/// Aborts with epoch/batch diagnostics if the loss goes non-finite.
TrainResult train(model::Nmstpp& model, std::span<const SequenceWindow> train_windows,
                  std::span<const SequenceWindow> valid_windows,
                  const features::ClassWeights& weights, const TrainConfig& cfg);

LossBreakdown evaluate_model(const model::Nmstpp& model,
                             std::span<const SequenceWindow> windows,
                             const features::ClassWeights& weights,
                             double time_weight = 10.0);

void write_history_csv(const std::string& path,
                       const std::vector<EpochRecord>& history,
                       std::uint64_t config_hash);

/// Per-hyperparameter candidate lists; empty list = keep the base value.
struct GridSpec {
  std::vector<int> seqlen;
  std::vector<int> dim_feedforward;
  std::vector<std::array<model::Head, 3>> order;
  std::vector<int> num_layers_t;
  std::vector<int> num_layers_z;
  std::vector<int> num_layers_m;
  std::vector<model::Activation> activation;
  std::vector<double> dropout;

  static GridSpec load_json(const std::string& path);
  std::vector<model::ModelConfig> expand(const model::ModelConfig& base) const;
};

struct GridCell {
  model::ModelConfig config;
  bool ok = false;
  std::string error;
  LossBreakdown valid;
};

/// Trains one model per grid configuration (windows are rebuilt per seqlen)
/// and returns cells ranked by validation total loss; failures are recorded,
/// not fatal.
std::vector<GridCell> grid_search(const GridSpec& spec,
                                  const model::ModelConfig& base_config,
                                  const TrainConfig& train_config,
                                  const std::vector<ProcessedEvent>& train_rows,
                                  const std::vector<ProcessedEvent>& valid_rows,
                                  double t_scale);

void write_grid_csv(const std::string& path, const std::vector<GridCell>& cells,
                    std::uint64_t config_hash);

}  // namespace nmstpp::train
