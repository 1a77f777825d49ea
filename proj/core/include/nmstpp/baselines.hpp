#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nmstpp/features.hpp"
#include "nmstpp/train.hpp"
#include "nmstpp/types.hpp"

namespace nmstpp::baselines {

/// Second-order autoregression for scaled interevent time.
struct Ar2Model {
  double intercept = 0.0;
  double phi1 = 0.0;  // weight on t_{i-1}
  double phi2 = 0.0;  // weight on t_{i-2}

  double predict(double t_prev1, double t_prev2) const {
    return intercept + phi1 * t_prev1 + phi2 * t_prev2;
  }
};

/// Least-squares fit of t_i on (1, t_{i-1}, t_{i-2}); triplets never span
/// match boundaries. Rank-deficient designs (eg a constant series) get the
/// minimum-norm solution, which preserves the prediction contract.
Ar2Model fit_ar2(const std::vector<std::vector<double>>& series_per_match);

/// Row-stochastic first-order transition estimate with Laplace smoothing.
class TransitionMatrix {
 public:
  TransitionMatrix(Eigen::MatrixXd probs, double alpha);

  const Eigen::MatrixXd& probs() const { return probs_; }
  Eigen::VectorXd row(int state) const;  // 1-based state id
  double alpha() const { return alpha_; }
  int states() const { return static_cast<int>(probs_.rows()); }

 private:
  Eigen::MatrixXd probs_;
  double alpha_;
};

/// P(j|i) = (count(i->j) + alpha) / (count(i->.) + alpha*K); counts never
/// span sequence boundaries. With alpha = 0 an unobserved state falls back
/// to a uniform row.
TransitionMatrix fit_transitions(const std::vector<std::vector<int>>& sequences,
                                 int k, double alpha);

struct BaselineModel {
  Ar2Model ar2;
  TransitionMatrix zones;    // K = 20
  TransitionMatrix actions;  // K = 5
};

/// Fits all three components on processed training rows (t scaled by t_scale).
BaselineModel fit_baseline(const std::vector<ProcessedEvent>& train_rows,
                           double t_scale, double alpha = 1.0);

struct BaselinePredictions {
  Eigen::VectorXd t;           // scaled AR(2) forecasts (unfloored)
  Eigen::MatrixXd z_logprobs;  // log transition rows, usable as logits
  Eigen::MatrixXd m_logprobs;
};

/// Per-window forecasts: t from AR(2) on the last two history rows, zone and
/// action PMFs from the transition row of the last observed class.
BaselinePredictions predict(const BaselineModel& model,
                            std::span<const SequenceWindow> windows);

/// Scored with the identical composite loss used for the NMSTPP model.
train::LossBreakdown evaluate_baseline(const BaselineModel& model,
                                       std::span<const SequenceWindow> windows,
                                       const features::ClassWeights& weights,
                                       double time_weight = 10.0);

void save_baseline(const BaselineModel& model, const std::string& path,
                   std::uint64_t config_hash);
BaselineModel load_baseline(const std::string& path);

}  // namespace nmstpp::baselines
