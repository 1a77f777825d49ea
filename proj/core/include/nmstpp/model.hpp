#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nmstpp/autodiff.hpp"
#include "nmstpp/types.hpp"

namespace nmstpp::model {

enum class Activation { None, Relu, Sigmoid, Tanh };
enum class Head { T, Z, M };

const char* to_string(Activation a);
const char* to_string(Head h);
std::optional<Activation> activation_from_string(const std::string& s);
std::optional<std::array<Head, 3>> order_from_string(const std::string& s);
std::string order_to_string(const std::array<Head, 3>& order);

struct ModelConfig {
  int seqlen = 40;
  int zone_emb_dim = 16;
  int action_emb_dim = 8;
  int continuous_dense_dim = 7;  // d_model = 16 + 8 + 7 = 31
  int dim_feedforward = 1024;
  int history_dim = 31;
  std::array<Head, 3> order = {Head::T, Head::Z, Head::M};
  int num_layers_t = 1;
  int num_layers_z = 1;
  int num_layers_m = 2;
  int head_hidden_dim = 0;  // 0 -> history_dim
  Activation activation = Activation::None;
  double dropout = 0.0;
  bool dependent = true;
  int n_encoder_layers = 1;
  int n_heads = 1;  // single-head attention only

  int d_model() const {
    return zone_emb_dim + action_emb_dim + continuous_dense_dim;
  }
  int hidden_dim() const {
    return head_hidden_dim > 0 ? head_hidden_dim : history_dim;
  }
  int num_hidden_layers(Head h) const {
    return h == Head::T ? num_layers_t : h == Head::Z ? num_layers_z
                                                      : num_layers_m;
  }
  void validate() const;
};

/// Named parameter tensors in a fixed (insertion) order.
class Parameters {
 public:
  void add(const std::string& name, Eigen::MatrixXd tensor);
  Eigen::MatrixXd& at(const std::string& name);
  const Eigen::MatrixXd& at(const std::string& name) const;
  bool has(const std::string& name) const;

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;

 private:
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors_;
  std::map<std::string, std::size_t> index_;
};

/// Sinusoidal positional encoding, base 10000, positions indexed from 0.
/// Odd d_model is allowed: the final unpaired column carries the sin term.
Eigen::MatrixXd positional_encoding(int seqlen, int d_model);

struct Prediction {
  double t_hat = 0.0;
  Eigen::VectorXd zone_pmf;    // 20, sums to 1
  Eigen::VectorXd action_pmf;  // 5
  int zone_argmax = 1;
  int action_argmax = 1;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
Prediction predict_distribution(const ForecastOutput& out);

/// Parameter tensors of one forward pass bound onto a tape.
using BoundParams = std::map<std::string, ad::Var>;

/// The NMSTPP network: embeddings + positional encoding + single-head
/// transformer encoder + post-encoder dense + cascaded forecast heads.
class Nmstpp {
 public:
  explicit Nmstpp(ModelConfig config);

  /// Glorot-uniform initialization of all weights (seeded, deterministic).
  static Nmstpp init(const ModelConfig& config, std::uint64_t seed);

  struct BatchOutput {
    ad::Var t_hat;     // B x 1
    ad::Var z_logits;  // B x 20
    ad::Var m_logits;  // B x 5
    ad::Var history;   // B x history_dim
    std::vector<ad::Var> attention;  // per window, seqlen x seqlen
  };

  BoundParams bind(ad::Tape& tape, bool requires_grad) const;
  /// Builds the full forward graph for a batch of windows. Dropout masks are
  /// drawn from `rng` when train_mode is set; inference never drops.
  BatchOutput forward(ad::Tape& tape, const BoundParams& bound,
                      std::span<const SequenceWindow> windows, bool train_mode,
                      std::mt19937_64* rng) const;

  /// Stage views used by tests and reporting (single window, no gradients).
  Eigen::MatrixXd embed(const SequenceWindow& window) const;  // seqlen x d
  struct Encoded {
    Eigen::VectorXd history;    // history_dim
    Eigen::MatrixXd attention;  // seqlen x seqlen, row-stochastic
  };
  Encoded encode(const SequenceWindow& window) const;

  ForecastOutput forecast(const SequenceWindow& window) const;
  std::pair<ForecastOutput, Eigen::MatrixXd> forecast_with_attention(
      const SequenceWindow& window) const;
  std::vector<ForecastOutput> forecast_batch(
      std::span<const SequenceWindow> windows, std::size_t batch_size = 256,
      std::vector<Eigen::RowVectorXd>* attention_last_rows = nullptr) const;

  const ModelConfig& config() const { return config_; }
  Parameters& params() { return params_; }
  const Parameters& params() const { return params_; }
  std::size_t param_count() const { return params_.scalar_count(); }

  /// Names of the tensors belonging to one forecast head.
  std::vector<std::string> head_param_names(Head h) const;

 private:
  void build_shapes();
  int head_input_dim(Head h) const;
  static int head_output_dim(Head h);

  ModelConfig config_;
  Parameters params_;
};

struct Checkpoint {
  ModelConfig config;
  Parameters params;
  double t_scale = 1.0;
  std::uint64_t zone_map_hash = 0;
};

void save_checkpoint(const Nmstpp& model, double t_scale,
                     std::uint64_t zone_map_hash, std::uint64_t config_hash,
                     const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nmstpp::model
