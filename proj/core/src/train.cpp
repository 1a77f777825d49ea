#include "nmstpp/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "nmstpp/autodiff.hpp"
#include "nmstpp/io.hpp"

namespace nmstpp::train {

void TrainConfig::validate() const {
  if (learning_rate < 0.0) throw Error("TrainConfig: negative learning rate");
  if (batch_size < 1) throw Error("TrainConfig: batch_size must be >= 1");
  if (epochs < 1) throw Error("TrainConfig: epochs must be >= 1");
  if (patience < 1) throw Error("TrainConfig: patience must be >= 1");
  if (time_weight < 0.0) throw Error("TrainConfig: negative time weight");
}

BatchTargets BatchTargets::from_windows(
    std::span<const SequenceWindow> windows) {
  BatchTargets t;
  t.t.resize(static_cast<Eigen::Index>(windows.size()));
  t.zone.reserve(windows.size());
  t.action.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    t.t[static_cast<Eigen::Index>(i)] = windows[i].target_t;
    t.zone.push_back(windows[i].target_zone);
    t.action.push_back(windows[i].target_action);
  }
  return t;
}

namespace {

struct LossVars {
  ad::Var total;
  LossBreakdown values;
};

LossVars build_loss(ad::Tape& tape, ad::Var t_pred, ad::Var z_logits,
                    ad::Var m_logits, const BatchTargets& targets,
                    const features::ClassWeights& weights, double time_weight) {
  ad::Var rmse = tape.rmse_column(t_pred, targets.t);
  ad::Var cz = tape.weighted_cross_entropy(z_logits, targets.zone, weights.zone);
  ad::Var cm =
      tape.weighted_cross_entropy(m_logits, targets.action, weights.action);
  ad::Var total = tape.add(tape.scale(rmse, time_weight), tape.add(cz, cm));
  LossVars out;
  out.total = total;
  out.values.rmse_t = tape.value(rmse)(0, 0);
  out.values.cel_zone = tape.value(cz)(0, 0);
  out.values.cel_action = tape.value(cm)(0, 0);
  out.values.total = tape.value(total)(0, 0);
  return out;
}

}  // namespace

LossBreakdown compute_loss(const Eigen::VectorXd& t_pred,
                           const Eigen::MatrixXd& z_logits,
                           const Eigen::MatrixXd& m_logits,
                           const BatchTargets& targets,
                           const features::ClassWeights& weights,
                           double time_weight) {
  if (t_pred.size() == 0) throw Error("compute_loss: empty batch");
  if (t_pred.size() != targets.t.size() ||
      z_logits.rows() != t_pred.size() || m_logits.rows() != t_pred.size())
    throw Error("compute_loss: prediction/target count mismatch");
  ad::Tape tape;
  ad::Var tp = tape.input(t_pred, false);
  ad::Var zl = tape.input(z_logits, false);
  ad::Var ml = tape.input(m_logits, false);
  return build_loss(tape, tp, zl, ml, targets, weights, time_weight).values;
}

Adam::Adam(double lr, double beta1, double beta2, double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Adam::step(
    model::Parameters& params,
    const std::vector<std::pair<std::string, Eigen::MatrixXd>>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, g] : grads) {
    Eigen::MatrixXd& theta = params.at(name);
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      m_[name] = Eigen::MatrixXd::Zero(g.rows(), g.cols());
      v_[name] = Eigen::MatrixXd::Zero(g.rows(), g.cols());
      mit = m_.find(name);
    }
    Eigen::MatrixXd& m = mit->second;
    Eigen::MatrixXd& v = v_[name];
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    const Eigen::MatrixXd m_hat = m / bc1;
    const Eigen::MatrixXd v_hat = v / bc2;
    theta.array() -=
        lr_ * m_hat.array() / (v_hat.array().sqrt() + epsilon_);
  }
}

LossBreakdown evaluate_model(const model::Nmstpp& model,
                             std::span<const SequenceWindow> windows,
                             const features::ClassWeights& weights,
                             double time_weight) {
  if (windows.empty()) throw Error("evaluate_model: empty split");
  const auto forecasts = model.forecast_batch(windows);
  Eigen::VectorXd t_pred(static_cast<Eigen::Index>(forecasts.size()));
  Eigen::MatrixXd z(static_cast<Eigen::Index>(forecasts.size()), kNumZones);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(forecasts.size()), kNumActions);
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    t_pred[r] = forecasts[i].t_hat;
    z.row(r) = forecasts[i].z_logits.transpose();
    m.row(r) = forecasts[i].m_logits.transpose();
  }
  return compute_loss(t_pred, z, m, BatchTargets::from_windows(windows),
                      weights, time_weight);
}

TrainResult train(model::Nmstpp& model,
                  std::span<const SequenceWindow> train_windows,
                  std::span<const SequenceWindow> valid_windows,
                  const features::ClassWeights& weights,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_windows.empty()) throw Error("train: no training windows");
  const bool have_valid = !valid_windows.empty();

  std::mt19937_64 rng(cfg.seed);
  Adam adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);

  TrainResult result;
  auto selection_loss = [&](const EpochRecord& rec) {
    return have_valid ? rec.valid.total : rec.train.total;
  };

  EpochRecord initial;
  initial.epoch = 0;
  initial.train = evaluate_model(model, train_windows, weights, cfg.time_weight);
  initial.valid = have_valid ? evaluate_model(model, valid_windows, weights,
                                              cfg.time_weight)
                             : initial.train;
  result.history.push_back(initial);

  auto best_params = model.params();
  result.best_epoch = 0;
  result.best_valid = initial.valid;
  double best_selection = selection_loss(initial);
  int since_best = 0;

  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown train_mean;
    std::size_t batches = 0;
    std::vector<SequenceWindow> batch;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size,
                                                  order.size() - start);
      batch.clear();
      batch.reserve(n);
      for (std::size_t i = 0; i < n; ++i)
        batch.push_back(train_windows[order[start + i]]);

      try {
        ad::Tape tape;
        const auto bound = model.bind(tape, true);
        const auto out = model.forward(tape, bound, batch, true, &rng);
        const auto loss = build_loss(tape, out.t_hat, out.z_logits,
                                     out.m_logits,
                                     BatchTargets::from_windows(batch), weights,
                                     cfg.time_weight);
        if (!std::isfinite(loss.values.total))
          throw Error("loss is not finite");
        tape.backward(loss.total);

        std::vector<std::pair<std::string, Eigen::MatrixXd>> grads;
        grads.reserve(model.params().size());
        for (const auto& [name, tensor] : model.params())
          grads.emplace_back(name, tape.grad(bound.at(name)));
        adam.step(model.params(), grads);

        train_mean.total += loss.values.total;
        train_mean.rmse_t += loss.values.rmse_t;
        train_mean.cel_zone += loss.values.cel_zone;
        train_mean.cel_action += loss.values.cel_action;
        ++batches;
      } catch (const Error& e) {
        throw Error("train: aborted at epoch " + std::to_string(epoch) +
                    ", batch " + std::to_string(batches) + ": " + e.what());
      }
    }
    train_mean.total /= static_cast<double>(batches);
    train_mean.rmse_t /= static_cast<double>(batches);
    train_mean.cel_zone /= static_cast<double>(batches);
    train_mean.cel_action /= static_cast<double>(batches);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train = train_mean;
    rec.valid = have_valid ? evaluate_model(model, valid_windows, weights,
                                            cfg.time_weight)
                           : evaluate_model(model, train_windows, weights,
                                            cfg.time_weight);
    result.history.push_back(rec);

    if (selection_loss(rec) < best_selection) {
      best_selection = selection_loss(rec);
      best_params = model.params();
      result.best_epoch = epoch;
      result.best_valid = rec.valid;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  model.params() = best_params;
  return result;
}

void write_history_csv(const std::string& path,
                       const std::vector<EpochRecord>& history,
                       std::uint64_t config_hash) {
  io::CsvWriter csv({"epoch", "train_total", "train_rmse_t", "train_cel_zone",
                     "train_cel_action", "valid_total", "valid_rmse_t",
                     "valid_cel_zone", "valid_cel_action"},
                    config_hash);
  for (const auto& rec : history) {
    csv.row({std::to_string(rec.epoch), io::format_double(rec.train.total),
             io::format_double(rec.train.rmse_t),
             io::format_double(rec.train.cel_zone),
             io::format_double(rec.train.cel_action),
             io::format_double(rec.valid.total),
             io::format_double(rec.valid.rmse_t),
             io::format_double(rec.valid.cel_zone),
             io::format_double(rec.valid.cel_action)});
  }
  csv.save(path);
}

GridSpec GridSpec::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open grid spec " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("grid spec: invalid JSON: " + std::string(e.what()));
  }
  GridSpec spec;
  if (j.contains("seqlen")) spec.seqlen = j["seqlen"].get<std::vector<int>>();
  if (j.contains("dim_feedforward"))
    spec.dim_feedforward = j["dim_feedforward"].get<std::vector<int>>();
  if (j.contains("order")) {
    for (const auto& s : j["order"]) {
      const auto order = model::order_from_string(s.get<std::string>());
      if (!order) throw Error("grid spec: bad order " + s.get<std::string>());
      spec.order.push_back(*order);
    }
  }
  if (j.contains("num_layers_t"))
    spec.num_layers_t = j["num_layers_t"].get<std::vector<int>>();
  if (j.contains("num_layers_z"))
    spec.num_layers_z = j["num_layers_z"].get<std::vector<int>>();
  if (j.contains("num_layers_m"))
    spec.num_layers_m = j["num_layers_m"].get<std::vector<int>>();
  if (j.contains("activation")) {
    for (const auto& s : j["activation"]) {
      const auto act = model::activation_from_string(s.get<std::string>());
      if (!act)
        throw Error("grid spec: bad activation " + s.get<std::string>());
      spec.activation.push_back(*act);
    }
  }
  if (j.contains("dropout"))
    spec.dropout = j["dropout"].get<std::vector<double>>();
  return spec;
}

std::vector<model::ModelConfig> GridSpec::expand(
    const model::ModelConfig& base) const {
  auto or_base = [](auto list, auto base_value) {
    if (list.empty()) list.push_back(base_value);
    return list;
  };
  const auto seqlens = or_base(seqlen, base.seqlen);
  const auto ffs = or_base(dim_feedforward, base.dim_feedforward);
  const auto orders = or_base(order, base.order);
  const auto lts = or_base(num_layers_t, base.num_layers_t);
  const auto lzs = or_base(num_layers_z, base.num_layers_z);
  const auto lms = or_base(num_layers_m, base.num_layers_m);
  const auto acts = or_base(activation, base.activation);
  const auto drops = or_base(dropout, base.dropout);

  std::vector<model::ModelConfig> configs;
  for (int sl : seqlens)
    for (int ff : ffs)
      for (const auto& ord : orders)
        for (int lt : lts)
          for (int lz : lzs)
            for (int lm : lms)
              for (auto act : acts)
                for (double drop : drops) {
                  model::ModelConfig c = base;
                  c.seqlen = sl;
                  c.dim_feedforward = ff;
                  c.order = ord;
                  c.num_layers_t = lt;
                  c.num_layers_z = lz;
                  c.num_layers_m = lm;
                  c.activation = act;
                  c.dropout = drop;
                  configs.push_back(c);
                }
  return configs;
}

std::vector<GridCell> grid_search(const GridSpec& spec,
                                  const model::ModelConfig& base_config,
                                  const TrainConfig& train_config,
                                  const std::vector<ProcessedEvent>& train_rows,
                                  const std::vector<ProcessedEvent>& valid_rows,
                                  double t_scale) {
  std::vector<GridCell> cells;
  for (const auto& config : spec.expand(base_config)) {
    GridCell cell;
    cell.config = config;
    try {
      const auto train_windows =
          features::build_windows_all(train_rows, config.seqlen, t_scale);
      const auto valid_windows =
          features::build_windows_all(valid_rows, config.seqlen, t_scale);
      if (train_windows.empty())
        throw Error("no training windows at seqlen " +
                    std::to_string(config.seqlen));
      const auto weights = features::class_weights_for(
          train_windows, train_config.dribble_multiplier);
      auto candidate = model::Nmstpp::init(config, train_config.seed);
      const auto result =
          train(candidate, train_windows, valid_windows, weights, train_config);
      cell.valid = result.best_valid;
      cell.ok = true;
    } catch (const Error& e) {
      cell.ok = false;
      cell.error = e.what();
    }
    cells.push_back(std::move(cell));
  }
  std::stable_sort(cells.begin(), cells.end(),
                   [](const GridCell& a, const GridCell& b) {
                     if (a.ok != b.ok) return a.ok;
                     return a.valid.total < b.valid.total;
                   });
  return cells;
}

void write_grid_csv(const std::string& path, const std::vector<GridCell>& cells,
                    std::uint64_t config_hash) {
  io::CsvWriter csv({"rank", "seqlen", "dim_feedforward", "order",
                     "num_layers_t", "num_layers_z", "num_layers_m",
                     "activation", "dropout", "status", "total", "rmse_t",
                     "cel_zone", "cel_action"},
                    config_hash);
  int rank = 1;
  for (const auto& cell : cells) {
    const auto& c = cell.config;
    csv.row({std::to_string(rank++), std::to_string(c.seqlen),
             std::to_string(c.dim_feedforward), model::order_to_string(c.order),
             std::to_string(c.num_layers_t), std::to_string(c.num_layers_z),
             std::to_string(c.num_layers_m), model::to_string(c.activation),
             io::format_double(c.dropout),
             cell.ok ? std::string("ok") : "error: " + cell.error,
             cell.ok ? io::format_double(cell.valid.total) : "",
             cell.ok ? io::format_double(cell.valid.rmse_t) : "",
             cell.ok ? io::format_double(cell.valid.cel_zone) : "",
             cell.ok ? io::format_double(cell.valid.cel_action) : ""});
  }
  csv.save(path);
}

}  // namespace nmstpp::train
