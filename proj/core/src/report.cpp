#include "nmstpp/report.hpp"

#include <algorithm>
#include <cmath>

#include "nmstpp/io.hpp"

namespace nmstpp::report {

ConfusionSummary confusion(const Eigen::MatrixXd& pmfs,
                           const std::vector<int>& truth) {
  if (pmfs.rows() != static_cast<Eigen::Index>(truth.size()))
    throw Error("confusion: row/truth count mismatch");
  const auto k = pmfs.cols();
  ConfusionSummary cm;
  cm.mean_prob = Eigen::MatrixXd::Zero(k, k);
  cm.accuracy = Eigen::VectorXd::Zero(k);
  cm.support.assign(static_cast<std::size_t>(k), 0);
  for (Eigen::Index r = 0; r < pmfs.rows(); ++r) {
    const int y = truth[static_cast<std::size_t>(r)];
    if (y < 1 || y > k) throw Error("confusion: class id out of range");
    cm.mean_prob.row(y - 1) += pmfs.row(r);
    Eigen::Index argmax;
    pmfs.row(r).maxCoeff(&argmax);
    if (argmax == y - 1) cm.accuracy[y - 1] += 1.0;
    cm.support[static_cast<std::size_t>(y - 1)]++;
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto n = cm.support[static_cast<std::size_t>(c)];
    if (n == 0) continue;
    cm.mean_prob.row(c) /= static_cast<double>(n);
    cm.accuracy[c] /= static_cast<double>(n);
  }
  return cm;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  return d;
}

CdfComparison cdf_compare(std::vector<double> predicted,
                          std::vector<double> truth) {
  CdfComparison out;
  out.ks = ks_distance(predicted, truth);
  std::sort(predicted.begin(), predicted.end());
  std::sort(truth.begin(), truth.end());
  out.predicted_sorted = std::move(predicted);
  out.true_sorted = std::move(truth);
  return out;
}

Evaluation evaluate(const model::Nmstpp& model,
                    std::span<const SequenceWindow> windows,
                    const features::ClassWeights& weights, double time_weight,
                    std::size_t attention_sample) {
  if (windows.empty()) throw Error("evaluate: empty split");
  std::vector<Eigen::RowVectorXd> attention_rows;
  const auto forecasts = model.forecast_batch(windows, 256, &attention_rows);

  Evaluation ev;
  const auto n = static_cast<Eigen::Index>(forecasts.size());
  Eigen::VectorXd t_pred(n);
  Eigen::MatrixXd z_logits(n, kNumZones), m_logits(n, kNumActions);
  Eigen::MatrixXd z_pmf(n, kNumZones), m_pmf(n, kNumActions);
  std::vector<double> t_pred_list, t_true_list;
  ev.rows.reserve(windows.size());
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    t_pred[r] = forecasts[i].t_hat;
    z_logits.row(r) = forecasts[i].z_logits.transpose();
    m_logits.row(r) = forecasts[i].m_logits.transpose();
    const auto pred = model::predict_distribution(forecasts[i]);
    z_pmf.row(r) = pred.zone_pmf.transpose();
    m_pmf.row(r) = pred.action_pmf.transpose();
    t_pred_list.push_back(forecasts[i].t_hat);
    t_true_list.push_back(windows[i].target_t);
    ev.rows.push_back(WindowForecastRow{&windows[i], forecasts[i].t_hat,
                                        pred.zone_pmf, pred.action_pmf});
  }

  const auto targets = train::BatchTargets::from_windows(windows);
  ev.loss =
      train::compute_loss(t_pred, z_logits, m_logits, targets, weights,
                          time_weight);
  ev.zone = confusion(z_pmf, targets.zone);
  ev.action = confusion(m_pmf, targets.action);
  ev.cdf = cdf_compare(std::move(t_pred_list), std::move(t_true_list));

  const std::size_t take = attention_sample == 0
                               ? attention_rows.size()
                               : std::min(attention_sample, attention_rows.size());
  ev.attention_mean = Eigen::RowVectorXd::Zero(model.config().seqlen);
  for (std::size_t i = 0; i < take; ++i) ev.attention_mean += attention_rows[i];
  if (take > 0) ev.attention_mean /= static_cast<double>(take);
  return ev;
}

Evaluation evaluate(const baselines::BaselineModel& baseline,
                    std::span<const SequenceWindow> windows,
                    const features::ClassWeights& weights, double time_weight) {
  if (windows.empty()) throw Error("evaluate: empty split");
  const auto preds = baselines::predict(baseline, windows);

  Evaluation ev;
  const auto targets = train::BatchTargets::from_windows(windows);
  ev.loss = train::compute_loss(preds.t, preds.z_logprobs, preds.m_logprobs,
                                targets, weights, time_weight);
  Eigen::MatrixXd z_pmf = preds.z_logprobs.array().exp();
  Eigen::MatrixXd m_pmf = preds.m_logprobs.array().exp();
  ev.zone = confusion(z_pmf, targets.zone);
  ev.action = confusion(m_pmf, targets.action);
  std::vector<double> t_pred_list, t_true_list;
  ev.rows.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    t_pred_list.push_back(preds.t[r]);
    t_true_list.push_back(windows[i].target_t);
    ev.rows.push_back(WindowForecastRow{&windows[i], preds.t[r],
                                        z_pmf.row(r).transpose(),
                                        m_pmf.row(r).transpose()});
  }
  ev.cdf = cdf_compare(std::move(t_pred_list), std::move(t_true_list));
  return ev;
}

void write_loss_csv(const std::string& path, const train::LossBreakdown& loss,
                    std::uint64_t config_hash) {
  io::CsvWriter csv({"total", "rmse_t", "cel_zone", "cel_action"}, config_hash);
  csv.row({io::format_double(loss.total), io::format_double(loss.rmse_t),
           io::format_double(loss.cel_zone), io::format_double(loss.cel_action)});
  csv.save(path);
}

void write_confusion_csv(const std::string& path, const ConfusionSummary& cm,
                         std::uint64_t config_hash) {
  const auto k = cm.mean_prob.cols();
  std::vector<std::string> header = {"true_class", "support", "accuracy"};
  for (Eigen::Index c = 0; c < k; ++c)
    header.push_back("p" + std::to_string(c + 1));
  io::CsvWriter csv(header, config_hash);
  for (Eigen::Index r = 0; r < k; ++r) {
    std::vector<std::string> cells = {std::to_string(r + 1)};
    const auto support = cm.support[static_cast<std::size_t>(r)];
    cells.push_back(std::to_string(support));
    if (support == 0) {
      // class absent from the split: no fabricated row values
      cells.push_back("");
      for (Eigen::Index c = 0; c < k; ++c) cells.push_back("");
    } else {
      cells.push_back(io::format_double(cm.accuracy[r]));
      for (Eigen::Index c = 0; c < k; ++c)
        cells.push_back(io::format_double(cm.mean_prob(r, c)));
    }
    csv.row(cells);
  }
  csv.save(path);
}

void write_cdf_csv(const std::string& path, const CdfComparison& cdf,
                   std::uint64_t config_hash) {
  io::CsvWriter csv({"quantile", "predicted_t", "true_t", "ks"}, config_hash);
  const std::size_t n =
      std::max(cdf.predicted_sorted.size(), cdf.true_sorted.size());
  auto at_quantile = [](const std::vector<double>& sorted, double q) {
    const auto idx = static_cast<std::size_t>(
        q * (static_cast<double>(sorted.size()) - 1.0) + 0.5);
    return sorted[std::min(idx, sorted.size() - 1)];
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double q =
        n == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    csv.row({io::format_double(q),
             io::format_double(at_quantile(cdf.predicted_sorted, q)),
             io::format_double(at_quantile(cdf.true_sorted, q)),
             i == 0 ? io::format_double(cdf.ks) : ""});
  }
  csv.save(path);
}

void write_attention_csv(const std::string& path,
                         const Eigen::RowVectorXd& mean_last_row,
                         std::uint64_t config_hash) {
  io::CsvWriter csv({"position", "mean_weight"}, config_hash);
  for (Eigen::Index i = 0; i < mean_last_row.size(); ++i)
    csv.row({std::to_string(i), io::format_double(mean_last_row[i])});
  csv.save(path);
}

void write_predictions_csv(const std::string& path,
                           std::span<const WindowForecastRow> rows,
                           double t_scale, std::uint64_t config_hash) {
  std::vector<std::string> header = {
      "match_id", "target_row", "team_id",  "possession_index",
      "period",   "seconds",    "t_true_s", "zone_true",
      "action_true", "t_hat_scaled", "t_hat_s"};
  for (int z = 1; z <= kNumZones; ++z) header.push_back("zp" + std::to_string(z));
  for (int m = 1; m <= kNumActions; ++m)
    header.push_back("mp" + std::to_string(m));
  io::CsvWriter csv(header, config_hash);
  for (const auto& row : rows) {
    const auto& w = *row.window;
    const double t_hat_seconds =
        t_scale > 0.0 ? std::max(0.0, row.t_hat) / t_scale : 0.0;
    std::vector<std::string> cells = {
        w.match_id,
        std::to_string(w.target_row),
        w.team_id,
        std::to_string(w.possession_index),
        to_string(w.period),
        io::format_double(w.seconds),
        io::format_double(w.target_t_seconds),
        std::to_string(w.target_zone),
        std::to_string(w.target_action),
        io::format_double(row.t_hat),
        io::format_double(t_hat_seconds)};
    for (int z = 0; z < kNumZones; ++z)
      cells.push_back(io::format_double(row.zone_pmf[z]));
    for (int m = 0; m < kNumActions; ++m)
      cells.push_back(io::format_double(row.action_pmf[m]));
    csv.row(cells);
  }
  csv.save(path);
}

std::vector<PredictionRow> read_predictions_csv(const std::string& path) {
  const auto table = io::read_csv(path);
  const auto match = table.column("match_id");
  const auto target_row = table.column("target_row");
  const auto t_hat_s = table.column("t_hat_s");
  const auto zp1 = table.column("zp1");
  const auto mp1 = table.column("mp1");
  std::vector<PredictionRow> rows;
  rows.reserve(table.rows.size());
  for (const auto& cells : table.rows) {
    PredictionRow r;
    r.match_id = cells[match];
    r.target_row = static_cast<std::size_t>(io::parse_int(cells[target_row], path));
    r.t_hat_seconds = io::parse_double(cells[t_hat_s], path);
    r.zone_pmf.resize(kNumZones);
    for (int z = 0; z < kNumZones; ++z)
      r.zone_pmf[z] = io::parse_double(cells[zp1 + static_cast<std::size_t>(z)], path);
    r.action_pmf.resize(kNumActions);
    for (int m = 0; m < kNumActions; ++m)
      r.action_pmf[m] =
          io::parse_double(cells[mp1 + static_cast<std::size_t>(m)], path);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace nmstpp::report
