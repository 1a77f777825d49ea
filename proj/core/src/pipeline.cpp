#include "nmstpp/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "nmstpp/baselines.hpp"
#include "nmstpp/features.hpp"
#include "nmstpp/ingest.hpp"
#include "nmstpp/io.hpp"
#include "nmstpp/metrics.hpp"
#include "nmstpp/report.hpp"
#include "nmstpp/svg.hpp"
#include "nmstpp/version.hpp"

namespace nmstpp::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json model_config_json(const model::ModelConfig& c) {
  ordered_json j;
  j["seqlen"] = c.seqlen;
  j["zone_emb_dim"] = c.zone_emb_dim;
  j["action_emb_dim"] = c.action_emb_dim;
  j["continuous_dense_dim"] = c.continuous_dense_dim;
  j["dim_feedforward"] = c.dim_feedforward;
  j["history_dim"] = c.history_dim;
  j["order"] = model::order_to_string(c.order);
  j["num_layers_t"] = c.num_layers_t;
  j["num_layers_z"] = c.num_layers_z;
  j["num_layers_m"] = c.num_layers_m;
  j["head_hidden_dim"] = c.head_hidden_dim;
  j["activation"] = model::to_string(c.activation);
  j["dropout"] = c.dropout;
  j["dependent"] = c.dependent;
  j["n_encoder_layers"] = c.n_encoder_layers;
  j["n_heads"] = c.n_heads;
  return j;
}

void model_config_from_json(const json& j, model::ModelConfig& c) {
  if (j.contains("seqlen")) c.seqlen = j["seqlen"].get<int>();
  if (j.contains("zone_emb_dim")) c.zone_emb_dim = j["zone_emb_dim"].get<int>();
  if (j.contains("action_emb_dim"))
    c.action_emb_dim = j["action_emb_dim"].get<int>();
  if (j.contains("continuous_dense_dim"))
    c.continuous_dense_dim = j["continuous_dense_dim"].get<int>();
  if (j.contains("dim_feedforward"))
    c.dim_feedforward = j["dim_feedforward"].get<int>();
  if (j.contains("history_dim")) c.history_dim = j["history_dim"].get<int>();
  if (j.contains("order")) {
    const auto order = model::order_from_string(j["order"].get<std::string>());
    if (!order) throw Error("config: bad model.order");
    c.order = *order;
  }
  if (j.contains("num_layers_t")) c.num_layers_t = j["num_layers_t"].get<int>();
  if (j.contains("num_layers_z")) c.num_layers_z = j["num_layers_z"].get<int>();
  if (j.contains("num_layers_m")) c.num_layers_m = j["num_layers_m"].get<int>();
  if (j.contains("head_hidden_dim"))
    c.head_hidden_dim = j["head_hidden_dim"].get<int>();
  if (j.contains("activation")) {
    const auto act =
        model::activation_from_string(j["activation"].get<std::string>());
    if (!act) throw Error("config: bad model.activation");
    c.activation = *act;
  }
  if (j.contains("dropout")) c.dropout = j["dropout"].get<double>();
  if (j.contains("dependent")) c.dependent = j["dependent"].get<bool>();
  if (j.contains("n_encoder_layers"))
    c.n_encoder_layers = j["n_encoder_layers"].get<int>();
  if (j.contains("n_heads")) c.n_heads = j["n_heads"].get<int>();
}

ordered_json train_config_json(const train::TrainConfig& c) {
  ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["seed"] = c.seed;
  j["patience"] = c.patience;
  j["dribble_multiplier"] = c.dribble_multiplier;
  j["time_weight"] = c.time_weight;
  return j;
}

void train_config_from_json(const json& j, train::TrainConfig& c) {
  if (j.contains("learning_rate"))
    c.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
  if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
  if (j.contains("beta1")) c.beta1 = j["beta1"].get<double>();
  if (j.contains("beta2")) c.beta2 = j["beta2"].get<double>();
  if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("patience")) c.patience = j["patience"].get<int>();
  if (j.contains("dribble_multiplier"))
    c.dribble_multiplier = j["dribble_multiplier"].get<double>();
  if (j.contains("time_weight")) c.time_weight = j["time_weight"].get<double>();
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config: invalid JSON in " + path + ": " + e.what());
  }
  PipelineConfig c;
  if (j.contains("input_path")) c.input_path = j["input_path"].get<std::string>();
  if (j.contains("input_format"))
    c.input_format = j["input_format"].get<std::string>();
  if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("zone_map_path"))
    c.zone_map_path = j["zone_map_path"].get<std::string>();
  if (j.contains("team_table_path"))
    c.team_table_path = j["team_table_path"].get<std::string>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("train_rows")) c.train_rows = j["train_rows"].get<std::size_t>();
  if (j.contains("valid_rows")) c.valid_rows = j["valid_rows"].get<std::size_t>();
  if (j.contains("model")) model_config_from_json(j["model"], c.model);
  if (j.contains("train")) train_config_from_json(j["train"], c.train);
  if (j.contains("metrics_decay"))
    c.metrics_decay = j["metrics_decay"].get<double>();
  if (j.contains("metrics_mode"))
    c.metrics_mode = j["metrics_mode"].get<std::string>();
  if (j.contains("attention_sample"))
    c.attention_sample = j["attention_sample"].get<std::size_t>();
  return c;
}

std::string PipelineConfig::canonical_json() const {
  ordered_json j;
  j["input_path"] = input_path;
  j["input_format"] = input_format;
  j["out_dir"] = out_dir;
  j["zone_map_path"] = zone_map_path;
  j["team_table_path"] = team_table_path;
  j["seed"] = seed;
  j["train_rows"] = train_rows;
  j["valid_rows"] = valid_rows;
  j["model"] = model_config_json(model);
  j["train"] = train_config_json(train);
  j["metrics_decay"] = metrics_decay;
  j["metrics_mode"] = metrics_mode;
  j["attention_sample"] = attention_sample;
  return j.dump();
}

std::uint64_t PipelineConfig::config_hash() const {
  // Machine-local paths are excluded so identical parameters produce
  // byte-identical artifacts regardless of where they are written.
  ordered_json j;
  j["input_format"] = input_format;
  j["seed"] = seed;
  j["train_rows"] = train_rows;
  j["valid_rows"] = valid_rows;
  j["model"] = model_config_json(model);
  j["train"] = train_config_json(train);
  j["metrics_decay"] = metrics_decay;
  j["metrics_mode"] = metrics_mode;
  j["attention_sample"] = attention_sample;
  return io::fnv1a(j.dump());
}

void PipelineConfig::save(const std::string& path) const {
  io::write_text_atomic(path, canonical_json() + "\n");
}

features::ZoneMap resolve_zone_map(const PipelineConfig& config) {
  if (config.zone_map_path.empty())
    return features::ZoneMap::juego_de_posicion();
  return features::ZoneMap::load_json(config.zone_map_path);
}

namespace {

std::string split_csv_path(const PipelineConfig& config, Split split) {
  return (fs::path(config.out_dir) /
          ("events_" + std::string(to_string(split)) + ".csv"))
      .string();
}

struct PreparedData {
  SplitManifest manifest;
  std::vector<ProcessedEvent> train;
  std::vector<ProcessedEvent> valid;
  std::vector<ProcessedEvent> test;
};

PreparedData load_prepared(const PipelineConfig& config) {
  PreparedData data;
  data.manifest = ingest::load_manifest(
      (fs::path(config.out_dir) / "manifest.json").string());
  data.train = features::read_processed_csv(split_csv_path(config, Split::Train));
  data.valid = features::read_processed_csv(split_csv_path(config, Split::Valid));
  data.test = features::read_processed_csv(split_csv_path(config, Split::Test));
  return data;
}

std::string ckpt_path(const PipelineConfig& config) {
  return (fs::path(config.out_dir) / "model.ckpt.json").string();
}

}  // namespace

void run_prep(const PipelineConfig& config) {
  if (config.input_path.empty()) throw Error("prep: input_path is required");
  const auto format = config.input_format == "jsonl" ? ingest::InputFormat::Jsonl
                      : config.input_format == "csv" ? ingest::InputFormat::Csv
                      : throw Error("prep: input_format must be jsonl or csv");
  fs::create_directories(config.out_dir);
  const auto hash = config.config_hash();
  const auto map = resolve_zone_map(config);
  map.save_json((fs::path(config.out_dir) / "zone_map.json").string());

  auto parsed = ingest::parse_events_file(config.input_path, format);
  auto streams = ingest::drop_own_goal_matches(std::move(parsed.streams));
  auto manifest = ingest::split_matches(streams, config.seed, config.train_rows,
                                        config.valid_rows);

  std::map<std::string, const MatchStream*> by_id;
  for (const auto& s : streams) by_id[s.match_id] = &s;

  auto process_split = [&](Split split, std::size_t cap) {
    std::vector<ProcessedEvent> rows;
    for (const auto& id : manifest.matches_in(split)) {  // manifest order
      const auto match_rows = features::process_match(*by_id.at(id), map);
      rows.insert(rows.end(), match_rows.begin(), match_rows.end());
      if (cap > 0 && rows.size() >= cap) {
        rows.resize(cap);
        break;
      }
    }
    return rows;
  };

  const auto train_rows = process_split(Split::Train, config.train_rows);
  const auto valid_rows = process_split(Split::Valid, config.valid_rows);
  const auto test_rows = process_split(Split::Test, 0);

  const double max_t = features::max_interevent_seconds(train_rows);
  manifest.t_scale = max_t > 0.0 ? 1.0 / max_t : 1.0;

  ingest::save_manifest(manifest,
                        (fs::path(config.out_dir) / "manifest.json").string(),
                        hash);
  features::write_processed_csv(split_csv_path(config, Split::Train), train_rows,
                                hash);
  features::write_processed_csv(split_csv_path(config, Split::Valid), valid_rows,
                                hash);
  features::write_processed_csv(split_csv_path(config, Split::Test), test_rows,
                                hash);
}

void run_train(const PipelineConfig& config) {
  const auto data = load_prepared(config);
  const auto hash = config.config_hash();
  const auto map = resolve_zone_map(config);

  const auto train_windows = features::build_windows_all(
      data.train, config.model.seqlen, data.manifest.t_scale);
  const auto valid_windows = features::build_windows_all(
      data.valid, config.model.seqlen, data.manifest.t_scale);
  if (train_windows.empty())
    throw Error("train: no training windows; matches shorter than seqlen+1?");

  const auto weights = features::class_weights_for(
      train_windows, config.train.dribble_multiplier);

  auto net = model::Nmstpp::init(config.model, config.train.seed);
  const auto result =
      train::train(net, train_windows, valid_windows, weights, config.train);

  train::write_history_csv((fs::path(config.out_dir) / "history.csv").string(),
                           result.history, hash);
  model::save_checkpoint(net, data.manifest.t_scale, map.hash(), hash,
                         ckpt_path(config));
}

void run_baseline(const PipelineConfig& config) {
  const auto data = load_prepared(config);
  baselines::BaselineModel baseline =
      baselines::fit_baseline(data.train, data.manifest.t_scale);
  baselines::save_baseline(
      baseline, (fs::path(config.out_dir) / "baseline.json").string(),
      config.config_hash());
}

void run_gridsearch(const PipelineConfig& config, const std::string& grid_path,
                    std::optional<int> budget_epochs) {
  const auto data = load_prepared(config);
  const auto spec = train::GridSpec::load_json(grid_path);
  train::TrainConfig tc = config.train;
  if (budget_epochs) tc.epochs = *budget_epochs;
  const auto cells = train::grid_search(spec, config.model, tc, data.train,
                                        data.valid, data.manifest.t_scale);
  train::write_grid_csv((fs::path(config.out_dir) / "gridsearch.csv").string(),
                        cells, config.config_hash());
}

namespace {

const std::vector<ProcessedEvent>& split_rows(const PreparedData& data,
                                              Split split) {
  switch (split) {
    case Split::Train: return data.train;
    case Split::Valid: return data.valid;
    case Split::Test: return data.test;
  }
  throw Error("unknown split");
}

void write_eval_artifacts(const PipelineConfig& config,
                          const report::Evaluation& ev, double t_scale,
                          const std::string& eval_dir) {
  const auto hash = config.config_hash();
  fs::create_directories(eval_dir);
  const fs::path dir(eval_dir);
  report::write_loss_csv((dir / "loss.csv").string(), ev.loss, hash);
  report::write_confusion_csv((dir / "confusion_zone.csv").string(), ev.zone,
                              hash);
  report::write_confusion_csv((dir / "confusion_action.csv").string(),
                              ev.action, hash);
  report::write_cdf_csv((dir / "cdf.csv").string(), ev.cdf, hash);
  if (ev.attention_mean.size() > 0)
    report::write_attention_csv((dir / "attention.csv").string(),
                                ev.attention_mean, hash);
  report::write_predictions_csv((dir / "predictions.csv").string(), ev.rows,
                                t_scale, hash);
}

}  // namespace

void run_eval(const PipelineConfig& config, const std::string& path,
              Split split, const std::string& eval_dir) {
  const auto data = load_prepared(config);
  const auto ckpt = model::load_checkpoint(path);
  const auto map = resolve_zone_map(config);
  if (ckpt.zone_map_hash != map.hash())
    throw Error("eval: checkpoint was trained with a different zone map");
  model::Nmstpp net(ckpt.config);
  net.params() = ckpt.params;

  const auto windows = features::build_windows_all(
      split_rows(data, split), ckpt.config.seqlen, ckpt.t_scale);
  if (windows.empty()) throw Error("eval: split has no windows");
  const auto train_windows = features::build_windows_all(
      data.train, ckpt.config.seqlen, ckpt.t_scale);
  const auto weights = features::class_weights_for(
      train_windows, config.train.dribble_multiplier);

  const auto ev = report::evaluate(net, windows, weights,
                                   config.train.time_weight,
                                   config.attention_sample);
  write_eval_artifacts(config, ev, ckpt.t_scale, eval_dir);
}

void run_eval_baseline(const PipelineConfig& config,
                       const std::string& baseline_path, Split split,
                       const std::string& eval_dir) {
  const auto data = load_prepared(config);
  const auto baseline = baselines::load_baseline(baseline_path);
  const auto windows = features::build_windows_all(
      split_rows(data, split), config.model.seqlen, data.manifest.t_scale);
  if (windows.empty()) throw Error("eval: split has no windows");
  const auto train_windows = features::build_windows_all(
      data.train, config.model.seqlen, data.manifest.t_scale);
  const auto weights = features::class_weights_for(
      train_windows, config.train.dribble_multiplier);
  const auto ev = report::evaluate(baseline, windows, weights,
                                   config.train.time_weight);
  write_eval_artifacts(config, ev, data.manifest.t_scale, eval_dir);
}

void run_metrics(const PipelineConfig& config, const std::string& events_csv,
                 const std::string& predictions_csv, const std::string& mode_s,
                 const std::string& metrics_dir) {
  const auto mode = metrics::mode_from_string(mode_s);
  if (!mode) throw Error("metrics: mode must be predicted or empirical");
  const auto rows = features::read_processed_csv(events_csv);
  const auto map = resolve_zone_map(config);
  const auto hash = config.config_hash();

  metrics::ForecastIndex forecasts;
  if (*mode == metrics::Mode::Predicted) {
    if (predictions_csv.empty())
      throw Error("metrics: predicted mode needs --predictions");
    for (auto& p : report::read_predictions_csv(predictions_csv))
      forecasts[{p.match_id, p.target_row}] = metrics::EventForecast{
          p.t_hat_seconds, std::move(p.zone_pmf), std::move(p.action_pmf)};
  }

  const auto scores = metrics::score_possessions(rows, forecasts, *mode, map,
                                                 config.metrics_decay);
  fs::create_directories(metrics_dir);
  const fs::path dir(metrics_dir);

  {
    io::CsvWriter csv({"match_id", "team_id", "possession_index", "events",
                       "attacking", "hpus", "hpus_plus", "poss_util_raw",
                       "poss_util_ranked", "has_values"},
                      hash);
    for (const auto& s : scores) {
      std::string has_list;
      for (std::size_t i = 0; i < s.records.size(); ++i) {
        if (i) has_list += ';';
        has_list += io::format_double(s.records[i].has);
      }
      csv.row({s.match_id, s.team_id, std::to_string(s.possession_index),
               std::to_string(s.records.size()), s.attacking ? "1" : "0",
               io::format_double(s.hpus),
               s.hpus_plus ? io::format_double(*s.hpus_plus) : "",
               io::format_double(s.poss_util_raw),
               io::format_double(s.poss_util_ranked), has_list});
    }
    csv.save((dir / "possessions.csv").string());
  }

  if (!config.team_table_path.empty()) {
    const auto table = metrics::read_team_table(config.team_table_path);
    const auto stats = metrics::team_season_aggregate(scores, table);
    io::CsvWriter csv({"team", "ranking", "avg_goal", "avg_xg", "avg_hpus",
                       "avg_hpus_plus", "hpus_ratio"},
                      hash);
    for (const auto& s : stats)
      csv.row({s.team, std::to_string(s.ranking), io::format_double(s.avg_goal),
               io::format_double(s.avg_xg), io::format_double(s.avg_hpus),
               io::format_double(s.avg_hpus_plus),
               io::format_double(s.hpus_ratio)});
    csv.save((dir / "teams.csv").string());

    // Pearson needs at least 3 teams; tiny splits get no correlation table.
    if (stats.size() >= 3) {
      const auto corr = metrics::correlation_matrix(stats);
      std::vector<std::string> header = {"metric"};
      for (const char* label : metrics::kCorrelationLabels)
        header.push_back(label);
      io::CsvWriter corr_csv(header, hash);
      for (int r = 0; r < 5; ++r) {
        std::vector<std::string> cells = {metrics::kCorrelationLabels[r]};
        for (int c = 0; c < 5; ++c)
          cells.push_back(io::format_double(corr(r, c)));
        corr_csv.row(cells);
      }
      corr_csv.save((dir / "correlations.csv").string());
    }
  }

  // Per-match cumulative timelines.
  std::map<std::string, std::vector<metrics::PossessionScore>> by_match;
  for (const auto& s : scores) by_match[s.match_id].push_back(s);
  for (const auto& [match_id, possessions] : by_match) {
    const auto tl = metrics::match_timeline(possessions);
    io::CsvWriter csv({"match_id", "bin_start_minute", "team_id", "hpus_cum",
                       "hpus_plus_cum", "shots"},
                      hash);
    for (std::size_t b = 0; b < tl.bin_start_minutes.size(); ++b)
      for (const auto& team : tl.teams)
        csv.row({match_id, std::to_string(tl.bin_start_minutes[b]), team,
                 io::format_double(tl.hpus_cumulative.at(team)[b]),
                 io::format_double(tl.hpus_plus_cumulative.at(team)[b]),
                 std::to_string(tl.shot_markers.at(team)[b])});
    csv.save((dir / ("timeline_" + match_id + ".csv")).string());
  }
}

void run_report(const PipelineConfig& config) {
  const fs::path out(config.out_dir);
  const fs::path report_dir = out / "report";
  fs::create_directories(report_dir);

  auto column = [](const io::CsvTable& t, const std::string& name) {
    std::vector<double> v;
    const auto c = t.column(name);
    for (const auto& row : t.rows)
      if (!row[c].empty()) v.push_back(io::parse_double(row[c], name));
    return v;
  };

  const fs::path eval_dir = out / "eval";
  if (fs::exists(eval_dir / "cdf.csv")) {
    const auto t = io::read_csv((eval_dir / "cdf.csv").string());
    svg::Series pred{"predicted", column(t, "predicted_t"), {}};
    svg::Series truth{"true", column(t, "true_t"), {}};
    const auto q = column(t, "quantile");
    pred.y = q;
    truth.y = q;
    svg::save((report_dir / "cdf.svg").string(),
              svg::line_chart({pred, truth}, "Interevent time CDF",
                              "t (scaled)", "F(t)"));
  }
  if (fs::exists(eval_dir / "attention.csv")) {
    const auto t = io::read_csv((eval_dir / "attention.csv").string());
    svg::Series s{"mean attention", column(t, "position"),
                  column(t, "mean_weight")};
    svg::save((report_dir / "attention.svg").string(),
              svg::line_chart({s}, "Self-attention, last row (mean)",
                              "history position", "weight"));
  }
  for (const char* name : {"confusion_zone", "confusion_action"}) {
    const fs::path csv_path = eval_dir / (std::string(name) + ".csv");
    if (!fs::exists(csv_path)) continue;
    const auto t = io::read_csv(csv_path.string());
    const auto k = t.rows.size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                              static_cast<Eigen::Index>(k));
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < k; ++c) {
        const auto& cell = t.rows[r][t.column("p" + std::to_string(c + 1))];
        if (!cell.empty())
          m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              io::parse_double(cell, name);
      }
    svg::save((report_dir / (std::string(name) + ".svg")).string(),
              svg::heatmap(m, std::string(name) + " (mean probability)"));
  }
  if (fs::exists(out / "history.csv")) {
    const auto t = io::read_csv((out / "history.csv").string());
    svg::Series train_s{"train", column(t, "epoch"), column(t, "train_total")};
    svg::Series valid_s{"valid", column(t, "epoch"), column(t, "valid_total")};
    svg::save((report_dir / "history.svg").string(),
              svg::line_chart({train_s, valid_s}, "Training history", "epoch",
                              "total loss"));
  }
  const fs::path metrics_dir = out / "metrics";
  if (fs::exists(metrics_dir)) {
    for (const auto& entry : fs::directory_iterator(metrics_dir)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("timeline_", 0) != 0 || entry.path().extension() != ".csv")
        continue;
      const auto t = io::read_csv(entry.path().string());
      std::map<std::string, svg::Series> series;
      const auto bin = t.column("bin_start_minute");
      const auto team = t.column("team_id");
      const auto hp = t.column("hpus_cum");
      for (const auto& row : t.rows) {
        auto& s = series[row[team]];
        s.label = row[team];
        s.x.push_back(io::parse_double(row[bin], "bin"));
        s.y.push_back(io::parse_double(row[hp], "hpus_cum"));
      }
      std::vector<svg::Series> list;
      for (auto& [k, v] : series) list.push_back(std::move(v));
      svg::save((report_dir / (entry.path().stem().string() + ".svg")).string(),
                svg::line_chart(list, "Cumulative HPUS", "match minute",
                                "HPUS"));
    }
  }
}

void run_all(const PipelineConfig& config) {
  run_prep(config);
  run_train(config);
  run_baseline(config);
  const fs::path out(config.out_dir);
  run_eval(config, ckpt_path(config), Split::Test, (out / "eval").string());
  run_eval_baseline(config, (out / "baseline.json").string(), Split::Test,
                    (out / "eval_baseline").string());
  run_metrics(config, split_csv_path(config, Split::Test),
              (out / "eval" / "predictions.csv").string(), config.metrics_mode,
              (out / "metrics").string());
  run_report(config);
}

}  // namespace nmstpp::pipeline
