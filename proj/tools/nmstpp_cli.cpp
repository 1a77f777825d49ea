// Command-line front end for the NMSTPP pipeline:
//   prep -> train / baseline / gridsearch -> eval -> metrics -> report,
// plus `all` to chain them and `synth` to generate a synthetic corpus.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nmstpp/pipeline.hpp"
#include "nmstpp/synthetic.hpp"
#include "nmstpp/types.hpp"
#include "nmstpp/version.hpp"

namespace {

using nmstpp::pipeline::PipelineConfig;

struct CommonArgs {
  std::string config_path;
  std::optional<std::string> input;
  std::optional<std::string> format;
  std::optional<std::string> out_dir;
  std::optional<std::string> zone_map;
  std::optional<std::string> team_table;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> train_rows;
  std::optional<std::size_t> valid_rows;
  std::optional<int> seqlen;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<int> dim_feedforward;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Pipeline config JSON");
  cmd->add_option("--input", args.input, "Raw event file");
  cmd->add_option("--format", args.format, "Input format: jsonl|csv");
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--zone-map", args.zone_map, "Zone map JSON");
  cmd->add_option("--team-table", args.team_table,
                  "External team table CSV (team,ranking,goals_per_match,xg_per_match)");
  cmd->add_option("--seed", args.seed, "Split / training seed");
  cmd->add_option("--train-rows", args.train_rows, "Training row cap");
  cmd->add_option("--valid-rows", args.valid_rows, "Validation row cap");
  cmd->add_option("--seqlen", args.seqlen, "History window length");
  cmd->add_option("--epochs", args.epochs, "Training epochs");
  cmd->add_option("--batch-size", args.batch_size, "Mini-batch size");
  cmd->add_option("--learning-rate", args.learning_rate, "Adam learning rate");
  cmd->add_option("--dim-feedforward", args.dim_feedforward,
                  "Encoder feedforward width");
}

// Config file first, then explicit flags win.
PipelineConfig resolve(const CommonArgs& args) {
  PipelineConfig config;
  if (!args.config_path.empty()) config = PipelineConfig::load(args.config_path);
  if (args.input) config.input_path = *args.input;
  if (args.format) config.input_format = *args.format;
  if (args.out_dir) config.out_dir = *args.out_dir;
  if (args.zone_map) config.zone_map_path = *args.zone_map;
  if (args.team_table) config.team_table_path = *args.team_table;
  if (args.seed) {
    config.seed = *args.seed;
    config.train.seed = *args.seed;
  }
  if (args.train_rows) config.train_rows = *args.train_rows;
  if (args.valid_rows) config.valid_rows = *args.valid_rows;
  if (args.seqlen) config.model.seqlen = *args.seqlen;
  if (args.epochs) config.train.epochs = *args.epochs;
  if (args.batch_size) config.train.batch_size = *args.batch_size;
  if (args.learning_rate) config.train.learning_rate = *args.learning_rate;
  if (args.dim_feedforward) config.model.dim_feedforward = *args.dim_feedforward;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NMSTPP: neural marked spatio-temporal point process pipeline "
               "for football event forecasting and HPUS metrics"};
  app.set_version_flag("--version", nmstpp::kVersion);
  app.require_subcommand(1);

  CommonArgs args;

  auto* prep = app.add_subcommand("prep", "Parse, filter, split and featurize");
  add_common(prep, args);

  auto* train_cmd = app.add_subcommand("train", "Train the NMSTPP model");
  add_common(train_cmd, args);
  std::string ckpt_out;
  train_cmd->add_option("--ckpt-out", ckpt_out,
                        "Checkpoint path (default <out>/model.ckpt.json)");

  auto* baseline = app.add_subcommand("baseline", "Fit AR(2) + transitions");
  add_common(baseline, args);
  std::string baseline_out;
  baseline->add_option("--model-out", baseline_out,
                       "Baseline JSON path (default <out>/baseline.json)");

  auto* grid = app.add_subcommand("gridsearch", "Hyperparameter grid runner");
  add_common(grid, args);
  std::string grid_file;
  std::optional<int> budget_epochs;
  grid->add_option("--grid", grid_file, "Grid spec JSON")->required();
  grid->add_option("--budget-epochs", budget_epochs,
                   "Epoch budget per grid cell");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  add_common(eval, args);
  std::string eval_ckpt, eval_split = "test", eval_baseline_path, eval_out;
  std::optional<std::size_t> eval_attention_sample;
  eval->add_option("--ckpt", eval_ckpt, "Model checkpoint");
  eval->add_option("--baseline", eval_baseline_path, "Baseline JSON");
  eval->add_option("--split", eval_split, "train|valid|test");
  eval->add_option("--eval-out", eval_out,
                   "Artifact dir (default <out>/eval)");
  eval->add_option("--sample", eval_attention_sample,
                   "Cap on windows feeding the attention average (0 = all)");

  auto* metrics = app.add_subcommand("metrics", "HAS/HPUS/poss-util metrics");
  add_common(metrics, args);
  std::string metrics_events, metrics_predictions, metrics_mode = "predicted",
              metrics_out;
  metrics->add_option("--events", metrics_events, "Processed events CSV");
  metrics->add_option("--predictions", metrics_predictions,
                      "Predictions CSV from eval");
  metrics->add_option("--mode", metrics_mode, "predicted|empirical");
  metrics->add_option("--metrics-out", metrics_out,
                      "Artifact dir (default <out>/metrics)");

  auto* report = app.add_subcommand("report", "Render SVG plots from CSVs");
  add_common(report, args);

  auto* all = app.add_subcommand("all", "Run the whole pipeline");
  add_common(all, args);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  std::string synth_out = "synthetic.jsonl", synth_table;
  nmstpp::synth::SyntheticConfig synth_config;
  synth->add_option("--out", synth_out, "JSONL output path");
  synth->add_option("--team-table-out", synth_table,
                    "Optional team table CSV output");
  synth->add_option("--matches", synth_config.matches, "Match count");
  synth->add_option("--events", synth_config.events_per_match,
                    "Events per match");
  synth->add_option("--seed", synth_config.seed, "Generator seed");
  synth->add_option("--teams", synth_config.teams, "Team pool size");
  synth->add_option("--rate", synth_config.interevent_rate,
                    "Marginal exponential rate (events/s)");
  synth->add_option("--predictability", synth_config.predictability,
                    "0..1, history-determinism of interevent times");
  synth->add_option("--switch-prob", synth_config.switch_prob,
                    "Per-event possession switch probability");
  synth->add_option("--unmapped-prob", synth_config.unmapped_prob,
                    "Share of rows outside the action grouping");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    namespace fs = std::filesystem;
    if (synth->parsed()) {
      const auto streams = nmstpp::synth::generate(synth_config);
      nmstpp::synth::write_jsonl(streams, synth_out);
      if (!synth_table.empty())
        nmstpp::synth::write_team_table(synth_config, synth_table);
      return 0;
    }
    PipelineConfig config = resolve(args);
    if (prep->parsed()) {
      nmstpp::pipeline::run_prep(config);
    } else if (train_cmd->parsed()) {
      nmstpp::pipeline::run_train(config);
    } else if (baseline->parsed()) {
      nmstpp::pipeline::run_baseline(config);
    } else if (grid->parsed()) {
      nmstpp::pipeline::run_gridsearch(config, grid_file, budget_epochs);
    } else if (eval->parsed()) {
      const auto split = nmstpp::split_from_string(eval_split);
      if (!split) throw nmstpp::Error("eval: bad --split " + eval_split);
      if (eval_attention_sample) config.attention_sample = *eval_attention_sample;
      if (!eval_baseline_path.empty()) {
        const auto dir = eval_out.empty()
                             ? (fs::path(config.out_dir) / "eval_baseline").string()
                             : eval_out;
        nmstpp::pipeline::run_eval_baseline(config, eval_baseline_path, *split,
                                            dir);
      } else {
        const auto ckpt =
            eval_ckpt.empty()
                ? (fs::path(config.out_dir) / "model.ckpt.json").string()
                : eval_ckpt;
        const auto dir = eval_out.empty()
                             ? (fs::path(config.out_dir) / "eval").string()
                             : eval_out;
        nmstpp::pipeline::run_eval(config, ckpt, *split, dir);
      }
    } else if (metrics->parsed()) {
      const auto events =
          metrics_events.empty()
              ? (fs::path(config.out_dir) / "events_test.csv").string()
              : metrics_events;
      const auto dir = metrics_out.empty()
                           ? (fs::path(config.out_dir) / "metrics").string()
                           : metrics_out;
      std::string predictions = metrics_predictions;
      if (predictions.empty() && metrics_mode == "predicted")
        predictions =
            (fs::path(config.out_dir) / "eval" / "predictions.csv").string();
      nmstpp::pipeline::run_metrics(config, events, predictions, metrics_mode,
                                    dir);
    } else if (report->parsed()) {
      nmstpp::pipeline::run_report(config);
    } else if (all->parsed()) {
      nmstpp::pipeline::run_all(config);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
