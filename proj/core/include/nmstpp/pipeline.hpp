#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nmstpp/model.hpp"
#include "nmstpp/train.hpp"
#include "nmstpp/types.hpp"

namespace nmstpp::pipeline {

/// One declarative configuration for the whole pipeline. Loaded from JSON;
/// CLI flags override individual fields. The FNV-1a hash of the canonical
/// serialization is embedded in every artifact for provenance.
struct PipelineConfig {
  std::string input_path;
  std::string input_format = "jsonl";  // jsonl | csv
  std::string out_dir = "out";
  std::string zone_map_path;    // empty = built-in Juego de posicion map
  std::string team_table_path;  // external (team, ranking, goals, xG) CSV

  std::uint64_t seed = 42;
  std::size_t train_rows = 100000;
  std::size_t valid_rows = 10000;

  model::ModelConfig model;
  train::TrainConfig train;

  double metrics_decay = 0.3;
  std::string metrics_mode = "predicted";  // predicted | empirical
  std::size_t attention_sample = 0;        // 0 = every test window

  static PipelineConfig load(const std::string& path);
  std::string canonical_json() const;
  std::uint64_t config_hash() const;
  void save(const std::string& path) const;
};

features::ZoneMap resolve_zone_map(const PipelineConfig& config);

/// prep: parse -> drop own-goal matches -> split -> features -> row caps.
/// Writes manifest.json, events_{train,valid,test}.csv and zone_map.json.
void run_prep(const PipelineConfig& config);

/// train: windows from the prepared splits, class weights, Adam training.
/// Writes model.ckpt.json and history.csv.
void run_train(const PipelineConfig& config);

/// baseline: AR(2) + transition matrices fit on the training split.
/// Writes baseline.json.
void run_baseline(const PipelineConfig& config);

/// gridsearch: one trained model per configuration in the grid file.
/// Writes gridsearch.csv.
void run_gridsearch(const PipelineConfig& config, const std::string& grid_path,
                    std::optional<int> budget_epochs);

/// eval: verification artifacts for a checkpoint (or the baseline) on one
/// split. Writes loss/confusion/cdf/attention/predictions CSVs.
void run_eval(const PipelineConfig& config, const std::string& ckpt_path,
              Split split, const std::string& eval_dir);
void run_eval_baseline(const PipelineConfig& config,
                       const std::string& baseline_path, Split split,
                       const std::string& eval_dir);

/// metrics: HAS/HPUS/poss-util per possession plus team aggregation,
/// correlations and per-match timelines.
void run_metrics(const PipelineConfig& config, const std::string& events_csv,
                 const std::string& predictions_csv, const std::string& mode,
                 const std::string& metrics_dir);

/// report: SVG renderings of the eval and metrics CSV artifacts.
void run_report(const PipelineConfig& config);

/// all: prep -> train -> baseline -> eval (model and baseline, test split)
/// -> metrics -> report.
void run_all(const PipelineConfig& config);

}  // namespace nmstpp::pipeline
