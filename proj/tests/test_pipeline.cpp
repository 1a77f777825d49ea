#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nmstpp/features.hpp"
#include "nmstpp/ingest.hpp"
#include "nmstpp/io.hpp"
#include "nmstpp/pipeline.hpp"
#include "nmstpp/synthetic.hpp"

using namespace nmstpp;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

pipeline::PipelineConfig small_config(const fs::path& dir) {
  pipeline::PipelineConfig c;
  c.input_path = (dir / "events.jsonl").string();
  c.out_dir = (dir / "out").string();
  c.team_table_path = (dir / "teams.csv").string();
  c.seed = 21;
  c.train_rows = 0;
  c.valid_rows = 0;
  c.model.seqlen = 8;
  c.model.dim_feedforward = 32;
  c.train.epochs = 2;
  c.train.batch_size = 64;
  c.train.seed = 21;
  return c;
}

void write_fixture(const fs::path& dir) {
  synth::SyntheticConfig sc;
  sc.matches = 6;
  sc.events_per_match = 90;
  sc.seed = 3;
  sc.teams = 4;
  const auto streams = synth::generate(sc);
  synth::write_jsonl(streams, (dir / "events.jsonl").string());
  synth::write_team_table(sc, (dir / "teams.csv").string());
}

}  // namespace

TEST_CASE("synthetic corpus parses and survives the prep stage") {
  const auto dir = fs::temp_directory_path() / "nmstpp_pipe_prep";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_fixture(dir);
  const auto config = small_config(dir);

  pipeline::run_prep(config);
  CHECK(fs::exists(fs::path(config.out_dir) / "manifest.json"));
  CHECK(fs::exists(fs::path(config.out_dir) / "events_train.csv"));
  CHECK(fs::exists(fs::path(config.out_dir) / "events_valid.csv"));
  CHECK(fs::exists(fs::path(config.out_dir) / "events_test.csv"));
  CHECK(fs::exists(fs::path(config.out_dir) / "zone_map.json"));

  const auto manifest = ingest::load_manifest(
      (fs::path(config.out_dir) / "manifest.json").string());
  CHECK(manifest.assignment.size() == 6);
  CHECK(manifest.matches_in(Split::Train).size() == 4);
  CHECK(manifest.matches_in(Split::Valid).size() == 1);
  CHECK(manifest.matches_in(Split::Test).size() == 1);
  CHECK(manifest.t_scale > 0.0);
  fs::remove_all(dir);
}

TEST_CASE("prep is deterministic: identical manifests and split files") {
  const auto dir = fs::temp_directory_path() / "nmstpp_pipe_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_fixture(dir);
  auto config = small_config(dir);

  pipeline::run_prep(config);
  const auto manifest1 = read_file(fs::path(config.out_dir) / "manifest.json");
  const auto train1 = read_file(fs::path(config.out_dir) / "events_train.csv");
  fs::remove_all(config.out_dir);
  pipeline::run_prep(config);
  CHECK(read_file(fs::path(config.out_dir) / "manifest.json") == manifest1);
  CHECK(read_file(fs::path(config.out_dir) / "events_train.csv") == train1);
  fs::remove_all(dir);
}

TEST_CASE("row caps truncate the train and valid splits") {
  const auto dir = fs::temp_directory_path() / "nmstpp_pipe_caps";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_fixture(dir);
  auto config = small_config(dir);
  config.train_rows = 50;
  config.valid_rows = 10;
  pipeline::run_prep(config);
  const auto train_rows = features::read_processed_csv(
      (fs::path(config.out_dir) / "events_train.csv").string());
  const auto valid_rows = features::read_processed_csv(
      (fs::path(config.out_dir) / "events_valid.csv").string());
  CHECK(train_rows.size() == 50);
  CHECK(valid_rows.size() == 10);
  fs::remove_all(dir);
}

TEST_CASE("the full pipeline produces the whole artifact tree") {
  const auto dir = fs::temp_directory_path() / "nmstpp_pipe_all";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_fixture(dir);
  const auto config = small_config(dir);

  pipeline::run_all(config);
  const fs::path out(config.out_dir);
  for (const char* artifact :
       {"manifest.json", "events_train.csv", "events_valid.csv",
        "events_test.csv", "model.ckpt.json", "history.csv", "baseline.json"})
    CHECK(fs::exists(out / artifact));
  for (const char* artifact :
       {"loss.csv", "confusion_zone.csv", "confusion_action.csv", "cdf.csv",
        "attention.csv", "predictions.csv"})
    CHECK(fs::exists(out / "eval" / artifact));
  CHECK(fs::exists(out / "eval_baseline" / "loss.csv"));
  CHECK_FALSE(fs::exists(out / "eval_baseline" / "attention.csv"));
  for (const char* artifact : {"possessions.csv", "teams.csv"})
    CHECK(fs::exists(out / "metrics" / artifact));
  // the single-match test split has 2 teams; correlations need 3
  CHECK_FALSE(fs::exists(out / "metrics" / "correlations.csv"));
  CHECK(fs::exists(out / "report" / "cdf.svg"));
  CHECK(fs::exists(out / "report" / "attention.svg"));
  CHECK(fs::exists(out / "report" / "confusion_zone.svg"));
  CHECK(fs::exists(out / "report" / "history.svg"));

  // every CSV artifact embeds the config hash
  const auto hash_line = "config_hash=" + io::hex64(config.config_hash());
  const auto loss = read_file(out / "eval" / "loss.csv");
  CHECK(loss.find(hash_line) != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("config round trip keeps the hash stable") {
  const auto dir = fs::temp_directory_path() / "nmstpp_pipe_cfg";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto config = small_config(dir);
  config.save((dir / "config.json").string());
  const auto loaded = pipeline::PipelineConfig::load((dir / "config.json").string());
  CHECK(loaded.config_hash() == config.config_hash());
  CHECK(loaded.model.seqlen == config.model.seqlen);
  CHECK(loaded.train.epochs == config.train.epochs);
  fs::remove_all(dir);
}
