#include "nmstpp/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nmstpp/io.hpp"
#include "nmstpp/version.hpp"

namespace nmstpp::ingest {

namespace {

using nlohmann::json;

std::string id_to_string(const json& v, std::size_t line, const char* field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error("record " + std::to_string(line) + ": field '" + field +
              "' must be a string or integer");
}

double clamp_coord(double v, std::size_t& warnings) {
  if (v < 0.0 || v > 100.0) {
    ++warnings;
    return std::clamp(v, 0.0, 100.0);
  }
  return v;
}

EventRecord parse_jsonl_record(const std::string& line, std::size_t line_no,
                               std::size_t& warnings) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error("record " + std::to_string(line_no) +
                ": malformed JSON: " + e.what());
  }
  EventRecord ev;
  try {
    ev.match_id = id_to_string(j.at("matchId"), line_no, "matchId");
    ev.team_id = id_to_string(j.at("teamId"), line_no, "teamId");
    const auto league_s = j.at("league").get<std::string>();
    const auto league = league_from_string(league_s);
    if (!league)
      throw Error("record " + std::to_string(line_no) + ": unknown league '" +
                  league_s + "'");
    ev.league = *league;
    const auto period_s = j.at("matchPeriod").get<std::string>();
    const auto period = period_from_string(period_s);
    if (!period)
      throw Error("record " + std::to_string(line_no) + ": unknown period '" +
                  period_s + "'");
    ev.period = *period;
    ev.event_seconds = j.at("eventSec").get<double>();
    if (ev.event_seconds < 0.0)
      throw Error("record " + std::to_string(line_no) + ": negative eventSec");
    ev.raw_type = j.at("eventName").get<std::string>();
    ev.raw_subtype = j.value("subEventName", std::string{});
    const auto& pos = j.at("positions");
    if (!pos.is_array() || pos.empty())
      throw Error("record " + std::to_string(line_no) + ": empty positions");
    ev.x = clamp_coord(pos[0].at("x").get<double>(), warnings);
    ev.y = clamp_coord(pos[0].at("y").get<double>(), warnings);
  } catch (const json::exception& e) {
    throw Error("record " + std::to_string(line_no) + ": " + e.what());
  }
  return ev;
}

const std::vector<std::string> kCsvHeader = {
    "match_id", "league",     "team_id", "period", "event_sec",
    "x",        "y",          "event_name", "sub_event_name"};

EventRecord parse_csv_record(const std::vector<std::string>& cells,
                             std::size_t line_no, std::size_t& warnings) {
  EventRecord ev;
  ev.match_id = cells[0];
  const auto league = league_from_string(cells[1]);
  if (!league)
    throw Error("record " + std::to_string(line_no) + ": unknown league '" +
                cells[1] + "'");
  ev.league = *league;
  ev.team_id = cells[2];
  const auto period = period_from_string(cells[3]);
  if (!period)
    throw Error("record " + std::to_string(line_no) + ": unknown period '" +
                cells[3] + "'");
  ev.period = *period;
  const std::string ctx = "record " + std::to_string(line_no);
  ev.event_seconds = io::parse_double(cells[4], ctx);
  if (ev.event_seconds < 0.0) throw Error(ctx + ": negative event_sec");
  ev.x = clamp_coord(io::parse_double(cells[5], ctx), warnings);
  ev.y = clamp_coord(io::parse_double(cells[6], ctx), warnings);
  ev.raw_type = cells[7];
  ev.raw_subtype = cells[8];
  return ev;
}

bool iequals(const std::string& a, const char* b) {
  std::size_t i = 0;
  for (; i < a.size() && b[i]; ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return i == a.size() && b[i] == '\0';
}

}  // namespace

ParseResult parse_events(std::istream& in, InputFormat format) {
  ParseResult result;
  std::map<std::string, std::size_t> index;  // match_id -> streams index
  std::vector<std::vector<std::size_t>> input_order;

  auto append = [&](EventRecord ev) {
    auto [it, inserted] = index.try_emplace(ev.match_id, result.streams.size());
    if (inserted) {
      result.streams.push_back(
          MatchStream{ev.match_id, ev.league, {}});
      input_order.emplace_back();
    }
    MatchStream& stream = result.streams[it->second];
    if (stream.league != ev.league)
      throw Error("match " + ev.match_id + " appears in two leagues");
    input_order[it->second].push_back(stream.events.size());
    stream.events.push_back(std::move(ev));
  };

  std::string line;
  std::size_t line_no = 0;
  if (format == InputFormat::Jsonl) {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      append(parse_jsonl_record(line, line_no, result.clamped_coordinates));
    }
  } else {
    bool have_header = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream cell_stream(line);
      std::vector<std::string> cells;
      std::string cell;
      while (std::getline(cell_stream, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        cells.push_back(cell);
      }
      if (!have_header) {
        if (cells != kCsvHeader)
          throw Error("CSV header mismatch; expected match_id,league,team_id,"
                      "period,event_sec,x,y,event_name,sub_event_name");
        have_header = true;
        continue;
      }
      if (cells.size() != kCsvHeader.size())
        throw Error("record " + std::to_string(line_no) + ": expected " +
                    std::to_string(kCsvHeader.size()) + " fields");
      append(parse_csv_record(cells, line_no, result.clamped_coordinates));
    }
    if (!have_header) throw Error("CSV input is missing its header row");
  }

  // Stable order by (period, event_seconds); ties keep input order.
  for (auto& stream : result.streams) {
    std::stable_sort(stream.events.begin(), stream.events.end(),
                     [](const EventRecord& a, const EventRecord& b) {
                       if (a.period != b.period) return a.period < b.period;
                       return a.event_seconds < b.event_seconds;
                     });
  }
  return result;
}

ParseResult parse_events_file(const std::string& path, InputFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_events(in, format);
}

std::vector<MatchStream> drop_own_goal_matches(
    std::vector<MatchStream> streams) {
  std::erase_if(streams, [](const MatchStream& stream) {
    return std::any_of(stream.events.begin(), stream.events.end(),
                       [](const EventRecord& ev) {
                         return iequals(ev.raw_subtype, "own goal") ||
                                iequals(ev.raw_type, "own goal");
                       });
  });
  return streams;
}

SplitManifest split_matches(const std::vector<MatchStream>& streams,
                            std::uint64_t seed, std::size_t train_rows,
                            std::size_t valid_rows) {
  if (streams.empty()) throw Error("split_matches: no matches");

  SplitManifest manifest;
  manifest.seed = seed;
  manifest.train_rows = train_rows;
  manifest.valid_rows = valid_rows;

  std::map<League, std::vector<std::string>> by_league;
  for (const auto& stream : streams) {
    by_league[stream.league].push_back(stream.match_id);
    manifest.match_league[stream.match_id] = to_string(stream.league);
  }

  for (auto& [league, ids] : by_league) {
    if (ids.size() < 3)
      throw Error(std::string("split_matches: league ") + to_string(league) +
                  " has " + std::to_string(ids.size()) +
                  " matches, need at least 3 to form train/valid/test");
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(seed ^ io::fnv1a(to_string(league)));
    std::shuffle(ids.begin(), ids.end(), rng);

    const std::size_t n = ids.size();
    std::size_t n_train = static_cast<std::size_t>(0.8 * static_cast<double>(n));
    std::size_t n_valid =
        std::max<std::size_t>(1, static_cast<std::size_t>(0.1 * static_cast<double>(n)));
    n_train = std::max<std::size_t>(1, n_train);
    // Remainder rounds toward test; borrow from train if it would be empty.
    while (n_train + n_valid + 1 > n) --n_train;
    if (n_train == 0) throw Error("split_matches: not enough matches");
    for (std::size_t i = 0; i < n; ++i) {
      Split s = i < n_train             ? Split::Train
                : i < n_train + n_valid ? Split::Valid
                                        : Split::Test;
      manifest.assignment[ids[i]] = s;
    }
  }
  return manifest;
}

void save_manifest(const SplitManifest& manifest, const std::string& path,
                   std::uint64_t config_hash) {
  nlohmann::ordered_json j;
  j["tool"] = "nmstpp";
  j["version"] = kVersion;
  j["config_hash"] = io::hex64(config_hash);
  j["seed"] = manifest.seed;
  j["train_rows"] = manifest.train_rows;
  j["valid_rows"] = manifest.valid_rows;
  j["t_scale"] = manifest.t_scale;
  nlohmann::ordered_json assign;
  for (const auto& [id, split] : manifest.assignment) {
    assign[id] = {{"split", to_string(split)},
                  {"league", manifest.match_league.at(id)}};
  }
  j["matches"] = std::move(assign);
  io::write_text_atomic(path, j.dump(2) + "\n");
}

SplitManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("manifest: invalid JSON in " + path + ": " + e.what());
  }
  SplitManifest manifest;
  try {
    manifest.seed = j.at("seed").get<std::uint64_t>();
    manifest.train_rows = j.at("train_rows").get<std::size_t>();
    manifest.valid_rows = j.at("valid_rows").get<std::size_t>();
    manifest.t_scale = j.at("t_scale").get<double>();
    for (const auto& [id, entry] : j.at("matches").items()) {
      const auto split = split_from_string(entry.at("split").get<std::string>());
      if (!split) throw Error("manifest: bad split for match " + id);
      manifest.assignment[id] = *split;
      manifest.match_league[id] = entry.at("league").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("manifest: missing field in " + path + ": " + e.what());
  }
  return manifest;
}

}  // namespace nmstpp::ingest
