#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nmstpp/types.hpp"

namespace nmstpp::ingest {

enum class InputFormat { Jsonl, Csv };

struct ParseResult {
  std::vector<MatchStream> streams;  // ordered by first appearance in input
  std::size_t clamped_coordinates = 0;  // out-of-range (x,y) warning counter
};

/// Parse line-delimited JSON mirroring the WyScout field names
/// (matchId, league, teamId, matchPeriod, eventSec, eventName, subEventName,
/// positions). Coordinates are clamped into [0,100]; events of each match are
/// stably ordered by (period, event_seconds).
ParseResult parse_events(std::istream& in, InputFormat format);
ParseResult parse_events_file(const std::string& path, InputFormat format);

/// Remove every match that contains at least one own-goal-tagged event
/// (raw type or subtype "Own goal", case-insensitive).
std::vector<MatchStream> drop_own_goal_matches(std::vector<MatchStream> streams);

/// Seeded per-league 0.8/0.1/0.1 match split; remainder rounds toward test.
/// Row caps are recorded in the manifest and applied downstream to
/// processed-event rows in manifest order. Every league needs >= 3 matches.
SplitManifest split_matches(const std::vector<MatchStream>& streams,
                            std::uint64_t seed, std::size_t train_rows,
                            std::size_t valid_rows);

SplitManifest load_manifest(const std::string& path);
void save_manifest(const SplitManifest& manifest, const std::string& path,
                   std::uint64_t config_hash);

}  // namespace nmstpp::ingest
