#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nmstpp/types.hpp"

namespace nmstpp::synth {

/// Football-flavored synthetic event corpus. Zones follow a local random
/// walk with attacking drift, action mix depends on the pitch band, and the
/// interevent time of an event is (up to jitter) a fixed exponential
/// quantile selected by the previous event's (zone, action) pair, so the
/// marginal stays close to Exp(interevent_rate) while remaining predictable
/// from history.
struct SyntheticConfig {
  int matches = 6;
  int events_per_match = 240;  // real events; possession_end rows come later
  std::uint64_t seed = 7;
  League league = League::Bundesliga;
  int teams = 4;                 // pool; two per match
  double interevent_rate = 0.2;  // marginal exponential rate, events/second
  double predictability = 0.9;   // 1 = interevent time fully history-determined
  double switch_prob = 0.24;     // per-event possession switch probability
  double unmapped_prob = 0.03;   // rows outside the action grouping table
};

std::vector<MatchStream> generate(const SyntheticConfig& config);

/// WyScout-style line-delimited JSON accepted by the prep stage.
void write_jsonl(std::span<const MatchStream> streams, const std::string& path);

/// Deterministic external team table (ranking, goals, xG) covering the pool.
void write_team_table(const SyntheticConfig& config, const std::string& path);

std::string team_name(int index);

}  // namespace nmstpp::synth
