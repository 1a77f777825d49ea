#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nmstpp/types.hpp"
#include "nmstpp/zones.hpp"

namespace nmstpp::features {

/// Maps a WyScout (type, subtype) pair onto the 5-class action grouping.
/// Returns nullopt for rows outside the grouping table; callers drop those.
std::optional<ActionClass> group_action(const std::string& raw_type,
                                        const std::string& raw_subtype);

/// One uninterrupted team possession: its real events plus the trailing
/// synthetic possession_end row.
struct Possession {
  std::string match_id;
  std::string team_id;
  int index = 0;
  std::vector<ProcessedEvent> events;
};

/// Split grouped events (no synthetic rows yet) into maximal same-team runs
/// and append a possession_end row per run. The synthetic row inherits the
/// location of the last real event and carries t = 0.
std::vector<Possession> segment_possessions(
    const std::vector<ProcessedEvent>& events);

/// Full per-match feature pass: group actions (dropping unmapped rows),
/// assign zones, synthesize possession_end rows, then compute interevent
/// times and centroid geometry over the flattened sequence.
std::vector<ProcessedEvent> process_match(const MatchStream& stream,
                                          const ZoneMap& map);

/// Sliding windows within one match. `rows` must be the processed events of
/// a single match in order; matches shorter than seqlen+1 yield no windows.
std::vector<SequenceWindow> build_windows(
    const std::vector<ProcessedEvent>& rows, int seqlen, double t_scale);

/// Convenience over a multi-match row list (windows never span matches).
std::vector<SequenceWindow> build_windows_all(
    const std::vector<ProcessedEvent>& rows, int seqlen, double t_scale);

/// Balanced class weights: weight_i = N / (K * n_i). Errors on a zero count,
/// naming the offending class index.
Eigen::VectorXd balanced_weights(const std::vector<std::size_t>& counts);

struct ClassWeights {
  Eigen::VectorXd zone;    // length 20
  Eigen::VectorXd action;  // length 5

  static ClassWeights uniform();
};

/// Weights over window targets; the dribble weight is then multiplied by
/// `dribble_multiplier` (1.0 disables the adjustment).
ClassWeights class_weights(const std::vector<std::size_t>& zone_counts,
                           const std::vector<std::size_t>& action_counts,
                           double dribble_multiplier);
ClassWeights class_weights_for(const std::vector<SequenceWindow>& windows,
                               double dribble_multiplier);

/// Largest target interevent time in seconds; prep derives
/// t_scale = 1 / max over the capped training rows (1.0 when degenerate).
double max_interevent_seconds(const std::vector<ProcessedEvent>& rows);

void write_processed_csv(const std::string& path,
                         const std::vector<ProcessedEvent>& rows,
                         std::uint64_t config_hash);
std::vector<ProcessedEvent> read_processed_csv(const std::string& path);

}  // namespace nmstpp::features
