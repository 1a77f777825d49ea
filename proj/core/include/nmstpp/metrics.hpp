#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nmstpp/types.hpp"
#include "nmstpp/zones.hpp"

namespace nmstpp::metrics {

/// Per-event holistic action score inputs and value.
struct HASRecord {
  double e_zone = 0.0;     // expected zone value, [0,10]
  double e_action = 0.0;   // expected action value, [0,10]
  double t_raw = 0.0;      // interevent seconds
  double t_clamped = 1.0;  // max(t_raw, 1)
  double has = 0.0;        // sqrt(e_zone * e_action) / t_clamped
};

/// 5 * P(Area_1) + 10 * P(Area_2). The PMF must sum to 1 within 1e-6.
double expected_zone_value(const Eigen::VectorXd& zone_pmf,
                           const features::ZoneMap& map);

/// 5 * (P(dribble) + P(pass)) + 10 * (P(cross) + P(shot)).
double expected_action_value(const Eigen::VectorXd& action_pmf);

HASRecord has(double e_zone, double e_action, double t_raw);

/// phi(x) = exp(-decay * (x - 1)); phi(1) = 1 for the last action.
double decay_weight(double x, double decay = 0.3);

/// Weighted sum of HAS: action i of n gets weight phi(n + 1 - i).
double hpus(std::span<const HASRecord> records, double decay = 0.3);

struct PossessionScore {
  std::string match_id;
  std::string team_id;
  int possession_index = 0;
  std::vector<HASRecord> records;
  double hpus = 0.0;
  bool attacking = false;  // final non-synthetic action is a cross or shot
  std::optional<double> hpus_plus;
  double poss_util_raw = 0.0;
  double poss_util_ranked = 0.0;
  Period end_period = Period::FirstHalf;
  double end_seconds = 0.0;
  int shots = 0;  // observed Shot events, exported as timeline markers
};

/// Sum of attack probabilities, negated when the possession contains no
/// observed cross or shot.
double poss_util_raw(std::span<const Eigen::VectorXd> action_pmfs,
                     std::span<const ActionClass> observed);

/// Percentile ranks (mean rank of ties) within each sign class: positives
/// into (0,1], negatives into [-1,0). Zero stays zero.
std::vector<double> rank_poss_util(const std::vector<double>& raw);

enum class Mode { Predicted, Empirical };
std::optional<Mode> mode_from_string(const std::string& s);

/// Model forecast joined onto a processed-event row.
struct EventForecast {
  double t_seconds = 0.0;  // predicted interevent time, seconds, >= 0
  Eigen::VectorXd zone_pmf;
  Eigen::VectorXd action_pmf;
};

/// Key: (match_id, row index within the match's processed events).
using ForecastIndex = std::map<std::pair<std::string, std::size_t>, EventForecast>;

/// Builds possession scores for all rows. Predicted mode consumes forecasts
/// where present (rows before the first window fall back to observed values);
/// empirical mode uses one-hot observed classes and observed times throughout.
std::vector<PossessionScore> score_possessions(
    const std::vector<ProcessedEvent>& rows, const ForecastIndex& forecasts,
    Mode mode, const features::ZoneMap& map, double decay = 0.3);

struct TeamSeasonStats {
  std::string team;
  int ranking = 0;
  double avg_goal = 0.0;
  double avg_xg = 0.0;
  double avg_hpus = 0.0;
  double avg_hpus_plus = 0.0;
  double hpus_ratio = 0.0;
};

struct TeamTableRow {
  std::string team;
  int ranking = 0;
  double goals_per_match = 0.0;
  double xg_per_match = 0.0;
};

std::vector<TeamTableRow> read_team_table(const std::string& path);

/// Per-match sums of HPUS / HPUS+ averaged over each team's matches, joined
/// with the external table. Errors naming any team missing from the table.
std::vector<TeamSeasonStats> team_season_aggregate(
    const std::vector<PossessionScore>& possessions,
    const std::vector<TeamTableRow>& table);

/// 5x5 Pearson correlations over (ranking, goal, xG, HPUS, HPUS+).
/// Needs >= 3 teams; errors naming any zero-variance column.
Eigen::MatrixXd correlation_matrix(const std::vector<TeamSeasonStats>& stats);
inline constexpr std::array<const char*, 5> kCorrelationLabels = {
    "ranking", "goal", "xg", "hpus", "hpus_plus"};

/// Cumulative per-team HPUS and HPUS+ per bin. First-half bins cover match
/// minutes [0,45), second-half bins are displayed at [60,105); a possession
/// lands in the bin of its final event.
struct MatchTimeline {
  std::string match_id;
  std::vector<int> bin_start_minutes;       // 0,5,...,40,60,...,100
  std::vector<std::string> teams;
  std::map<std::string, std::vector<double>> hpus_cumulative;
  std::map<std::string, std::vector<double>> hpus_plus_cumulative;
  std::map<std::string, std::vector<int>> shot_markers;
};

MatchTimeline match_timeline(std::span<const PossessionScore> possessions,
                             int bin_minutes = 5);

}  // namespace nmstpp::metrics
