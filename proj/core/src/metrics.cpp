#include "nmstpp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "nmstpp/io.hpp"

namespace nmstpp::metrics {

namespace {

void check_pmf(const Eigen::VectorXd& pmf, int expected, const char* what) {
  if (pmf.size() != expected)
    throw Error(std::string(what) + ": PMF length must be " +
                std::to_string(expected));
  if (pmf.minCoeff() < -1e-9)
    throw Error(std::string(what) + ": PMF has negative mass");
  if (std::abs(pmf.sum() - 1.0) > 1e-6)
    throw Error(std::string(what) + ": PMF does not sum to 1");
}

}  // namespace

double expected_zone_value(const Eigen::VectorXd& zone_pmf,
                           const features::ZoneMap& map) {
  check_pmf(zone_pmf, kNumZones, "expected_zone_value");
  double p1 = 0.0, p2 = 0.0;
  for (int z = 1; z <= kNumZones; ++z) {
    const int area = map.area_of(z);
    if (area == 1) p1 += zone_pmf[z - 1];
    else if (area == 2) p2 += zone_pmf[z - 1];
  }
  return 5.0 * p1 + 10.0 * p2;
}

double expected_action_value(const Eigen::VectorXd& action_pmf) {
  check_pmf(action_pmf, kNumActions, "expected_action_value");
  const double mid = action_pmf[static_cast<int>(ActionClass::Dribble) - 1] +
                     action_pmf[static_cast<int>(ActionClass::Pass) - 1];
  const double high = action_pmf[static_cast<int>(ActionClass::Cross) - 1] +
                      action_pmf[static_cast<int>(ActionClass::Shot) - 1];
  return 5.0 * mid + 10.0 * high;
}

HASRecord has(double e_zone, double e_action, double t_raw) {
  if (e_zone < -1e-9 || e_zone > 10.0 + 1e-9 || e_action < -1e-9 ||
      e_action > 10.0 + 1e-9)
    throw Error("has: expected values must lie in [0,10]");
  HASRecord r;
  r.e_zone = e_zone;
  r.e_action = e_action;
  r.t_raw = t_raw;
  r.t_clamped = std::max(t_raw, 1.0);
  r.has = std::sqrt(std::max(0.0, e_zone * e_action)) / r.t_clamped;
  return r;
}

double decay_weight(double x, double decay) {
  return std::exp(-decay * (x - 1.0));
}

double hpus(std::span<const HASRecord> records, double decay) {
  if (records.empty()) throw Error("hpus: empty possession");
  const auto n = static_cast<double>(records.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i)
    sum += decay_weight(n - static_cast<double>(i), decay) * records[i].has;
  return sum;
}

double poss_util_raw(std::span<const Eigen::VectorXd> action_pmfs,
                     std::span<const ActionClass> observed) {
  if (action_pmfs.size() != observed.size())
    throw Error("poss_util: PMF/observation count mismatch");
  double attack = 0.0;
  bool has_attack = false;
  for (std::size_t i = 0; i < action_pmfs.size(); ++i) {
    check_pmf(action_pmfs[i], kNumActions, "poss_util");
    attack += action_pmfs[i][static_cast<int>(ActionClass::Cross) - 1] +
              action_pmfs[i][static_cast<int>(ActionClass::Shot) - 1];
    has_attack = has_attack || observed[i] == ActionClass::Cross ||
                 observed[i] == ActionClass::Shot;
  }
  return has_attack ? attack : -attack;
}

std::vector<double> rank_poss_util(const std::vector<double>& raw) {
  auto percentile = [](const std::vector<double>& values,
                       std::vector<std::pair<std::size_t, double>>& out) {
    // mean rank of ties over ascending order, scaled into (0,1]
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return values[a] < values[b];
    });
    const double n = static_cast<double>(values.size());
    std::size_t i = 0;
    while (i < idx.size()) {
      std::size_t j = i;
      while (j < idx.size() && values[idx[j]] == values[idx[i]]) ++j;
      const double mean_rank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
      for (std::size_t k = i; k < j; ++k)
        out.push_back({idx[k], mean_rank / n});
      i = j;
    }
  };

  std::vector<double> pos, neg;
  std::vector<std::size_t> pos_idx, neg_idx;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] > 0.0) {
      pos.push_back(raw[i]);
      pos_idx.push_back(i);
    } else if (raw[i] < 0.0) {
      neg.push_back(-raw[i]);  // larger magnitude -> closer to -1
      neg_idx.push_back(i);
    }
  }
  std::vector<double> ranked(raw.size(), 0.0);
  std::vector<std::pair<std::size_t, double>> ranks;
  percentile(pos, ranks);
  for (const auto& [local, pct] : ranks) ranked[pos_idx[local]] = pct;
  ranks.clear();
  percentile(neg, ranks);
  for (const auto& [local, pct] : ranks) ranked[neg_idx[local]] = -pct;
  return ranked;
}

std::optional<Mode> mode_from_string(const std::string& s) {
  if (s == "predicted") return Mode::Predicted;
  if (s == "empirical") return Mode::Empirical;
  return std::nullopt;
}

std::vector<PossessionScore> score_possessions(
    const std::vector<ProcessedEvent>& rows, const ForecastIndex& forecasts,
    Mode mode, const features::ZoneMap& map, double decay) {
  std::vector<PossessionScore> scores;
  std::vector<Eigen::VectorXd> pmfs;
  std::vector<ActionClass> observed;

  std::size_t match_start = 0;  // row index of the current match's first row
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].match_id != rows[i - 1].match_id) match_start = i;
    const auto& row = rows[i];
    const bool new_possession =
        scores.empty() || scores.back().match_id != row.match_id ||
        scores.back().possession_index != row.possession_index;
    if (new_possession) {
      if (!scores.empty() && !pmfs.empty()) {
        scores.back().poss_util_raw = poss_util_raw(pmfs, observed);
        pmfs.clear();
        observed.clear();
      }
      PossessionScore s;
      s.match_id = row.match_id;
      s.team_id = row.team_id;
      s.possession_index = row.possession_index;
      scores.push_back(std::move(s));
    }
    PossessionScore& score = scores.back();

    Eigen::VectorXd zone_pmf, action_pmf;
    double t_seconds = row.t;
    const auto it = mode == Mode::Predicted
                        ? forecasts.find({row.match_id, i - match_start})
                        : forecasts.end();
    if (it != forecasts.end()) {
      zone_pmf = it->second.zone_pmf;
      action_pmf = it->second.action_pmf;
      t_seconds = std::max(0.0, it->second.t_seconds);
    } else {
      zone_pmf = Eigen::VectorXd::Zero(kNumZones);
      zone_pmf[row.zone - 1] = 1.0;
      action_pmf = Eigen::VectorXd::Zero(kNumActions);
      action_pmf[static_cast<int>(row.action) - 1] = 1.0;
    }

    score.records.push_back(has(expected_zone_value(zone_pmf, map),
                                expected_action_value(action_pmf), t_seconds));
    pmfs.push_back(std::move(action_pmf));
    observed.push_back(row.action);
    if (!row.synthetic()) {
      score.end_period = row.period;
      score.end_seconds = row.seconds;
      score.attacking = row.action == ActionClass::Cross ||
                        row.action == ActionClass::Shot;
      if (row.action == ActionClass::Shot) score.shots++;
    }
  }
  if (!scores.empty() && !pmfs.empty())
    scores.back().poss_util_raw = poss_util_raw(pmfs, observed);

  std::vector<double> raw;
  raw.reserve(scores.size());
  for (auto& s : scores) {
    s.hpus = hpus(s.records, decay);
    if (s.attacking) s.hpus_plus = s.hpus;
    raw.push_back(s.poss_util_raw);
  }
  const auto ranked = rank_poss_util(raw);
  for (std::size_t i = 0; i < scores.size(); ++i)
    scores[i].poss_util_ranked = ranked[i];
  return scores;
}

std::vector<TeamTableRow> read_team_table(const std::string& path) {
  const auto table = io::read_csv(path);
  const auto team = table.column("team");
  const auto ranking = table.column("ranking");
  const auto goals = table.column("goals_per_match");
  const auto xg = table.column("xg_per_match");
  std::vector<TeamTableRow> rows;
  for (const auto& cells : table.rows) {
    TeamTableRow r;
    r.team = cells[team];
    r.ranking = static_cast<int>(io::parse_int(cells[ranking], path));
    r.goals_per_match = io::parse_double(cells[goals], path);
    r.xg_per_match = io::parse_double(cells[xg], path);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<TeamSeasonStats> team_season_aggregate(
    const std::vector<PossessionScore>& possessions,
    const std::vector<TeamTableRow>& table) {
  // (team, match) -> summed HPUS / HPUS+
  std::map<std::string, std::map<std::string, std::pair<double, double>>> sums;
  for (const auto& p : possessions) {
    auto& cell = sums[p.team_id][p.match_id];
    cell.first += p.hpus;
    cell.second += p.hpus_plus.value_or(0.0);
  }

  std::map<std::string, const TeamTableRow*> by_team;
  for (const auto& r : table) by_team[r.team] = &r;

  std::string missing;
  for (const auto& [team, matches] : sums)
    if (!by_team.count(team)) missing += (missing.empty() ? "" : ", ") + team;
  if (!missing.empty())
    throw Error("team_season_aggregate: teams missing from the external table: " +
                missing);

  std::vector<TeamSeasonStats> stats;
  for (const auto& [team, matches] : sums) {
    TeamSeasonStats s;
    s.team = team;
    const auto* row = by_team.at(team);
    s.ranking = row->ranking;
    s.avg_goal = row->goals_per_match;
    s.avg_xg = row->xg_per_match;
    double hp = 0.0, hpp = 0.0;
    for (const auto& [match, cell] : matches) {
      hp += cell.first;
      hpp += cell.second;
    }
    const auto n = static_cast<double>(matches.size());
    s.avg_hpus = hp / n;
    s.avg_hpus_plus = hpp / n;
    s.hpus_ratio = s.avg_hpus > 0.0 ? s.avg_hpus_plus / s.avg_hpus : 0.0;
    stats.push_back(std::move(s));
  }
  return stats;
}

Eigen::MatrixXd correlation_matrix(const std::vector<TeamSeasonStats>& stats) {
  if (stats.size() < 3)
    throw Error("correlation_matrix: need at least 3 teams");
  const auto n = static_cast<Eigen::Index>(stats.size());
  Eigen::MatrixXd columns(n, 5);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = stats[static_cast<std::size_t>(i)];
    columns(i, 0) = s.ranking;
    columns(i, 1) = s.avg_goal;
    columns(i, 2) = s.avg_xg;
    columns(i, 3) = s.avg_hpus;
    columns(i, 4) = s.avg_hpus_plus;
  }
  Eigen::MatrixXd corr(5, 5);
  Eigen::VectorXd mean = columns.colwise().mean();
  Eigen::MatrixXd centered = columns.rowwise() - mean.transpose();
  Eigen::VectorXd norm(5);
  for (int c = 0; c < 5; ++c) {
    norm[c] = centered.col(c).norm();
    if (norm[c] == 0.0)
      throw Error(std::string("correlation_matrix: column '") +
                  kCorrelationLabels[static_cast<std::size_t>(c)] +
                  "' has zero variance");
  }
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b)
      corr(a, b) = centered.col(a).dot(centered.col(b)) / (norm[a] * norm[b]);
  return corr;
}

MatchTimeline match_timeline(std::span<const PossessionScore> possessions,
                             int bin_minutes) {
  if (bin_minutes < 1) throw Error("match_timeline: bin must be >= 1 minute");
  MatchTimeline tl;
  const int per_half = (45 + bin_minutes - 1) / bin_minutes;
  for (int b = 0; b < per_half; ++b)
    tl.bin_start_minutes.push_back(b * bin_minutes);
  for (int b = 0; b < per_half; ++b)
    tl.bin_start_minutes.push_back(60 + b * bin_minutes);
  const std::size_t bins = tl.bin_start_minutes.size();

  std::set<std::string> teams;
  for (const auto& p : possessions) {
    if (!tl.match_id.empty() && p.match_id != tl.match_id)
      throw Error("match_timeline: possessions from more than one match");
    tl.match_id = p.match_id;
    teams.insert(p.team_id);
  }
  for (const auto& team : teams) {
    tl.teams.push_back(team);
    tl.hpus_cumulative[team].assign(bins, 0.0);
    tl.hpus_plus_cumulative[team].assign(bins, 0.0);
    tl.shot_markers[team].assign(bins, 0);
  }

  for (const auto& p : possessions) {
    // Display minute: second half shifted to 60-105; stoppage time folds
    // into the half's last bin.
    double minute = p.end_seconds / 60.0;
    minute = std::min(minute, 45.0 - 1e-9);
    std::size_t bin = static_cast<std::size_t>(minute / bin_minutes);
    if (p.end_period == Period::SecondHalf) bin += per_half;
    tl.hpus_cumulative[p.team_id][bin] += p.hpus;
    tl.hpus_plus_cumulative[p.team_id][bin] += p.hpus_plus.value_or(0.0);
    tl.shot_markers[p.team_id][bin] += p.shots;
  }
  for (const auto& team : tl.teams) {
    auto& h = tl.hpus_cumulative[team];
    auto& hp = tl.hpus_plus_cumulative[team];
    for (std::size_t b = 1; b < bins; ++b) {
      h[b] += h[b - 1];
      hp[b] += hp[b - 1];
    }
  }
  return tl;
}

}  // namespace nmstpp::metrics
