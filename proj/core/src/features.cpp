#include "nmstpp/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "nmstpp/io.hpp"

namespace nmstpp::features {

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::optional<ActionClass> group_action(const std::string& raw_type,
                                        const std::string& raw_subtype) {
  static const std::map<std::pair<std::string, std::string>, ActionClass>
      kTable = {
          {{"pass", "hand pass"}, ActionClass::Pass},
          {{"pass", "head pass"}, ActionClass::Pass},
          {{"pass", "high pass"}, ActionClass::Pass},
          {{"pass", "launch"}, ActionClass::Pass},
          {{"pass", "simple pass"}, ActionClass::Pass},
          {{"pass", "smart pass"}, ActionClass::Pass},
          {{"others on the ball", "clearance"}, ActionClass::Pass},
          {{"free kick", "goal kick"}, ActionClass::Pass},
          {{"free kick", "throw in"}, ActionClass::Pass},
          {{"free kick", "free kick"}, ActionClass::Pass},
          {{"duel", "ground attacking duel"}, ActionClass::Dribble},
          {{"others on the ball", "acceleration"}, ActionClass::Dribble},
          {{"others on the ball", "touch"}, ActionClass::Dribble},
          {{"pass", "cross"}, ActionClass::Cross},
          {{"free kick", "corner"}, ActionClass::Cross},
          {{"free kick", "free kick cross"}, ActionClass::Cross},
          {{"shot", "shot"}, ActionClass::Shot},
          {{"free kick", "free kick shot"}, ActionClass::Shot},
          {{"free kick", "penalty"}, ActionClass::Shot},
      };
  const auto it = kTable.find({lower(raw_type), lower(raw_subtype)});
  if (it == kTable.end()) return std::nullopt;
  return it->second;
}

std::vector<Possession> segment_possessions(
    const std::vector<ProcessedEvent>& events) {
  std::vector<Possession> possessions;
  for (const auto& ev : events) {
    if (ev.synthetic())
      throw Error("segment_possessions: input already contains synthetic rows");
    if (possessions.empty() || possessions.back().team_id != ev.team_id) {
      Possession p;
      p.match_id = ev.match_id;
      p.team_id = ev.team_id;
      p.index = static_cast<int>(possessions.size());
      possessions.push_back(std::move(p));
    }
    possessions.back().events.push_back(ev);
    possessions.back().events.back().possession_index =
        possessions.back().index;
  }
  for (auto& p : possessions) {
    ProcessedEvent end = p.events.back();  // inherit location and zone
    end.action = ActionClass::PossessionEnd;
    end.t = 0.0;
    p.events.push_back(std::move(end));
  }
  return possessions;
}

std::vector<ProcessedEvent> process_match(const MatchStream& stream,
                                          const ZoneMap& map) {
  std::vector<ProcessedEvent> grouped;
  grouped.reserve(stream.events.size());
  for (const auto& ev : stream.events) {
    const auto action = group_action(ev.raw_type, ev.raw_subtype);
    if (!action) continue;
    ProcessedEvent row;
    row.match_id = stream.match_id;
    row.league = stream.league;
    row.team_id = ev.team_id;
    row.period = ev.period;
    row.seconds = ev.event_seconds;
    row.zone = map.zone_of(ev.x, ev.y);
    row.action = *action;
    grouped.push_back(std::move(row));
  }

  std::vector<ProcessedEvent> rows;
  rows.reserve(grouped.size() + grouped.size() / 4);
  for (auto& p : segment_possessions(grouped))
    for (auto& ev : p.events) rows.push_back(std::move(ev));

  // Interevent time and centroid geometry over the flattened sequence.
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& row = rows[i];
    const auto [cx, cy] = map.centroid(row.zone);
    row.zone_sg = std::hypot(cx - 100.0, cy - 50.0);
    row.zone_thetag = std::atan2(cy - 50.0, cx - 100.0);
    if (i == 0) continue;
    const auto& prev = rows[i - 1];
    if (row.synthetic()) {
      row.t = 0.0;
    } else if (row.period != prev.period) {
      row.t = 0.0;  // period clocks restart; treat like a match start
    } else {
      row.t = std::max(0.0, row.seconds - prev.seconds);
    }
    const auto [px, py] = map.centroid(prev.zone);
    row.zone_deltax = cx - px;
    row.zone_deltay = cy - py;
    row.zone_s = std::hypot(row.zone_deltax, row.zone_deltay);
  }
  return rows;
}

std::vector<SequenceWindow> build_windows(
    const std::vector<ProcessedEvent>& rows, int seqlen, double t_scale) {
  if (seqlen < 1) throw Error("build_windows: seqlen must be >= 1");
  std::vector<SequenceWindow> windows;
  if (rows.size() < static_cast<std::size_t>(seqlen) + 1) return windows;

  for (std::size_t i = seqlen; i < rows.size(); ++i) {
    if (rows[i].match_id != rows[0].match_id)
      throw Error("build_windows: rows span more than one match");
    SequenceWindow w;
    w.history.resize(seqlen, kWindowCols);
    for (int k = 0; k < seqlen; ++k) {
      const auto& r = rows[i - seqlen + k];
      w.history(k, 0) = r.t * t_scale;
      w.history(k, 1) = r.zone;
      w.history(k, 2) = static_cast<int>(r.action);
      w.history(k, 3) = r.zone_s;
      w.history(k, 4) = r.zone_deltax;
      w.history(k, 5) = r.zone_deltay;
      w.history(k, 6) = r.zone_sg;
      w.history(k, 7) = r.zone_thetag;
    }
    const auto& target = rows[i];
    w.target_t = target.t * t_scale;
    w.target_zone = target.zone;
    w.target_action = static_cast<int>(target.action);
    w.match_id = target.match_id;
    w.target_row = i;
    w.team_id = target.team_id;
    w.possession_index = target.possession_index;
    w.period = target.period;
    w.seconds = target.seconds;
    w.target_t_seconds = target.t;
    windows.push_back(std::move(w));
  }
  return windows;
}

std::vector<SequenceWindow> build_windows_all(
    const std::vector<ProcessedEvent>& rows, int seqlen, double t_scale) {
  std::vector<SequenceWindow> windows;
  std::size_t start = 0;
  while (start < rows.size()) {
    std::size_t end = start;
    while (end < rows.size() && rows[end].match_id == rows[start].match_id)
      ++end;
    std::vector<ProcessedEvent> match_rows(rows.begin() + start,
                                           rows.begin() + end);
    auto ws = build_windows(match_rows, seqlen, t_scale);
    windows.insert(windows.end(), std::make_move_iterator(ws.begin()),
                   std::make_move_iterator(ws.end()));
    start = end;
  }
  return windows;
}

Eigen::VectorXd balanced_weights(const std::vector<std::size_t>& counts) {
  const auto k = static_cast<double>(counts.size());
  double n = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0)
      throw Error("class_weights: class " + std::to_string(i + 1) +
                  " has zero samples");
    n += static_cast<double>(counts[i]);
  }
  Eigen::VectorXd w(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    w[static_cast<Eigen::Index>(i)] = n / (k * static_cast<double>(counts[i]));
  return w;
}

ClassWeights ClassWeights::uniform() {
  ClassWeights w;
  w.zone = Eigen::VectorXd::Ones(kNumZones);
  w.action = Eigen::VectorXd::Ones(kNumActions);
  return w;
}

ClassWeights class_weights(const std::vector<std::size_t>& zone_counts,
                           const std::vector<std::size_t>& action_counts,
                           double dribble_multiplier) {
  if (zone_counts.size() != kNumZones || action_counts.size() != kNumActions)
    throw Error("class_weights: expected 20 zone and 5 action counts");
  ClassWeights w;
  w.zone = balanced_weights(zone_counts);
  w.action = balanced_weights(action_counts);
  w.action[static_cast<int>(ActionClass::Dribble) - 1] *= dribble_multiplier;
  return w;
}

ClassWeights class_weights_for(const std::vector<SequenceWindow>& windows,
                               double dribble_multiplier) {
  std::vector<std::size_t> zones(kNumZones, 0), actions(kNumActions, 0);
  for (const auto& w : windows) {
    zones.at(w.target_zone - 1)++;
    actions.at(w.target_action - 1)++;
  }
  return class_weights(zones, actions, dribble_multiplier);
}

double max_interevent_seconds(const std::vector<ProcessedEvent>& rows) {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, r.t);
  return m;
}

namespace {

const std::vector<std::string> kProcessedHeader = {
    "match_id", "league", "team_id", "period", "seconds", "possession_index",
    "t",        "zone",   "action",  "zone_s", "zone_deltax", "zone_deltay",
    "zone_sg",  "zone_thetag"};

}  // namespace

void write_processed_csv(const std::string& path,
                         const std::vector<ProcessedEvent>& rows,
                         std::uint64_t config_hash) {
  io::CsvWriter csv(kProcessedHeader, config_hash);
  for (const auto& r : rows) {
    csv.row({r.match_id, to_string(r.league), r.team_id, to_string(r.period),
             io::format_double(r.seconds), std::to_string(r.possession_index),
             io::format_double(r.t), std::to_string(r.zone),
             to_string(r.action), io::format_double(r.zone_s),
             io::format_double(r.zone_deltax), io::format_double(r.zone_deltay),
             io::format_double(r.zone_sg), io::format_double(r.zone_thetag)});
  }
  csv.save(path);
}

std::vector<ProcessedEvent> read_processed_csv(const std::string& path) {
  const auto table = io::read_csv(path);
  if (table.header != kProcessedHeader)
    throw Error(path + ": unexpected processed-event header");
  std::vector<ProcessedEvent> rows;
  rows.reserve(table.rows.size());
  for (const auto& cells : table.rows) {
    ProcessedEvent r;
    r.match_id = cells[0];
    const auto league = league_from_string(cells[1]);
    if (!league) throw Error(path + ": unknown league " + cells[1]);
    r.league = *league;
    r.team_id = cells[2];
    const auto period = period_from_string(cells[3]);
    if (!period) throw Error(path + ": unknown period " + cells[3]);
    r.period = *period;
    r.seconds = io::parse_double(cells[4], path);
    r.possession_index = static_cast<int>(io::parse_int(cells[5], path));
    r.t = io::parse_double(cells[6], path);
    r.zone = static_cast<int>(io::parse_int(cells[7], path));
    if (r.zone < 1 || r.zone > kNumZones)
      throw Error(path + ": zone out of range");
    const auto action = action_from_string(cells[8]);
    if (!action) throw Error(path + ": unknown action " + cells[8]);
    r.action = *action;
    r.zone_s = io::parse_double(cells[9], path);
    r.zone_deltax = io::parse_double(cells[10], path);
    r.zone_deltay = io::parse_double(cells[11], path);
    r.zone_sg = io::parse_double(cells[12], path);
    r.zone_thetag = io::parse_double(cells[13], path);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace nmstpp::features
