#include "nmstpp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include <nlohmann/json.hpp>

#include "nmstpp/io.hpp"

namespace nmstpp::synth {

namespace {

struct RawAction {
  const char* type;
  const char* subtype;
};

// One representative raw pair per class, plus variants for texture.
RawAction raw_pair(ActionClass a, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (a) {
    case ActionClass::Pass:
      return u(rng) < 0.8 ? RawAction{"Pass", "Simple pass"}
                          : RawAction{"Pass", "High pass"};
    case ActionClass::Dribble:
      return u(rng) < 0.7 ? RawAction{"Duel", "Ground attacking duel"}
                          : RawAction{"Others on the ball", "Touch"};
    case ActionClass::Cross:
      return u(rng) < 0.8 ? RawAction{"Pass", "Cross"}
                          : RawAction{"Free Kick", "Corner"};
    case ActionClass::Shot:
      return {"Shot", "Shot"};
    case ActionClass::PossessionEnd:
      break;
  }
  throw Error("raw_pair: possession_end is never emitted raw");
}

// Action mix per x-band (cx 0..3): attacking bands carry crosses and shots.
ActionClass sample_action(int cx, std::mt19937_64& rng) {
  static constexpr double kMix[4][4] = {
      // pass, dribble, cross, shot
      {0.90, 0.09, 0.007, 0.003},
      {0.82, 0.14, 0.03, 0.01},
      {0.60, 0.18, 0.14, 0.08},
      {0.42, 0.16, 0.22, 0.20},
  };
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double v = u(rng);
  for (int a = 0; a < 4; ++a) {
    v -= kMix[cx][a];
    if (v <= 0.0) return static_cast<ActionClass>(a + 1);
  }
  return ActionClass::Pass;
}

// Default Juego de posicion breaks; the generator places events inside the
// cell so the pipeline recovers the intended zone.
constexpr double kXBreaks[5] = {0, 25, 50, 75, 100};
constexpr double kYBreaks[6] = {0, 19, 37, 63, 81, 100};

}  // namespace

std::string team_name(int index) {
  return "team_" + std::to_string(index + 1);
}

std::vector<MatchStream> generate(const SyntheticConfig& config) {
  if (config.matches < 1 || config.events_per_match < 2)
    throw Error("synthetic: need at least 1 match with 2 events");
  if (config.teams < 2) throw Error("synthetic: need at least 2 teams");
  if (config.predictability < 0.0 || config.predictability > 1.0)
    throw Error("synthetic: predictability must lie in [0,1]");

  std::vector<MatchStream> streams;
  for (int m = 0; m < config.matches; ++m) {
    std::mt19937_64 rng(config.seed * 2654435761ULL + static_cast<std::uint64_t>(m));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    MatchStream stream;
    char id[16];
    std::snprintf(id, sizeof(id), "m%04d", m + 1);
    stream.match_id = id;
    stream.league = config.league;

    const int team_a = (2 * m) % config.teams;
    const int team_b = (2 * m + 1) % config.teams;
    int in_possession = unit(rng) < 0.5 ? team_a : team_b;

    int cx = 1, cy = 2;  // kickoff around the center
    int dir_x = 1, dir_y = 0;  // ball-movement momentum
    int prev_cx = 1;
    ActionClass prev_action = ActionClass::Pass;
    const int first_half = (config.events_per_match + 1) / 2;
    double clock = 0.0;

    auto resample_dir = [&]() {
      const double px = unit(rng);
      dir_x = px < 0.45 ? 1 : px < 0.75 ? 0 : -1;  // attacking drift
      const double py = unit(rng);
      dir_y = py < 0.3 ? 1 : py < 0.7 ? 0 : -1;
    };

    for (int i = 0; i < config.events_per_match; ++i) {
      const bool second_half = i >= first_half;
      if (i == first_half) clock = 0.0;

      // Interevent time: exponential quantile picked by the previous
      // event's pitch band and action, jittered by (1 - predictability).
      double t = 0.0;
      if (i > 0 && i != first_half) {
        const double q =
            (prev_cx * 5 + (static_cast<int>(prev_action) - 1) + 0.5) / 20.0;
        const double jitter =
            (1.0 - config.predictability) * (unit(rng) - 0.5);
        const double u = std::clamp(q + jitter, 3e-3, 1.0 - 3e-3);
        t = -std::log(1.0 - u) / config.interevent_rate;
      }
      clock += t;

      // Possession switch mirrors the pitch into the new team's frame.
      if (i > 0 && unit(rng) < config.switch_prob) {
        in_possession = in_possession == team_a ? team_b : team_a;
        cx = 3 - cx;
        cy = 4 - cy;
        dir_x = -dir_x;
        dir_y = -dir_y;
      }

      // Momentum walk: direction persists, so the next zone is determined
      // by the previous two zones far better than by the last one alone.
      if (unit(rng) > 0.8) resample_dir();
      cx += dir_x;
      if (cx < 0 || cx > 3) {
        dir_x = -dir_x;
        cx = std::clamp(cx, 0, 3) + dir_x;
        cx = std::clamp(cx, 0, 3);
      }
      cy += dir_y;
      if (cy < 0 || cy > 4) {
        dir_y = -dir_y;
        cy = std::clamp(cy, 0, 4) + dir_y;
        cy = std::clamp(cy, 0, 4);
      }

      const ActionClass action = sample_action(cx, rng);

      EventRecord ev;
      ev.match_id = stream.match_id;
      ev.league = config.league;
      ev.team_id = team_name(in_possession);
      ev.period = second_half ? Period::SecondHalf : Period::FirstHalf;
      ev.event_seconds = clock;
      std::uniform_real_distribution<double> jx(kXBreaks[cx] + 0.5,
                                                kXBreaks[cx + 1] - 0.5);
      std::uniform_real_distribution<double> jy(kYBreaks[cy] + 0.5,
                                                kYBreaks[cy + 1] - 0.5);
      ev.x = jx(rng);
      ev.y = jy(rng);
      if (unit(rng) < config.unmapped_prob) {
        ev.raw_type = "Duel";
        ev.raw_subtype = "Ground defending duel";  // outside the grouping table
      } else {
        const auto raw = raw_pair(action, rng);
        ev.raw_type = raw.type;
        ev.raw_subtype = raw.subtype;
        prev_cx = cx;
        prev_action = action;
      }
      stream.events.push_back(std::move(ev));

      // Shots usually give the ball away.
      if (action == ActionClass::Shot && unit(rng) < 0.8) {
        in_possession = in_possession == team_a ? team_b : team_a;
        cx = 3 - cx;
        cy = 4 - cy;
        dir_x = -dir_x;
        dir_y = -dir_y;
      }
    }
    streams.push_back(std::move(stream));
  }
  return streams;
}

void write_jsonl(std::span<const MatchStream> streams, const std::string& path) {
  std::string out;
  for (const auto& stream : streams) {
    for (const auto& ev : stream.events) {
      nlohmann::ordered_json j;
      j["matchId"] = ev.match_id;
      j["league"] = to_string(ev.league);
      j["teamId"] = ev.team_id;
      j["matchPeriod"] = to_string(ev.period);
      j["eventSec"] = ev.event_seconds;
      j["eventName"] = ev.raw_type;
      j["subEventName"] = ev.raw_subtype;
      j["positions"] = nlohmann::json::array({{{"x", ev.x}, {"y", ev.y}}});
      out += j.dump();
      out += '\n';
    }
  }
  io::write_text_atomic(path, out);
}

void write_team_table(const SyntheticConfig& config, const std::string& path) {
  io::CsvWriter csv({"team", "ranking", "goals_per_match", "xg_per_match"}, 0);
  for (int i = 0; i < config.teams; ++i) {
    const double strength = static_cast<double>(config.teams - i) /
                            static_cast<double>(config.teams);
    csv.row({team_name(i), std::to_string(i + 1),
             io::format_double(0.8 + 1.6 * strength),
             io::format_double(0.75 + 1.5 * strength)});
  }
  csv.save(path);
}

}  // namespace nmstpp::synth
