#include "nmstpp/types.hpp"

namespace nmstpp {

const char* to_string(League league) {
  switch (league) {
    case League::PremierLeague: return "premier_league";
    case League::LaLiga: return "la_liga";
    case League::Ligue1: return "ligue_1";
    case League::SerieA: return "serie_a";
    case League::Bundesliga: return "bundesliga";
  }
  return "?";
}

std::optional<League> league_from_string(const std::string& s) {
  for (League l : kLeagues)
    if (s == to_string(l)) return l;
  return std::nullopt;
}

const char* to_string(Period period) {
  return period == Period::FirstHalf ? "1H" : "2H";
}

std::optional<Period> period_from_string(const std::string& s) {
  if (s == "1H") return Period::FirstHalf;
  if (s == "2H") return Period::SecondHalf;
  return std::nullopt;
}

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

std::optional<Split> split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

const char* to_string(ActionClass a) {
  switch (a) {
    case ActionClass::Pass: return "pass";
    case ActionClass::Dribble: return "dribble";
    case ActionClass::Cross: return "cross";
    case ActionClass::Shot: return "shot";
    case ActionClass::PossessionEnd: return "possession_end";
  }
  return "?";
}

std::optional<ActionClass> action_from_string(const std::string& s) {
  for (int i = 1; i <= kNumActions; ++i) {
    const auto a = static_cast<ActionClass>(i);
    if (s == to_string(a)) return a;
  }
  return std::nullopt;
}

std::vector<std::string> SplitManifest::matches_in(Split split) const {
  std::vector<std::string> out;
  for (const auto& [id, s] : assignment)
    if (s == split) out.push_back(id);
  return out;
}

}  // namespace nmstpp
