#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nmstpp {

/// Thrown for invalid inputs, malformed files and contract violations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class League { PremierLeague, LaLiga, Ligue1, SerieA, Bundesliga };
enum class Period { FirstHalf, SecondHalf };

inline constexpr std::array<League, 5> kLeagues = {
    League::PremierLeague, League::LaLiga, League::Ligue1, League::SerieA,
    League::Bundesliga};

const char* to_string(League league);
const char* to_string(Period period);
std::optional<League> league_from_string(const std::string& s);
std::optional<Period> period_from_string(const std::string& s);

/// One raw on-ball event as parsed from an input file.
struct EventRecord {
  std::string match_id;
  League league = League::Bundesliga;
  std::string team_id;
  Period period = Period::FirstHalf;
  double event_seconds = 0.0;  // seconds from period start
  double x = 0.0;              // [0,100], attacking direction left -> right
  double y = 0.0;              // [0,100]
  std::string raw_type;
  std::string raw_subtype;
};

/// All events of one match, ordered by (period, event_seconds, input index).
struct MatchStream {
  std::string match_id;
  League league = League::Bundesliga;
  std::vector<EventRecord> events;
};

enum class Split { Train, Valid, Test };
const char* to_string(Split split);
std::optional<Split> split_from_string(const std::string& s);

/// Deterministic assignment of matches to train/valid/test plus row caps.
struct SplitManifest {
  std::uint64_t seed = 0;
  std::size_t train_rows = 0;  // processed-event row cap, 0 = uncapped
  std::size_t valid_rows = 0;
  double t_scale = 1.0;  // 1 / max training-set interevent time, set by prep
  std::map<std::string, Split> assignment;  // match_id -> split
  std::map<std::string, std::string> match_league;

  std::vector<std::string> matches_in(Split split) const;
};

/// Grouped action classes. `PossessionEnd` is synthesized at possession
/// boundaries, never parsed from a raw action.
enum class ActionClass : int {
  Pass = 1,
  Dribble = 2,
  Cross = 3,
  Shot = 4,
  PossessionEnd = 5,
};

inline constexpr int kNumActions = 5;
inline constexpr int kNumZones = 20;

const char* to_string(ActionClass a);
std::optional<ActionClass> action_from_string(const std::string& s);

/// Canonical event row produced by the features stage.
struct ProcessedEvent {
  std::string match_id;
  League league = League::Bundesliga;
  std::string team_id;
  Period period = Period::FirstHalf;
  double seconds = 0.0;      // event_seconds of the underlying raw event
  int possession_index = 0;  // 0-based, per match
  double t = 0.0;            // interevent seconds, 0 for the first event
  int zone = 1;              // 1..20
  ActionClass action = ActionClass::Pass;
  double zone_s = 0.0;       // centroid distance from previous zone
  double zone_deltax = 0.0;  // signed centroid x change
  double zone_deltay = 0.0;  // signed centroid y change
  double zone_sg = 0.0;      // centroid distance from opponent goal (100,50)
  double zone_thetag = 0.0;  // angle (radians) from goal center to centroid

  bool synthetic() const { return action == ActionClass::PossessionEnd; }
};

/// Fixed-length model input. History columns:
/// t_scaled, zone, action, zone_s, zone_deltax, zone_deltay, zone_sg,
/// zone_thetag.
struct SequenceWindow {
  Eigen::MatrixXd history;  // seqlen x 8
  double target_t = 0.0;    // scaled
  int target_zone = 1;
  int target_action = 1;

  // Provenance of the target row, used for reporting and metrics joins.
  std::string match_id;
  std::size_t target_row = 0;  // row index within the match's processed events
  std::string team_id;
  int possession_index = 0;
  Period period = Period::FirstHalf;
  double seconds = 0.0;
  double target_t_seconds = 0.0;  // unscaled target interevent time
};

inline constexpr int kWindowCols = 8;

/// Model forecast for one window: scaled interevent time plus class logits.
struct ForecastOutput {
  double t_hat = 0.0;
  Eigen::VectorXd z_logits;  // 20
  Eigen::VectorXd m_logits;  // 5
};

}  // namespace nmstpp
