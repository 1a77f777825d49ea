#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "nmstpp/ingest.hpp"
#include "nmstpp/types.hpp"

using namespace nmstpp;

namespace {

std::string jsonl_line(const std::string& match, const std::string& team,
                       const std::string& period, double sec, double x,
                       double y, const std::string& type = "Pass",
                       const std::string& subtype = "Simple pass",
                       const std::string& league = "bundesliga") {
  std::ostringstream os;
  os << R"({"matchId":")" << match << R"(","league":")" << league
     << R"(","teamId":")" << team << R"(","matchPeriod":")" << period
     << R"(","eventSec":)" << sec << R"(,"eventName":")" << type
     << R"(","subEventName":")" << subtype << R"(","positions":[{"x":)" << x
     << R"(,"y":)" << y << "}]}\n";
  return os.str();
}

MatchStream make_match(const std::string& id, int events,
                       League league = League::Bundesliga) {
  MatchStream s;
  s.match_id = id;
  s.league = league;
  for (int i = 0; i < events; ++i) {
    EventRecord ev;
    ev.match_id = id;
    ev.league = league;
    ev.team_id = "team_1";
    ev.period = Period::FirstHalf;
    ev.event_seconds = i;
    ev.x = 50;
    ev.y = 50;
    ev.raw_type = "Pass";
    ev.raw_subtype = "Simple pass";
    s.events.push_back(ev);
  }
  return s;
}

}  // namespace

TEST_CASE("minimal file with one match parses in order") {
  std::istringstream in(jsonl_line("m1", "a", "1H", 0.0, 10, 10) +
                        jsonl_line("m1", "a", "1H", 4.0, 20, 30));
  const auto result = ingest::parse_events(in, ingest::InputFormat::Jsonl);
  REQUIRE(result.streams.size() == 1);
  REQUIRE(result.streams[0].events.size() == 2);
  CHECK(result.streams[0].events[0].event_seconds == 0.0);
  CHECK(result.streams[0].events[1].event_seconds == 4.0);
  CHECK(result.clamped_coordinates == 0);
}

TEST_CASE("out-of-range x is clamped with a warning") {
  std::istringstream in(jsonl_line("m1", "a", "1H", 0.0, 101.0, 50));
  const auto result = ingest::parse_events(in, ingest::InputFormat::Jsonl);
  CHECK(result.streams[0].events[0].x == 100.0);
  CHECK(result.clamped_coordinates == 1);
}

TEST_CASE("interleaved matches come out separately, each ordered") {
  // Shuffled input; oracle is an independent stable sort of the fixture.
  struct Row {
    std::string match;
    std::string period;
    double sec;
    int input_index;
  };
  std::vector<Row> rows = {{"m1", "2H", 5, 0}, {"m2", "1H", 3, 1},
                           {"m1", "1H", 9, 2}, {"m2", "1H", 3, 3},
                           {"m1", "1H", 2, 4}, {"m2", "2H", 1, 5},
                           {"m1", "2H", 5, 6}};
  std::string text;
  for (const auto& r : rows)
    text += jsonl_line(r.match, "a", r.period, r.sec, 50, 50);
  std::istringstream in(text);
  const auto result = ingest::parse_events(in, ingest::InputFormat::Jsonl);
  REQUIRE(result.streams.size() == 2);

  for (const auto& match : {"m1", "m2"}) {
    std::vector<Row> expected;
    for (const auto& r : rows)
      if (r.match == match) expected.push_back(r);
    std::stable_sort(expected.begin(), expected.end(),
                     [](const Row& a, const Row& b) {
                       if (a.period != b.period) return a.period < b.period;
                       return a.sec < b.sec;
                     });
    const auto it = std::find_if(
        result.streams.begin(), result.streams.end(),
        [&](const MatchStream& s) { return s.match_id == match; });
    REQUIRE(it != result.streams.end());
    REQUIRE(it->events.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(to_string(it->events[i].period) == expected[i].period);
      CHECK(it->events[i].event_seconds == expected[i].sec);
    }
  }
}

TEST_CASE("malformed record reports its line") {
  std::istringstream in(jsonl_line("m1", "a", "1H", 0.0, 10, 10) +
                        "{not json\n");
  CHECK_THROWS_WITH_AS(ingest::parse_events(in, ingest::InputFormat::Jsonl),
                       doctest::Contains("record 2"), Error);
}

TEST_CASE("unknown league is an error") {
  std::istringstream in(jsonl_line("m1", "a", "1H", 0.0, 10, 10, "Pass",
                                   "Simple pass", "superleague"));
  CHECK_THROWS_WITH_AS(ingest::parse_events(in, ingest::InputFormat::Jsonl),
                       doctest::Contains("unknown league"), Error);
}

TEST_CASE("csv fallback parses with the fixed header") {
  std::istringstream in(
      "match_id,league,team_id,period,event_sec,x,y,event_name,sub_event_name\n"
      "m1,bundesliga,a,1H,0,10,20,Pass,Simple pass\n"
      "m1,bundesliga,a,1H,2,15,25,Shot,Shot\n");
  const auto result = ingest::parse_events(in, ingest::InputFormat::Csv);
  REQUIRE(result.streams.size() == 1);
  CHECK(result.streams[0].events.size() == 2);
  CHECK(result.streams[0].events[1].raw_type == "Shot");
}

TEST_CASE("drop_own_goal_matches removes whole matches") {
  auto a = make_match("m1", 3);
  auto b = make_match("m2", 3);
  b.events[1].raw_type = "Own goal";
  b.events[1].raw_subtype = "";
  auto c = make_match("m3", 3);

  SUBCASE("one own-goal match dropped") {
    const auto out = ingest::drop_own_goal_matches({a, b, c});
    REQUIRE(out.size() == 2);
    CHECK(out[0].match_id == "m1");
    CHECK(out[1].match_id == "m3");
  }
  SUBCASE("no own goals leaves input unchanged") {
    const auto out = ingest::drop_own_goal_matches({a, c});
    CHECK(out.size() == 2);
  }
  SUBCASE("all matches dropped is empty, not an error") {
    auto d = make_match("m4", 2);
    d.events[0].raw_subtype = "Own goal";
    const auto out = ingest::drop_own_goal_matches({b, d});
    CHECK(out.empty());
  }
}

TEST_CASE("split_matches: 10 matches give a deterministic 8/1/1") {
  std::vector<MatchStream> streams;
  for (int i = 0; i < 10; ++i)
    streams.push_back(make_match("m" + std::to_string(i), 2));
  const auto m1 = ingest::split_matches(streams, 7, 100000, 10000);
  const auto m2 = ingest::split_matches(streams, 7, 100000, 10000);

  CHECK(m1.matches_in(Split::Train).size() == 8);
  CHECK(m1.matches_in(Split::Valid).size() == 1);
  CHECK(m1.matches_in(Split::Test).size() == 1);
  CHECK(m1.assignment == m2.assignment);  // deterministic across runs
  CHECK(m1.train_rows == 100000);
  CHECK(m1.valid_rows == 10000);

  // Partition property: disjoint and exhaustive.
  std::size_t total = 0;
  for (Split s : {Split::Train, Split::Valid, Split::Test})
    total += m1.matches_in(s).size();
  CHECK(total == streams.size());
}

TEST_CASE("different seeds give different assignments, same counts") {
  std::vector<MatchStream> streams;
  for (int i = 0; i < 20; ++i)
    streams.push_back(make_match("m" + std::to_string(i), 2));
  const auto a = ingest::split_matches(streams, 1, 0, 0);
  const auto b = ingest::split_matches(streams, 2, 0, 0);
  CHECK(a.matches_in(Split::Train).size() == b.matches_in(Split::Train).size());
  CHECK(a.assignment != b.assignment);
}

TEST_CASE("fewer than 3 matches in a league is an error") {
  std::vector<MatchStream> streams = {make_match("m1", 2), make_match("m2", 2)};
  CHECK_THROWS_WITH_AS(ingest::split_matches(streams, 1, 0, 0),
                       doctest::Contains("at least 3"), Error);
}

TEST_CASE("three matches split 1/1/1") {
  std::vector<MatchStream> streams = {make_match("m1", 2), make_match("m2", 2),
                                      make_match("m3", 2)};
  const auto m = ingest::split_matches(streams, 5, 0, 0);
  CHECK(m.matches_in(Split::Train).size() == 1);
  CHECK(m.matches_in(Split::Valid).size() == 1);
  CHECK(m.matches_in(Split::Test).size() == 1);
}
