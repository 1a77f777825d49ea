#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nmstpp/io.hpp"
#include "nmstpp/types.hpp"

using namespace nmstpp;

TEST_CASE("format_double round-trips exactly") {
  for (double v : {0.0, 1.0, -3.25, 0.1, 1e-12, 123456.789, 2.2250738585072014e-308}) {
    CHECK(io::parse_double(io::format_double(v)) == v);
  }
}

TEST_CASE("csv escaping handles quotes and commas") {
  CHECK(io::csv_escape("plain") == "plain");
  CHECK(io::csv_escape("a,b") == "\"a,b\"");
  CHECK(io::csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("csv writer/reader round trip with metadata line") {
  const auto dir = std::filesystem::temp_directory_path() / "nmstpp_io_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "t.csv").string();

  io::CsvWriter w({"a", "b"}, 0xdeadbeefULL);
  w.row({"1", "x,y"});
  w.row({"2", ""});
  w.save(path);

  const auto t = io::read_csv(path);
  REQUIRE(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x,y");
  CHECK(t.rows[1][1] == "");
  REQUIRE(t.comments.size() == 1);
  CHECK(t.comments[0].find("config_hash=00000000deadbeef") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("write_text_atomic leaves no partial file on success") {
  const auto dir = std::filesystem::temp_directory_path() / "nmstpp_io_atomic";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "out.txt").string();
  io::write_text_atomic(path, "hello");
  CHECK(std::filesystem::exists(path));
  CHECK_FALSE(std::filesystem::exists(path + ".partial"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("row width mismatch is rejected") {
  io::CsvWriter w({"a", "b"}, 0);
  CHECK_THROWS_AS(w.row({"only-one"}), Error);
}
