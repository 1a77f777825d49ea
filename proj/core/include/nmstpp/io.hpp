#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nmstpp::io {

/// Shortest decimal form that round-trips the exact double value.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& context = "");
long long parse_int(const std::string& s, const std::string& context = "");

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Writes content to `path + ".partial"` first and renames on success, so an
/// interrupted run leaves only a .partial file behind.
void write_text_atomic(const std::string& path, const std::string& content);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;  // leading '#' lines, metadata

  std::size_t column(const std::string& name) const;  // throws if absent
};

/// RFC-4180-ish reader: quoted fields, leading '#' comment lines skipped.
CsvTable read_csv(const std::string& path);

std::string csv_escape(const std::string& field);

/// CSV emitter for pipeline artifacts. Every file starts with a metadata
/// comment carrying the tool version and the pipeline config hash.
class CsvWriter {
 public:
  CsvWriter(std::vector<std::string> header, std::uint64_t config_hash);

  void row(const std::vector<std::string>& cells);
  void save(const std::string& path) const;
  const std::string& content() const { return buffer_; }

 private:
  std::size_t columns_;
  std::string buffer_;
};

}  // namespace nmstpp::io
