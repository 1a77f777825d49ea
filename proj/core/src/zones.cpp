#include "nmstpp/zones.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>

#include <nlohmann/json.hpp>

namespace nmstpp::features {

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a_double(std::uint64_t h, double d) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(d));
  std::memcpy(&bits, &d, sizeof(bits));
  return fnv1a(h, bits);
}

}  // namespace

ZoneMap ZoneMap::juego_de_posicion() {
  const std::vector<double> xb = {0, 25, 50, 75, 100};
  const std::vector<double> yb = {0, 19, 37, 63, 81, 100};
  std::vector<int> cells(4 * 5);
  for (int cx = 0; cx < 4; ++cx)
    for (int cy = 0; cy < 5; ++cy) cells[cx * 5 + cy] = cx * 5 + cy + 1;
  std::vector<int> areas(kNumZones);
  for (int z = 1; z <= kNumZones; ++z) {
    const int cx = (z - 1) / 5;
    const double mid_x = (xb[cx] + xb[cx + 1]) / 2.0;
    areas[z - 1] = mid_x < 50.0 ? 0 : (mid_x < 75.0 ? 1 : 2);
  }
  return ZoneMap(xb, yb, cells, areas);
}

ZoneMap::ZoneMap(std::vector<double> x_breaks, std::vector<double> y_breaks,
                 std::vector<int> cell_to_zone, std::vector<int> zone_to_area)
    : x_breaks_(std::move(x_breaks)),
      y_breaks_(std::move(y_breaks)),
      cell_to_zone_(std::move(cell_to_zone)),
      zone_to_area_(std::move(zone_to_area)) {
  for (const auto* breaks : {&x_breaks_, &y_breaks_}) {
    if (breaks->size() < 2 || breaks->front() != 0.0 || breaks->back() != 100.0 ||
        !std::is_sorted(breaks->begin(), breaks->end(),
                        std::less_equal<double>()))
      throw Error("ZoneMap: breaks must ascend strictly from 0 to 100");
  }
  const std::size_t cells =
      static_cast<std::size_t>(num_x_cells()) * num_y_cells();
  if (cell_to_zone_.size() != cells)
    throw Error("ZoneMap: cell table size does not match breaks");
  std::vector<int> seen(kNumZones, 0);
  for (int z : cell_to_zone_) {
    if (z < 1 || z > kNumZones) throw Error("ZoneMap: zone id out of range");
    seen[z - 1]++;
  }
  if (std::count(seen.begin(), seen.end(), 0) != 0)
    throw Error("ZoneMap: every zone id 1..20 must appear in the cell table");
  if (zone_to_area_.size() != kNumZones)
    throw Error("ZoneMap: area table must have 20 entries");
  for (int a : zone_to_area_)
    if (a < 0 || a > 2) throw Error("ZoneMap: area must be 0, 1 or 2");

  // Centroid of a zone = mean of its cells' midpoints.
  centroids_.assign(kNumZones, {0.0, 0.0});
  std::vector<int> counts(kNumZones, 0);
  for (int cx = 0; cx < num_x_cells(); ++cx) {
    for (int cy = 0; cy < num_y_cells(); ++cy) {
      const int z = cell_to_zone_[cx * num_y_cells() + cy];
      centroids_[z - 1].first += (x_breaks_[cx] + x_breaks_[cx + 1]) / 2.0;
      centroids_[z - 1].second += (y_breaks_[cy] + y_breaks_[cy + 1]) / 2.0;
      counts[z - 1]++;
    }
  }
  for (int z = 0; z < kNumZones; ++z) {
    centroids_[z].first /= counts[z];
    centroids_[z].second /= counts[z];
  }
}

int ZoneMap::cell_index(double v, const std::vector<double>& breaks) const {
  // Half-open cells, last cell closed above.
  const int n = static_cast<int>(breaks.size()) - 1;
  auto it = std::upper_bound(breaks.begin(), breaks.end(), v);
  int idx = static_cast<int>(it - breaks.begin()) - 1;
  return std::clamp(idx, 0, n - 1);
}

int ZoneMap::zone_of(double x, double y) const {
  if (x < 0.0 || x > 100.0 || y < 0.0 || y > 100.0)
    throw Error("zone_of: coordinates must lie in [0,100]");
  const int cx = cell_index(x, x_breaks_);
  const int cy = cell_index(y, y_breaks_);
  return cell_to_zone_[cx * num_y_cells() + cy];
}

int ZoneMap::area_of(int zone) const {
  if (zone < 1 || zone > kNumZones) throw Error("area_of: zone id out of range");
  return zone_to_area_[zone - 1];
}

std::pair<double, double> ZoneMap::centroid(int zone) const {
  if (zone < 1 || zone > kNumZones)
    throw Error("centroid: zone id out of range");
  return centroids_[zone - 1];
}

std::uint64_t ZoneMap::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : x_breaks_) h = fnv1a_double(h, v);
  for (double v : y_breaks_) h = fnv1a_double(h, v);
  for (int v : cell_to_zone_) h = fnv1a(h, static_cast<std::uint64_t>(v));
  for (int v : zone_to_area_) h = fnv1a(h, static_cast<std::uint64_t>(v));
  return h;
}

ZoneMap ZoneMap::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("ZoneMap: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("ZoneMap: invalid JSON in " + path + ": " + e.what());
  }
  try {
    return ZoneMap(j.at("x_breaks").get<std::vector<double>>(),
                   j.at("y_breaks").get<std::vector<double>>(),
                   j.at("cell_to_zone").get<std::vector<int>>(),
                   j.at("zone_to_area").get<std::vector<int>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error("ZoneMap: missing field in " + path + ": " + e.what());
  }
}

void ZoneMap::save_json(const std::string& path) const {
  nlohmann::ordered_json j;
  j["x_breaks"] = x_breaks_;
  j["y_breaks"] = y_breaks_;
  j["cell_to_zone"] = cell_to_zone_;
  j["zone_to_area"] = zone_to_area_;
  std::ofstream out(path);
  if (!out) throw Error("ZoneMap: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace nmstpp::features
