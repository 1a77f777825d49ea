#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmstpp/types.hpp"

namespace nmstpp::features {

/// Rectangular pitch partition into 20 zones with per-zone scoring areas.
///
/// Cells are half-open [x_lo,x_hi) x [y_lo,y_hi); the last cell on each axis
/// is closed on its upper edge so the map tiles [0,100]^2 exactly.
class ZoneMap {
 public:
  /// 4 x-columns x 5 y-lanes, ids row-major from (x-low, y-low), areas by
  /// centroid x: <50 -> 0, [50,75) -> 1, >=75 -> 2.
  static ZoneMap juego_de_posicion();

  ZoneMap(std::vector<double> x_breaks, std::vector<double> y_breaks,
          std::vector<int> cell_to_zone, std::vector<int> zone_to_area);

  static ZoneMap load_json(const std::string& path);
  void save_json(const std::string& path) const;

  int zone_of(double x, double y) const;
  int area_of(int zone) const;  // 0, 1 or 2
  std::pair<double, double> centroid(int zone) const;

  int num_x_cells() const { return static_cast<int>(x_breaks_.size()) - 1; }
  int num_y_cells() const { return static_cast<int>(y_breaks_.size()) - 1; }
  const std::vector<double>& x_breaks() const { return x_breaks_; }
  const std::vector<double>& y_breaks() const { return y_breaks_; }

  /// Stable content hash, embedded in checkpoints to detect map mismatch.
  std::uint64_t hash() const;

 private:
  int cell_index(double v, const std::vector<double>& breaks) const;

  std::vector<double> x_breaks_;
  std::vector<double> y_breaks_;
  std::vector<int> cell_to_zone_;  // cx * num_y_cells + cy -> zone id
  std::vector<int> zone_to_area_;  // zone id - 1 -> area
  std::vector<std::pair<double, double>> centroids_;  // zone id - 1
};

}  // namespace nmstpp::features
