#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace nmstpp::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Simple polyline chart; axes are scaled to the data's bounding box.
std::string line_chart(const std::vector<Series>& series,
                       const std::string& title, const std::string& x_label,
                       const std::string& y_label);

/// Grayscale-to-blue heatmap of a matrix, row 0 at the top.
std::string heatmap(const Eigen::MatrixXd& values, const std::string& title);

void save(const std::string& path, const std::string& svg);

}  // namespace nmstpp::svg
