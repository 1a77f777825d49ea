#include "nmstpp/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "nmstpp/io.hpp"
#include "nmstpp/types.hpp"

namespace nmstpp::svg {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kMargin = 56;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string line_chart(const std::vector<Series>& series,
                       const std::string& title, const std::string& x_label,
                       const std::string& y_label) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  auto px = [&](double x) {
    return kMargin + (x - xmin) / (xmax - xmin) * (kWidth - 2 * kMargin);
  };
  auto py = [&](double y) {
    return kHeight - kMargin -
           (y - ymin) / (ymax - ymin) * (kHeight - 2 * kMargin);
  };

  std::string out =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
      std::to_string(kWidth) + "\" height=\"" + std::to_string(kHeight) +
      "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + std::to_string(kWidth / 2) +
         "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(title) + "</text>\n";
  // axes
  out += "<line x1=\"" + num(kMargin) + "\" y1=\"" + num(kHeight - kMargin) +
         "\" x2=\"" + num(kWidth - kMargin) + "\" y2=\"" +
         num(kHeight - kMargin) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(kMargin) + "\" y1=\"" + num(kMargin) +
         "\" x2=\"" + num(kMargin) + "\" y2=\"" + num(kHeight - kMargin) +
         "\" stroke=\"black\"/>\n";
  out += "<text x=\"" + std::to_string(kWidth / 2) + "\" y=\"" +
         std::to_string(kHeight - 12) + "\" text-anchor=\"middle\">" +
         escape(x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + std::to_string(kHeight / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         std::to_string(kHeight / 2) + ")\">" + escape(y_label) + "</text>\n";
  for (double frac : {0.0, 0.5, 1.0}) {
    out += "<text x=\"" + num(px(xmin + frac * (xmax - xmin))) + "\" y=\"" +
           num(kHeight - kMargin + 16) + "\" text-anchor=\"middle\">" +
           num(xmin + frac * (xmax - xmin)) + "</text>\n";
    out += "<text x=\"" + num(kMargin - 6) + "\" y=\"" +
           num(py(ymin + frac * (ymax - ymin)) + 4) +
           "\" text-anchor=\"end\">" + num(ymin + frac * (ymax - ymin)) +
           "</text>\n";
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      points += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    out += "<text x=\"" + num(kWidth - kMargin + 4) + "\" y=\"" +
           num(kMargin + 16.0 * static_cast<double>(si)) + "\" fill=\"" +
           color + "\">" + escape(s.label) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string heatmap(const Eigen::MatrixXd& values, const std::string& title) {
  const auto rows = values.rows(), cols = values.cols();
  if (rows == 0 || cols == 0) throw Error("heatmap: empty matrix");
  const double vmin = values.minCoeff(), vmax = values.maxCoeff();
  const double span = vmax > vmin ? vmax - vmin : 1.0;
  const double cell_w =
      static_cast<double>(kWidth - 2 * kMargin) / static_cast<double>(cols);
  const double cell_h =
      static_cast<double>(kHeight - 2 * kMargin) / static_cast<double>(rows);

  std::string out =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
      std::to_string(kWidth) + "\" height=\"" + std::to_string(kHeight) +
      "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + std::to_string(kWidth / 2) +
         "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(title) + "</text>\n";
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double u = (values(r, c) - vmin) / span;
      const int shade = static_cast<int>(255.0 * (1.0 - u));
      out += "<rect x=\"" + num(kMargin + static_cast<double>(c) * cell_w) +
             "\" y=\"" + num(kMargin + static_cast<double>(r) * cell_h) +
             "\" width=\"" + num(cell_w) + "\" height=\"" + num(cell_h) +
             "\" fill=\"rgb(" + std::to_string(shade) + "," +
             std::to_string(shade) + ",255)\"/>\n";
    }
  }
  out += "<text x=\"" + num(kMargin) + "\" y=\"" + num(kHeight - kMargin + 16) +
         "\">min " + num(vmin) + "</text>\n";
  out += "<text x=\"" + num(kWidth - kMargin) + "\" y=\"" +
         num(kHeight - kMargin + 16) + "\" text-anchor=\"end\">max " +
         num(vmax) + "</text>\n";
  out += "</svg>\n";
  return out;
}

void save(const std::string& path, const std::string& svg) {
  io::write_text_atomic(path, svg);
}

}  // namespace nmstpp::svg
