#include "depthpatch/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "depthpatch/core.hpp"

namespace fs = std::filesystem;

namespace depthpatch {
namespace {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return int(i);
    fail(Errc::corrupt_stream, "CSV missing column: " + name);
  }
};

Csv read_csv(const std::string& path) {
  if (!fs::exists(path)) fail(Errc::missing_file, "CSV not found: " + path);
  std::ifstream in(path);
  Csv csv;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      csv.header = std::move(cells);
      first = false;
    } else {
      csv.rows.push_back(std::move(cells));
    }
  }
  return csv;
}

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
  cv::Scalar color;
};

const cv::Scalar kPalette[] = {
    {180, 60, 30}, {40, 110, 200}, {50, 160, 60}, {30, 40, 180}, {150, 60, 160}, {20, 140, 170},
};

void line_chart(const std::vector<Series>& series, const std::string& title,
                const std::string& xlabel, const std::string& ylabel, const std::string& path) {
  const int W = 720, H = 480;
  const int ml = 80, mr = 30, mt = 50, mb = 60;
  cv::Mat canvas(H, W, CV_8UC3, cv::Scalar(255, 255, 255));

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Series& s : series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
  }
  if (ymin > ymax) {
    ymin = 0;
    ymax = 1;
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  ymin = std::min(ymin, 0.0);

  auto px = [&](double x) { return ml + int((x - xmin) / (xmax - xmin) * (W - ml - mr)); };
  auto py = [&](double y) { return H - mb - int((y - ymin) / (ymax - ymin) * (H - mt - mb)); };

  cv::line(canvas, {ml, H - mb}, {W - mr, H - mb}, {0, 0, 0}, 1);
  cv::line(canvas, {ml, H - mb}, {ml, mt}, {0, 0, 0}, 1);

  char buf[64];
  for (int tick = 0; tick <= 4; ++tick) {
    const double xv = xmin + (xmax - xmin) * tick / 4.0;
    const double yv = ymin + (ymax - ymin) * tick / 4.0;
    std::snprintf(buf, sizeof(buf), "%.3g", xv);
    cv::putText(canvas, buf, {px(xv) - 12, H - mb + 20}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                {60, 60, 60}, 1);
    std::snprintf(buf, sizeof(buf), "%.3g", yv);
    cv::putText(canvas, buf, {10, py(yv) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {60, 60, 60}, 1);
    cv::line(canvas, {px(xv), H - mb}, {px(xv), H - mb + 4}, {0, 0, 0}, 1);
    cv::line(canvas, {ml - 4, py(yv)}, {ml, py(yv)}, {0, 0, 0}, 1);
  }

  int li = 0;
  for (const Series& s : series) {
    for (size_t i = 0; i + 1 < s.points.size(); ++i)
      cv::line(canvas, {px(s.points[i].first), py(s.points[i].second)},
               {px(s.points[i + 1].first), py(s.points[i + 1].second)}, s.color, 2);
    for (const auto& [x, y] : s.points)
      cv::circle(canvas, {px(x), py(y)}, 3, s.color, cv::FILLED);
    cv::putText(canvas, s.label, {W - mr - 180, mt + 18 * (li + 1)}, cv::FONT_HERSHEY_SIMPLEX,
                0.45, s.color, 1);
    ++li;
  }

  cv::putText(canvas, title, {ml, 28}, cv::FONT_HERSHEY_SIMPLEX, 0.6, {0, 0, 0}, 1);
  cv::putText(canvas, xlabel, {W / 2 - 40, H - 16}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {0, 0, 0}, 1);
  cv::putText(canvas, ylabel, {8, mt - 10}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {0, 0, 0}, 1);

  if (!cv::imwrite(path, canvas)) fail(Errc::io_failure, "cannot write plot: " + path);
}

}  // namespace

void plot_ed_vs_distance(const std::string& sweep_csv, const std::string& out_png) {
  const Csv csv = read_csv(sweep_csv);
  const int cd = csv.col("distance_m"), ce = csv.col("e_d"), cs = csv.col("skipped");

  std::map<double, std::pair<double, int>> by_distance;
  for (const auto& row : csv.rows) {
    if (std::stoi(row[cs]) != 0) continue;
    auto& [sum, n] = by_distance[std::stod(row[cd])];
    sum += std::stod(row[ce]);
    n += 1;
  }

  Series s;
  s.label = "mean E_d";
  s.color = kPalette[0];
  for (const auto& [z, agg] : by_distance) s.points.emplace_back(z, agg.first / agg.second);
  line_chart({s}, "Depth error vs distance", "distance (m)", "E_d (m)", out_png);
}

void plot_error_cdf(const std::string& errors_csv, const std::string& out_png) {
  const Csv csv = read_csv(errors_csv);
  const int ce = csv.col("abs_error_m");

  std::vector<double> errors;
  errors.reserve(csv.rows.size());
  for (const auto& row : csv.rows) errors.push_back(std::stod(row[ce]));
  std::sort(errors.begin(), errors.end());

  Series s;
  s.label = "error CDF";
  s.color = kPalette[1];
  const size_t n = errors.size();
  const size_t stride = std::max<size_t>(1, n / 512);
  for (size_t i = 0; i < n; i += stride)
    s.points.emplace_back(errors[i], double(i + 1) / double(n));
  if (n > 0) s.points.emplace_back(errors.back(), 1.0);
  line_chart({s}, "Depth error CDF", "abs error (m)", "fraction of pixels", out_png);
}

std::vector<std::string> plot_defenses(const std::string& defense_csv,
                                       const std::string& out_dir) {
  const Csv csv = read_csv(defense_csv);
  const int cf = csv.col("family"), cp = csv.col("parameter"), cb = csv.col("benign_e_d"),
            ca = csv.col("attack_e_d");

  std::map<std::string, std::vector<std::array<double, 3>>> families;
  for (const auto& row : csv.rows)
    families[row[cf]].push_back(
        {std::stod(row[cp]), std::stod(row[cb]), std::stod(row[ca])});

  std::vector<std::string> written;
  for (auto& [family, rows] : families) {
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a[0] < b[0]; });
    Series benign{"benign error", {}, kPalette[2]};
    Series attack{"attack error", {}, kPalette[3]};
    for (const auto& r : rows) {
      benign.points.emplace_back(r[0], r[1]);
      attack.points.emplace_back(r[0], r[2]);
    }
    const std::string path = (fs::path(out_dir) / ("defense_" + family + ".png")).string();
    line_chart({benign, attack}, "Defense: " + family, "parameter", "E_d (m)", path);
    written.push_back(path);
  }
  return written;
}

std::vector<std::string> plot_all(const std::string& in_dir, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> written;

  const fs::path sweep = fs::path(in_dir) / "sweep.csv";
  if (fs::exists(sweep)) {
    const std::string out = (fs::path(out_dir) / "ed_vs_distance.png").string();
    plot_ed_vs_distance(sweep.string(), out);
    written.push_back(out);
  }
  const fs::path errors = fs::path(in_dir) / "errors.csv";
  if (fs::exists(errors)) {
    const std::string out = (fs::path(out_dir) / "error_cdf.png").string();
    plot_error_cdf(errors.string(), out);
    written.push_back(out);
  }
  const fs::path defense = fs::path(in_dir) / "defense.csv";
  if (fs::exists(defense)) {
    const auto files = plot_defenses(defense.string(), out_dir);
    written.insert(written.end(), files.begin(), files.end());
  }
  if (written.empty())
    fail(Errc::missing_file, "no plottable CSVs (sweep.csv, errors.csv, defense.csv) in " + in_dir);
  return written;
}

}  // namespace depthpatch
