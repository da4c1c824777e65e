#include "bvgae/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "bvgae/io.hpp"

namespace bvgae {

std::vector<AttributionRow> attribution_rows(const std::vector<AttributionResult>& results,
                                             const GroupPartition& partition,
                                             const std::vector<std::string>& feature_names, std::uint64_t run_seed) {
  const AttributionResult* grad = nullptr;
  for (const auto& r : results) {
    if (r.method == Method::Grad) grad = &r;
  }
  std::vector<AttributionRow> rows;
  for (const auto& r : results) {
    if (r.phi_group.cols() != static_cast<Eigen::Index>(feature_names.size())) {
      throw std::invalid_argument("attribution_rows: feature names do not match the score columns");
    }
    const Eigen::MatrixXi sign = estimate_sign(grad != nullptr ? *grad : r);
    for (Eigen::Index k = 0; k < r.phi_group.rows(); ++k) {
      for (Eigen::Index j = 0; j < r.phi_group.cols(); ++j) {
        rows.push_back({std::string(method_name(r.method)), partition.name(static_cast<int>(k)),
                        feature_names[static_cast<std::size_t>(j)], r.phi_group(k, j), sign(k, j), run_seed});
      }
    }
  }
  return rows;
}

std::string attribution_csv(const std::vector<AttributionRow>& rows) {
  std::string out = "method,group,feature,score,sign,run_seed\n";
  for (const auto& r : rows) {
    out += r.method + ',' + csv_escape(r.group) + ',' + csv_escape(r.feature) + ',' + format_double(r.score) + ',' +
           std::to_string(r.sign) + ',' + std::to_string(r.run_seed) + '\n';
  }
  return out;
}

std::vector<AttributionRow> read_attribution_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::string src = path.string();
  const std::size_t m = t.column("method", src), g = t.column("group", src), f = t.column("feature", src),
                    s = t.column("score", src), sg = t.column("sign", src), rs = t.column("run_seed", src);
  std::vector<AttributionRow> rows;
  rows.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string where = src + ":" + std::to_string(i + 2);
    AttributionRow r;
    r.method = row[m];
    r.group = row[g];
    r.feature = row[f];
    r.score = parse_double(row[s], where);
    const double sign = parse_double(row[sg], where);
    if (sign != -1.0 && sign != 0.0 && sign != 1.0) throw IoError(where + ": sign must be -1, 0 or 1");
    r.sign = static_cast<int>(sign);
    try {
      r.run_seed = std::stoull(row[rs]);
    } catch (const std::exception&) {
      throw IoError(where + ": bad run_seed '" + row[rs] + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

bool discarded_cell(const std::string& group, const std::string& feature) {
  constexpr std::string_view prefix = "plant:";
  if (feature.compare(0, prefix.size(), prefix) != 0) return false;
  return feature.substr(prefix.size()) != group;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct CellSeries {
  std::vector<std::pair<std::string, std::string>> cells;  // (group, feature) in first-run order
  std::vector<std::vector<double>> scores;                 // [cell][run]
  std::vector<std::vector<int>> signs;
};

CellSeries collect(const std::vector<std::vector<AttributionRow>>& runs, const std::string& method) {
  if (runs.empty()) throw std::invalid_argument("report: needs at least one run");
  CellSeries out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::vector<char> seen(out.cells.size(), 0);
    std::size_t count = 0;
    for (const auto& row : runs[r]) {
      if (row.method != method || discarded_cell(row.group, row.feature)) continue;
      const auto key = std::make_pair(row.group, row.feature);
      auto it = index.find(key);
      if (it == index.end()) {
        if (r > 0) throw std::invalid_argument("report: run " + std::to_string(r + 1) + " has cell (" + row.group + ", " +
                                               row.feature + ") missing from run 1");
        it = index.emplace(key, out.cells.size()).first;
        out.cells.push_back(key);
        out.scores.emplace_back();
        out.signs.emplace_back();
        seen.push_back(0);
      }
      if (seen[it->second]) throw std::invalid_argument("report: duplicate cell (" + row.group + ", " + row.feature + ")");
      seen[it->second] = 1;
      ++count;
      out.scores[it->second].push_back(row.score);
      out.signs[it->second].push_back(row.sign);
    }
    if (count != out.cells.size()) {
      throw std::invalid_argument("report: run " + std::to_string(r + 1) + " has " + std::to_string(count) +
                                  " cells for method '" + method + "', run 1 has " + std::to_string(out.cells.size()));
    }
  }
  if (out.cells.empty()) throw std::invalid_argument("report: no rows for method '" + method + "'");
  return out;
}

}  // namespace

RankReport median_rank_report(const std::vector<std::vector<AttributionRow>>& runs, const std::string& method) {
  const CellSeries series = collect(runs, method);
  const std::size_t n_cells = series.cells.size();
  std::vector<std::vector<double>> ranks(n_cells);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::vector<std::size_t> order(n_cells);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(series.scores[a][r]) > std::abs(series.scores[b][r]);
    });
    for (std::size_t pos = 0; pos < n_cells; ++pos) ranks[order[pos]].push_back(static_cast<double>(pos + 1));
  }
  RankReport report;
  for (std::size_t c = 0; c < n_cells; ++c) {
    RankRow row;
    row.median_rank = median(ranks[c]);
    row.median_score = median(series.scores[c]);
    row.group = series.cells[c].first;
    row.feature = series.cells[c].second;
    const auto positive = std::count_if(series.signs[c].begin(), series.signs[c].end(), [](int s) { return s > 0; });
    row.grad_positive = static_cast<double>(positive) / static_cast<double>(runs.size());
    report.push_back(std::move(row));
  }
  std::stable_sort(report.begin(), report.end(),
                   [](const RankRow& a, const RankRow& b) { return a.median_rank < b.median_rank; });
  return report;
}

std::string rank_report_csv(const RankReport& report) {
  std::string out = "median_rank,median_score,plant,feature,grad_positive\n";
  for (const auto& r : report) {
    out += format_double(r.median_rank) + ',' + format_double(r.median_score) + ',' + csv_escape(r.group) + ',' +
           csv_escape(r.feature) + ',' + format_double(r.grad_positive) + '\n';
  }
  return out;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string strip_plot_svg(const std::vector<std::vector<AttributionRow>>& runs, const std::string& method) {
  const CellSeries s = collect(runs, method);
  const double lane = 14.0, top = 20.0, height = 240.0, left = 60.0;
  double lo = 0.0, hi = 0.0;
  for (const auto& v : s.scores) {
    for (double x : v) lo = std::min(lo, x), hi = std::max(hi, x);
  }
  if (hi == lo) hi = lo + 1.0;
  auto y_of = [&](double v) { return top + height * (hi - v) / (hi - lo); };
  const double width = left + lane * static_cast<double>(s.cells.size()) + 20.0;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
                    num(top + height + 120.0) + "\">\n";
  out += "<text x=\"4\" y=\"14\" font-size=\"12\">" + xml_escape(method) + " scores</text>\n";
  out += "<line x1=\"" + num(left) + "\" x2=\"" + num(width - 10.0) + "\" y1=\"" + num(y_of(0.0)) + "\" y2=\"" +
         num(y_of(0.0)) + "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t c = 0; c < s.cells.size(); ++c) {
    const double x = left + lane * (static_cast<double>(c) + 0.5);
    for (std::size_t r = 0; r < s.scores[c].size(); ++r) {
      const char* colour = s.signs[c][r] > 0 ? "#2a9d3a" : (s.signs[c][r] < 0 ? "#c0392b" : "#3366cc");
      out += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y_of(s.scores[c][r])) + "\" r=\"2.5\" fill=\"" + colour +
             "\" fill-opacity=\"0.7\"/>\n";
    }
    const std::string label = s.cells[c].first + ":" + s.cells[c].second;
    out += "<text font-size=\"9\" transform=\"translate(" + num(x + 3.0) + "," + num(top + height + 6.0) +
           ") rotate(60)\">" + xml_escape(label) + "</text>\n";
  }
  out += "<text x=\"4\" y=\"" + num(top + 8.0) + "\" font-size=\"9\">" + num(hi) + "</text>\n";
  out += "<text x=\"4\" y=\"" + num(top + height) + "\" font-size=\"9\">" + num(lo) + "</text>\n";
  out += "</svg>\n";
  return out;
}

std::string sign_grid_svg(const std::vector<std::vector<AttributionRow>>& runs, const std::string& method) {
  const CellSeries s = collect(runs, method);
  std::vector<std::string> groups, features;
  for (const auto& [g, f] : s.cells) {
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    if (std::find(features.begin(), features.end(), f) == features.end()) features.push_back(f);
  }
  const double cell = 12.0, left = 70.0, top = 24.0;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    num(left + cell * static_cast<double>(features.size()) + 10.0) + "\" height=\"" +
                    num(top + cell * static_cast<double>(groups.size()) + 10.0) + "\">\n";
  out += "<text x=\"4\" y=\"14\" font-size=\"12\">" + xml_escape(method) + " median sign</text>\n";
  for (std::size_t c = 0; c < s.cells.size(); ++c) {
    const auto gi = std::find(groups.begin(), groups.end(), s.cells[c].first) - groups.begin();
    const auto fi = std::find(features.begin(), features.end(), s.cells[c].second) - features.begin();
    const double m = median(s.scores[c]);
    const char* colour = m > 0 ? "#2a9d3a" : (m < 0 ? "#c0392b" : "#cccccc");
    out += "<rect x=\"" + num(left + cell * static_cast<double>(fi)) + "\" y=\"" + num(top + cell * static_cast<double>(gi)) +
           "\" width=\"" + num(cell - 1.0) + "\" height=\"" + num(cell - 1.0) + "\" fill=\"" + colour + "\"><title>" +
           xml_escape(s.cells[c].first + " / " + s.cells[c].second) + "</title></rect>\n";
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out += "<text x=\"4\" y=\"" + num(top + cell * (static_cast<double>(g) + 0.8)) + "\" font-size=\"9\">" +
           xml_escape(groups[g]) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace bvgae
