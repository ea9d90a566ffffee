#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "distaudit/errors.hpp"

namespace distaudit::analysis {

/// Detected-error counts, one row per SUBTPA and one column per trial.
struct TrialMatrix {
  size_t n_subtpas = 0;
  size_t n_trials = 0;
  std::vector<uint64_t> cells;  // row-major

  uint64_t& at(size_t row, size_t col) { return cells[row * n_trials + col]; }
  uint64_t at(size_t row, size_t col) const { return cells[row * n_trials + col]; }

  static TrialMatrix zeros(size_t rows, size_t cols) {
    TrialMatrix m;
    m.n_subtpas = rows;
    m.n_trials = cols;
    m.cells.assign(rows * cols, 0);
    return m;
  }

  std::vector<uint64_t> column_totals() const {
    std::vector<uint64_t> t(n_trials, 0);
    for (size_t r = 0; r < n_subtpas; ++r) {
      for (size_t c = 0; c < n_trials; ++c) t[c] += at(r, c);
    }
    return t;
  }
};

/// Max / min / mean / population standard deviation of one SUBTPA's counts.
struct SummaryRow {
  uint64_t max = 0;
  uint64_t min = 0;
  double mean = 0.0;
  double stddev = 0.0;  // divide-by-N
};

inline std::vector<SummaryRow> summarize(const TrialMatrix& m) {
  if (m.n_trials == 0 || m.n_subtpas == 0) throw invalid_parameter_error("summarize needs at least one trial");
  std::vector<SummaryRow> rows(m.n_subtpas);
  for (size_t r = 0; r < m.n_subtpas; ++r) {
    SummaryRow& s = rows[r];
    s.max = 0;
    s.min = UINT64_MAX;
    double sum = 0.0;
    for (size_t c = 0; c < m.n_trials; ++c) {
      const uint64_t v = m.at(r, c);
      s.max = std::max(s.max, v);
      s.min = std::min(s.min, v);
      sum += static_cast<double>(v);
    }
    s.mean = sum / static_cast<double>(m.n_trials);
    double sq = 0.0;
    for (size_t c = 0; c < m.n_trials; ++c) {
      const double d = static_cast<double>(m.at(r, c)) - s.mean;
      sq += d * d;
    }
    s.stddev = std::sqrt(sq / static_cast<double>(m.n_trials));
  }
  return rows;
}

struct FittedLine {
  double slope = 0.0;      // A
  double intercept = 0.0;  // B
};

/// Solve the two least-squares normal equations
///   (sum x^2) A + (sum x) B = sum x y
///   (sum x)   A + N B       = sum y
/// by Cramer's rule.
inline FittedLine fit_from_sums(double sxx, double sx, double sxy, double sy, double n) {
  const double det = sxx * n - sx * sx;
  if (std::abs(det) < 1e-12) throw singular_fit_error("normal equations are singular (degenerate x values)");
  return {(sxy * n - sy * sx) / det, (sxx * sy - sx * sxy) / det};
}

inline FittedLine fit_line(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw singular_fit_error("line fitting needs at least two points");
  double sxx = 0, sx = 0, sxy = 0, sy = 0;
  for (auto& [x, y] : points) {
    sxx += x * x;
    sx += x;
    sxy += x * y;
    sy += y;
  }
  return fit_from_sums(sxx, sx, sxy, sy, static_cast<double>(points.size()));
}

inline double mean_squared_residual(const std::vector<std::pair<double, double>>& points,
                                    const FittedLine& line) {
  double sum = 0.0;
  for (auto& [x, y] : points) {
    const double r = y - (line.slope * x + line.intercept);
    sum += r * r;
  }
  return sum / static_cast<double>(points.size());
}

/// Points for the per-SUBTPA mean-detection line: x = SUBTPA index (1-based),
/// y = mean detected count.
inline std::vector<std::pair<double, double>> mean_points(const TrialMatrix& m) {
  auto rows = summarize(m);
  std::vector<std::pair<double, double>> pts;
  pts.reserve(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) pts.emplace_back(static_cast<double>(r + 1), rows[r].mean);
  return pts;
}

struct DispersionReport {
  double residual_a = 0.0;
  double residual_b = 0.0;
  int smaller = 0;  // -1: a, +1: b, 0: tie
};

/// Mean squared residual of each matrix's per-SUBTPA means about its own
/// fitted line; the smaller residual marks the tighter (more uniform) run.
inline DispersionReport dispersion_compare(const TrialMatrix& a, const TrialMatrix& b) {
  if (a.n_subtpas != b.n_subtpas || a.n_trials != b.n_trials) {
    throw invalid_parameter_error("dispersion comparison requires matrices of the same shape");
  }
  auto pa = mean_points(a);
  auto pb = mean_points(b);
  DispersionReport rep;
  rep.residual_a = mean_squared_residual(pa, fit_line(pa));
  rep.residual_b = mean_squared_residual(pb, fit_line(pb));
  rep.smaller = rep.residual_a < rep.residual_b ? -1 : (rep.residual_b < rep.residual_a ? 1 : 0);
  return rep;
}

/// Mean-rank grouping: integer-rounded mean -> SUBTPA ids (1-based).
inline std::map<long long, std::vector<uint32_t>> bucket_by_mean(const TrialMatrix& m) {
  std::map<long long, std::vector<uint32_t>> buckets;
  auto rows = summarize(m);
  for (size_t r = 0; r < rows.size(); ++r) {
    buckets[std::llround(rows[r].mean)].push_back(static_cast<uint32_t>(r + 1));
  }
  return buckets;
}

// --- report file I/O --------------------------------------------------------

/// Rebuild the trial matrix from an audit report CSV
/// (trial,subtpa,packet,checked,mismatches,first_error_packet,signals).
inline TrialMatrix read_report_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw invalid_parameter_error("empty report CSV");
  std::map<std::pair<uint64_t, uint64_t>, uint64_t> acc;  // (trial, subtpa) -> detected
  uint64_t max_trial = 0, max_subtpa = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7) throw invalid_parameter_error("malformed report CSV row: " + line);
    const uint64_t trial = std::stoull(fields[0]);
    const uint64_t subtpa = std::stoull(fields[1]);
    const uint64_t mismatches = std::stoull(fields[4]);
    acc[{trial, subtpa}] += mismatches;
    max_trial = std::max(max_trial, trial);
    max_subtpa = std::max(max_subtpa, subtpa);
  }
  if (max_trial == 0 || max_subtpa == 0) throw invalid_parameter_error("report CSV carries no data rows");
  TrialMatrix m = TrialMatrix::zeros(max_subtpa, max_trial);
  for (auto& [key, detected] : acc) m.at(key.second - 1, key.first - 1) = detected;
  return m;
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "subtpa,max,min,mean,stddev\n";
  os << std::fixed << std::setprecision(4);
  for (size_t r = 0; r < rows.size(); ++r) {
    os << (r + 1) << ',' << rows[r].max << ',' << rows[r].min << ',' << rows[r].mean << ','
       << rows[r].stddev << '\n';
  }
}

inline nlohmann::json fit_to_json(const FittedLine& line, double residual) {
  return {{"A", line.slope}, {"B", line.intercept}, {"residual", residual}};
}

/// Two-column data file consumable by gnuplot: x, y, fitted y.
inline void write_gnuplot_data(std::ostream& os, const std::vector<std::pair<double, double>>& points,
                               const FittedLine& line) {
  os << "# x y fit\n" << std::fixed << std::setprecision(6);
  for (auto& [x, y] : points) {
    os << x << ' ' << y << ' ' << (line.slope * x + line.intercept) << '\n';
  }
}

inline void write_buckets_csv(std::ostream& os, const std::map<long long, std::vector<uint32_t>>& buckets) {
  os << "mean,subtpas\n";
  for (auto& [mean, ids] : buckets) {
    os << mean << ',';
    for (size_t i = 0; i < ids.size(); ++i) {
      if (i) os << ';';
      os << 'S' << ids[i];
    }
    os << '\n';
  }
}

}  // namespace distaudit::analysis
