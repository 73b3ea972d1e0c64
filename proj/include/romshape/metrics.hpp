#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "romshape/numkernel.hpp"

namespace romshape {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// [begin, end) step range.
struct Window {
  Index begin = 0;
  Index end = 0;
  Index size() const { return end - begin; }
};

/// ‖Y − Ỹ‖_F / ‖Y‖_F; NaN for zero-norm truth, +inf for a non-finite estimate.
inline double rel_estimation_error(const Mat& y, const Mat& y_est) {
  if (y.rows() != y_est.rows() || y.cols() != y_est.cols()) throw Error("rel_estimation_error: shape mismatch");
  if (!y_est.allFinite()) return kInf;
  const double denom = y.norm();
  if (!(denom > 0)) return kNaN;
  return (y - y_est).norm() / denom;
}

inline void check_window(const Mat& a, const Mat& b, const Window& w) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("metrics: shape mismatch");
  if (w.begin < 0 || w.end > a.cols() || w.begin >= w.end) throw Error("metrics: window outside trajectory");
}

/// Row selection from an optional boolean mask (empty mask keeps every row).
inline Mat masked_rows(const Mat& a, const std::vector<bool>& mask) {
  if (mask.empty()) return a;
  if (static_cast<Index>(mask.size()) != a.rows()) throw Error("metrics: mask length mismatch");
  Index n = 0;
  for (bool b : mask) n += b;
  Mat out(n, a.cols());
  for (Index i = 0, o = 0; i < a.rows(); ++i)
    if (mask[static_cast<std::size_t>(i)]) out.row(o++) = a.row(i);
  return out;
}

/// Frobenius tracking error over a window, optionally restricted to masked rows.
inline double rel_tracking_error(const Mat& y_ref, const Mat& y, const Window& w, const std::vector<bool>& rows = {}) {
  check_window(y_ref, y, w);
  const Mat r = masked_rows(y_ref.middleCols(w.begin, w.size()), rows);
  const Mat a = masked_rows(y.middleCols(w.begin, w.size()), rows);
  if (!a.allFinite()) return kInf;
  const double denom = r.norm();
  if (!(denom > 0)) return kNaN;
  return (r - a).norm() / denom;
}

struct PointwiseErrors {
  Vec e_r_point;
  Vec e_rms_point;
};

/// Per-point errors over the (x_j, z_j) row pairs; e_RMS,j divides by sqrt(K − 1).
inline PointwiseErrors pointwise_errors(const Mat& y_ref, const Mat& y, const Window& w) {
  check_window(y_ref, y, w);
  if (y_ref.rows() % 2 != 0) throw Error("pointwise_errors: odd output dimension");
  const Index np = y_ref.rows() / 2, K = w.size();
  PointwiseErrors out{Vec(np), Vec(np)};
  for (Index j = 0; j < np; ++j) {
    const auto r = y_ref.block(2 * j, w.begin, 2, K);
    const auto a = y.block(2 * j, w.begin, 2, K);
    const double num = a.allFinite() ? (r - a).norm() : kInf;
    const double den = r.norm();
    out.e_r_point(j) = den > 0 ? num / den : kNaN;
    out.e_rms_point(j) = K > 1 ? num / std::sqrt(static_cast<double>(K - 1)) : kNaN;
  }
  return out;
}

struct MetricRecord {
  double e_y = kNaN;
  double e_r = kNaN;
  Vec e_r_point;
  Vec e_rms_point;
  Window window;
  /// Number of NaN entries caused by zero-norm references.
  int undefined = 0;
};

inline int count_nan(double v) { return std::isnan(v) ? 1 : 0; }

inline MetricRecord tracking_metrics(const Mat& y_ref, const Mat& y, const Window& w, const std::vector<bool>& rows) {
  MetricRecord rec;
  rec.window = w;
  rec.e_r = rel_tracking_error(y_ref, y, w, rows);
  const PointwiseErrors pe = pointwise_errors(y_ref, y, w);
  rec.e_r_point = pe.e_r_point;
  rec.e_rms_point = pe.e_rms_point;
  rec.undefined = count_nan(rec.e_r);
  for (Index j = 0; j < pe.e_r_point.size(); ++j) rec.undefined += count_nan(pe.e_r_point(j));
  return rec;
}

struct SummaryStats {
  double mean = kNaN;
  double stddev = kNaN;
  Index count = 0;
};

/// Mean and population standard deviation over the finite entries.
inline SummaryStats summarize(const std::vector<double>& values) {
  SummaryStats s;
  double sum = 0.0;
  for (double v : values)
    if (std::isfinite(v)) {
      sum += v;
      ++s.count;
    }
  if (s.count == 0) return s;
  s.mean = sum / static_cast<double>(s.count);
  double sq = 0.0;
  for (double v : values)
    if (std::isfinite(v)) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(s.count));
  return s;
}

}  // namespace romshape
