#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "romshape/dataset.hpp"
#include "romshape/fomsim.hpp"
#include "romshape/io.hpp"

namespace romshape {

/// Tracking targets. `targets` are centered outputs; `absolute` keeps the un-centered
/// coordinates the reference was built from so export reproduces them exactly.
struct ReferenceTrajectory {
  Mat targets;
  Mat absolute;
  std::vector<bool> mask;
  std::string source;

  Index steps() const { return targets.cols(); }

  /// Columns k+1 .. k+T, repeating the final column past the end.
  Mat window(Index k, Index T) const {
    Mat w(targets.rows(), T);
    for (Index i = 0; i < T; ++i) w.col(i) = targets.col(std::min(k + 1 + i, steps() - 1));
    return w;
  }
};

inline std::vector<bool> z_mask(Index n_points, Index first_point = 0) {
  std::vector<bool> m(static_cast<std::size_t>(2 * n_points), false);
  for (Index j = first_point; j < n_points; ++j) m[static_cast<std::size_t>(2 * j + 1)] = true;
  return m;
}

/// Control-point arc-length stations j·L/19 in metres.
inline double control_station(double length, Index j, Index n_points = FomConfig::n_points) {
  return length * (static_cast<double>(j) / static_cast<double>(n_points - 1));
}

inline ReferenceTrajectory replay(const SnapshotSet& trial) {
  ReferenceTrajectory ref;
  ref.targets = trial.Y;
  ref.absolute = trial.Y.colwise() + trial.y_neutral;
  ref.mask = z_mask(trial.Y.rows() / 2);
  ref.source = "replay:" + (trial.trial_ids.empty() ? std::string("?") : std::to_string(trial.trial_ids.front()));
  return ref;
}

inline ReferenceTrajectory replay(const Dataset& ds, int trial_id) { return replay(ds.trial(trial_id)); }

struct GaitParams {
  double A = 0.03;
  double alpha = 1.0;
  double f = 0.5;
  double k = 1.0;
  double L = 1.117;
};

/// Gait grid: A = 30 mm, α ∈ {1, 3.5}, f ∈ {0.5, 1} Hz, k ∈ {0.5, 1, 1.5}.
inline std::vector<GaitParams> table_gaits(double length = 1.117) {
  std::vector<GaitParams> out;
  for (double alpha : {1.0, 3.5})
    for (double f : {0.5, 1.0})
      for (double k : {0.5, 1.0, 1.5}) out.push_back({0.03, alpha, f, k, length});
  return out;
}

/// z(s, t) = A e^{α(s/L − 1)} sin(k s − 2π f t) in model units, s in metres, k in rad/m.
inline double wave_z(const GaitParams& g, double s, double t, double units_per_meter) {
  return units_per_meter * g.A * std::exp(g.alpha * (s / g.L - 1.0)) *
         std::sin(g.k * s - 2.0 * std::numbers::pi * g.f * t);
}

inline ReferenceTrajectory traveling_wave(const GaitParams& g, Index K, double dt, double units_per_meter = 1000.0,
                                          Index n_points = FomConfig::n_points) {
  if (!(g.A > 0 && g.f > 0 && g.L > 0)) throw Error("traveling_wave: need A, f, L > 0");
  if (K < 1) throw Error("traveling_wave: K must be positive");
  ReferenceTrajectory ref;
  ref.targets = Mat::Zero(2 * n_points, K);
  ref.absolute = Mat::Zero(2 * n_points, K);
  for (Index k = 0; k < K; ++k) {
    const double t = static_cast<double>(k) * dt;
    for (Index j = 0; j < n_points; ++j) {
      const double s = control_station(g.L, j, n_points);
      const double z = wave_z(g, s, t, units_per_meter);
      ref.targets(2 * j + 1, k) = z;
      ref.absolute(2 * j, k) = units_per_meter * s;
      ref.absolute(2 * j + 1, k) = z;
    }
  }
  ref.mask = z_mask(n_points);
  std::ostringstream tag;
  tag << "wave:A=" << g.A << ",alpha=" << g.alpha << ",f=" << g.f << ",k=" << g.k;
  ref.source = tag.str();
  return ref;
}

struct ImportOptions {
  double total_length = 1.117;
  int length_exponent = 3;
  Index n_points = FomConfig::n_points;
  /// First control point covered by the source; earlier points are masked out.
  Index first_point = 0;
  enum class Resample { Auto, Always, Never } resample = Resample::Auto;
};

/// Timestamped planar polylines, coordinates in model units.
struct CenterlineFrames {
  std::vector<double> t;
  std::vector<Mat> points;  // 2 × N per frame
};

inline CenterlineFrames read_centerlines(const fs::path& path, int length_exponent) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty centerline file");
  const auto header = split_csv_line(line);
  if (header.size() < 5 || (header.size() - 1) % 2 != 0 || header[0] != "t")
    throw FormatError("centerline header must be t,x0,z0,...");
  const Index npts = static_cast<Index>((header.size() - 1) / 2);
  CenterlineFrames frames;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw FormatError("ragged centerline row");
    const double t = parse_double(cells[0]);
    if (!frames.t.empty() && !(t > frames.t.back())) throw FormatError("non-monotone timestamps");
    Mat pts(2, npts);
    for (Index j = 0; j < npts; ++j)
      for (Index d = 0; d < 2; ++d)
        pts(d, j) = parse_scaled(cells[static_cast<std::size_t>(1 + 2 * j + d)], length_exponent);
    if (!std::isfinite(t) || !pts.allFinite()) throw FormatError("non-finite centerline value");
    frames.t.push_back(t);
    frames.points.push_back(std::move(pts));
  }
  if (frames.t.empty()) throw FormatError("centerline file has no frames");
  return frames;
}

/// Points at arc lengths `stations` along the polyline, extended linearly past its last point.
inline Mat resample_polyline(const Mat& pts, const std::vector<double>& stations) {
  const Index n = pts.cols();
  std::vector<double> cum(static_cast<std::size_t>(n), 0.0);
  for (Index i = 1; i < n; ++i) cum[static_cast<std::size_t>(i)] = cum[static_cast<std::size_t>(i - 1)] + (pts.col(i) - pts.col(i - 1)).norm();
  if (!(cum.back() > 0)) throw FormatError("degenerate polyline");
  // Direction of the posterior-most nondegenerate segment.
  Index last = n - 1;
  while (last > 0 && (pts.col(last) - pts.col(last - 1)).norm() == 0.0) --last;
  const Eigen::Vector2d tail_dir = (pts.col(last) - pts.col(last - 1)).normalized();
  Mat out(2, static_cast<Index>(stations.size()));
  Index seg = 1;
  for (std::size_t i = 0; i < stations.size(); ++i) {
    const double s = stations[i];
    if (s >= cum.back()) {
      out.col(static_cast<Index>(i)) = pts.col(n - 1) + (s - cum.back()) * tail_dir;
      continue;
    }
    while (seg < n - 1 && cum[static_cast<std::size_t>(seg)] < s) ++seg;
    const double a = cum[static_cast<std::size_t>(seg - 1)], b = cum[static_cast<std::size_t>(seg)];
    const double w = b > a ? (s - a) / (b - a) : 0.0;
    out.col(static_cast<Index>(i)) = pts.col(seg - 1) + w * (pts.col(seg) - pts.col(seg - 1));
  }
  return out;
}

/// Temporal linear interpolation onto t_k = k dt, then arc-length discretization onto control points.
inline ReferenceTrajectory import_centerlines(const fs::path& path, Index K_out, double dt,
                                              const ImportOptions& opt = {}) {
  if (K_out < 1 || !(dt > 0)) throw Error("import_centerlines: need K_out >= 1 and dt > 0");
  if (opt.first_point < 0 || opt.first_point > opt.n_points - 2) throw Error("import_centerlines: bad first_point");
  const CenterlineFrames frames = read_centerlines(path, opt.length_exponent);
  const double units = std::pow(10.0, opt.length_exponent);
  const Index covered = opt.n_points - opt.first_point;
  const Index npts = frames.points.front().cols();

  bool on_grid = static_cast<Index>(frames.t.size()) >= K_out;
  for (Index k = 0; on_grid && k < K_out; ++k)
    on_grid = std::abs(frames.t[static_cast<std::size_t>(k)] - static_cast<double>(k) * dt) <= 1e-9 * dt;
  const bool on_points = opt.resample == ImportOptions::Resample::Never ||
                         (opt.resample == ImportOptions::Resample::Auto && npts == covered);
  if (on_points && npts != covered) throw FormatError("source point count does not match the control points");

  const double seg = units * opt.total_length / static_cast<double>(opt.n_points - 1);
  std::vector<double> stations;
  for (Index j = 0; j < covered; ++j) stations.push_back(seg * static_cast<double>(j));

  ReferenceTrajectory ref;
  ref.absolute = Mat::Zero(2 * opt.n_points, K_out);
  ref.targets = Mat::Zero(2 * opt.n_points, K_out);
  Vec neutral(2 * opt.n_points);
  for (Index j = 0; j < opt.n_points; ++j) {
    neutral(2 * j) = units * control_station(opt.total_length, j, opt.n_points);
    neutral(2 * j + 1) = 0.0;
  }
  for (Index k = 0; k < K_out; ++k) {
    Mat frame;
    if (on_grid) {
      frame = frames.points[static_cast<std::size_t>(k)];
    } else {
      const double t = static_cast<double>(k) * dt;
      const auto it = std::upper_bound(frames.t.begin(), frames.t.end(), t);
      if (it == frames.t.begin()) {
        frame = frames.points.front();
      } else if (it == frames.t.end()) {
        frame = frames.points.back();
      } else {
        const std::size_t hi = static_cast<std::size_t>(it - frames.t.begin());
        const double w = (t - frames.t[hi - 1]) / (frames.t[hi] - frames.t[hi - 1]);
        frame = frames.points[hi - 1] + w * (frames.points[hi] - frames.points[hi - 1]);
      }
    }
    const Mat pts = on_points ? frame : resample_polyline(frame, stations);
    for (Index j = 0; j < opt.n_points; ++j) {
      if (j < opt.first_point) {
        ref.absolute.col(k).segment(2 * j, 2) = neutral.segment(2 * j, 2);
        continue;
      }
      ref.absolute.col(k).segment(2 * j, 2) = pts.col(j - opt.first_point);
    }
    ref.targets.col(k) = ref.absolute.col(k) - neutral;
  }
  ref.mask = z_mask(opt.n_points, opt.first_point);
  ref.source = "import:" + path.filename().string();
  return ref;
}

/// Writes the covered control points as a centerline CSV (metres, seconds).
inline void export_centerlines(const ReferenceTrajectory& ref, const fs::path& path, double dt,
                               const ImportOptions& opt = {}) {
  std::string out = "t";
  for (Index j = 0; j < opt.n_points - opt.first_point; ++j)
    out += ",x" + std::to_string(j) + ",z" + std::to_string(j);
  out += "\n";
  for (Index k = 0; k < ref.steps(); ++k) {
    out += format_double(static_cast<double>(k) * dt);
    for (Index j = opt.first_point; j < opt.n_points; ++j)
      for (Index d = 0; d < 2; ++d) out += "," + format_scaled(ref.absolute(2 * j + d, k), opt.length_exponent);
    out += "\n";
  }
  write_file(path, out);
}

}  // namespace romshape
