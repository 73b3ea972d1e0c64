#pragma once

#include <array>
#include <cmath>
#include <string>

#include "romshape/numkernel.hpp"

namespace romshape {

/// Half-open joint index range [begin, end).
struct Span {
  Index begin = 0;
  Index end = 0;
  Index size() const { return end - begin; }
};

/// Surrogate planar elastic chain. Physical constants are SI; exported
/// coordinates are in units of 10^-length_exponent m (millimetres by default).
struct FomConfig {
  Index n_links = 400;
  double total_length = 1.117;
  double joint_stiffness = 2.0;
  double joint_damping = 0.15;
  double node_mass = 0.01;
  double actuation_gain = 9e-4;
  /// Span boundaries as fractions of the chain: head | body1 | body2 | body3 | tail.
  std::array<double, 4> span_breaks{0.15, 0.35, 0.55, 0.75};
  Index substeps = 10;
  double dt = 0.01;
  int length_exponent = 3;

  double link_length() const { return total_length / static_cast<double>(n_links); }
  double units_per_meter() const { return std::pow(10.0, length_exponent); }
  Index n_state() const { return 2 * (n_links + 1); }
  static constexpr Index n_inputs = 6;
  static constexpr Index n_points = 20;
  static constexpr Index n_outputs = 2 * n_points;

  /// Spans in order head, body1, body2, body3, tail.
  std::array<Span, 5> spans() const {
    std::array<Index, 6> cut{0, 0, 0, 0, 0, n_links};
    for (int i = 0; i < 4; ++i)
      cut[i + 1] = static_cast<Index>(std::llround(span_breaks[i] * static_cast<double>(n_links)));
    std::array<Span, 5> out;
    for (int i = 0; i < 5; ++i) out[i] = {cut[i], cut[i + 1]};
    return out;
  }

  void validate() const {
    if (n_links < 5) throw Error("FomConfig: n_links must be >= 5");
    if (!(total_length > 0 && joint_stiffness > 0 && joint_damping > 0 && node_mass > 0 &&
          actuation_gain > 0 && dt > 0))
      throw Error("FomConfig: physical constants must be positive");
    if (substeps < 1) throw Error("FomConfig: substeps must be >= 1");
    double prev = 0.0;
    for (double b : span_breaks) {
      if (!(b > prev && b < 1.0)) throw Error("FomConfig: span breaks must increase inside (0, 1)");
      prev = b;
    }
    for (const Span& s : spans())
      if (s.size() < 1) throw Error("FomConfig: empty span");
    const double h = dt / static_cast<double>(substeps);
    if (h > 2.0 * std::sqrt(node_mass / joint_stiffness))
      throw Error("FomConfig: substep exceeds stability bound 2*sqrt(m/k)");
  }
};

struct FomState {
  Vec theta;
  Vec omega;
  double t = 0.0;
};

using PressureInput = Eigen::Matrix<double, 6, 1>;

inline FomState neutral_state(const FomConfig& cfg) {
  return {Vec::Zero(cfg.n_links), Vec::Zero(cfg.n_links), 0.0};
}

/// Completes free inputs (v1, v2, v3) to the antagonistic pressure vector.
inline PressureInput couple(double v1, double v2, double v3) {
  PressureInput u;
  u << v1, -v1, v2, -v2, v3, -v3;
  return u;
}

/// Net actuation torque per unit gain for each joint (u[2i] on body span i).
inline Vec joint_drive(const FomConfig& cfg, const PressureInput& u) {
  Vec drive = Vec::Zero(cfg.n_links);
  const auto sp = cfg.spans();
  for (int i = 0; i < 3; ++i) drive.segment(sp[i + 1].begin, sp[i + 1].size()).setConstant(u(2 * i));
  return drive;
}

/// Advances dt with `substeps` implicit-stiffness substeps of the joint dynamics.
inline FomState step(const FomConfig& cfg, const FomState& s, const PressureInput& u) {
  if (!u.allFinite()) throw NumericError("step: non-finite input");
  const double h = cfg.dt / static_cast<double>(cfg.substeps);
  const double k = cfg.joint_stiffness, c = cfg.joint_damping, m = cfg.node_mass;
  const double denom = 1.0 + h * c / m + h * h * k / m;
  const Vec force = cfg.actuation_gain * joint_drive(cfg, u);
  FomState out = s;
  for (Index sub = 0; sub < cfg.substeps; ++sub) {
    out.omega = (out.omega + (h / m) * (force - k * out.theta)) / denom;
    out.theta += h * out.omega;
  }
  out.t = s.t + cfg.dt;
  if (!out.theta.allFinite() || !out.omega.allFinite()) throw SimulationDiverged();
  return out;
}

/// k/2 |theta|^2 + m/2 |omega|^2.
inline double energy(const FomConfig& cfg, const FomState& s) {
  return 0.5 * cfg.joint_stiffness * s.theta.squaredNorm() + 0.5 * cfg.node_mass * s.omega.squaredNorm();
}

/// Node coordinates in model units, interleaved (x0, z0, x1, z1, ...).
inline Vec full_state(const FomConfig& cfg, const FomState& s) {
  const double ell = cfg.link_length() * cfg.units_per_meter();
  Vec x(cfg.n_state());
  double px = 0.0, pz = 0.0, phi = 0.0;
  x(0) = 0.0;
  x(1) = 0.0;
  for (Index i = 0; i < cfg.n_links; ++i) {
    phi += s.theta(i);
    px += ell * std::cos(phi);
    pz += ell * std::sin(phi);
    x(2 * i + 2) = px;
    x(2 * i + 3) = pz;
  }
  return x;
}

/// Arc-length station (in links) of output point j.
inline double output_station(const FomConfig& cfg, Index j) {
  return static_cast<double>(j) * static_cast<double>(cfg.n_links) / static_cast<double>(FomConfig::n_points - 1);
}

/// 20 centerline points at equal arc-length spacing, interleaved (x, z).
inline Vec output_from_nodes(const FomConfig& cfg, const Vec& nodes) {
  Vec y(FomConfig::n_outputs);
  for (Index j = 0; j < FomConfig::n_points; ++j) {
    const double sj = output_station(cfg, j);
    Index q = std::min<Index>(static_cast<Index>(std::floor(sj)), cfg.n_links - 1);
    const double a = sj - static_cast<double>(q);
    for (int d = 0; d < 2; ++d) {
      const double p0 = nodes(2 * q + d), p1 = nodes(2 * q + 2 + d);
      y(2 * j + d) = a == 0.0 ? p0 : (a == 1.0 ? p1 : p0 + a * (p1 - p0));
    }
  }
  return y;
}

inline Vec output(const FomConfig& cfg, const FomState& s) { return output_from_nodes(cfg, full_state(cfg, s)); }

}  // namespace romshape
