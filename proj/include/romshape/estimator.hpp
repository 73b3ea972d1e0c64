#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "romshape/numkernel.hpp"
#include "romshape/romfit.hpp"

namespace romshape {

struct ObserverGain {
  Mat L;
};

struct PlacementOptions {
  double pole_min = -0.5;
  double pole_max = 0.5;
  std::uint64_t seed = 7;
  int max_attempts = 8;
  double cond_limit = 1e12;
};

/// linspace(pole_min, pole_max, r); a single pole sits at 0.
inline Vec desired_poles(Index r, const PlacementOptions& opt = {}) {
  if (r < 1) throw Error("desired_poles: r must be positive");
  if (r == 1) return Vec::Zero(1);
  Vec p(r);
  for (Index i = 0; i < r; ++i)
    p(i) = opt.pole_min + (opt.pole_max - opt.pole_min) * static_cast<double>(i) / static_cast<double>(r - 1);
  return p;
}

/// Uniform entries in [-1, 1) from raw mt19937_64 output, identical on every standard library.
inline Mat seeded_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Mat g(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      g(i, j) = static_cast<double>(gen() >> 11) * 0x1.0p-52 - 1.0;
  return g;
}

/// Sylvester-based Luenberger synthesis: A - L C = T⁻¹ F T with F = diag(poles).
inline ObserverGain place_gain(const DiscreteRom& rom, const PlacementOptions& opt = {}) {
  const Index r = rom.r_eff(), p = rom.p();
  Vec poles = desired_poles(r, opt);
  const std::vector<Complex> open = eig(rom.A);
  for (Index i = 0; i < r; ++i)
    for (Complex l : open)
      if (std::abs(poles(i) - l) < 1e-9) {
        poles(i) += static_cast<double>(i + 1) * 1e-9;
        break;
      }
  const Mat f = poles.asDiagonal();
  for (int attempt = 0; attempt < opt.max_attempts; ++attempt) {
    const Mat g = seeded_matrix(r, p, opt.seed + static_cast<std::uint64_t>(attempt));
    Mat t;
    try {
      t = solve_sylvester(f, rom.A, -g * rom.C);
    } catch (const PlacementError&) {
      continue;
    }
    if (!t.allFinite() || !(cond(t) < opt.cond_limit)) continue;
    return {t.partialPivLu().solve(g)};
  }
  throw PlacementError("placement failed: weakly observable pair");
}

struct Rollout {
  Mat X;
  Mat Y;
};

/// x_{k+1} = A x_k + B u_k, y_k = C x_k + D u_k, starting from x0.
inline Rollout rollout_open(const DiscreteRom& rom, const Vec& x0, const Mat& u) {
  if (x0.size() != rom.r_eff() || u.rows() != rom.m()) throw Error("rollout_open: dimension mismatch");
  const Index K = u.cols();
  Rollout out{Mat(rom.r_eff(), K), Mat(rom.p(), K)};
  Vec x = x0;
  for (Index k = 0; k < K; ++k) {
    out.X.col(k) = x;
    out.Y.col(k).noalias() = rom.C * x + rom.D * u.col(k);
    x = rom.A * x + rom.B * u.col(k);
  }
  return out;
}

/// Predictor-form observer: ŷ_k = C x_k + D u_k, x_{k+1} = A x_k + B u_k + L (y_k − ŷ_k), x_0 = 0.
inline Rollout rollout_closed(const DiscreteRom& rom, const ObserverGain& gain, const Mat& u, const Mat& y) {
  if (u.rows() != rom.m() || y.rows() != rom.p() || u.cols() != y.cols() || gain.L.rows() != rom.r_eff() ||
      gain.L.cols() != rom.p())
    throw Error("rollout_closed: dimension mismatch");
  const Index K = u.cols();
  Rollout out{Mat(rom.r_eff(), K), Mat(rom.p(), K)};
  Vec x = Vec::Zero(rom.r_eff());
  for (Index k = 0; k < K; ++k) {
    out.X.col(k) = x;
    out.Y.col(k).noalias() = rom.C * x + rom.D * u.col(k);
    x = rom.A * x + rom.B * u.col(k) + gain.L * (y.col(k) - out.Y.col(k));
  }
  return out;
}

}  // namespace romshape
