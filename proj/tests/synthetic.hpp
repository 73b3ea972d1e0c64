#pragma once

// Synthetic generators with known ground truth, shared by unit and acceptance tests.

#include <cmath>
#include <random>

#include "romshape/dataset.hpp"
#include "romshape/romfit.hpp"

namespace romshape::testing {

inline Mat gaussian(Index r, Index c, std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = n(gen);
  return m;
}

/// Random matrix rescaled to the given spectral radius.
inline Mat stable_matrix(Index n, double radius, std::mt19937_64& gen) {
  Mat a = gaussian(n, n, gen);
  return a * (radius / spectral_radius(a));
}

struct LinearSystem {
  Mat A, B, C, D;
};

/// Simulates x_{k+1} = A x_k + B u_k, y_k = C x_k + D u_k; columns k = 0..K-1.
inline SnapshotSet simulate_lti(const LinearSystem& sys, const Vec& x0, const Mat& u) {
  const Index K = u.cols();
  SnapshotSet s;
  s.X.resize(sys.A.rows(), K);
  s.U = u;
  s.Y.resize(sys.C.rows(), K);
  Vec x = x0;
  for (Index k = 0; k < K; ++k) {
    s.X.col(k) = x;
    s.Y.col(k) = sys.C * x + sys.D * u.col(k);
    x = sys.A * x + sys.B * u.col(k);
  }
  s.x_neutral = Vec::Zero(sys.A.rows());
  s.y_neutral = Vec::Zero(sys.C.rows());
  s.dt = 0.01;
  s.trial_ids = {1};
  s.starts = {0};
  return s;
}

inline DiscreteRom as_rom(const LinearSystem& sys, RomMethod method = RomMethod::ERA) {
  DiscreteRom r;
  r.A = sys.A;
  r.B = sys.B;
  r.C = sys.C;
  r.D = sys.D;
  r.method = method;
  return r;
}

/// Random SPD matrix with eigenvalues uniform in [lo, hi].
inline Mat random_spd(Index n, double lo, double hi, std::mt19937_64& gen) {
  Eigen::HouseholderQR<Mat> qr(gaussian(n, n, gen));
  const Mat q = qr.householderQ();
  std::uniform_real_distribution<double> d(lo, hi);
  Vec lam(n);
  for (Index i = 0; i < n; ++i) lam(i) = d(gen);
  Mat s = q * lam.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

/// q'' + D q' + K q = B u with u_i(t) = a_i sin(w_i t + phi_i), integrated exactly by
/// propagating the autonomous system [q; q'; sin; cos] with the matrix exponential.
struct LagrangianTruth {
  Mat D, K, B, C;
  Vec q0, v0;
  Vec amp, freq, phase;
  double dt = 0.01;

  Vec input(double t) const {
    Vec u(amp.size());
    for (Index i = 0; i < amp.size(); ++i) u(i) = amp(i) * std::sin(freq(i) * t + phase(i));
    return u;
  }

  /// Snapshots at t_k = k dt: X = q, U = u(t_k), Y = C q.
  SnapshotSet sample(Index K_steps) const {
    const Index n = K.rows(), m = B.cols();
    const Index na = 2 * n + 2 * m;
    Mat a = Mat::Zero(na, na);
    a.block(0, n, n, n).setIdentity();
    a.block(n, 0, n, n) = -K;
    a.block(n, n, n, n) = -D;
    for (Index i = 0; i < m; ++i) {
      const Index s = 2 * n + 2 * i, c = s + 1;
      // u_i = amp_i * s_i with s = sin(w t + phi), c = cos(w t + phi)
      a.block(n, s, n, 1) = amp(i) * B.col(i);
      a(s, c) = freq(i);
      a(c, s) = -freq(i);
    }
    const Mat step = expm(a * dt);
    Vec z(na);
    z << q0, v0, Vec::Zero(2 * m);
    for (Index i = 0; i < m; ++i) {
      z(2 * n + 2 * i) = std::sin(phase(i));
      z(2 * n + 2 * i + 1) = std::cos(phase(i));
    }
    SnapshotSet s;
    s.X.resize(n, K_steps);
    s.U.resize(m, K_steps);
    s.Y.resize(C.rows(), K_steps);
    for (Index k = 0; k < K_steps; ++k) {
      s.X.col(k) = z.head(n);
      s.U.col(k) = input(static_cast<double>(k) * dt);
      s.Y.col(k) = C * z.head(n);
      z = step * z;
    }
    s.x_neutral = Vec::Zero(n);
    s.y_neutral = Vec::Zero(C.rows());
    s.dt = dt;
    s.trial_ids = {1};
    s.starts = {0};
    return s;
  }
};

inline LagrangianTruth random_lagrangian(Index n, Index m, Index p, std::mt19937_64& gen) {
  LagrangianTruth t;
  t.K = random_spd(n, 1.0, 30.0, gen);
  t.D = random_spd(n, 0.05, 1.0, gen);
  t.B = gaussian(n, m, gen);
  t.C = gaussian(p, n, gen);
  t.q0 = gaussian(n, 1, gen);
  t.v0 = gaussian(n, 1, gen);
  t.amp = Vec::Constant(m, 0.2);
  t.freq = Vec::LinSpaced(m, 0.15, 0.25);
  t.phase = Vec::LinSpaced(m, 0.3, 1.1);
  return t;
}

}  // namespace romshape::testing
