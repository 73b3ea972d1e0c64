#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "romshape/estimator.hpp"
#include "romshape/fomsim.hpp"
#include "romshape/romfit.hpp"

namespace romshape {

/// 6×3 map from free inputs (v1, v2, v3) to antagonistic pressures.
inline Mat coupling_map() {
  Mat P = Mat::Zero(6, 3);
  for (Index i = 0; i < 3; ++i) {
    P(2 * i, i) = 1.0;
    P(2 * i + 1, i) = -1.0;
  }
  return P;
}

struct MpcSpec {
  Index horizon = 20;
  Vec Wy;
  double c_u = 1500.0;
  double c_du = 1600.0;
  double u_max = 1.0;
  Mat P = coupling_map();

  void validate(Index p) const {
    if (horizon < 1) throw Error("MpcSpec: horizon must be >= 1");
    if (Wy.size() != p) throw Error("MpcSpec: Wy has wrong length");
    if ((Wy.array() < 0).any() || !Wy.allFinite()) throw Error("MpcSpec: Wy must be nonnegative");
    if (!(c_u > 0) || !(c_du >= 0) || !(u_max > 0)) throw Error("MpcSpec: need c_u > 0, c_du >= 0, u_max > 0");
    if (P.rows() != 6 || P.cols() != 3) throw Error("MpcSpec: coupling map must be 6x3");
  }
};

/// Weight c_z on z-entries of points in [first, last], zero elsewhere.
inline Vec z_weights(Index n_points, double c_z, Index first = 0, Index last = -1) {
  if (last < 0) last = n_points - 1;
  Vec w = Vec::Zero(2 * n_points);
  for (Index j = first; j <= last; ++j) w(2 * j + 1) = c_z;
  return w;
}

/// Default scheme: c_z = 0.6 on every z-entry.
inline Vec equal_weights(Index n_points = FomConfig::n_points) { return z_weights(n_points, 0.6); }

/// Posterior-focused scheme: anterior z-entries 0, posterior z-entries 1.2.
inline Vec posterior_weights(Index n_points = FomConfig::n_points) {
  return z_weights(n_points, 1.2, n_points / 2, n_points - 1);
}

/// ½ vᵀHv + gᵀv + constant, subject to lb ≤ v ≤ ub.
struct CondensedQp {
  Mat H;
  Vec g;
  Vec lb;
  Vec ub;
  double constant = 0.0;
  double lipschitz = 0.0;

  double objective(const Vec& v) const { return 0.5 * v.dot(H * v) + g.dot(v) + constant; }
};

/// Precomputes the horizon prediction matrices and the constant Hessian for one (rom, spec).
///
/// Prediction from the first-step state x_0: x_{i+1} = A x_i + B P v_i, ŷ_i = C x_i + D P v_i,
/// i = 0..T-1, with u_{-1} = u_prev in the rate penalty.
class Condenser {
 public:
  Condenser(const DiscreteRom& rom, const MpcSpec& spec) : rom_(rom), spec_(spec) {
    rom.validate();
    spec.validate(rom.p());
    const Index T = spec.horizon, r = rom.r_eff(), p = rom.p(), nv = spec.P.cols(), nu = spec.P.rows();
    const Index d = nv * T;
    phi_.resize(p * T, r);
    gamma_ = Mat::Zero(p * T, d);
    const Mat bp = rom.B * spec.P;
    const Mat dp = rom.D * spec.P;
    // markov_[j] = C A^{j-1} B P for j >= 1, markov_[0] = D P
    std::vector<Mat> mk{dp};
    Mat ak = Mat::Identity(r, r);
    for (Index i = 0; i < T; ++i) {
      phi_.middleRows(p * i, p) = rom.C * ak;
      if (i + 1 < T) mk.push_back(rom.C * ak * bp);
      ak = rom.A * ak;
    }
    for (Index i = 0; i < T; ++i)
      for (Index j = 0; j <= i; ++j) gamma_.block(p * i, nv * j, p, nv) = mk[static_cast<std::size_t>(i - j)];
    wbar_ = spec.Wy.replicate(T, 1);

    // Stacked input map 𝒫 (block diagonal P) and first-difference operator Δ.
    pstack_ = Mat::Zero(nu * T, d);
    for (Index i = 0; i < T; ++i) pstack_.block(nu * i, nv * i, nu, nv) = spec.P;
    Mat delta = Mat::Identity(nu * T, nu * T);
    for (Index i = 1; i < T; ++i) delta.block(nu * i, nu * (i - 1), nu, nu) = -Mat::Identity(nu, nu);
    dp_ = delta * pstack_;

    H_ = 2.0 * (gamma_.transpose() * wbar_.asDiagonal() * gamma_ + spec.c_u * pstack_.transpose() * pstack_ +
                spec.c_du * dp_.transpose() * dp_);
    H_ = (0.5 * (H_ + H_.transpose())).eval();
    lipschitz_ = Eigen::SelfAdjointEigenSolver<Mat>(H_, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  }

  const DiscreteRom& rom() const { return rom_; }
  const MpcSpec& spec() const { return spec_; }
  Index decision_size() const { return H_.rows(); }
  const Mat& phi() const { return phi_; }
  const Mat& gamma() const { return gamma_; }

  CondensedQp condense(const Vec& x_first, const Vec& u_prev, const Mat& y_ref) const {
    const Index T = spec_.horizon, p = rom_.p(), nu = spec_.P.rows();
    if (x_first.size() != rom_.r_eff() || u_prev.size() != nu || y_ref.rows() != p || y_ref.cols() != T)
      throw Error("condense: dimension mismatch");
    if (!x_first.allFinite() || !u_prev.allFinite() || !y_ref.allFinite())
      throw NumericError("condense: non-finite input");
    const Vec yref = y_ref.reshaped();
    const Vec free = phi_ * x_first - yref;
    Vec e0 = Vec::Zero(nu * T);
    e0.head(nu) = u_prev;  // Δ𝒫v − e0 gives u_i − u_{i−1}
    CondensedQp qp;
    qp.H = H_;
    qp.g = 2.0 * (gamma_.transpose() * wbar_.cwiseProduct(free) - spec_.c_du * dp_.transpose() * e0);
    qp.constant = free.dot(wbar_.cwiseProduct(free)) + spec_.c_du * e0.squaredNorm();
    qp.lb = Vec::Constant(H_.rows(), -spec_.u_max);
    qp.ub = Vec::Constant(H_.rows(), spec_.u_max);
    qp.lipschitz = lipschitz_;
    return qp;
  }

 private:
  DiscreteRom rom_;
  MpcSpec spec_;
  Mat phi_, gamma_, pstack_, dp_, H_;
  Vec wbar_;
  double lipschitz_ = 0.0;
};

inline CondensedQp condense(const DiscreteRom& rom, const MpcSpec& spec, const Vec& x_first, const Vec& u_prev,
                            const Mat& y_ref) {
  return Condenser(rom, spec).condense(x_first, u_prev, y_ref);
}

struct QpResult {
  Vec v;
  int iterations = 0;
  double residual = 0.0;
  double objective = 0.0;
};

inline constexpr int kQpMaxIterations = 50000;

/// ‖v − clip(v − ∇f(v))‖_∞.
inline double projected_gradient_residual(const CondensedQp& qp, const Vec& v) {
  const Vec grad = qp.H * v + qp.g;
  return (v - (v - grad).cwiseMax(qp.lb).cwiseMin(qp.ub)).lpNorm<Eigen::Infinity>();
}

/// Accelerated projected gradient (FISTA) with gradient-based restart.
inline QpResult solve_box_qp(const CondensedQp& qp, const std::optional<Vec>& warm = std::nullopt) {
  const Index d = qp.H.rows();
  if (qp.H.cols() != d || qp.g.size() != d || qp.lb.size() != d || qp.ub.size() != d)
    throw QpError("solve_box_qp: dimension mismatch");
  if (!qp.H.allFinite() || !qp.g.allFinite()) throw NumericError("solve_box_qp: non-finite input");
  double lip = qp.lipschitz;
  if (!(lip > 0)) lip = Eigen::SelfAdjointEigenSolver<Mat>(qp.H, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  if (!(lip > 0)) throw QpError("solve_box_qp: H is not positive definite");
  const double step = 1.0 / lip;
  const double tol = 1e-8 * (1.0 + qp.g.lpNorm<Eigen::Infinity>());
  auto clip = [&](const Vec& x) -> Vec { return x.cwiseMax(qp.lb).cwiseMin(qp.ub); };

  Vec v = clip(warm && warm->size() == d ? *warm : Vec::Zero(d));
  Vec y = v;
  double t = 1.0;
  QpResult res;
  for (int it = 0; it <= kQpMaxIterations; ++it) {
    const Vec grad_v = qp.H * v + qp.g;
    res.residual = (v - clip(v - grad_v)).lpNorm<Eigen::Infinity>();
    res.iterations = it;
    if (res.residual <= tol) break;
    if (it == kQpMaxIterations) break;
    const Vec v_next = clip(y - step * (qp.H * y + qp.g));
    if ((y - v_next).dot(v_next - v) > 0) {  // momentum points uphill: restart
      t = 1.0;
      y = v_next;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = v_next + ((t - 1.0) / t_next) * (v_next - v);
      t = t_next;
    }
    v = v_next;
  }
  if (res.residual > tol && res.residual > 1e-6) throw QpError("QP did not converge");
  res.v = v;
  res.objective = qp.objective(v);
  return res;
}

/// Observer state, the input being applied this step, and the previous QP solution.
struct ControllerState {
  Vec x_hat;
  Vec u_applied;
  Vec v_prev;
};

struct StepDiagnostics {
  double objective = 0.0;
  int iterations = 0;
  int saturated = 0;
};

struct PolicyStep {
  Vec u_next;
  StepDiagnostics diag;
};

/// ROM, observer gain, and the condensed MPC for one controller.
class RompcPolicy {
 public:
  RompcPolicy(DiscreteRom rom, ObserverGain gain, MpcSpec spec)
      : condenser_(rom, spec), gain_(std::move(gain)) {
    if (gain_.L.rows() != rom.r_eff() || gain_.L.cols() != rom.p()) throw Error("RompcPolicy: gain has wrong shape");
  }

  const DiscreteRom& rom() const { return condenser_.rom(); }
  const MpcSpec& spec() const { return condenser_.spec(); }
  const ObserverGain& gain() const { return gain_; }
  const Condenser& condenser() const { return condenser_; }

  ControllerState initial_state() const {
    return {Vec::Zero(rom().r_eff()), Vec::Zero(spec().P.rows()), Vec()};
  }

  /// Consumes y_k measured while u_k = state.u_applied is held; returns u_{k+1}.
  PolicyStep step(ControllerState& state, const Vec& y_meas, const Mat& y_ref_window) const {
    const DiscreteRom& m = rom();
    const Vec innovation = y_meas - (m.C * state.x_hat + m.D * state.u_applied);
    const Vec x_next = m.A * state.x_hat + m.B * state.u_applied + gain_.L * innovation;
    const CondensedQp qp = condenser_.condense(x_next, state.u_applied, y_ref_window);
    std::optional<Vec> warm;
    const Index nv = spec().P.cols();
    if (state.v_prev.size() == qp.g.size()) {
      Vec w(qp.g.size());
      w.head(w.size() - nv) = state.v_prev.tail(w.size() - nv);
      w.tail(nv) = state.v_prev.tail(nv);
      warm = w;
    }
    const QpResult sol = solve_box_qp(qp, warm);
    PolicyStep out;
    out.u_next = spec().P * sol.v.head(nv);
    out.diag.objective = sol.objective;
    out.diag.iterations = sol.iterations;
    for (Index i = 0; i < out.u_next.size(); ++i)
      if (std::abs(out.u_next(i)) >= spec().u_max) ++out.diag.saturated;
    state.x_hat = x_next;
    state.u_applied = out.u_next;
    state.v_prev = sol.v;
    return out;
  }

 private:
  Condenser condenser_;
  ObserverGain gain_;
};

/// Stateless form of one loop iteration; returns u_{k+1} and updates `state`.
inline PolicyStep policy_step(const RompcPolicy& policy, ControllerState& state, const Vec& y_meas,
                              const Mat& y_ref_window) {
  return policy.step(state, y_meas, y_ref_window);
}

}  // namespace romshape
