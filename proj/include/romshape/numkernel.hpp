#pragma once

#include <algorithm>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "romshape/error.hpp"

namespace romshape {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;
using Complex = std::complex<double>;

inline bool all_finite(const Mat& a) { return a.allFinite(); }

inline void require_finite(const Mat& a, const char* what) {
  if (!a.allFinite()) throw NumericError(std::string(what) + ": non-finite input");
}

inline void require_square(const Mat& a, const char* what) {
  if (a.rows() != a.cols()) throw NumericError(std::string(what) + ": non-square input");
}

/// Thin SVD factors; S holds the singular values in nonincreasing order.
struct Svd {
  Mat U;
  Vec S;
  Mat V;
};

/// Full thin SVD, min(rows, cols) triplets.
inline Svd thin_svd(const Mat& a) {
  require_finite(a, "svd");
  Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// Leading r singular triplets (deterministic Golub-Kahan / divide and conquer).
inline Svd truncated_svd(const Mat& a, Index r) {
  if (r < 1 || r > std::min(a.rows(), a.cols()))
    throw NumericError("truncated_svd: rank out of range");
  Svd full = thin_svd(a);
  return {full.U.leftCols(r), full.S.head(r), full.V.leftCols(r)};
}

/// Moore-Penrose pseudo-inverse from existing SVD factors.
inline Mat pinv_from_svd(const Svd& s) {
  const double smax = s.S.size() ? s.S(0) : 0.0;
  const double tol = 1e-12 * smax;
  Vec inv = Vec::Zero(s.S.size());
  for (Index i = 0; i < s.S.size(); ++i)
    if (s.S(i) > tol) inv(i) = 1.0 / s.S(i);
  return s.V * inv.asDiagonal() * s.U.transpose();
}

inline Mat pinv(const Mat& a) {
  if (a.size() == 0) return Mat::Zero(a.cols(), a.rows());
  return pinv_from_svd(thin_svd(a));
}

/// Minimum-norm least-squares solution of A X = B.
inline Mat lstsq(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) throw NumericError("lstsq: row mismatch");
  require_finite(b, "lstsq");
  if (a.size() == 0) return Mat::Zero(a.cols(), b.cols());
  Svd s = thin_svd(a);
  const double tol = 1e-12 * s.S(0);
  Mat utb = s.U.transpose() * b;
  for (Index i = 0; i < s.S.size(); ++i)
    utb.row(i) *= s.S(i) > tol ? 1.0 / s.S(i) : 0.0;
  return s.V * utb;
}

inline Mat expm(const Mat& a) {
  require_square(a, "expm");
  require_finite(a, "expm");
  if (a.size() == 0) return a;
  return a.exp();
}

/// φ₁(X) = Σ X^k/(k+1)! (= X⁻¹(e^X − I) when X is invertible), by Taylor series on X/2^s
/// followed by s doublings φ₁(2Y) = ½ φ₁(Y)(e^Y + I). Needs no inverse of X.
inline Mat phi1(const Mat& x) {
  require_square(x, "phi1");
  require_finite(x, "phi1");
  const Index n = x.rows();
  if (n == 0) return x;
  const double norm = x.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm > 0.5) s = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Mat y = x * std::ldexp(1.0, -s);
  const Mat id = Mat::Identity(n, n);
  // Nested form I + y/2 (I + y/3 (I + ...)); with ‖y‖ ≤ 1/2 the truncation is below 2^-20/21!.
  Mat phi = id;
  for (int k = 21; k >= 2; --k) phi = id + (y * phi) / static_cast<double>(k);
  Mat e = id + y * phi;
  for (int i = 0; i < s; ++i) {
    phi = (0.5 * phi * (e + id)).eval();
    e = (e * e).eval();
  }
  return phi;
}

/// Solves F T - T A = Q by Bartels-Stewart on complex Schur forms.
inline Mat solve_sylvester(const Mat& f, const Mat& a, const Mat& q) {
  require_square(f, "solve_sylvester");
  require_square(a, "solve_sylvester");
  if (q.rows() != f.rows() || q.cols() != a.rows())
    throw NumericError("solve_sylvester: dimension mismatch");
  require_finite(f, "solve_sylvester");
  require_finite(a, "solve_sylvester");
  require_finite(q, "solve_sylvester");

  using CMat = Eigen::MatrixXcd;
  Eigen::ComplexSchur<Mat> sf(f), sa(a);
  const CMat& uf = sf.matrixU();
  const CMat& tf = sf.matrixT();
  const CMat& ua = sa.matrixU();
  const CMat& ta = sa.matrixT();

  for (Index i = 0; i < tf.rows(); ++i)
    for (Index j = 0; j < ta.rows(); ++j)
      if (std::abs(tf(i, i) - ta(j, j)) < 1e-9) throw PlacementError("resonant placement");

  // (TF) Z - Z (TA) = C, solved column by column; TA is upper triangular.
  CMat c = uf.adjoint() * q.cast<Complex>() * ua;
  const Index r = tf.rows();
  CMat z(r, ta.rows());
  for (Index j = 0; j < ta.rows(); ++j) {
    Eigen::VectorXcd rhs = c.col(j);
    for (Index i = 0; i < j; ++i) rhs += z.col(i) * ta(i, j);
    CMat shifted = tf;
    shifted.diagonal().array() -= ta(j, j);
    z.col(j) = shifted.triangularView<Eigen::Upper>().solve(rhs);
  }
  return (uf * z * ua.adjoint()).real();
}

/// Eigenvalues sorted by real part, then imaginary part.
inline std::vector<Complex> eig(const Mat& a) {
  require_square(a, "eig");
  require_finite(a, "eig");
  std::vector<Complex> out;
  if (a.size() == 0) return out;
  Eigen::EigenSolver<Mat> es(a, false);
  if (es.info() != Eigen::Success) throw NumericError("eig: no convergence");
  for (Index i = 0; i < a.rows(); ++i) out.push_back(es.eigenvalues()(i));
  std::sort(out.begin(), out.end(), [](Complex x, Complex y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  return out;
}

inline double spectral_radius(const Mat& a) {
  double rho = 0.0;
  for (Complex l : eig(a)) rho = std::max(rho, std::abs(l));
  return rho;
}

/// Nearest-in-spectrum symmetric matrix with eigenvalues clipped to >= eps.
inline Mat spd_project(const Mat& a, double eps) {
  require_square(a, "spd_project");
  require_finite(a, "spd_project");
  Mat s = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  Vec lam = es.eigenvalues().cwiseMax(eps);
  Mat out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  out = (0.5 * (out + out.transpose())).eval();
  // Reassembly and eigensolver rounding are O(eps_mach ||A||); keep that much margin above eps
  // so any later eigenvalue computation still reports >= eps.
  const double margin = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, out.norm());
  for (int pass = 0; pass < 4; ++pass) {
    const double lmin = Eigen::SelfAdjointEigenSolver<Mat>(out, Eigen::EigenvaluesOnly).eigenvalues()(0);
    if (lmin >= eps + margin || lam.minCoeff() > eps + 2 * margin) break;
    out.diagonal().array() += (eps + margin) - lmin;
  }
  return out;
}

/// 2-norm condition number via singular values.
inline double cond(const Mat& a) {
  Vec s = Eigen::JacobiSVD<Mat>(a).singularValues();
  if (s.size() == 0) return 1.0;
  return s(s.size() - 1) > 0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
}

}  // namespace romshape
