#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "romshape/dataset.hpp"
#include "romshape/io.hpp"
#include "romshape/numkernel.hpp"

namespace romshape {

enum class RomMethod { LOpInf, DMDc, ERA };

inline std::string to_string(RomMethod m) {
  switch (m) {
    case RomMethod::LOpInf: return "LOpInf";
    case RomMethod::DMDc: return "DMDc";
    case RomMethod::ERA: return "ERA";
  }
  return "?";
}

inline RomMethod method_from_string(const std::string& s) {
  if (s == "LOpInf" || s == "lopinf") return RomMethod::LOpInf;
  if (s == "DMDc" || s == "dmdc") return RomMethod::DMDc;
  if (s == "ERA" || s == "era") return RomMethod::ERA;
  throw Error("unknown ROM method '" + s + "'");
}

/// x_{k+1} = A x_k + B u_k,  y_k = C x_k + D u_k.
struct DiscreteRom {
  Mat A;
  Mat B;
  Mat C;
  Mat D;
  double Ts = 0.01;
  RomMethod method = RomMethod::DMDc;
  std::optional<Mat> basis;

  Index r_eff() const { return A.rows(); }
  Index m() const { return B.cols(); }
  Index p() const { return C.rows(); }

  void validate() const {
    const Index r = A.rows();
    if (A.cols() != r || B.rows() != r || C.cols() != r || D.rows() != C.rows() || D.cols() != B.cols())
      throw Error("DiscreteRom: inconsistent dimensions");
    if (!(Ts > 0)) throw Error("DiscreteRom: Ts must be positive");
    if (method != RomMethod::ERA && !D.isZero(0.0)) throw Error("DiscreteRom: D must be zero unless ERA");
  }
};

/// q'' + D q' + K q = B u,  y = C q.
struct LagrangianRom {
  Mat Dhat;
  Mat Khat;
  Mat Bhat;
  Mat Chat;
  Mat basis;
};

inline constexpr double kSpdEps = 1e-8;
inline constexpr double kRankCollapse = 1e-14;

/// Markov blocks D, CB, CAB, ... (count blocks).
inline std::vector<Mat> markov_parameters(const DiscreteRom& rom, Index count) {
  std::vector<Mat> out;
  if (count <= 0) return out;
  out.push_back(rom.D);
  Mat ab = rom.B;
  for (Index k = 1; k < count; ++k) {
    out.push_back(rom.C * ab);
    ab = rom.A * ab;
  }
  return out;
}

// ---------------------------------------------------------------- derivatives

struct FdResult {
  Mat first;
  Mat second;
  std::vector<Index> kept;
};

inline constexpr std::array<double, 9> kFd1{1.0 / 280, -4.0 / 105, 1.0 / 5, -4.0 / 5, 0.0,
                                            4.0 / 5,   -1.0 / 5,   4.0 / 105, -1.0 / 280};
inline constexpr std::array<double, 9> kFd2{-1.0 / 560, 8.0 / 315, -1.0 / 5,  8.0 / 5, -205.0 / 72,
                                            8.0 / 5,    -1.0 / 5,  8.0 / 315, -1.0 / 560};

/// Eighth-order central differences per segment; four columns are dropped at each segment end.
inline FdResult fd_derivatives(const Mat& xhat, double dt, const std::vector<std::pair<Index, Index>>& segments) {
  if (!(dt > 0)) throw Error("fd_derivatives: dt must be positive");
  FdResult out;
  for (auto [b, e] : segments) {
    if (e - b < 9) throw Error("fd_derivatives: segment too short");
    for (Index k = b + 4; k < e - 4; ++k) out.kept.push_back(k);
  }
  const Index r = xhat.rows();
  const Index n = static_cast<Index>(out.kept.size());
  out.first = Mat::Zero(r, n);
  out.second = Mat::Zero(r, n);
  for (Index c = 0; c < n; ++c) {
    const Index k = out.kept[static_cast<std::size_t>(c)];
    for (int o = 0; o < 9; ++o) {
      const auto col = xhat.col(k + o - 4);
      if (kFd1[o] != 0.0) out.first.col(c) += kFd1[o] * col;
      out.second.col(c) += kFd2[o] * col;
    }
  }
  out.first /= dt;
  out.second /= dt * dt;
  return out;
}

inline Mat select_cols(const Mat& m, const std::vector<Index>& cols) {
  Mat out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = m.col(cols[i]);
  return out;
}

// ---------------------------------------------------------------- LOpInf

/// Holds the snapshot SVD so a sweep over r factors X once.
class LopinfTrainer {
 public:
  explicit LopinfTrainer(const SnapshotSet& data)
      : X_(data.X), U_(data.U), Y_(data.Y), dt_(data.dt), segments_(data.segments()) {
    if (!data.has_states()) throw FitError("LOpInf needs state snapshots");
    svd_ = thin_svd(X_);
  }

  Index max_rank() const { return svd_.S.size(); }

  LagrangianRom fit(Index r) const {
    if (r < 1 || r > max_rank()) throw FitError("LOpInf: r out of range");
    if (!(svd_.S(0) > 0) || svd_.S(r - 1) / svd_.S(0) < kRankCollapse)
      throw FitError("LOpInf: rank collapse (sigma_r/sigma_1 < 1e-14)");
    LagrangianRom rom;
    rom.basis = svd_.U.leftCols(r);
    const Mat xhat = rom.basis.transpose() * X_;
    const FdResult fd = fd_derivatives(xhat, dt_, segments_);
    const Mat xk = select_cols(xhat, fd.kept);
    const Mat uk = select_cols(U_, fd.kept);
    const Index m = U_.rows();

    // xddot = [-D, -K, B] [xdot; x; u]
    Mat z(2 * r + m, xk.cols());
    z << fd.first, xk, uk;
    const Mat o = lstsq(z.transpose(), fd.second.transpose()).transpose();
    rom.Dhat = spd_project(-o.leftCols(r), kSpdEps);
    rom.Khat = spd_project(-o.middleCols(r, r), kSpdEps);
    const Mat forced = fd.second + rom.Dhat * fd.first + rom.Khat * xk;
    rom.Bhat = lstsq(uk.transpose(), forced.transpose()).transpose();
    rom.Chat = lstsq(xhat.transpose(), Y_.transpose()).transpose();
    return rom;
  }

 private:
  Mat X_, U_, Y_;
  double dt_;
  std::vector<std::pair<Index, Index>> segments_;
  Svd svd_;
};

inline LagrangianRom lopinf_fit(const SnapshotSet& data, Index r) { return LopinfTrainer(data).fit(r); }

/// First-order augmentation [q; q'] and zero-order-hold discretization.
inline DiscreteRom lopinf_to_discrete(const LagrangianRom& L, double Ts) {
  const Index r = L.Khat.rows();
  const Index m = L.Bhat.cols();
  if (!(Ts > 0)) throw Error("lopinf_to_discrete: Ts must be positive");
  Mat ahat = Mat::Zero(2 * r, 2 * r);
  ahat.topRightCorner(r, r).setIdentity();
  ahat.bottomLeftCorner(r, r) = -L.Khat;
  ahat.bottomRightCorner(r, r) = -L.Dhat;
  Mat baug = Mat::Zero(2 * r, m);
  baug.bottomRows(r) = L.Bhat;

  // det Â = det K̂, so Â is invertible exactly when K̂ is.
  if (Eigen::LLT<Mat>(L.Khat).info() != Eigen::Success)
    throw NumericError("lopinf_to_discrete: singular augmented operator");

  DiscreteRom rom;
  rom.method = RomMethod::LOpInf;
  rom.Ts = Ts;
  rom.A = expm(ahat * Ts);
  // Â⁻¹(Ã − I) = Ts·φ₁(ÂTs); the φ₁ form avoids amplifying rounding by ‖Â⁻¹‖ when K̂ has clipped modes.
  rom.B = Ts * phi1(ahat * Ts) * baug;
  rom.C = Mat::Zero(L.Chat.rows(), 2 * r);
  rom.C.leftCols(r) = L.Chat;
  rom.D = Mat::Zero(L.Chat.rows(), m);
  rom.basis = L.basis;
  return rom;
}

// ---------------------------------------------------------------- DMDc

/// Holds the SVDs of Omega = [X; U] and X' for a sweep over (r, q).
class DmdcTrainer {
 public:
  explicit DmdcTrainer(const SnapshotSet& data) : X_(data.X), Y_(data.Y), m_(data.U.rows()), dt_(data.dt) {
    if (!data.has_states()) throw FitError("DMDc needs state snapshots");
    const auto segs = data.segments();
    Index pairs = 0;
    for (auto [b, e] : segs) pairs += std::max<Index>(0, e - b - 1);
    if (pairs < 1) throw FitError("DMDc: no shifted pairs");
    const Index n = X_.rows();
    Mat omega(n + m_, pairs);
    Xp_.resize(n, pairs);
    Index c = 0;
    for (auto [b, e] : segs)
      for (Index k = b; k + 1 < e; ++k, ++c) {
        omega.col(c).head(n) = X_.col(k);
        omega.col(c).tail(m_) = data.U.col(k);
        Xp_.col(c) = X_.col(k + 1);
      }
    omega_ = thin_svd(omega);
    xp_ = thin_svd(Xp_);
  }

  Index pairs() const { return Xp_.cols(); }

  /// q = 0 selects the default q = r + m.
  DiscreteRom fit(Index r, Index q = 0) const {
    const Index n = X_.rows();
    if (q == 0) q = r + m_;
    if (r < 1 || r > std::min(n, pairs())) throw FitError("DMDc: r out of range");
    if (q < 1 || q > std::min(n + m_, pairs())) throw FitError("DMDc: q out of range");
    const Vec sig = omega_.S.head(q);
    if (!(sig(0) > 0) || sig(q - 1) <= kRankCollapse * sig(0))
      throw FitError("input-state data rank deficient");

    const Mat uhat = xp_.U.leftCols(r);
    const Mat u1 = omega_.U.topRows(n).leftCols(q);
    const Mat u2 = omega_.U.bottomRows(m_).leftCols(q);
    const Mat w = (uhat.transpose() * Xp_) * omega_.V.leftCols(q) * sig.cwiseInverse().asDiagonal();

    DiscreteRom rom;
    rom.method = RomMethod::DMDc;
    rom.Ts = dt_;
    rom.A = w * (u1.transpose() * uhat);
    rom.B = w * u2.transpose();
    const Mat xr = uhat.transpose() * X_;
    rom.C = lstsq(xr.transpose(), Y_.transpose()).transpose();
    rom.D = Mat::Zero(Y_.rows(), m_);
    rom.basis = uhat;
    return rom;
  }

 private:
  Mat X_, Xp_, Y_;
  Index m_;
  double dt_;
  Svd omega_, xp_;
};

inline DiscreteRom dmdc_fit(const SnapshotSet& data, Index r, Index q = 0) { return DmdcTrainer(data).fit(r, q); }

// ---------------------------------------------------------------- ERA / OKID

struct EraOptions {
  /// Hankel matrices with more entries than this are factored through HᵀH.
  double gram_threshold = 4e6;
};

/// Block upper-triangular Toeplitz input matrix: block row i, column k holds u_{k-i}.
inline Mat input_toeplitz(const Mat& u) {
  const Index m = u.rows(), K = u.cols();
  Mat t = Mat::Zero(m * K, K);
  for (Index i = 0; i < K; ++i) t.block(m * i, i, m, K - i) = u.leftCols(K - i);
  return t;
}

/// OKID estimate of the Markov blocks: returns p × mK matrix [M_0, M_1, ...].
inline Mat okid_markov(const Mat& u, const Mat& y) {
  if (u.cols() != y.cols()) throw FitError("OKID: column mismatch");
  return y * pinv(input_toeplitz(u));
}

class EraTrainer {
 public:
  explicit EraTrainer(const SnapshotSet& data, EraOptions opt = {}) : dt_(data.dt) {
    if (data.starts.size() > 1) throw FitError("ERA/OKID needs a single trial");
    K_ = data.cols();
    if (K_ < 6) throw FitError("ERA/OKID: K < 6");
    m_ = data.U.rows();
    p_ = data.Y.rows();
    th_ = K_ / 2 - 1;
    const Mat mk = okid_markov(data.U, data.Y);
    blocks_.reserve(static_cast<std::size_t>(K_));
    for (Index j = 0; j < K_; ++j) blocks_.push_back(mk.middleCols(m_ * j, m_));
    gram_ = static_cast<double>(p_ * th_) * static_cast<double>(m_ * th_) > opt.gram_threshold;
    if (gram_)
      factor_gram();
    else
      factor_direct();
  }

  Index hankel_blocks() const { return th_; }
  bool uses_gram() const { return gram_; }
  const std::vector<Mat>& markov() const { return blocks_; }

  DiscreteRom fit(Index r) const {
    if (r < 1 || r > p_ * th_ || r > m_ * th_) throw FitError("ERA: r exceeds Hankel rank budget");
    if (!(sigma_(r - 1) > 0)) throw FitError("ERA: Hankel rank below r");
    const Vec s = sigma_.head(r);
    const Vec sqrt_s = s.cwiseSqrt();
    const Vec inv_sqrt = sqrt_s.cwiseInverse();
    const Mat vr = V_.leftCols(r);
    DiscreteRom rom;
    rom.method = RomMethod::ERA;
    rom.Ts = dt_;
    if (gram_) {
      const Vec inv_s32 = s.cwiseInverse().cwiseProduct(inv_sqrt);
      rom.A = inv_s32.asDiagonal() * (vr.transpose() * gprime_ * vr) * inv_sqrt.asDiagonal();
      rom.C = top_row_ * vr * inv_sqrt.asDiagonal();
    } else {
      const Mat ur = Uh_.leftCols(r);
      rom.A = inv_sqrt.asDiagonal() * (ur.transpose() * hprime_ * vr) * inv_sqrt.asDiagonal();
      rom.C = ur.topRows(p_) * sqrt_s.asDiagonal();
    }
    rom.B = sqrt_s.asDiagonal() * vr.topRows(m_).transpose();
    rom.D = blocks_[0];
    return rom;
  }

 private:
  const Mat& M(Index j) const { return blocks_[static_cast<std::size_t>(j)]; }

  Mat hankel(Index shift) const {
    Mat h(p_ * th_, m_ * th_);
    for (Index i = 0; i < th_; ++i)
      for (Index j = 0; j < th_; ++j) h.block(p_ * i, m_ * j, p_, m_) = M(i + j + 1 + shift);
    return h;
  }

  void factor_direct() {
    const Mat h = hankel(0);
    hprime_ = hankel(1);
    Svd s = thin_svd(h);
    Uh_ = std::move(s.U);
    sigma_ = std::move(s.S);
    V_ = std::move(s.V);
  }

  // G = HᵀH and G' = HᵀH' built block-wise with the diagonal recurrence
  // G_{a+1,b+1} = G_{a,b} - M_{a+1}ᵀM_{b+1} + M_{T+a+1}ᵀM_{T+b+1}.
  void factor_gram() {
    const Index T = th_, m = m_;
    Mat g(m * T, m * T), gp(m * T, m * T);
    auto blk = [m](Mat& x, Index a, Index b) { return x.block(m * a, m * b, m, m); };
    for (Index b = 0; b < T; ++b) {
      Mat acc = Mat::Zero(m, m), accp = Mat::Zero(m, m), accq = Mat::Zero(m, m);
      for (Index i = 0; i < T; ++i) {
        acc.noalias() += M(i + 1).transpose() * M(i + b + 1);
        accp.noalias() += M(i + 1).transpose() * M(i + b + 2);
        accq.noalias() += M(i + b + 1).transpose() * M(i + 2);
      }
      blk(g, 0, b) = acc;
      blk(g, b, 0) = acc.transpose();
      blk(gp, 0, b) = accp;
      blk(gp, b, 0) = accq;
    }
    for (Index a = 0; a + 1 < T; ++a)
      for (Index b = 0; b + 1 < T; ++b) {
        blk(g, a + 1, b + 1) = blk(g, a, b) - M(a + 1).transpose() * M(b + 1) +
                               M(T + a + 1).transpose() * M(T + b + 1);
        blk(gp, a + 1, b + 1) = blk(gp, a, b) - M(a + 1).transpose() * M(b + 2) +
                                M(T + a + 1).transpose() * M(T + b + 2);
      }
    g = (0.5 * (g + g.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(g);
    if (es.info() != Eigen::Success) throw FitError("ERA: Gram eigensolver failed");
    const Index d = m * T;
    sigma_.resize(d);
    V_.resize(d, d);
    for (Index i = 0; i < d; ++i) {
      sigma_(i) = std::sqrt(std::max(0.0, es.eigenvalues()(d - 1 - i)));
      V_.col(i) = es.eigenvectors().col(d - 1 - i);
    }
    gprime_ = std::move(gp);
    top_row_.resize(p_, m * T);
    for (Index j = 0; j < T; ++j) top_row_.middleCols(m * j, m) = M(j + 1);
  }

  double dt_;
  Index K_ = 0, m_ = 0, p_ = 0, th_ = 0;
  bool gram_ = false;
  std::vector<Mat> blocks_;
  Vec sigma_;
  Mat V_, Uh_, hprime_, gprime_, top_row_;
};

inline DiscreteRom era_okid_fit(const SnapshotSet& data, Index r, EraOptions opt = {}) {
  return EraTrainer(data, opt).fit(r);
}

// ---------------------------------------------------------------- model files

/// One JSON header line followed by f64le row-major payloads.
inline void save_rom(const fs::path& path, const DiscreteRom& rom) {
  std::vector<std::pair<std::string, const Mat*>> blocks{{"A_t", &rom.A}, {"B_t", &rom.B}, {"C_t", &rom.C}, {"D_t", &rom.D}};
  if (rom.basis) blocks.emplace_back("basis", &*rom.basis);
  json header = {{"method", to_string(rom.method)}, {"r_eff", rom.r_eff()}, {"m", rom.m()},
                 {"p", rom.p()},                    {"Ts", rom.Ts},         {"blocks", json::array()}};
  std::string payload;
  for (const auto& [name, m] : blocks) {
    const std::string bytes = matrix_bytes(*m);
    header["blocks"].push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()},
                                {"offset", payload.size()}, {"sha256", sha256_hex(bytes)}});
    payload += bytes;
  }
  write_file(path, header.dump() + "\n" + payload);
}

inline DiscreteRom load_rom(const fs::path& path) {
  const std::string bytes = read_file(path);
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw FormatError("corrupted model header " + path.string());
  json header;
  try {
    header = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw FormatError("corrupted model header " + path.string());
  }
  const char* payload = bytes.data() + nl + 1;
  const std::size_t payload_size = bytes.size() - nl - 1;
  DiscreteRom rom;
  rom.method = method_from_string(header.at("method").get<std::string>());
  rom.Ts = header.at("Ts").get<double>();
  for (const auto& b : header.at("blocks")) {
    const Index rows = b.at("rows").get<Index>(), cols = b.at("cols").get<Index>();
    const std::size_t off = b.at("offset").get<std::size_t>();
    const std::size_t len = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (off + len > payload_size) throw FormatError("dimension mismatch in " + path.string());
    if (sha256_hex(payload + off, len) != b.at("sha256").get<std::string>())
      throw FormatError("checksum failure in " + path.string());
    Mat m = matrix_from_bytes(payload + off, rows, cols);
    const std::string name = b.at("name").get<std::string>();
    if (name == "A_t") rom.A = std::move(m);
    else if (name == "B_t") rom.B = std::move(m);
    else if (name == "C_t") rom.C = std::move(m);
    else if (name == "D_t") rom.D = std::move(m);
    else if (name == "basis") rom.basis = std::move(m);
  }
  rom.validate();
  if (rom.r_eff() != header.at("r_eff").get<Index>() || rom.m() != header.at("m").get<Index>() ||
      rom.p() != header.at("p").get<Index>())
    throw FormatError("dimension mismatch in " + path.string());
  return rom;
}

}  // namespace romshape
