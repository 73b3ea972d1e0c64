#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "romshape/fomsim.hpp"
#include "romshape/io.hpp"

namespace romshape {

struct AmplitudeLevels {
  double low = 0.4;
  double high = 1.0;
};

struct TrialSpec {
  int trial_id = 0;
  std::array<double, 3> amplitudes{0.0, 0.0, 0.0};
  double frequency = 0.1;
  std::array<double, 3> phases_deg{0.0, 120.0, 240.0};
  double duration = 10.0;
  Index steps = 1000;
};

inline constexpr std::array<double, 5> kTableFrequencies{0.1, 0.3, 0.5, 1.0, 1.5};
inline constexpr int kTableTrials = 40;

inline const std::vector<int>& control_test_trials() {
  static const std::vector<int> ids{4, 6, 12, 19, 22, 26, 33, 39};
  return ids;
}

inline std::vector<int> training_trials(int n_train) {
  static const std::array<int, 3> order{40, 17, 36};
  if (n_train < 1 || n_train > 3) throw Error("training trial count must be 1, 2 or 3");
  return {order.begin(), order.begin() + n_train};
}

/// Every grid trial not used for training.
inline std::vector<int> estimation_test_trials() {
  std::vector<int> ids;
  for (int id = 1; id <= kTableTrials; ++id)
    if (id != 17 && id != 36 && id != 40) ids.push_back(id);
  return ids;
}

/// Trial grid cell: rows are amplitude patterns, columns are frequencies.
inline TrialSpec table_trial(int trial_id, const AmplitudeLevels& lv = {}) {
  if (trial_id < 1 || trial_id > kTableTrials) throw Error("unknown trial " + std::to_string(trial_id));
  const int row = (trial_id - 1) / 5, col = (trial_id - 1) % 5;
  const double a = row < 4 ? lv.low : lv.high;
  static const std::array<std::array<int, 3>, 4> pattern{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}}};
  TrialSpec spec;
  spec.trial_id = trial_id;
  for (int i = 0; i < 3; ++i) spec.amplitudes[i] = a * pattern[row % 4][i];
  spec.frequency = kTableFrequencies[col];
  return spec;
}

inline PressureInput input_signal(const TrialSpec& spec, double t) {
  std::array<double, 3> v{};
  for (int i = 0; i < 3; ++i) {
    const double phase = spec.phases_deg[i] * std::numbers::pi / 180.0;
    v[i] = spec.amplitudes[i] * std::sin(2.0 * std::numbers::pi * spec.frequency * t + phase);
  }
  return couple(v[0], v[1], v[2]);
}

/// Centered snapshots of one or more trials. `starts` holds the first column of every trial segment.
struct SnapshotSet {
  Mat X;
  Mat U;
  Mat Y;
  Vec x_neutral;
  Vec y_neutral;
  double dt = 0.01;
  std::vector<int> trial_ids;
  std::vector<Index> starts;

  Index cols() const { return U.cols(); }
  /// [begin, end) column ranges, one per trial.
  std::vector<std::pair<Index, Index>> segments() const {
    std::vector<std::pair<Index, Index>> out;
    for (std::size_t i = 0; i < starts.size(); ++i)
      out.emplace_back(starts[i], i + 1 < starts.size() ? starts[i + 1] : cols());
    return out;
  }
  bool has_states() const { return X.cols() == U.cols() && X.rows() > 0; }
};

/// Samples t_k = k dt, k = 0..K-1, starting at the neutral state; U[:,k] is held over [t_k, t_k+1).
inline SnapshotSet run_trial(const FomConfig& cfg, const TrialSpec& spec, bool keep_states = true) {
  cfg.validate();
  if (spec.steps < 1) throw Error("TrialSpec: steps must be positive");
  const Index K = spec.steps;
  FomState s = neutral_state(cfg);
  SnapshotSet out;
  out.x_neutral = full_state(cfg, s);
  out.y_neutral = output_from_nodes(cfg, out.x_neutral);
  out.dt = cfg.dt;
  out.trial_ids = {spec.trial_id};
  out.starts = {0};
  out.X.resize(keep_states ? cfg.n_state() : 0, keep_states ? K : 0);
  out.U.resize(FomConfig::n_inputs, K);
  out.Y.resize(FomConfig::n_outputs, K);
  for (Index k = 0; k < K; ++k) {
    const Vec x = full_state(cfg, s);
    const PressureInput u = input_signal(spec, static_cast<double>(k) * cfg.dt);
    if (keep_states) out.X.col(k) = x - out.x_neutral;
    out.U.col(k) = u;
    out.Y.col(k) = output_from_nodes(cfg, x) - out.y_neutral;
    if (k + 1 < K) s = step(cfg, s, u);
  }
  return out;
}

inline SnapshotSet concat(const std::vector<SnapshotSet>& sets) {
  if (sets.empty()) throw Error("concat: no sets");
  const SnapshotSet& f = sets.front();
  Index total = 0;
  bool states = f.has_states();
  for (const auto& s : sets) {
    if (s.U.rows() != f.U.rows() || s.Y.rows() != f.Y.rows() || s.X.rows() != f.X.rows() ||
        s.dt != f.dt || s.y_neutral != f.y_neutral || s.x_neutral != f.x_neutral)
      throw Error("concat: mismatched dimensions");
    states = states && s.has_states();
    total += s.cols();
  }
  SnapshotSet out;
  out.x_neutral = f.x_neutral;
  out.y_neutral = f.y_neutral;
  out.dt = f.dt;
  out.X.resize(states ? f.X.rows() : 0, states ? total : 0);
  out.U.resize(f.U.rows(), total);
  out.Y.resize(f.Y.rows(), total);
  Index off = 0;
  for (const auto& s : sets) {
    if (states) out.X.middleCols(off, s.cols()) = s.X;
    out.U.middleCols(off, s.cols()) = s.U;
    out.Y.middleCols(off, s.cols()) = s.Y;
    for (Index st : s.starts) out.starts.push_back(st + off);
    out.trial_ids.insert(out.trial_ids.end(), s.trial_ids.begin(), s.trial_ids.end());
    off += s.cols();
  }
  return out;
}

inline json trial_spec_json(const TrialSpec& s) {
  return {{"trial_id", s.trial_id}, {"amplitudes", s.amplitudes}, {"frequency", s.frequency},
          {"phases_deg", s.phases_deg}, {"duration", s.duration}, {"steps", s.steps}};
}

inline void save(const SnapshotSet& set, const fs::path& dir, json meta = json::object()) {
  fs::create_directories(dir);
  write_matrix(dir / "X.f64", set.X);
  write_matrix(dir / "U.f64", set.U);
  write_matrix(dir / "Y.f64", set.Y);
  write_matrix(dir / "x_neutral.f64", set.x_neutral);
  write_matrix(dir / "y_neutral.f64", set.y_neutral);
  meta["dt"] = set.dt;
  meta["trial_ids"] = set.trial_ids;
  meta["starts"] = set.starts;
  write_file(dir / "meta.json", meta.dump(2) + "\n");
}

/// Loads a saved set; states may be skipped when only inputs/outputs are needed.
inline SnapshotSet load(const fs::path& dir, bool with_states = true) {
  json meta;
  try {
    meta = json::parse(read_file(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw FormatError("corrupted header " + (dir / "meta.json").string() + ": " + e.what());
  }
  SnapshotSet s;
  s.U = read_matrix(dir / "U.f64");
  s.Y = read_matrix(dir / "Y.f64");
  s.y_neutral = read_matrix(dir / "y_neutral.f64");
  s.x_neutral = read_matrix(dir / "x_neutral.f64");
  s.X = with_states ? read_matrix(dir / "X.f64") : Mat(0, 0);
  s.dt = meta.at("dt").get<double>();
  s.trial_ids = meta.at("trial_ids").get<std::vector<int>>();
  s.starts = meta.at("starts").get<std::vector<Index>>();
  if (s.U.cols() != s.Y.cols() || (with_states && s.X.cols() != s.U.cols()) ||
      s.y_neutral.cols() != 1 || s.y_neutral.rows() != s.Y.rows() ||
      (with_states && s.x_neutral.rows() != s.X.rows()))
    throw FormatError("dimension mismatch in " + dir.string());
  return s;
}

/// A generated dataset: one snapshot set per grid trial.
struct Dataset {
  std::map<int, SnapshotSet> trials;

  const SnapshotSet& trial(int id) const {
    auto it = trials.find(id);
    if (it == trials.end()) throw Error("unknown trial " + std::to_string(id));
    return it->second;
  }
  SnapshotSet training_set(int n_train) const {
    std::vector<SnapshotSet> parts;
    for (int id : training_trials(n_train)) parts.push_back(trial(id));
    return concat(parts);
  }
};

inline Dataset load_dataset(const fs::path& dir, bool with_states = true) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError("corrupted dataset manifest: " + std::string(e.what()));
  }
  Dataset ds;
  for (int id : manifest.at("trials").get<std::vector<int>>())
    ds.trials.emplace(id, load(dir / std::to_string(id), with_states));
  return ds;
}

}  // namespace romshape
