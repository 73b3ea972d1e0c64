#pragma once

#include <string>
#include <vector>

#include "romshape/dataset.hpp"
#include "romshape/fomsim.hpp"
#include "romshape/io.hpp"
#include "romshape/metrics.hpp"
#include "romshape/reference.hpp"
#include "romshape/rompc.hpp"

namespace romshape {

struct TrackingReport {
  Mat U;
  Mat Y;
  Mat Yref;
  std::vector<StepDiagnostics> diagnostics;
  MetricRecord metrics;
  std::vector<bool> mask;
  bool complete = true;
  std::string failure;
};

/// Closed loop at the sampling rate: measure y_k, update observer and MPC, apply u_k to the FOM.
/// `window` selects the steady-state metric range; an empty window means the whole run.
inline TrackingReport run_control_trial(const FomConfig& cfg, const RompcPolicy& policy, const ReferenceTrajectory& ref,
                                        Index steps, Window window = {}) {
  cfg.validate();
  if (ref.steps() < steps) throw Error("run_control_trial: reference shorter than the run");
  if (ref.targets.rows() != policy.rom().p()) throw Error("run_control_trial: reference has wrong output size");
  FomState s = neutral_state(cfg);
  const Vec y_neutral = output(cfg, s);
  ControllerState state = policy.initial_state();
  TrackingReport rep;
  rep.U = Mat::Zero(FomConfig::n_inputs, steps);
  rep.Y = Mat::Zero(FomConfig::n_outputs, steps);
  rep.Yref = ref.targets.leftCols(steps);
  rep.mask = ref.mask;
  Index done = 0;
  try {
    for (Index k = 0; k < steps; ++k) {
      const Vec y = output(cfg, s) - y_neutral;
      const PressureInput u = state.u_applied;
      rep.U.col(k) = u;
      rep.Y.col(k) = y;
      done = k + 1;
      rep.diagnostics.push_back(policy.step(state, y, ref.window(k, policy.spec().horizon)).diag);
      s = step(cfg, s, u);
    }
  } catch (const Error& e) {
    rep.complete = false;
    rep.failure = e.what();
    rep.U.conservativeResize(Eigen::NoChange, done);
    rep.Y.conservativeResize(Eigen::NoChange, done);
    rep.Yref.conservativeResize(Eigen::NoChange, done);
  }
  if (window.end == 0) window = {0, rep.Y.cols()};
  window.end = std::min(window.end, rep.Y.cols());
  if (window.begin < window.end) {
    rep.metrics = tracking_metrics(rep.Yref, rep.Y, window, ref.mask);
  } else {
    rep.metrics.window = window;
  }
  return rep;
}

inline json metrics_json(const MetricRecord& m) {
  auto vec = [](const Vec& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(format_double(v(i)));
    return a;
  };
  return {{"e_y", format_double(m.e_y)},
          {"e_r", format_double(m.e_r)},
          {"e_r_point", vec(m.e_r_point)},
          {"e_rms_point", vec(m.e_rms_point)},
          {"window", {m.window.begin, m.window.end}},
          {"undefined", m.undefined}};
}

/// U.csv, Y.csv, REF.csv, metrics.json, diagnostics.csv.
inline void save_report(const TrackingReport& rep, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "U.csv", columns_csv(rep.U, indexed_header("k", "u", rep.U.rows())));
  write_file(dir / "Y.csv", columns_csv(rep.Y, output_header(rep.Y.rows())));
  write_file(dir / "REF.csv", columns_csv(rep.Yref, output_header(rep.Yref.rows())));
  json m = metrics_json(rep.metrics);
  m["complete"] = rep.complete;
  if (!rep.complete) m["failure"] = rep.failure;
  write_file(dir / "metrics.json", m.dump(2) + "\n");
  std::string d = "k,objective,iterations,saturated\n";
  for (std::size_t k = 0; k < rep.diagnostics.size(); ++k) {
    const auto& s = rep.diagnostics[k];
    d += std::to_string(k) + "," + format_double(s.objective) + "," + std::to_string(s.iterations) + "," +
         std::to_string(s.saturated) + "\n";
  }
  write_file(dir / "diagnostics.csv", d);
}

}  // namespace romshape
