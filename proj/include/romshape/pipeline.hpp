#pragma once

// Orchestration for the command-line tool: configuration, sweep dispatch and output layout.

#include <atomic>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "romshape/dataset.hpp"
#include "romshape/estimator.hpp"
#include "romshape/io.hpp"
#include "romshape/metrics.hpp"
#include "romshape/reference.hpp"
#include "romshape/romfit.hpp"
#include "romshape/rompc.hpp"
#include "romshape/tracking.hpp"

namespace romshape {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

struct RunConfig {
  FomConfig fom;
  AmplitudeLevels levels;
  std::vector<int> trials;
  Index steps = 1000;

  std::vector<std::string> methods{"LOpInf", "DMDc", "ERA"};
  std::vector<Index> ranks{2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
  std::vector<int> train_counts{1, 2, 3};
  std::vector<int> era_train_counts{1};

  std::vector<int> estimate_trials = estimation_test_trials();

  PlacementOptions observer;
  MpcSpec mpc;
  std::string weights = "equal";

  std::string control_model = "LOpInf_n3_r18";
  Index control_steps = 1000;
  std::vector<int> control_trials = control_test_trials();
  double gait_amplitude = 0.03;
  std::vector<double> gait_alpha{1.0, 3.5};
  std::vector<double> gait_f{0.5, 1.0};
  std::vector<double> gait_k{0.5, 1.0, 1.5};
  double bioinspired_window_s = 5.0;
  std::string import_file;
  Index import_first_point = 0;

  RunConfig() {
    for (int id = 1; id <= kTableTrials; ++id) trials.push_back(id);
    mpc.Wy = equal_weights();
  }
};

inline json to_json(const RunConfig& c) {
  const FomConfig& f = c.fom;
  return {
      {"fom",
       {{"n_links", f.n_links}, {"total_length", f.total_length}, {"joint_stiffness", f.joint_stiffness},
        {"joint_damping", f.joint_damping}, {"node_mass", f.node_mass}, {"actuation_gain", f.actuation_gain},
        {"span_breaks", f.span_breaks}, {"substeps", f.substeps}, {"dt", f.dt},
        {"length_exponent", f.length_exponent}}},
      {"dataset", {{"A_L", c.levels.low}, {"A_H", c.levels.high}, {"trials", c.trials}, {"steps", c.steps}}},
      {"sweep",
       {{"methods", c.methods}, {"ranks", c.ranks}, {"train_counts", c.train_counts},
        {"era_train_counts", c.era_train_counts}}},
      {"estimate", {{"trials", c.estimate_trials}}},
      {"observer",
       {{"pole_min", c.observer.pole_min}, {"pole_max", c.observer.pole_max}, {"seed", c.observer.seed},
        {"max_attempts", c.observer.max_attempts}, {"cond_limit", c.observer.cond_limit}}},
      {"mpc",
       {{"horizon", c.mpc.horizon}, {"c_u", c.mpc.c_u}, {"c_du", c.mpc.c_du}, {"u_max", c.mpc.u_max},
        {"weights", c.weights}}},
      {"control",
       {{"model", c.control_model}, {"steps", c.control_steps}, {"trials", c.control_trials},
        {"gait_amplitude", c.gait_amplitude}, {"gait_alpha", c.gait_alpha}, {"gait_f", c.gait_f},
        {"gait_k", c.gait_k}, {"bioinspired_window_s", c.bioinspired_window_s}, {"import_file", c.import_file},
        {"import_first_point", c.import_first_point}}},
  };
}

inline Vec weights_from_name(const std::string& name) {
  if (name == "equal") return equal_weights();
  if (name == "posterior") return posterior_weights();
  throw Error("unknown weight scheme '" + name + "'");
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline RunConfig config_from_json(const json& j) {
  const json defaults = to_json(RunConfig{});
  for (const auto& [section, body] : j.items()) {
    if (!defaults.contains(section)) throw Error("unknown config section '" + section + "'");
    if (!body.is_object()) throw Error("config section '" + section + "' must be an object");
    for (const auto& [key, _] : body.items())
      if (!defaults[section].contains(key)) throw Error("unknown config key '" + section + "." + key + "'");
  }
  json m = defaults;
  m.merge_patch(j);
  RunConfig c;
  try {
    const json& f = m["fom"];
    c.fom.n_links = f["n_links"].get<Index>();
    c.fom.total_length = f["total_length"].get<double>();
    c.fom.joint_stiffness = f["joint_stiffness"].get<double>();
    c.fom.joint_damping = f["joint_damping"].get<double>();
    c.fom.node_mass = f["node_mass"].get<double>();
    c.fom.actuation_gain = f["actuation_gain"].get<double>();
    c.fom.span_breaks = f["span_breaks"].get<std::array<double, 4>>();
    c.fom.substeps = f["substeps"].get<Index>();
    c.fom.dt = f["dt"].get<double>();
    c.fom.length_exponent = f["length_exponent"].get<int>();
    const json& d = m["dataset"];
    c.levels = {d["A_L"].get<double>(), d["A_H"].get<double>()};
    c.trials = d["trials"].get<std::vector<int>>();
    c.steps = d["steps"].get<Index>();
    const json& s = m["sweep"];
    c.methods = s["methods"].get<std::vector<std::string>>();
    c.ranks = s["ranks"].get<std::vector<Index>>();
    c.train_counts = s["train_counts"].get<std::vector<int>>();
    c.era_train_counts = s["era_train_counts"].get<std::vector<int>>();
    c.estimate_trials = m["estimate"]["trials"].get<std::vector<int>>();
    const json& o = m["observer"];
    c.observer.pole_min = o["pole_min"].get<double>();
    c.observer.pole_max = o["pole_max"].get<double>();
    c.observer.seed = o["seed"].get<std::uint64_t>();
    c.observer.max_attempts = o["max_attempts"].get<int>();
    c.observer.cond_limit = o["cond_limit"].get<double>();
    const json& p = m["mpc"];
    c.mpc.horizon = p["horizon"].get<Index>();
    c.mpc.c_u = p["c_u"].get<double>();
    c.mpc.c_du = p["c_du"].get<double>();
    c.mpc.u_max = p["u_max"].get<double>();
    c.weights = p["weights"].get<std::string>();
    const json& k = m["control"];
    c.control_model = k["model"].get<std::string>();
    c.control_steps = k["steps"].get<Index>();
    c.control_trials = k["trials"].get<std::vector<int>>();
    c.gait_amplitude = k["gait_amplitude"].get<double>();
    c.gait_alpha = k["gait_alpha"].get<std::vector<double>>();
    c.gait_f = k["gait_f"].get<std::vector<double>>();
    c.gait_k = k["gait_k"].get<std::vector<double>>();
    c.bioinspired_window_s = k["bioinspired_window_s"].get<double>();
    c.import_file = k["import_file"].get<std::string>();
    c.import_first_point = k["import_first_point"].get<Index>();
  } catch (const json::exception& e) {
    throw Error(std::string("invalid config: ") + e.what());
  }
  c.mpc.Wy = weights_from_name(c.weights);
  c.fom.validate();
  for (int id : c.trials) table_trial(id);
  for (const auto& meth : c.methods) method_from_string(meth);
  return c;
}

/// Applies one `dotted.key=value` override; the value is parsed as JSON, falling back to a string.
inline void apply_override(json& j, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error("bad override key: " + key);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

inline std::string config_hash(const RunConfig& c) { return sha256_hex(to_json(c).dump()); }

/// Reads the worker count from `ROMSHAPE_JOBS` when the flag is not given.
inline int resolve_jobs(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("ROMSHAPE_JOBS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

/// Runs fn(i) for i in [0, n) on `jobs` threads. Results are stored by index, so the
/// output never depends on scheduling. fn must not throw; callers record errors in T.
template <class T>
std::vector<T> parallel_map(std::size_t n, int jobs, const std::function<T(std::size_t)>& fn) {
  std::vector<T> out(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) out[i] = fn(i);
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (threads == 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<std::string> failures;
  json manifest;
};

inline void note_failure(CommandResult& r, const std::string& msg) {
  r.failures.push_back(msg);
  r.exit_code = kExitPartial;
}

// ---------------------------------------------------------------- generate-dataset

inline CommandResult cmd_generate_dataset(const RunConfig& cfg, const fs::path& out, int jobs) {
  const fs::path dir = out / "dataset";
  fs::remove_all(dir);
  fs::create_directories(dir);
  struct Cell {
    bool ok = false;
    std::string error;
  };
  const auto cells = parallel_map<Cell>(cfg.trials.size(), jobs, [&](std::size_t i) {
    TrialSpec spec = table_trial(cfg.trials[i], cfg.levels);
    spec.steps = cfg.steps;
    spec.duration = static_cast<double>(cfg.steps) * cfg.fom.dt;
    try {
      save(run_trial(cfg.fom, spec), dir / std::to_string(spec.trial_id), {{"spec", trial_spec_json(spec)}});
      return Cell{true, ""};
    } catch (const Error& e) {
      return Cell{false, e.what()};
    }
  });
  CommandResult res;
  std::vector<int> done;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].ok) done.push_back(cfg.trials[i]);
    else note_failure(res, "trial " + std::to_string(cfg.trials[i]) + ": " + cells[i].error);
  }
  write_file(dir / "config.json", to_json(cfg).dump(2) + "\n");
  res.manifest = write_manifest(dir, config_hash(cfg), {{"trials", done}});
  return res;
}

// ---------------------------------------------------------------- train

struct SweepCell {
  RomMethod method;
  int n_train;
  Index r;
  std::string name() const { return to_string(method) + "_n" + std::to_string(n_train) + "_r" + std::to_string(r); }
};

inline std::vector<SweepCell> sweep_cells(const RunConfig& cfg) {
  std::vector<SweepCell> cells;
  for (const auto& m : cfg.methods) {
    const RomMethod method = method_from_string(m);
    const auto& counts = method == RomMethod::ERA ? cfg.era_train_counts : cfg.train_counts;
    for (int n : counts)
      for (Index r : cfg.ranks) cells.push_back({method, n, r});
  }
  return cells;
}

inline CommandResult cmd_train(const RunConfig& cfg, const fs::path& out, int jobs) {
  const fs::path dir = out / "models";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::vector<SweepCell> cells = sweep_cells(cfg);
  const Dataset ds = load_dataset(out / "dataset");

  // One trainer per (method, training set); the rank cells share its factorizations.
  std::vector<std::pair<RomMethod, int>> groups;
  for (const auto& c : cells)
    if (std::find(groups.begin(), groups.end(), std::pair{c.method, c.n_train}) == groups.end())
      groups.emplace_back(c.method, c.n_train);
  struct Trainer {
    std::optional<LopinfTrainer> lopinf;
    std::optional<DmdcTrainer> dmdc;
    std::optional<EraTrainer> era;
    std::string error;
  };
  auto trainers = parallel_map<std::shared_ptr<Trainer>>(groups.size(), jobs, [&](std::size_t i) {
    auto t = std::make_shared<Trainer>();
    try {
      const SnapshotSet data = ds.training_set(groups[i].second);
      switch (groups[i].first) {
        case RomMethod::LOpInf: t->lopinf.emplace(data); break;
        case RomMethod::DMDc: t->dmdc.emplace(data); break;
        case RomMethod::ERA: t->era.emplace(data); break;
      }
    } catch (const Error& e) {
      t->error = e.what();
    }
    return t;
  });
  auto trainer_for = [&](const SweepCell& c) -> const Trainer& {
    const auto it = std::find(groups.begin(), groups.end(), std::pair{c.method, c.n_train});
    return *trainers[static_cast<std::size_t>(it - groups.begin())];
  };

  const auto status = parallel_map<std::string>(cells.size(), jobs, [&](std::size_t i) -> std::string {
    const SweepCell& c = cells[i];
    const Trainer& t = trainer_for(c);
    if (!t.error.empty()) return t.error;
    try {
      DiscreteRom rom;
      if (t.lopinf) rom = lopinf_to_discrete(t.lopinf->fit(c.r), cfg.fom.dt);
      else if (t.dmdc) rom = t.dmdc->fit(c.r);
      else rom = t.era->fit(c.r);
      save_rom(dir / (c.name() + ".rom"), rom);
      return "";
    } catch (const Error& e) {
      return e.what();
    }
  });

  CommandResult res;
  std::string index = "model,method,n_train,r,status\n";
  std::vector<std::string> fitted;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const SweepCell& c = cells[i];
    index += c.name() + "," + to_string(c.method) + "," + std::to_string(c.n_train) + "," + std::to_string(c.r) + "," +
             (status[i].empty() ? "ok" : "failed: " + status[i]) + "\n";
    if (status[i].empty()) fitted.push_back(c.name());
    else note_failure(res, c.name() + ": " + status[i]);
  }
  write_file(dir / "index.csv", index);
  res.manifest = write_manifest(dir, config_hash(cfg), {{"models", fitted}});
  return res;
}

inline std::vector<std::string> fitted_models(const fs::path& out) {
  const json m = json::parse(read_file(out / "models" / "manifest.json"));
  return m.at("models").get<std::vector<std::string>>();
}

// ---------------------------------------------------------------- estimate

struct EstimateRow {
  std::string model;
  int trial = 0;
  double e_open = kNaN;
  double e_closed = kNaN;
  std::string note;
};

inline CommandResult cmd_estimate(const RunConfig& cfg, const fs::path& out, int jobs) {
  const fs::path dir = out / "estimate";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::vector<std::string> models = fitted_models(out);
  const Dataset ds = load_dataset(out / "dataset", false);

  const auto per_model = parallel_map<std::vector<EstimateRow>>(models.size(), jobs, [&](std::size_t i) {
    std::vector<EstimateRow> rows;
    const DiscreteRom rom = load_rom(out / "models" / (models[i] + ".rom"));
    std::optional<ObserverGain> gain;
    std::string note;
    try {
      gain = place_gain(rom, cfg.observer);
    } catch (const Error& e) {
      note = e.what();
    }
    for (int id : cfg.estimate_trials) {
      const SnapshotSet& t = ds.trial(id);
      EstimateRow row{models[i], id, kNaN, kNaN, note};
      row.e_open = rel_estimation_error(t.Y, rollout_open(rom, Vec::Zero(rom.r_eff()), t.U).Y);
      if (gain) row.e_closed = rel_estimation_error(t.Y, rollout_closed(rom, *gain, t.U, t.Y).Y);
      rows.push_back(row);
    }
    return rows;
  });

  CommandResult res;
  std::string csv = "model,trial,e_open,e_closed,note\n";
  for (const auto& rows : per_model)
    for (const auto& r : rows) {
      csv += r.model + "," + std::to_string(r.trial) + "," + format_double(r.e_open) + "," + format_double(r.e_closed) +
             "," + r.note + "\n";
      if (!r.note.empty() && r.trial == cfg.estimate_trials.front()) note_failure(res, r.model + ": " + r.note);
    }
  write_file(dir / "e_y.csv", csv);
  res.manifest = write_manifest(dir, config_hash(cfg));
  return res;
}

// ---------------------------------------------------------------- control

struct ControlCase {
  std::string name;
  ReferenceTrajectory ref;
  Window window;
};

inline std::vector<GaitParams> configured_gaits(const RunConfig& cfg) {
  std::vector<GaitParams> out;
  for (double alpha : cfg.gait_alpha)
    for (double f : cfg.gait_f)
      for (double k : cfg.gait_k) out.push_back({cfg.gait_amplitude, alpha, f, k, cfg.fom.total_length});
  return out;
}

inline std::vector<ControlCase> control_cases(const RunConfig& cfg, const std::string& preset, const fs::path& out) {
  std::vector<ControlCase> cases;
  const Index K = cfg.control_steps;
  if (preset == "feasible-replay") {
    const Dataset ds = load_dataset(out / "dataset", false);
    for (int id : cfg.control_trials) cases.push_back({"trial_" + std::to_string(id), replay(ds, id), {}});
  } else if (preset == "bioinspired") {
    const Index w = std::min<Index>(K, static_cast<Index>(std::llround(cfg.bioinspired_window_s / cfg.fom.dt)));
    for (const GaitParams& g : configured_gaits(cfg)) {
      std::ostringstream name;
      name << "alpha" << g.alpha << "_f" << g.f << "_k" << g.k;
      cases.push_back({name.str(), traveling_wave(g, K, cfg.fom.dt, cfg.fom.units_per_meter()), {K - w, K}});
    }
  } else if (preset == "import") {
    if (cfg.import_file.empty()) throw Error("import preset needs control.import_file");
    ImportOptions opt;
    opt.total_length = cfg.fom.total_length;
    opt.length_exponent = cfg.fom.length_exponent;
    opt.first_point = cfg.import_first_point;
    cases.push_back({"import", import_centerlines(cfg.import_file, K, cfg.fom.dt, opt), {}});
  } else {
    throw Error("unknown control preset '" + preset + "'");
  }
  return cases;
}

/// Wy with the reference mask applied: unmasked entries get zero weight.
inline MpcSpec masked_spec(MpcSpec spec, const std::vector<bool>& mask) {
  for (Index i = 0; i < spec.Wy.size(); ++i)
    if (!mask[static_cast<std::size_t>(i)]) spec.Wy(i) = 0.0;
  return spec;
}

inline CommandResult cmd_control(const RunConfig& cfg, const std::string& preset, const fs::path& out, int jobs) {
  const fs::path dir = out / "control" / preset;
  fs::remove_all(dir);
  fs::create_directories(dir);
  const DiscreteRom rom = load_rom(out / "models" / (cfg.control_model + ".rom"));
  const ObserverGain gain = place_gain(rom, cfg.observer);
  const std::vector<ControlCase> cases = control_cases(cfg, preset, out);

  struct Outcome {
    TrackingReport rep;
    int saturated_steps = 0;
    double max_abs_u = 0.0;
  };
  const auto outcomes = parallel_map<Outcome>(cases.size(), jobs, [&](std::size_t i) {
    const ControlCase& c = cases[i];
    const RompcPolicy policy(rom, gain, masked_spec(cfg.mpc, c.ref.mask));
    Outcome o{run_control_trial(cfg.fom, policy, c.ref, cfg.control_steps, c.window)};
    for (const auto& d : o.rep.diagnostics) o.saturated_steps += d.saturated > 0;
    if (o.rep.U.size() > 0) o.max_abs_u = o.rep.U.cwiseAbs().maxCoeff();
    save_report(o.rep, dir / c.name);
    return o;
  });

  CommandResult res;
  std::string csv = "case,e_r,window_begin,window_end,complete,saturated_steps,max_abs_u\n";
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const Outcome& o = outcomes[i];
    csv += cases[i].name + "," + format_double(o.rep.metrics.e_r) + "," + std::to_string(o.rep.metrics.window.begin) +
           "," + std::to_string(o.rep.metrics.window.end) + "," + (o.rep.complete ? "1" : "0") + "," +
           std::to_string(o.saturated_steps) + "," + format_double(o.max_abs_u) + "\n";
    if (!o.rep.complete) note_failure(res, cases[i].name + ": " + o.rep.failure);
  }
  write_file(dir / "metrics.csv", csv);
  res.manifest = write_manifest(dir, config_hash(cfg), {{"model", cfg.control_model}, {"preset", preset}});
  return res;
}

// ---------------------------------------------------------------- report

inline std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::getline(in, line);  // header
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split_csv_line(line));
  return rows;
}

inline json stats_json(const std::vector<double>& v) {
  const SummaryStats s = summarize(v);
  return {{"mean", format_double(s.mean)}, {"std", format_double(s.stddev)}, {"count", s.count}};
}

inline CommandResult cmd_report(const fs::path& out) {
  const fs::path dir = out / "report";
  fs::remove_all(dir);
  fs::create_directories(dir);
  json summary = json::object();
  std::string hash;
  if (fs::exists(out / "models" / "manifest.json"))
    hash = json::parse(read_file(out / "models" / "manifest.json")).at("config_hash").get<std::string>();

  if (fs::exists(out / "estimate" / "e_y.csv")) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_model;
    for (const auto& row : read_csv_rows(out / "estimate" / "e_y.csv")) {
      by_model[row.at(0)].first.push_back(parse_double(row.at(2)));
      by_model[row.at(0)].second.push_back(parse_double(row.at(3)));
    }
    std::string csv = "model,open_mean,open_std,closed_mean,closed_std\n";
    json est = json::object();
    for (const auto& [model, v] : by_model) {
      const SummaryStats o = summarize(v.first), c = summarize(v.second);
      csv += model + "," + format_double(o.mean) + "," + format_double(o.stddev) + "," + format_double(c.mean) + "," +
             format_double(c.stddev) + "\n";
      est[model] = {{"open", stats_json(v.first)}, {"closed", stats_json(v.second)}};
    }
    write_file(dir / "estimation_summary.csv", csv);
    summary["estimation"] = est;
  }
  if (fs::exists(out / "control")) {
    std::vector<fs::path> presets;
    for (const auto& e : fs::directory_iterator(out / "control"))
      if (fs::exists(e.path() / "metrics.csv")) presets.push_back(e.path());
    std::sort(presets.begin(), presets.end());
    json ctl = json::object();
    for (const auto& p : presets) {
      std::vector<double> er;
      json cases = json::object();
      for (const auto& row : read_csv_rows(p / "metrics.csv")) {
        er.push_back(parse_double(row.at(1)));
        cases[row.at(0)] = row.at(1);
      }
      ctl[p.filename().string()] = {{"e_r", stats_json(er)}, {"cases", cases}};
    }
    summary["control"] = ctl;
  }
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  CommandResult res;
  res.manifest = write_manifest(dir, hash);
  return res;
}

}  // namespace romshape
