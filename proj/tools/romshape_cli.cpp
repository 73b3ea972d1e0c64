#include <iostream>

#include "CLI11.hpp"
#include "romshape/pipeline.hpp"

using namespace romshape;

namespace {

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    try {
      j = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw Error("cannot parse config " + path + ": " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

int finish(const std::string& what, const CommandResult& r) {
  for (const auto& f : r.failures) std::cerr << what << ": " << f << "\n";
  std::cout << what << ": " << (r.exit_code == kExitOk ? "ok" : "partial (" + std::to_string(r.failures.size()) + " failed)")
            << "\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced-order modeling and shape control for a simulated soft robot"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out = "runs/default";
  std::vector<std::string> overrides;
  int jobs = 0;
  app.add_option("-c,--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a config entry, e.g. --set sweep.ranks=[4,8]");
  app.add_option("-o,--out", out, "Output root directory");
  app.add_option("-j,--jobs", jobs, "Worker threads (default: $ROMSHAPE_JOBS or 1)");

  app.add_subcommand("generate-dataset", "Simulate the 40 sinusoidal excitation trials");
  app.add_subcommand("train", "Fit the ROM sweep");
  app.add_subcommand("estimate", "Open- and closed-loop estimation errors");
  auto* control = app.add_subcommand("control", "Closed-loop tracking");
  std::string preset, import_file;
  control->add_option("preset", preset, "feasible-replay | bioinspired | import")
      ->required()
      ->check(CLI::IsMember({"feasible-replay", "bioinspired", "import"}));
  control->add_option("file", import_file, "Centerline CSV for the import preset");
  app.add_subcommand("report", "Summarize estimation and control results");
  app.add_subcommand("show-config", "Print the effective configuration and its hash");

  CLI11_PARSE(app, argc, argv);
  try {
    RunConfig cfg = load_config(config_path, overrides);
    if (!import_file.empty()) cfg.import_file = import_file;
    const int workers = resolve_jobs(jobs);
    const fs::path root(out);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "show-config") {
      std::cout << to_json(cfg).dump(2) << "\nconfig_hash " << config_hash(cfg) << "\n";
      return kExitOk;
    }
    if (cmd == "generate-dataset") return finish(cmd, cmd_generate_dataset(cfg, root, workers));
    if (cmd == "train") return finish(cmd, cmd_train(cfg, root, workers));
    if (cmd == "estimate") return finish(cmd, cmd_estimate(cfg, root, workers));
    if (cmd == "control") return finish(cmd + " " + preset, cmd_control(cfg, preset, root, workers));
    if (cmd == "report") return finish(cmd, cmd_report(root));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}
