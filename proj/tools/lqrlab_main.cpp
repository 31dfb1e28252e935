#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "lqrlab/experiment.hpp"

namespace {

constexpr const char* kTasks[] = {
    "solve",        "grad-check",  "flow",        "descend",
    "descend-y",    "random-search", "bias-sweep", "correlation",
    "certify",      "nonconvex-demo",
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lqrlab - continuous-time LQR optimization laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "lqrlab_out";
  std::int64_t seed = -1;
  bool timing = false;

  for (const char* task : kTasks) {
    auto* sub = app.add_subcommand(task);
    sub->add_option("--config", config_path, "experiment config (JSON)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_flag("--timing", timing,
                  "record wall-clock columns (artifacts are then not "
                  "byte-reproducible)");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string task = app.get_subcommands().front()->get_name();

  lqrlab::json config;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "config error: cannot open " << config_path << '\n';
      return lqrlab::kExitBadConfig;
    }
    try {
      in >> config;
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return lqrlab::kExitBadConfig;
    }
  } else if (task != "nonconvex-demo") {
    std::cerr << "config error: --config is required for task " << task << '\n';
    return lqrlab::kExitBadConfig;
  }
  if (config.contains("config")) config = config.at("config");  // manifest replay

  config["task"] = task;
  if (seed >= 0) config["seed"] = static_cast<std::uint64_t>(seed);
  if (timing) config["timing"] = true;
  if (!config_path.empty()) {
    const auto parent =
        std::filesystem::absolute(config_path).parent_path().string();
    if (!config.contains("base_dir")) config["base_dir"] = parent;
  }

  return lqrlab::run_experiment(config, out_dir);
}
