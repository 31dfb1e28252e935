#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "lqrlab/optimizers.hpp"
#include "lqrlab/plant.hpp"

namespace lqrlab {

using json = nlohmann::ordered_json;

// Exit codes of the experiment runner.
inline constexpr int kExitOk = 0;
inline constexpr int kExitBadConfig = 2;
inline constexpr int kExitNumericalFailure = 3;
inline constexpr int kExitCheckFailure = 4;

/// Builds a plant from the "plant" section of a config: scalar,
/// mass_spring (weights: identity | heavy | explicit) or explicit
/// matrices (inline row arrays or {"csv": path}).
Plant plant_from_config(const json& section,
                        const std::filesystem::path& base_dir = {});

/// Validates, resolves, runs one task, and writes its artifacts plus a
/// manifest into out_dir. Accepts either a plain config or a previously
/// written manifest (replay). Returns an exit code; never throws.
int run_experiment(const json& config, const std::filesystem::path& out_dir);

/// Resolved-config echo written next to every run's artifacts.
json make_manifest(const json& resolved_config,
                   const std::vector<std::string>& artifacts);

/// Frozen convergence-trace schema: iter,obj_err,grad_norm,step,wall_ms.
/// Unless `timing` is set, wall_ms is written as 0 so that reruns with
/// the same config and seed are byte-identical.
void write_trace_csv(const std::filesystem::path& path,
                     const ConvergenceTrace& trace, bool timing);

}  // namespace lqrlab
