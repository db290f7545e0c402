#pragma once

// Subcommands of the rydcav tool. Each command writes its outputs into one
// run directory and returns a summary; run_command adds the manifest.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rydcav/config.hpp"

namespace rydcav::cli {

inline constexpr const char* kToolkitVersion = "0.3.0";

struct CommandOutcome {
    bool ok = true;
    std::vector<std::string> files;  // relative to the run directory
    nlohmann::json summary;
    std::vector<std::string> flags;  // why ok is false
};

CommandOutcome cmd_cavity_spectrum(const ExperimentConfig& cfg, const std::filesystem::path& dir);
CommandOutcome cmd_blockade_rabi(const ExperimentConfig& cfg, const std::filesystem::path& dir);
CommandOutcome cmd_stark_sweep(const ExperimentConfig& cfg, const std::filesystem::path& dir);
CommandOutcome cmd_holography(const ExperimentConfig& cfg, const std::filesystem::path& dir);
CommandOutcome cmd_detection_stats(const ExperimentConfig& cfg, const std::filesystem::path& dir);

const std::vector<std::string>& command_names();  // without "all"

struct RunRequest {
    std::string command;
    ExperimentConfig config;
    std::vector<std::string> defaults_applied;
    std::filesystem::path out_root = "out";
    std::string label;  // empty: UTC timestamp
    int threads = 0;    // 0: leave the runtime default
};

struct RunReport {
    int exit_code = 0;
    std::vector<std::filesystem::path> run_dirs;
};

/// Runs one command (or "all") and writes manifest.json next to its outputs.
/// Exit code 0 only when every fit converged and no solver flag was raised.
RunReport run_command(const RunRequest& req);

/// Rebuilds the request recorded in a manifest.
RunRequest request_from_manifest(const nlohmann::json& manifest);

}  // namespace rydcav::cli
