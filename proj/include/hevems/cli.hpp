// Command-line front end: subcommands for every pipeline stage, with
// parameters pinned by an experiment config file and overridable by flags.
#pragma once

#include "hevems/ems.hpp"
#include "hevems/markov.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace hevems::cli {

/**
 * @brief Defaults shared by all subcommands, read from `--config`.
 *
 * Relative paths are resolved against the config file's directory. Cycle
 * aliases let `--cycle A` refer to `cycles.A`.
 */
struct ExperimentConfig {
    std::optional<std::filesystem::path> powertrain;
    markov::SpeedGrid speed_grid;
    ems::StateActionGrid grid;
    ems::RlConfig rl;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir;
    std::map<std::string, std::filesystem::path> cycles;
    double dt = 1.0;
    bool kmh = false;

    void validate() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path &path);

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitModel = 3;

/// Run the tool with `args` (program name excluded). Never throws.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace hevems::cli
