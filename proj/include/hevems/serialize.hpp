// On-disk formats. JSON documents go through nlohmann::json; tables that are
// meant for plotting are CSV. Nothing here records wall-clock time unless the
// caller asks for it, so artifacts from a fixed seed are byte-reproducible.
#pragma once

#include "hevems/dp.hpp"
#include "hevems/ems.hpp"
#include "hevems/markov.hpp"
#include "hevems/powertrain.hpp"
#include "hevems/sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace hevems::serialize {

using json = nlohmann::json;

/// Pretty-printed JSON text with a trailing newline.
std::string dump(const json &j);
/// Parse JSON text; syntax errors become ValidationError tagged with `what`.
json parse(std::string_view text, const std::string &what);
json read_json(const std::filesystem::path &path);
void write_json(const std::filesystem::path &path, const json &j);

// Speed grids and transition matrices.
json to_json(const markov::SpeedGrid &grid);
markov::SpeedGrid speed_grid_from_json(const json &j);
json to_json(const markov::Tpm &tpm);
/// Probabilities are rebuilt from the counts; a stored `probs` array must agree.
markov::Tpm tpm_from_json(const json &j);

// Powertrain. The fuel map lives in its own CSV; the JSON may name it
// (relative to the JSON file) under engine.fuel_map, otherwise the synthetic map is used.
json to_json(const powertrain::Powertrain &pt, const std::string &fuel_map_file = "");
powertrain::Powertrain powertrain_from_json(const json &j,
                                            const std::filesystem::path &base_dir = {});
powertrain::Powertrain load_powertrain(const std::filesystem::path &path);
/// Header row: empty cell then rpm breakpoints; each following row: Nm breakpoint then g/s.
std::string format_fuel_map_csv(const powertrain::FuelMap &map);
powertrain::FuelMap parse_fuel_map_csv(std::string_view text);

// Learning configuration.
json to_json(const ems::StateActionGrid &grid);
ems::StateActionGrid state_action_grid_from_json(const json &j);
json to_json(const ems::RlConfig &cfg);
/// Missing fields keep the values already in `base`.
ems::RlConfig rl_config_from_json(const json &j, ems::RlConfig base = {});

/// `config`, when not null, is echoed into the metadata for provenance.
json to_json(const ems::QTable &q, const json &config = nullptr);
ems::QTable qtable_from_json(const json &j);
std::string format_training_log_csv(const ems::TrainingLog &log);

/// Unreachable cost-to-go entries are written as null.
json to_json(const dp::DpSolution &solution);
dp::DpSolution dp_solution_from_json(const json &j);
std::string format_dp_trajectory_csv(const dp::DpSolution &solution);

std::string format_sim_log_csv(const sim::SimResult &result);
json summary_to_json(const sim::Summary &summary, bool include_wall_time);
sim::Summary summary_from_json(const json &j);
json to_json(const sim::ComparisonReport &report);

std::string format_recognition_csv(std::span<const markov::RecognitionRow> rows);

} // namespace hevems::serialize
