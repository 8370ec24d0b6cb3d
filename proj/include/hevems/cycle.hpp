// Drive cycles: uniformly sampled vehicle speed traces.
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hevems {

/**
 * @brief Speed-vs-time trace sampled every `dt` seconds.
 *
 * Speeds are in m/s. A valid cycle has at least two samples, no negative
 * speeds and a strictly positive sample period. Build through make_cycle()
 * or the loaders, which enforce those invariants.
 */
struct DriveCycle {
    std::string name;
    double dt = 1.0;
    std::vector<double> speeds;

    std::size_t size() const { return speeds.size(); }
    double duration() const { return static_cast<double>(speeds.size() - 1) * dt; }

    bool operator==(const DriveCycle &) const = default;
};

/// Throws ValidationError if `cycle` breaks an invariant.
void validate(const DriveCycle &cycle);

DriveCycle make_cycle(std::string name, double dt, std::vector<double> speeds);

/**
 * Parse the CSV cycle format: optional header, then either one speed column
 * or `t,v` columns. LF and CRLF line endings are accepted. When a time column
 * is present it must advance by exactly `dt`. With `kmh` set, speeds are
 * divided by 3.6 on ingest.
 */
DriveCycle parse_cycle_csv(std::string_view text, double dt, bool kmh = false,
                           std::string name = "cycle");

DriveCycle load_cycle(const std::filesystem::path &path, double dt = 1.0, bool kmh = false);

/// `t,v` CSV using shortest round-trip formatting, so load/write/load is bit-exact.
std::string format_cycle_csv(const DriveCycle &cycle);

void write_cycle(const std::filesystem::path &path, const DriveCycle &cycle);

/// Contiguous sub-cycle [start, start + length). Requires length >= 2.
DriveCycle window(const DriveCycle &cycle, std::size_t start, std::size_t length);

struct CycleStats {
    double duration = 0.0;       ///< s
    double mean_speed = 0.0;     ///< m/s
    double max_speed = 0.0;      ///< m/s
    double mean_abs_accel = 0.0; ///< m/s^2, forward differences
};

CycleStats cycle_stats(const DriveCycle &cycle);

/// Linear-interpolation resampling onto a new period (default 1 s).
DriveCycle resample(const DriveCycle &cycle, double new_dt = 1.0);

/// Names of the bundled regulatory cycles ("nedc", "ftp75", "wltc_jp").
std::vector<std::string> standard_cycle_names();

/// Load a bundled cycle by name from the data directory.
DriveCycle standard_cycle(std::string_view name);

} // namespace hevems
