#include "hevems/sim.hpp"

#include "hevems/error.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <limits>

namespace hevems::sim {

SimResult simulate(const Controller &controller, double soc_min, double soc_max,
                   const DriveCycle &cycle, const powertrain::Powertrain &pt,
                   const ems::RlConfig &cfg, double soc_initial) {
    if (soc_initial < soc_min || soc_initial > soc_max) {
        throw ValidationError("simulate: initial SOC lies outside the grid");
    }
    const auto start = std::chrono::steady_clock::now();
    const auto profile = powertrain::demand_profile(cycle, pt);

    SimResult result;
    result.log.reserve(profile.size());
    double soc = soc_initial;
    for (std::size_t k = 0; k < profile.size(); ++k) {
        const auto &d = profile[k];
        const auto split = powertrain::split_step(pt, d, controller(k, soc, d), soc);
        result.log.push_back({static_cast<double>(k) * cycle.dt, d.v, split.torque, d.engine_rpm,
                              split.fuel_rate, split.p_battery, soc, split.feasible});
        result.fuel_total += split.fuel_rate * cycle.dt;
        result.cost_total += ems::reward(cfg, soc, split.fuel_rate, cycle.dt);
        if (!split.feasible) {
            result.cost_total += cfg.infeasible_penalty;
            ++result.infeasible_steps;
        }
        soc = std::clamp(powertrain::advance_soc(pt.battery, soc, split.p_battery, cycle.dt),
                         soc_min, soc_max);
    }
    result.soc_end = soc;
    result.cost_total += ems::reward(cfg, soc, 0.0, 1.0);
    result.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

SimResult simulate(const ems::Policy &policy, const DriveCycle &cycle,
                   const powertrain::Powertrain &pt, const ems::RlConfig &cfg, double soc_initial) {
    if (policy.actions.size() != policy.grid.state_count()) {
        throw ValidationError("simulate: policy size does not match its grid");
    }
    const auto controller = [&policy](std::size_t, double soc, const powertrain::StepDemand &d) {
        return policy.torque(policy.grid.state_index(soc, d.shaft_torque));
    };
    return simulate(controller, policy.grid.soc_min, policy.grid.soc_max, cycle, pt, cfg,
                    soc_initial);
}

SimResult simulate(const dp::DpSolution &solution, const DriveCycle &cycle,
                   const powertrain::Powertrain &pt, const ems::RlConfig &cfg) {
    if (solution.steps + 1 != cycle.size()) {
        throw ValidationError("simulate: DP solution was computed for a different cycle length");
    }
    const auto &grid = solution.grid;
    const auto controller = [&](std::size_t k, double soc, const powertrain::StepDemand &d) {
        const auto choice = dp::best_action(pt, cfg, grid, d, soc, cycle.dt, solution.layer(k + 1));
        if (choice.action == dp::kNoAction) {
            return 0.0; // reported as infeasible by the split
        }
        return grid.torque(static_cast<std::size_t>(choice.action));
    };
    return simulate(controller, grid.soc_min, grid.soc_max, cycle, pt, cfg, solution.soc_initial);
}

Summary summarize(std::string name, const SimResult &result) {
    return {std::move(name), result.fuel_total, result.cost_total, result.soc_end, result.wall_time};
}

double gap_percent(double value, double base) {
    if (base == 0.0) {
        return value == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return (value - base) / base * 100.0;
}

ComparisonReport compare(std::span<const Summary> results, const std::string &baseline) {
    if (results.empty()) {
        throw ValidationError("compare: no results given");
    }
    const auto base = std::find_if(results.begin(), results.end(),
                                   [&](const Summary &s) { return s.name == baseline; });
    if (base == results.end()) {
        throw ValidationError("compare: baseline '" + baseline + "' is not among the results");
    }
    ComparisonReport report{baseline, {}};
    for (const auto &s : results) {
        report.rows.push_back({s, gap_percent(s.fuel_total, base->fuel_total),
                               gap_percent(s.cost_total, base->cost_total)});
    }
    return report;
}

std::string format_report(const ComparisonReport &report) {
    std::size_t width = 6;
    for (const auto &row : report.rows) {
        width = std::max(width, row.summary.name.size());
    }
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-*s %12s %9s %14s %9s %8s %10s\n", static_cast<int>(width),
                  "method", "fuel [g]", "fuel gap", "cost", "cost gap", "SOC end", "time [s]");
    out += line;
    for (const auto &row : report.rows) {
        const auto &s = row.summary;
        std::snprintf(line, sizeof line, "%-*s %12.2f %+8.2f%% %14.2f %+8.2f%% %8.4f %10.3f\n",
                      static_cast<int>(width), s.name.c_str(), s.fuel_total, row.fuel_gap_pct,
                      s.cost_total, row.cost_gap_pct, s.soc_end, s.wall_time);
        out += line;
    }
    out += "baseline: " + report.baseline + "\n";
    return out;
}

} // namespace hevems::sim
