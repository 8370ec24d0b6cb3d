// Closed-loop rollouts of a control law over a drive cycle and side-by-side comparison.
#pragma once

#include "hevems/cycle.hpp"
#include "hevems/dp.hpp"
#include "hevems/ems.hpp"
#include "hevems/powertrain.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hevems::sim {

struct StepRecord {
    double t = 0.0;          ///< s, start of the step
    double v = 0.0;          ///< m/s, mean over the step
    double torque = 0.0;     ///< applied engine torque, Nm
    double engine_rpm = 0.0;
    double fuel_rate = 0.0;  ///< g/s
    double p_battery = 0.0;  ///< W
    double soc = 0.0;        ///< at the start of the step
    bool feasible = true;
};

struct SimResult {
    std::vector<StepRecord> log;
    double fuel_total = 0.0;  ///< g
    double cost_total = 0.0;  ///< stage costs + infeasibility penalties + terminal deviation
    double soc_end = 0.0;
    double wall_time = 0.0;   ///< s
    std::size_t infeasible_steps = 0;
};

/// Engine torque command for step `k` at the current SOC and demand.
using Controller =
    std::function<double(std::size_t k, double soc, const powertrain::StepDemand &demand)>;

/**
 * Roll `controller` over the cycle from `soc_initial`. SOC is integrated with
 * explicit Euler and held inside [soc_min, soc_max]. Infeasible steps are
 * logged and charged cfg.infeasible_penalty, never fatal.
 */
SimResult simulate(const Controller &controller, double soc_min, double soc_max,
                   const DriveCycle &cycle, const powertrain::Powertrain &pt,
                   const ems::RlConfig &cfg, double soc_initial);

/// Greedy tabular policy; no exploration.
SimResult simulate(const ems::Policy &policy, const DriveCycle &cycle,
                   const powertrain::Powertrain &pt, const ems::RlConfig &cfg, double soc_initial);

/// DP benchmark: re-solves the one-step problem against the stored cost-to-go at each SOC.
SimResult simulate(const dp::DpSolution &solution, const DriveCycle &cycle,
                   const powertrain::Powertrain &pt, const ems::RlConfig &cfg);

struct Summary {
    std::string name;
    double fuel_total = 0.0;
    double cost_total = 0.0;
    double soc_end = 0.0;
    double wall_time = 0.0;
};

Summary summarize(std::string name, const SimResult &result);

struct ComparisonRow {
    Summary summary;
    double fuel_gap_pct = 0.0; ///< relative to the baseline
    double cost_gap_pct = 0.0;
};

struct ComparisonReport {
    std::string baseline;
    std::vector<ComparisonRow> rows;
};

/// Percentage gap (value - base) / base * 100.
double gap_percent(double value, double base);

ComparisonReport compare(std::span<const Summary> results, const std::string &baseline);

/// Aligned plain-text table of a report.
std::string format_report(const ComparisonReport &report);

} // namespace hevems::sim
