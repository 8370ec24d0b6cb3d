#include "hevems/dp.hpp"

#include "hevems/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hevems::dp {

double interpolate(std::span<const double> layer, const ems::StateActionGrid &grid, double soc) {
    constexpr double kEdge = 1e-12;
    if (soc < grid.soc_min - kEdge || soc > grid.soc_max + kEdge) {
        return kInfeasible;
    }
    const std::size_t n = layer.size();
    const double pos = std::clamp((soc - grid.soc_min) / grid.soc_step, 0.0, static_cast<double>(n - 1));
    const std::size_t i = std::min(static_cast<std::size_t>(pos), n - 2);
    const double w = pos - static_cast<double>(i);
    const double lo = layer[i];
    const double hi = layer[i + 1];
    if (std::isfinite(lo) && std::isfinite(hi)) {
        return lo + w * (hi - lo);
    }
    // One unreachable neighbour: take the reachable one. Returning +inf here
    // would shrink the reachable band by one cell per backward step.
    if (std::isfinite(lo)) {
        return lo;
    }
    if (std::isfinite(hi)) {
        return hi;
    }
    return kInfeasible;
}

ActionChoice best_action(const powertrain::Powertrain &pt, const ems::RlConfig &cfg,
                         const ems::StateActionGrid &grid, const powertrain::StepDemand &demand,
                         double soc, double dt, std::span<const double> next) {
    ActionChoice best;
    for (std::size_t a = 0; a < grid.action_count(); ++a) {
        const auto split = powertrain::split_step(pt, demand, grid.torque(a), soc);
        if (!split.feasible) {
            continue;
        }
        const double soc_next = powertrain::advance_soc(pt.battery, soc, split.p_battery, dt);
        const double to_go = interpolate(next, grid, soc_next);
        if (!std::isfinite(to_go)) {
            continue;
        }
        const double stage = ems::reward(cfg, soc, split.fuel_rate, dt);
        const double total = stage + to_go;
        if (total < best.cost) {
            best = {static_cast<int>(a), total, stage, soc_next, split.fuel_rate};
        }
    }
    return best;
}

DpSolution dp_solve_profile(std::span<const powertrain::StepDemand> profile, double dt,
                            const powertrain::Powertrain &pt, const ems::RlConfig &cfg,
                            const ems::StateActionGrid &grid) {
    pt.validate();
    cfg.validate();
    grid.validate();
    if (cfg.soc_initial < grid.soc_min || cfg.soc_initial > grid.soc_max) {
        throw ValidationError("rl: soc_initial lies outside the SOC grid");
    }

    DpSolution sol;
    sol.grid = grid;
    sol.dt = dt;
    sol.steps = profile.size();
    const std::size_t n = grid.soc_count();
    sol.cost_to_go.assign((sol.steps + 1) * n, kInfeasible);
    sol.policy.assign(sol.steps * n, kNoAction);

    for (std::size_t i = 0; i < n; ++i) {
        sol.cost_to_go[sol.steps * n + i] = ems::reward(cfg, grid.soc_value(i), 0.0, 1.0);
    }
    for (std::size_t t = sol.steps; t-- > 0;) {
        const auto next = sol.layer(t + 1);
        for (std::size_t i = 0; i < n; ++i) {
            const auto choice = best_action(pt, cfg, grid, profile[t], grid.soc_value(i), dt, next);
            sol.cost_to_go[t * n + i] = choice.cost;
            sol.policy[t * n + i] = choice.action;
        }
    }

    sol.soc_initial = cfg.soc_initial;
    double soc = cfg.soc_initial;
    sol.soc_trajectory.push_back(soc);
    for (std::size_t t = 0; t < sol.steps; ++t) {
        const auto choice = best_action(pt, cfg, grid, profile[t], soc, dt, sol.layer(t + 1));
        if (choice.action == kNoAction) {
            std::ostringstream msg;
            msg << "dp: no feasible action at step " << t << " (SOC " << soc << ")";
            throw ModelError(msg.str());
        }
        sol.actions.push_back(static_cast<std::size_t>(choice.action));
        sol.fuel_rates.push_back(choice.fuel_rate);
        sol.total_fuel += choice.fuel_rate * dt;
        sol.total_cost += choice.stage_cost;
        soc = choice.soc_next;
        sol.soc_trajectory.push_back(soc);
    }
    sol.total_cost += ems::reward(cfg, soc, 0.0, 1.0);
    return sol;
}

DpSolution dp_solve(const DriveCycle &cycle, const powertrain::Powertrain &pt,
                    const ems::RlConfig &cfg, const ems::StateActionGrid &grid) {
    const auto profile = powertrain::demand_profile(cycle, pt);
    return dp_solve_profile(profile, cycle.dt, pt, cfg, grid);
}

} // namespace hevems::dp
