// Deterministic backward dynamic programming over (time step x SOC grid):
// the optimal benchmark for a known drive cycle.
#pragma once

#include "hevems/cycle.hpp"
#include "hevems/ems.hpp"
#include "hevems/powertrain.hpp"

#include <limits>
#include <span>
#include <vector>

namespace hevems::dp {

inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();
inline constexpr int kNoAction = -1;

struct DpSolution {
    ems::StateActionGrid grid; ///< SOC axis and torque actions; the demand axis is unused
    double dt = 1.0;
    std::size_t steps = 0;
    std::vector<double> cost_to_go; ///< (steps + 1) x soc_count, +inf where unreachable
    std::vector<int> policy;        ///< steps x soc_count action indices, kNoAction if none

    // Forward rollout from soc_initial.
    double soc_initial = 0.0;
    std::vector<double> soc_trajectory; ///< steps + 1 entries
    std::vector<std::size_t> actions;   ///< steps entries
    std::vector<double> fuel_rates;     ///< g/s per step
    double total_cost = 0.0;
    double total_fuel = 0.0; ///< g

    std::size_t soc_count() const { return grid.soc_count(); }
    double value(std::size_t t, std::size_t i) const { return cost_to_go[t * soc_count() + i]; }
    int action(std::size_t t, std::size_t i) const { return policy[t * soc_count() + i]; }
    std::span<const double> layer(std::size_t t) const {
        return {cost_to_go.data() + t * soc_count(), soc_count()};
    }
};

/**
 * Linear interpolation of a cost-to-go layer at `soc`. Returns kInfeasible
 * outside the grid or when both neighbours are unreachable; with exactly one
 * unreachable neighbour the reachable neighbour's value is used.
 */
double interpolate(std::span<const double> layer, const ems::StateActionGrid &grid, double soc);

/// Best action at a continuous SOC against cost-to-go layer `next`.
struct ActionChoice {
    int action = kNoAction;
    double cost = kInfeasible; ///< stage cost + interpolated cost-to-go
    double stage_cost = 0.0;
    double soc_next = 0.0;
    double fuel_rate = 0.0;
};

ActionChoice best_action(const powertrain::Powertrain &pt, const ems::RlConfig &cfg,
                         const ems::StateActionGrid &grid, const powertrain::StepDemand &demand,
                         double soc, double dt, std::span<const double> next);

/**
 * Backward recursion with terminal cost alpha (soc - soc_ref)^2 and stage
 * cost [alpha (soc - soc_ref)^2 + m_f] dt. Infeasible splits and successors
 * off the SOC grid are excluded. The rollout from cfg.soc_initial re-solves
 * the one-step problem at the continuous SOC; ModelError names the step
 * and SOC if no feasible action exists there.
 */
DpSolution dp_solve(const DriveCycle &cycle, const powertrain::Powertrain &pt,
                    const ems::RlConfig &cfg, const ems::StateActionGrid &grid);

/// Same as dp_solve() on a precomputed demand profile; an empty profile is allowed.
DpSolution dp_solve_profile(std::span<const powertrain::StepDemand> profile, double dt,
                            const powertrain::Powertrain &pt, const ems::RlConfig &cfg,
                            const ems::StateActionGrid &grid);

} // namespace hevems::dp
