// Tabular Sarsa energy management: discretized MDP over (SOC, shaft-torque
// demand) with engine torque as the action, the quadratic charge-sustaining
// cost, epsilon-greedy exploration, greedy policy extraction, and Q-table
// transfer between drive cycles scaled by the IMN of their transition matrices.
#pragma once

#include "hevems/cycle.hpp"
#include "hevems/markov.hpp"
#include "hevems/powertrain.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hevems::ems {

/**
 * @brief Discretization of the state and action spaces.
 *
 * A state is a (SOC, demand) pair: SOC on [soc_min, soc_max] and the
 * shaft-torque demand (Nm) the driveline asks for at the current step, each
 * quantized to its nearest grid point. Actions are engine torques on
 * [torque_min, torque_max]. State index = soc_index * demand_count + demand_index.
 */
struct StateActionGrid {
    double soc_min = 0.3;
    double soc_max = 0.9;
    double soc_step = 0.01;
    double demand_min = -600.0;
    double demand_max = 1500.0;
    double demand_step = 100.0;
    double torque_min = 0.0;
    double torque_max = 900.0;
    double torque_step = 50.0;

    std::size_t soc_count() const;
    std::size_t demand_count() const;
    std::size_t state_count() const { return soc_count() * demand_count(); }
    std::size_t action_count() const;

    double soc_value(std::size_t i) const { return soc_min + static_cast<double>(i) * soc_step; }
    double torque(std::size_t action) const {
        return torque_min + static_cast<double>(action) * torque_step;
    }

    std::size_t soc_index(double soc) const;
    std::size_t demand_index(double shaft_torque) const;
    std::size_t state_index(double soc, double shaft_torque) const {
        return soc_index(soc) * demand_count() + demand_index(shaft_torque);
    }

    void validate() const;
    bool operator==(const StateActionGrid &) const = default;
};

struct RlConfig {
    double learning_rate = 0.95; ///< step size of the Sarsa update
    double discount = 0.1;
    double epsilon0 = 0.1;
    double epsilon_decay = 0.99; ///< epsilon(t) = epsilon0 * decay^t, t = environment step
    std::size_t episodes = 100;
    std::uint64_t seed = 0;
    double alpha = 10000.0;      ///< SOC deviation weight
    double soc_ref = 0.7;
    double soc_initial = 0.7;
    double infeasible_penalty = 1e6;

    double epsilon(std::uint64_t step) const;
    void validate() const;
};

struct QTableMeta {
    std::string source_cycle;
    std::size_t episodes = 0;
    std::uint64_t seed = 0;
    std::optional<double> transfer_scale;
    bool transfer_fallback = false; ///< IMN was ~0, so the source table was kept as is
};

/// Action values (costs, lower is better) with visit counts.
class QTable {
public:
    QTable() = default;
    explicit QTable(StateActionGrid grid);

    const StateActionGrid &grid() const { return grid_; }
    std::size_t states() const { return states_; }
    std::size_t actions() const { return actions_; }

    double &at(std::size_t s, std::size_t a) { return values_[s * actions_ + a]; }
    double at(std::size_t s, std::size_t a) const { return values_[s * actions_ + a]; }
    std::span<const double> row(std::size_t s) const {
        return {values_.data() + s * actions_, actions_};
    }

    std::uint64_t &visits(std::size_t s, std::size_t a) { return visits_[s * actions_ + a]; }
    std::uint64_t visits(std::size_t s, std::size_t a) const { return visits_[s * actions_ + a]; }

    std::vector<double> &values() { return values_; }
    const std::vector<double> &values() const { return values_; }
    std::vector<std::uint64_t> &visit_counts() { return visits_; }
    const std::vector<std::uint64_t> &visit_counts() const { return visits_; }

    QTableMeta meta;

    /// Throws ValidationError on non-finite values or size mismatch.
    void validate() const;

    bool operator==(const QTable &other) const {
        return grid_ == other.grid_ && values_ == other.values_ && visits_ == other.visits_;
    }

private:
    StateActionGrid grid_;
    std::size_t states_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> values_;
    std::vector<std::uint64_t> visits_;
};

struct Policy {
    StateActionGrid grid;
    std::vector<std::size_t> actions; ///< one per state index

    double torque(std::size_t state) const { return grid.torque(actions[state]); }
};

/// One step of the quadratic charge-sustaining cost: [alpha (soc - soc_ref)^2 + m_f] dt.
double reward(const RlConfig &cfg, double soc, double fuel_rate, double dt);

/// Lowest-index argmin of a row.
std::size_t argmin(std::span<const double> row);

/// With probability epsilon a uniform random action, otherwise the row argmin.
std::size_t epsilon_greedy(const QTable &q, std::size_t state, double epsilon, std::mt19937_64 &rng);

/// Q(s,a) <- Q(s,a) + lr [r + discount Q(s+,a+) - Q(s,a)]. Returns the new value.
double sarsa_update(QTable &q, std::size_t s, std::size_t a, double r, std::size_t s_next,
                    std::size_t a_next, const RlConfig &cfg);

struct EpisodeLog {
    std::size_t episode = 0;
    double cost = 0.0;     ///< cumulative training cost including the terminal term
    double fuel = 0.0;     ///< g
    double soc_end = 0.0;
    std::size_t infeasible_steps = 0;
    std::size_t clamp_events = 0;
    double wall_time = 0.0; ///< s
};

struct ClampEvent {
    std::size_t episode = 0;
    std::size_t step = 0;
    double soc_unclamped = 0.0;
};

struct TrainingLog {
    std::vector<EpisodeLog> episodes;
    std::vector<ClampEvent> clamps;
    double wall_time = 0.0; ///< s, whole training call
};

struct TrainResult {
    QTable q;
    TrainingLog log;
};

/// Called after every episode with the episode index and the current table.
using EpisodeHook = std::function<void(std::size_t episode, const QTable &q)>;

/**
 * Sarsa over repeated passes of a drive cycle.
 *
 * Each step observes the (SOC, demand) state, applies the engine torque of
 * the current action, integrates SOC with explicit Euler, clamps it to the
 * grid (logging the event), charges the step cost (plus the infeasibility
 * penalty when a limit is hit), picks the next action epsilon-greedily and
 * applies the Sarsa update. The last step of an episode bootstraps on the
 * terminal charge deviation alpha (soc_end - soc_ref)^2. Starts from
 * `initial_q` when given, zeros otherwise. Epsilon decays per environment step.
 */
TrainResult train(const DriveCycle &cycle, const powertrain::Powertrain &pt, const RlConfig &cfg,
                  const StateActionGrid &grid, const std::optional<QTable> &initial_q = std::nullopt,
                  const EpisodeHook &hook = {});

struct TransferResult {
    QTable q;
    double imn = 0.0;
    bool fallback = false;
};

/// IMN values below this are treated as identical cycles.
inline constexpr double kTransferFallbackThreshold = 1e-12;

/**
 * Q2 = Q1 * IMN(tpm1, tpm2), elementwise. When the IMN is below
 * kTransferFallbackThreshold the source table is kept unscaled and the
 * result is flagged, since scaling by zero would erase it.
 */
TransferResult transfer(const QTable &q1, const markov::Tpm &tpm1, const markov::Tpm &tpm2);

/// Scale every value by `factor` (the algebraic core of transfer()).
QTable scale(const QTable &q, double factor);

/// Per-state argmin with lowest-index tie-break.
Policy greedy_policy(const QTable &q);

} // namespace hevems::ems
