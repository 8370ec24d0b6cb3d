#include "hevems/ems.hpp"

#include "hevems/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace hevems::ems {

namespace {

std::size_t axis_count(double lo, double hi, double step) {
    return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

std::size_t nearest(double lo, double step, std::size_t count, double x) {
    const double pos = std::floor((x - lo) / step + 0.5);
    return static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(count - 1)));
}

void require(bool ok, const char *message) {
    if (!ok) {
        throw ValidationError(message);
    }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void td_update(QTable &q, std::size_t s, std::size_t a, double target, double learning_rate) {
    double &value = q.at(s, a);
    value += learning_rate * (target - value);
}

} // namespace

std::size_t StateActionGrid::soc_count() const { return axis_count(soc_min, soc_max, soc_step); }
std::size_t StateActionGrid::demand_count() const {
    return axis_count(demand_min, demand_max, demand_step);
}
std::size_t StateActionGrid::action_count() const {
    return axis_count(torque_min, torque_max, torque_step);
}

std::size_t StateActionGrid::soc_index(double soc) const {
    return nearest(soc_min, soc_step, soc_count(), soc);
}

std::size_t StateActionGrid::demand_index(double shaft_torque) const {
    return nearest(demand_min, demand_step, demand_count(), shaft_torque);
}

void StateActionGrid::validate() const {
    require(soc_step > 0.0 && demand_step > 0.0 && torque_step > 0.0, "grid: steps must be > 0");
    require(soc_min < soc_max, "grid: soc_min must be < soc_max");
    require(demand_min < demand_max, "grid: demand_min must be < demand_max");
    require(torque_min < torque_max, "grid: torque_min must be < torque_max");
    require(soc_min >= 0.0 && soc_max <= 1.0, "grid: SOC bounds must lie in [0, 1]");
    require(torque_min >= 0.0, "grid: torque_min must be >= 0");
}

double RlConfig::epsilon(std::uint64_t step) const {
    return epsilon0 * std::pow(epsilon_decay, static_cast<double>(step));
}

void RlConfig::validate() const {
    require(learning_rate > 0.0 && learning_rate <= 1.0, "rl: learning_rate must be in (0, 1]");
    require(discount >= 0.0 && discount < 1.0, "rl: discount must be in [0, 1)");
    require(epsilon0 >= 0.0 && epsilon0 <= 1.0, "rl: epsilon0 must be in [0, 1]");
    require(epsilon_decay >= 0.0 && epsilon_decay <= 1.0, "rl: epsilon_decay must be in [0, 1]");
    require(alpha >= 0.0, "rl: alpha must be >= 0");
    require(infeasible_penalty >= 0.0, "rl: infeasible_penalty must be >= 0");
}

QTable::QTable(StateActionGrid grid) : grid_(grid) {
    grid_.validate();
    states_ = grid_.state_count();
    actions_ = grid_.action_count();
    values_.assign(states_ * actions_, 0.0);
    visits_.assign(states_ * actions_, 0);
}

void QTable::validate() const {
    grid_.validate();
    if (values_.size() != grid_.state_count() * grid_.action_count() ||
        visits_.size() != values_.size()) {
        throw ValidationError("qtable: value table does not match the grid dimensions");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw ValidationError("qtable: non-finite value");
        }
    }
}

double reward(const RlConfig &cfg, double soc, double fuel_rate, double dt) {
    const double dev = soc - cfg.soc_ref;
    return (cfg.alpha * dev * dev + fuel_rate) * dt;
}

std::size_t argmin(std::span<const double> row) {
    return static_cast<std::size_t>(std::min_element(row.begin(), row.end()) - row.begin());
}

std::size_t epsilon_greedy(const QTable &q, std::size_t state, double epsilon, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
        std::uniform_int_distribution<std::size_t> pick(0, q.actions() - 1);
        return pick(rng);
    }
    return argmin(q.row(state));
}

double sarsa_update(QTable &q, std::size_t s, std::size_t a, double r, std::size_t s_next,
                    std::size_t a_next, const RlConfig &cfg) {
    td_update(q, s, a, r + cfg.discount * q.at(s_next, a_next), cfg.learning_rate);
    return q.at(s, a);
}

TrainResult train(const DriveCycle &cycle, const powertrain::Powertrain &pt, const RlConfig &cfg,
                  const StateActionGrid &grid, const std::optional<QTable> &initial_q,
                  const EpisodeHook &hook) {
    validate(cycle);
    pt.validate();
    cfg.validate();
    grid.validate();
    if (cfg.soc_initial < grid.soc_min || cfg.soc_initial > grid.soc_max) {
        throw ValidationError("rl: soc_initial lies outside the SOC grid");
    }
    if (initial_q && !(initial_q->grid() == grid)) {
        throw ValidationError("train: initial Q-table grid differs from the requested grid");
    }
    if (initial_q) {
        initial_q->validate();
    }

    TrainResult result{initial_q ? *initial_q : QTable(grid), {}};
    if (cfg.episodes == 0) {
        return result;
    }
    QTable &q = result.q;
    q.meta.source_cycle = cycle.name;
    q.meta.episodes = (initial_q ? initial_q->meta.episodes : 0) + cfg.episodes;
    q.meta.seed = cfg.seed;

    const auto profile = powertrain::demand_profile(cycle, pt);
    const std::size_t steps = profile.size();
    const double dt = cycle.dt;
    std::mt19937_64 rng(cfg.seed);
    std::uint64_t t = 0;
    const auto run_start = std::chrono::steady_clock::now();

    for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
        const auto ep_start = std::chrono::steady_clock::now();
        EpisodeLog entry;
        entry.episode = ep;

        double soc = cfg.soc_initial;
        std::size_t s = grid.state_index(soc, profile[0].shaft_torque);
        std::size_t a = epsilon_greedy(q, s, cfg.epsilon(t), rng);

        for (std::size_t k = 0; k < steps; ++k) {
            const auto split = powertrain::split_step(pt, profile[k], grid.torque(a), soc);
            double r = reward(cfg, soc, split.fuel_rate, dt);
            if (!split.feasible) {
                r += cfg.infeasible_penalty;
                ++entry.infeasible_steps;
            }
            entry.fuel += split.fuel_rate * dt;
            entry.cost += r;

            double soc_next = powertrain::advance_soc(pt.battery, soc, split.p_battery, dt);
            if (soc_next < grid.soc_min || soc_next > grid.soc_max) {
                result.log.clamps.push_back({ep, k, soc_next});
                ++entry.clamp_events;
                soc_next = std::clamp(soc_next, grid.soc_min, grid.soc_max);
            }
            ++t;
            ++q.visits(s, a);

            if (k + 1 < steps) {
                const std::size_t s_next = grid.state_index(soc_next, profile[k + 1].shaft_torque);
                const std::size_t a_next = epsilon_greedy(q, s_next, cfg.epsilon(t), rng);
                sarsa_update(q, s, a, r, s_next, a_next, cfg);
                s = s_next;
                a = a_next;
            } else {
                const double terminal = reward(cfg, soc_next, 0.0, 1.0);
                td_update(q, s, a, r + cfg.discount * terminal, cfg.learning_rate);
                entry.cost += terminal;
            }
            soc = soc_next;
        }
        entry.soc_end = soc;
        entry.wall_time = seconds_since(ep_start);
        result.log.episodes.push_back(entry);
        if (hook) {
            hook(ep, q);
        }
    }
    result.log.wall_time = seconds_since(run_start);
    return result;
}

QTable scale(const QTable &q, double factor) {
    QTable out = q;
    for (double &v : out.values()) {
        v *= factor;
    }
    return out;
}

TransferResult transfer(const QTable &q1, const markov::Tpm &tpm1, const markov::Tpm &tpm2) {
    q1.validate();
    const double distance = markov::imn(tpm1, tpm2);
    TransferResult result{distance < kTransferFallbackThreshold ? q1 : scale(q1, distance), distance,
                          distance < kTransferFallbackThreshold};
    result.q.meta.transfer_scale = distance;
    result.q.meta.transfer_fallback = result.fallback;
    return result;
}

Policy greedy_policy(const QTable &q) {
    Policy policy{q.grid(), std::vector<std::size_t>(q.states())};
    for (std::size_t s = 0; s < q.states(); ++s) {
        policy.actions[s] = argmin(q.row(s));
    }
    return policy;
}

} // namespace hevems::ems
