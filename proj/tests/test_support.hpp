// Shared helpers for the unit and acceptance tests: random instances,
// independent oracles, and scratch directories.
#pragma once

#include "hevems/dp.hpp"
#include "hevems/markov.hpp"
#include "hevems/matrix.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace hevems::support {

inline Matrix random_stochastic(std::size_t n, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            m(i, j) = u(rng);
            sum += m(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) {
            m(i, j) /= sum;
        }
    }
    return m;
}

/// Tpm wrapper around an arbitrary stochastic matrix (counts left empty).
inline markov::Tpm as_tpm(const Matrix &probs) {
    markov::Tpm t;
    t.grid = {0.0, static_cast<double>(probs.rows() - 1), 1.0};
    t.probs = probs;
    return t;
}

inline Eigen::MatrixXd to_eigen(const Matrix &m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            e(i, j) = m(i, j);
        }
    }
    return e;
}

/// Oracle: sqrt of the largest eigenvalue of D^T D by dense self-adjoint decomposition.
inline double eigen_spectral_norm(const Matrix &d) {
    const Eigen::MatrixXd e = to_eigen(d);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(e.transpose() * e);
    return std::sqrt(std::max(0.0, solver.eigenvalues().maxCoeff()));
}

/**
 * Oracle: sup over nonzero P of |D P| / |P|, estimated from `budget` random
 * vectors. Half are isotropic Gaussian draws; the rest perturb the best
 * vector so far with a shrinking radius, since isotropic draws alone rarely
 * land close enough to the maximizing direction in five dimensions.
 */
inline double monte_carlo_sup(const Matrix &d, std::size_t budget, std::uint64_t seed) {
    const Eigen::MatrixXd e = to_eigen(d);
    const auto n = e.cols();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    auto ratio = [&](const Eigen::VectorXd &p) { return (e * p).norm() / p.norm(); };
    Eigen::VectorXd best = Eigen::VectorXd::Ones(n);
    double best_ratio = 0.0;
    const std::size_t global = budget / 2;
    for (std::size_t k = 0; k < global; ++k) {
        Eigen::VectorXd p(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) = g(rng);
        }
        if (const double r = ratio(p); r > best_ratio) {
            best_ratio = r;
            best = p / p.norm();
        }
    }
    double radius = 0.3;
    for (std::size_t k = 0; k < budget - global; ++k) {
        Eigen::VectorXd p = best;
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) += radius * g(rng);
        }
        if (const double r = ratio(p); r > best_ratio) {
            best_ratio = r;
            best = p / p.norm();
        }
        if (k % 1000 == 999) {
            radius *= 0.7;
        }
    }
    return best_ratio;
}

inline Matrix difference(const Matrix &a, const Matrix &b) {
    Matrix d(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            d(i, j) = a(i, j) - b(i, j);
        }
    }
    return d;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
    const auto dir = std::filesystem::temp_directory_path() / ("hevems_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Birth-death speed chain: from each grid point move up, stay, or move down
/// with weights `up`, `stay`, `down` (reflecting at the ends).
inline markov::Tpm random_walk_tpm(const markov::SpeedGrid &grid, int up, int stay, int down) {
    const std::size_t n = grid.size();
    std::vector<std::int64_t> counts(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        counts[i * n + i] += stay;
        counts[i * n + (i + 1 < n ? i + 1 : i)] += up;
        counts[i * n + (i > 0 ? i - 1 : i)] += down;
    }
    return markov::tpm_from_counts(grid, std::move(counts));
}

// A toy instance whose SOC moves in whole grid steps: lossless motor, a
// negligible internal resistance, and a capacity chosen so that 50 Nm of
// shaft torque for one second shifts SOC by exactly 0.1.
struct AlignedInstance {
    powertrain::Powertrain pt;
    ems::StateActionGrid grid;
    ems::RlConfig cfg;
    std::vector<powertrain::StepDemand> profile;
};

inline AlignedInstance aligned_instance(const std::vector<int> &demand_units) {
    AlignedInstance x;
    const double rpm = 1500.0;
    const double w = rpm * powertrain::kRpmToRadPerSec;
    const double p0 = 50.0 * w;
    x.pt.vehicle.eta_motor = 1.0;
    x.pt.battery.v_oc = 1000.0;
    x.pt.battery.r_in = 1e-12;
    x.pt.battery.capacity = p0 / (0.1 * 1000.0);
    x.grid.soc_min = 0.3;
    x.grid.soc_max = 0.7;
    x.grid.soc_step = 0.1;
    x.grid.torque_min = 0.0;
    x.grid.torque_max = 100.0;
    x.grid.torque_step = 50.0;
    x.cfg.soc_initial = 0.5;
    x.cfg.soc_ref = 0.5;
    x.cfg.alpha = 1000.0;
    for (int u : demand_units) {
        powertrain::StepDemand d;
        d.v = 10.0; // moving, so the engine may run
        d.engine_rpm = rpm;
        d.w = w;
        d.p_request = d.p_demand = u * p0;
        d.shaft_torque = d.p_demand / w;
        x.profile.push_back(d);
    }
    return x;
}

/// Exhaustive search over action sequences with SOC kept continuous.
inline double enumerate_best(const AlignedInstance &x, std::size_t t, double soc) {
    if (t == x.profile.size()) {
        return ems::reward(x.cfg, soc, 0.0, 1.0);
    }
    double best = dp::kInfeasible;
    for (std::size_t a = 0; a < x.grid.action_count(); ++a) {
        const auto s = powertrain::split_step(x.pt, x.profile[t], x.grid.torque(a), soc);
        if (!s.feasible) {
            continue;
        }
        const double next = powertrain::advance_soc(x.pt.battery, soc, s.p_battery, 1.0);
        if (next < x.grid.soc_min - 1e-9 || next > x.grid.soc_max + 1e-9) {
            continue;
        }
        best = std::min(best, ems::reward(x.cfg, soc, s.fuel_rate, 1.0) + enumerate_best(x, t + 1, next));
    }
    return best;
}

} // namespace hevems::support
