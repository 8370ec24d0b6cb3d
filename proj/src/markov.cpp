#include "hevems/markov.hpp"

#include "hevems/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hevems::markov {

std::size_t SpeedGrid::size() const {
    return static_cast<std::size_t>(std::floor((v_max - v_min) / dv + 1e-9)) + 1;
}

void SpeedGrid::validate() const {
    if (!std::isfinite(v_min) || !std::isfinite(v_max) || !std::isfinite(dv)) {
        throw ValidationError("speed grid: non-finite bound");
    }
    if (v_min < 0.0) {
        throw ValidationError("speed grid: v_min must be >= 0");
    }
    if (!(dv > 0.0)) {
        throw ValidationError("speed grid: dv must be > 0");
    }
    if (!(v_max > v_min)) {
        throw ValidationError("speed grid: v_max must exceed v_min");
    }
    if (size() < 2) {
        throw ValidationError("speed grid: needs at least 2 points");
    }
}

std::size_t quantize(const SpeedGrid &grid, double v) {
    if (!std::isfinite(v)) {
        throw ValidationError("quantize: non-finite speed");
    }
    const double pos = std::floor((v - grid.v_min) / grid.dv + 0.5);
    const double top = static_cast<double>(grid.size() - 1);
    return static_cast<std::size_t>(std::clamp(pos, 0.0, top));
}

Tpm tpm_from_counts(const SpeedGrid &grid, std::vector<std::int64_t> counts) {
    grid.validate();
    const std::size_t n = grid.size();
    if (counts.size() != n * n) {
        throw ValidationError("tpm: counts must have N*N = " + std::to_string(n * n) + " entries");
    }
    Tpm tpm{grid, Matrix(n, n), std::move(counts)};
    for (std::size_t i = 0; i < n; ++i) {
        std::int64_t total = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (tpm.count(i, j) < 0) {
                throw ValidationError("tpm: negative count");
            }
            total += tpm.count(i, j);
        }
        if (total == 0) {
            tpm.probs(i, i) = 1.0;
            continue;
        }
        for (std::size_t j = 0; j < n; ++j) {
            tpm.probs(i, j) = static_cast<double>(tpm.count(i, j)) / static_cast<double>(total);
        }
    }
    return tpm;
}

Tpm build_tpm(const DriveCycle &cycle, const SpeedGrid &grid) {
    validate(cycle);
    grid.validate();
    const std::size_t n = grid.size();
    std::vector<std::int64_t> counts(n * n, 0);
    std::size_t prev = quantize(grid, cycle.speeds.front());
    for (std::size_t k = 1; k < cycle.size(); ++k) {
        const std::size_t next = quantize(grid, cycle.speeds[k]);
        ++counts[prev * n + next];
        prev = next;
    }
    return tpm_from_counts(grid, std::move(counts));
}

std::vector<double> propagate(std::span<const double> dist, const Tpm &tpm) {
    const std::size_t n = tpm.size();
    if (dist.size() != n) {
        throw ValidationError("propagate: distribution has " + std::to_string(dist.size()) +
                              " entries, matrix is " + std::to_string(n) + "x" + std::to_string(n));
    }
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (dist[i] == 0.0) {
            continue;
        }
        const auto row = tpm.probs.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            out[j] += dist[i] * row[j];
        }
    }
    return out;
}

DriveCycle sample_cycle(const Tpm &tpm, std::size_t length, std::size_t start, std::uint64_t seed,
                        double dt, const std::string &name) {
    const std::size_t n = tpm.size();
    if (start >= n) {
        throw ValidationError("sample_cycle: start state out of range");
    }
    std::mt19937_64 rng(seed);
    std::vector<double> speeds;
    speeds.reserve(length);
    std::size_t state = start;
    for (std::size_t k = 0; k < length; ++k) {
        speeds.push_back(tpm.grid.value(state));
        // Inverse CDF with a 53-bit uniform; avoids implementation-defined distributions.
        const double u = static_cast<double>(rng() >> 11) * 0x1p-53;
        double acc = 0.0;
        std::size_t next = state;
        for (std::size_t j = 0; j < n; ++j) {
            const double p = tpm.probs(state, j);
            if (p <= 0.0) {
                continue;
            }
            next = j; // a float shortfall in the row sum lands on the last reachable state
            acc += p;
            if (u < acc) {
                break;
            }
        }
        state = next;
    }
    return make_cycle(name, dt, std::move(speeds));
}

double spectral_norm(const Matrix &m, const PowerIterationOptions &options) {
    const std::size_t n = m.cols();
    if (n == 0 || m.rows() == 0) {
        return 0.0;
    }
    // Gram matrix G = m^T m, symmetric positive semidefinite.
    Matrix gram(n, n);
    for (std::size_t k = 0; k < m.rows(); ++k) {
        const auto row = m.row(k);
        for (std::size_t i = 0; i < n; ++i) {
            if (row[i] == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                gram(i, j) += row[i] * row[j];
            }
        }
    }

    // Start from the Gram column with the largest diagonal; it is nonzero unless G is.
    std::size_t pivot = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (gram(i, i) > gram(pivot, pivot)) {
            pivot = i;
        }
    }
    if (gram(pivot, pivot) == 0.0) {
        return 0.0;
    }

    auto multiply = [&](const std::vector<double> &x) {
        std::vector<double> y(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = gram.row(i);
            y[i] = std::inner_product(row.begin(), row.end(), x.begin(), 0.0);
        }
        return y;
    };
    auto norm = [](const std::vector<double> &x) {
        return std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
    };

    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = gram(i, pivot);
    }
    double nx = norm(x);
    for (double &xi : x) {
        xi /= nx;
    }

    double lambda = 0.0;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
        auto y = multiply(x);
        // Rayleigh quotient; dividing by x.x rather than assuming |x| = 1 keeps
        // normalization rounding out of the estimate.
        lambda = std::inner_product(x.begin(), x.end(), y.begin(), 0.0) /
                 std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
        double residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - lambda * x[i];
            residual += r * r;
        }
        residual = std::sqrt(residual);
        const double ny = norm(y);
        if (ny == 0.0) {
            return 0.0;
        }
        if (residual <= options.tolerance * lambda) {
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = y[i] / ny;
        }
    }
    return std::sqrt(std::max(lambda, 0.0));
}

double imn(const Tpm &a, const Tpm &b, const PowerIterationOptions &options) {
    if (!(a.grid == b.grid) || a.size() != b.size()) {
        throw ValidationError("imn: matrices are defined on different speed grids");
    }
    const std::size_t n = a.size();
    Matrix diff(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            diff(i, j) = a.probs(i, j) - b.probs(i, j);
        }
    }
    return spectral_norm(diff, options);
}

Recognition recognize(const Tpm &window_tpm, std::span<const NamedTpm> references) {
    if (references.empty()) {
        throw ValidationError("recognize: empty reference list");
    }
    Recognition best{references.front().name, imn(window_tpm, references.front().tpm)};
    for (const auto &ref : references.subspan(1)) {
        const double d = imn(window_tpm, ref.tpm);
        if (d < best.distance) {
            best = {ref.name, d};
        }
    }
    return best;
}

std::vector<RecognitionRow> recognize_stream(const DriveCycle &cycle, const SpeedGrid &grid,
                                             std::span<const NamedTpm> references,
                                             std::size_t length, std::size_t hop) {
    if (hop == 0) {
        throw ValidationError("recognize: hop must be >= 1");
    }
    if (length < 2 || length > cycle.size()) {
        throw ValidationError("recognize: window length must be in [2, cycle length]");
    }
    std::vector<RecognitionRow> rows;
    for (std::size_t start = 0; start + length <= cycle.size(); start += hop) {
        const auto tpm = build_tpm(window(cycle, start, length), grid);
        auto hit = recognize(tpm, references);
        rows.push_back({static_cast<double>(start + length - 1) * cycle.dt, start,
                        std::move(hit.name), hit.distance});
    }
    return rows;
}

} // namespace hevems::markov
