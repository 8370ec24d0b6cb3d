// Markov-chain view of drive cycles: transition probability matrices over a
// quantized speed grid, one-step propagation, the induced 2-norm distance
// between two matrices, and windowed driving-condition recognition.
#pragma once

#include "hevems/cycle.hpp"
#include "hevems/matrix.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hevems::markov {

/// Uniform speed grid v_min, v_min + dv, ..., with N = floor((v_max - v_min)/dv) + 1 points.
struct SpeedGrid {
    double v_min = 0.0;
    double v_max = 25.0;
    double dv = 1.0;

    std::size_t size() const;
    double value(std::size_t i) const { return v_min + static_cast<double>(i) * dv; }
    void validate() const;

    bool operator==(const SpeedGrid &) const = default;
};

/// Transition probability matrix with the raw counts it came from.
struct Tpm {
    SpeedGrid grid;
    Matrix probs;
    std::vector<std::int64_t> counts; ///< row-major N x N

    std::size_t size() const { return probs.rows(); }
    std::int64_t count(std::size_t i, std::size_t j) const { return counts[i * size() + j]; }
};

/// Nearest grid index; out-of-range speeds clamp to the ends, exact midpoints round up.
std::size_t quantize(const SpeedGrid &grid, double v);

/**
 * Count consecutive quantized speed pairs and normalize each row by its
 * total. Rows never visited as a source get self-transition probability 1
 * so the matrix stays row-stochastic.
 */
Tpm build_tpm(const DriveCycle &cycle, const SpeedGrid &grid);

/// Rebuild probabilities from counts (used by the JSON reader and by build_tpm).
Tpm tpm_from_counts(const SpeedGrid &grid, std::vector<std::int64_t> counts);

/// One-step-ahead speed distribution: row vector `dist` times the matrix.
std::vector<double> propagate(std::span<const double> dist, const Tpm &tpm);

/**
 * Random walk on the chain: `length` speeds starting from grid point `start`,
 * each next state drawn from the current row. Used to make synthetic cycles
 * with known transition statistics.
 */
DriveCycle sample_cycle(const Tpm &tpm, std::size_t length, std::size_t start, std::uint64_t seed,
                        double dt = 1.0, const std::string &name = "synthetic");

struct PowerIterationOptions {
    double tolerance = 1e-12;
    std::size_t max_iterations = 10000;
};

/// Largest singular value of `m` by power iteration on m^T m.
double spectral_norm(const Matrix &m, const PowerIterationOptions &options = {});

/// Induced 2-norm of the difference of two matrices on the same grid.
double imn(const Tpm &a, const Tpm &b, const PowerIterationOptions &options = {});

struct NamedTpm {
    std::string name;
    Tpm tpm;
};

struct Recognition {
    std::string name;
    double distance = 0.0;
};

/// Closest reference by IMN; ties keep the earlier reference.
Recognition recognize(const Tpm &window_tpm, std::span<const NamedTpm> references);

struct RecognitionRow {
    double t = 0.0;          ///< time of the last sample in the window, s
    std::size_t start = 0;   ///< first sample index of the window
    std::string name;
    double distance = 0.0;
};

/// Slide a window of `length` samples with step `hop` over the cycle and recognize each one.
std::vector<RecognitionRow> recognize_stream(const DriveCycle &cycle, const SpeedGrid &grid,
                                             std::span<const NamedTpm> references,
                                             std::size_t length = 150, std::size_t hop = 10);

} // namespace hevems::markov
