#pragma once

// Monte Carlo estimates of second moments and LQRm cost.
//
// Randomness comes from Philox4x32-10 keyed by the seed. The counter encodes
// (path, step, draw), so every path sees the same variates no matter how paths
// are split across threads.

#include "sparselmi/model.hpp"

#include <array>
#include <cstdint>
#include <string>

namespace sparselmi {

class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    explicit Philox4x32(std::uint64_t seed) : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}
    Block operator()(Block counter) const;

private:
    std::array<std::uint32_t, 2> key_;
};

/// Two standard normals from one Philox block (Box-Muller on 53-bit uniforms).
std::array<double, 2> normal_pair(const Philox4x32::Block& bits);

struct SimOptions {
    double horizon = 1.0;  // continuous
    double dt = 1e-3;      // continuous
    long steps = 100;      // discrete
    long paths = 1000;
    std::uint64_t seed = 0;
    long record_every = 1;  // keep every k-th time point (the last is always kept)
    int jobs = 1;
};

struct EnsembleStats {
    std::vector<double> times;
    std::vector<double> mean_square;
    std::vector<double> stderr_;
    long paths = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

EnsembleStats simulate(const StochasticSystem& sys, const Matrix& k, const SimOptions& opts);

struct CostEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    // Rough size of the cost beyond the horizon: weight * E|x_T|^2 / decay rate.
    double tail_estimate = 0.0;
    std::vector<std::string> warnings;
};

CostEstimate empirical_cost(const StochasticSystem& sys, const Matrix& k, const Matrix& q, const Matrix& r,
                            const SimOptions& opts);

/// CSV with header time,mean_square,stderr.
std::string ensemble_to_csv(const EnsembleStats& stats);

}  // namespace sparselmi
