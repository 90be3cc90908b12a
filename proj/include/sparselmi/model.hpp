#pragma once

#include "sparselmi/numerics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sparselmi {

enum class TimeDomain { continuous, discrete };

const char* to_string(TimeDomain d);
TimeDomain parse_time_domain(std::string_view text);

// One scalar noise process. With both matrices present the channel is
// "coupled": the same Wiener increment multiplies A x + B u.
struct NoiseChannel {
    double intensity = 0.0;
    std::optional<Matrix> state;  // n x n
    std::optional<Matrix> input;  // n x m
};

struct StochasticSystem {
    TimeDomain domain = TimeDomain::continuous;
    Matrix a0;
    Matrix b0;
    std::vector<NoiseChannel> channels;
    Matrix sigma0;

    Eigen::Index states() const { return a0.rows(); }
    Eigen::Index inputs() const { return b0.cols(); }
};

struct Diffusion {
    double intensity = 0.0;
    Matrix matrix;
};

struct ClosedLoop {
    Matrix drift;
    std::vector<Diffusion> diffusion;
};

class ModelError : public std::runtime_error {
public:
    explicit ModelError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// Throws ModelError listing every violated invariant.
void validate(const StochasticSystem& sys);

ClosedLoop close_loop(const StochasticSystem& sys, const Matrix& k);

// System JSON. Keys are written in a fixed order so that
// parse -> write reproduces the input byte for byte.
std::string system_to_json(const StochasticSystem& sys);
StochasticSystem system_from_json(std::string_view text);
StochasticSystem read_system(const std::filesystem::path& path);
void write_system(const std::filesystem::path& path, const StochasticSystem& sys);

}  // namespace sparselmi
