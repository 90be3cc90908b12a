#pragma once

// Linearized swing-equation models with random generator inertia.
//
// State ordering is x = [theta_g; omega_g; theta_l], generators and loads each
// in the order they appear in the network file. The infinite bus, when set,
// is removed entirely; its lines stay on the Laplacian diagonal.

#include "sparselmi/model.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sparselmi {

enum class BusKind { gen, load };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::load;
    double inertia_mean = 0.0;  // gen only
    double sigma_rel = 0.0;     // gen only, fraction of 1 / inertia_mean
    double damping = 0.0;
};

struct Line {
    int from = 0;
    int to = 0;
    double susceptance = 0.0;
};

struct GridNetwork {
    std::vector<std::string> header;  // leading comment lines, kept verbatim
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::optional<int> infinite_bus;
};

class NetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws NetworkError on hard violations; returns soft warnings.
std::vector<std::string> validate_network(const GridNetwork& net);

/// Laplacian over all buses in file order. Parallel lines add up.
Matrix laplacian(const GridNetwork& net);

enum class NoiseSign {
    printed,   // A_i = +[R L_gg, R D_g, R L_gl], B_i = +R
    physical,  // A_i negated, matching a perturbation of the -M^{-1} rows
};

struct SwingOptions {
    std::optional<Matrix> sigma0;  // default 0.1 I
    NoiseSign noise_sign = NoiseSign::printed;
    std::optional<double> sigma_rel;  // overrides every generator's value
    bool drift_input = true;          // false leaves the input only in the noise terms
};

struct SwingLayout {
    std::vector<int> generators;  // bus ids, in input order
    std::vector<int> loads;       // bus ids of load angles kept in the state
};

StochasticSystem build_swing_system(const GridNetwork& net, const SwingOptions& opts = {},
                                    SwingLayout* layout = nullptr);

GridNetwork parse_network(std::string_view text);
std::string format_network(const GridNetwork& net);
GridNetwork read_network(const std::filesystem::path& path);
void write_network(const std::filesystem::path& path, const GridNetwork& net);

}  // namespace sparselmi
