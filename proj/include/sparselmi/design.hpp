#pragma once

#include "sparselmi/lmi.hpp"
#include "sparselmi/msstab.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sparselmi {

struct LqrWeights {
    Matrix q;
    Matrix r;
};

struct DesignOptions {
    std::optional<double> eps;  // default_eps(sys) when unset
    double tau = 1e-3;          // relative support threshold
    double p_floor = 1.0;       // P >= p_floor I in pure stabilization problems
    SolverSettings solver;
};

struct SolverStats {
    std::string status;
    int iterations = 0;
    double runtime = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double duality_gap = 0.0;
    double objective = 0.0;
};

struct DesignResult {
    Matrix K;                 // m x n, or m x n_y with C present
    std::optional<Matrix> C;  // n_y x n
    Matrix K_full;            // Y P^{-1} before truncation
    Matrix P;
    Matrix Y;
    std::optional<double> kappa;
    double gamma = 0.0;
    RegularizerSpec regularizer;
    std::vector<int> row_support;
    std::vector<int> col_support;
    std::vector<int> unremovable_rows;  // below threshold but needed for stability
    std::vector<int> zero_columns;      // pinned columns (output feedback)
    MsReport oracle;
    std::optional<double> oracle_cost;
    std::vector<SolverStats> solves;  // one per SDP solved

    /// Gain acting on the state: K, or K C for output feedback.
    Matrix state_gain() const { return C ? Matrix(K * *C) : K; }
};

class DesignError : public std::runtime_error {
public:
    enum class Kind { infeasible, numerical, unverified };
    DesignError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct SupportPattern {
    std::vector<int> rows;
    std::vector<int> cols;
};

SupportPattern threshold_pattern(const Matrix& y, double tau);

/// K = Y P^{-1} by Cholesky; exactly-zero rows of Y stay exactly zero.
Matrix reconstruct_gain(const Matrix& y, const Matrix& p);

DesignResult design_state_feedback(const StochasticSystem& sys, const std::optional<LqrWeights>& weights,
                                   const RegularizerSpec& spec, const DesignOptions& opts = {});

DesignResult design_output_feedback(const StochasticSystem& sys, const std::optional<LqrWeights>& weights,
                                    const RegularizerSpec& col_spec, const RegularizerSpec& row_spec,
                                    const DesignOptions& opts = {});

struct SweepPoint {
    double gamma = 0.0;
    std::optional<DesignResult> result;
    std::string error;
    double rel_cost = 0.0;
    double runtime = 0.0;
};

/// One independent design per grid value. Errors are stored per point.
std::vector<SweepPoint> sweep_gamma(const StochasticSystem& sys, const LqrWeights& weights, const RegularizerSpec& spec,
                                    const std::vector<double>& grid, const DesignOptions& opts = {}, int jobs = 1);

}  // namespace sparselmi
