#pragma once

// Mean-square stability and LQRm cost from second-moment dynamics.
// Nothing here touches the SDP machinery, so these routines serve as the
// independent check on every synthesized gain.

#include "sparselmi/model.hpp"

namespace sparselmi {

struct MsReport {
    bool stable = false;
    double margin = 0.0;  // continuous: -max Re lambda(G); discrete: 1 - rho(T)
    Eigen::Index lifted_dimension = 0;
};

/// Lifted generator G (continuous) or transition operator T (discrete) acting
/// on vec(E[x x^T]) with column-major vec.
Matrix ms_generator(const ClosedLoop& cl, TimeDomain domain);

/// Same operator restricted to symmetric matrices, in svec coordinates.
/// Its dominant eigenvalue coincides with that of the full lift because the
/// second-moment map preserves the PSD cone.
Matrix ms_generator_sym(const ClosedLoop& cl, TimeDomain domain);

MsReport ms_stable(const StochasticSystem& sys, const Matrix& k);
MsReport ms_stable(const ClosedLoop& cl, TimeDomain domain);

/// Returns +inf for mean-square unstable gains. Throws NumericsError
/// ("marginally stable") when the lifted system is numerically singular.
double lqrm_cost(const StochasticSystem& sys, const Matrix& k, const Matrix& q, const Matrix& r);

/// Cost-to-go matrix X of the closed loop (the generalized Lyapunov solution).
Matrix lqrm_value(const StochasticSystem& sys, const Matrix& k, const Matrix& q, const Matrix& r);

struct PolicyIterationResult {
    Matrix k;
    double cost = 0.0;
    int iterations = 0;
    std::vector<double> history;
};

PolicyIterationResult lqrm_policy_iteration(const StochasticSystem& sys, const Matrix& q, const Matrix& r,
                                            const Matrix& k0, double tol = 1e-10, int max_iters = 200);

}  // namespace sparselmi
