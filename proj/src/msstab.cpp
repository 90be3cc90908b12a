#include "sparselmi/msstab.hpp"

#include <cmath>
#include <limits>

namespace sparselmi {

namespace {

// Above this state dimension the oracle works on the symmetric subspace
// (n(n+1)/2 unknowns instead of n^2).
constexpr Eigen::Index kFullLiftLimit = 10;

Eigen::Index sym_dim(Eigen::Index n) { return n * (n + 1) / 2; }

// svec coordinates: lower triangle, column-major, off-diagonals times sqrt(2).
Vector svec_of(const Matrix& s) {
    const auto n = s.rows();
    Vector v(sym_dim(n));
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j; i < n; ++i) v(k++) = (i == j) ? s(i, j) : std::sqrt(2.0) * 0.5 * (s(i, j) + s(j, i));
    return v;
}

Matrix smat_of(const Vector& v, Eigen::Index n) {
    Matrix s(n, n);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j; i < n; ++i) {
            const double x = (i == j) ? v(k) : v(k) / std::sqrt(2.0);
            s(i, j) = x;
            s(j, i) = x;
            ++k;
        }
    return s;
}

double inf_norm(const Matrix& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

double stability_threshold(const Matrix& op) { return 1e-9 * std::max(1.0, inf_norm(op)); }

double dominant(const Matrix& op, TimeDomain domain) {
    const Spectrum sp = spectrum(op);
    return domain == TimeDomain::continuous ? -sp.max_real() : 1.0 - sp.spectral_radius();
}

Matrix lifted_operator(const ClosedLoop& cl, TimeDomain domain, bool symmetric) {
    return symmetric ? ms_generator_sym(cl, domain) : ms_generator(cl, domain);
}

}  // namespace

Matrix ms_generator(const ClosedLoop& cl, TimeDomain domain) {
    const auto n = cl.drift.rows();
    const Matrix eye = Matrix::Identity(n, n);
    Matrix g = domain == TimeDomain::continuous ? Matrix(kron(eye, cl.drift) + kron(cl.drift, eye))
                                                : kron(cl.drift, cl.drift);
    for (const auto& d : cl.diffusion) {
        if (d.intensity == 0.0) continue;
        g += d.intensity * d.intensity * kron(d.matrix, d.matrix);
    }
    return g;
}

Matrix ms_generator_sym(const ClosedLoop& cl, TimeDomain domain) {
    const auto n = cl.drift.rows();
    const Matrix& f = cl.drift;
    Matrix out(sym_dim(n), sym_dim(n));
    Matrix e = Matrix::Zero(n, n);
    Eigen::Index col = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j; i < n; ++i) {
            const double w = (i == j) ? 1.0 : 1.0 / std::sqrt(2.0);
            e(i, j) = w;
            e(j, i) = w;
            Matrix img = domain == TimeDomain::continuous ? Matrix(f * e + e * f.transpose())
                                                          : Matrix(f * e * f.transpose());
            for (const auto& d : cl.diffusion) {
                if (d.intensity == 0.0) continue;
                img += d.intensity * d.intensity * (d.matrix * e * d.matrix.transpose());
            }
            out.col(col++) = svec_of(img);
            e(i, j) = 0.0;
            e(j, i) = 0.0;
        }
    }
    return out;
}

MsReport ms_stable(const ClosedLoop& cl, TimeDomain domain) {
    const auto n = cl.drift.rows();
    const Matrix op = lifted_operator(cl, domain, n > kFullLiftLimit);
    MsReport rep;
    rep.lifted_dimension = n * n;
    rep.margin = dominant(op, domain);
    rep.stable = rep.margin > stability_threshold(op);
    return rep;
}

MsReport ms_stable(const StochasticSystem& sys, const Matrix& k) {
    validate(sys);
    return ms_stable(close_loop(sys, k), sys.domain);
}

Matrix lqrm_value(const StochasticSystem& sys, const Matrix& k, const Matrix& q, const Matrix& r) {
    validate(sys);
    const auto n = sys.states();
    if (q.rows() != n || q.cols() != n) throw NumericsError("Q has wrong dimensions");
    if (r.rows() != sys.inputs() || r.cols() != sys.inputs()) throw NumericsError("R has wrong dimensions");

    const ClosedLoop cl = close_loop(sys, k);
    const bool symmetric = n > kFullLiftLimit;
    Matrix op = lifted_operator(cl, sys.domain, symmetric);
    const double margin = dominant(op, sys.domain);
    const double thr = stability_threshold(op);
    if (margin < -thr) {
        return Matrix::Constant(n, n, std::numeric_limits<double>::infinity());
    }
    if (margin <= thr) {
        throw NumericsError("marginally stable closed loop (margin " + format_double(margin) +
                            "); cost is not finite");
    }

    const Matrix rhs = -symmetrize(q + k.transpose() * r * k);
    Matrix lhs = op.transpose();
    if (sys.domain == TimeDomain::discrete) lhs -= Matrix::Identity(lhs.rows(), lhs.cols());

    Matrix x;
    try {
        if (symmetric) {
            x = smat_of(solve_linear(lhs, svec_of(rhs)), n);
        } else {
            Vector v = solve_linear(lhs, rhs.reshaped());
            x = symmetrize(v.reshaped(n, n));
        }
    } catch (const NumericsError& e) {
        throw NumericsError(std::string("marginally stable: lifted Lyapunov system is singular (") + e.what() + ")");
    }
    return x;
}

double lqrm_cost(const StochasticSystem& sys, const Matrix& k, const Matrix& q, const Matrix& r) {
    const Matrix x = lqrm_value(sys, k, q, r);
    if (!x.allFinite()) return std::numeric_limits<double>::infinity();
    return (sys.sigma0 * x).trace();
}

PolicyIterationResult lqrm_policy_iteration(const StochasticSystem& sys, const Matrix& q, const Matrix& r,
                                            const Matrix& k0, double tol, int max_iters) {
    if (!ms_stable(sys, k0).stable) throw NumericsError("policy iteration: initial gain is not mean-square stabilizing");

    PolicyIterationResult res;
    res.k = k0;
    for (int it = 0; it < max_iters; ++it) {
        const Matrix x = lqrm_value(sys, res.k, q, r);
        if (!x.allFinite()) {
            throw NumericsError("policy iteration lost mean-square stability at iteration " + std::to_string(it));
        }
        const double cost = (sys.sigma0 * x).trace();
        if (!res.history.empty() && cost > res.history.back() + 1e-9 * (1.0 + std::abs(res.history.back()))) {
            throw NumericsError("policy iteration cost increased (" + format_double(res.history.back()) + " -> " +
                                format_double(cost) + ")");
        }
        res.history.push_back(cost);
        res.cost = cost;

        // Greedy improvement: minimize the Hamiltonian over u = K x.
        Matrix lhs = r;
        Matrix rhs = sys.b0.transpose() * x;
        if (sys.domain == TimeDomain::discrete) {
            lhs += sys.b0.transpose() * x * sys.b0;
            rhs = sys.b0.transpose() * x * sys.a0;
        }
        for (const auto& ch : sys.channels) {
            if (!ch.input) continue;
            const double c2 = ch.intensity * ch.intensity;
            lhs += c2 * ch.input->transpose() * x * *ch.input;
            if (ch.state) rhs += c2 * ch.input->transpose() * x * *ch.state;
        }
        const Matrix next = -solve_linear(symmetrize(lhs), rhs);
        const double step = (next - res.k).cwiseAbs().maxCoeff();
        res.k = next;
        res.iterations = it + 1;
        if (step <= tol) {
            res.cost = lqrm_cost(sys, res.k, q, r);
            if (!std::isfinite(res.cost)) throw NumericsError("policy iteration: final gain not stabilizing");
            return res;
        }
    }
    res.cost = lqrm_cost(sys, res.k, q, r);
    return res;
}

}  // namespace sparselmi
