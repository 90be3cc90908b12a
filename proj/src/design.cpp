#include "sparselmi/design.hpp"

#include <Eigen/Cholesky>

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

namespace sparselmi {

SupportPattern threshold_pattern(const Matrix& y, double tau) {
    if (!(tau >= 0.0)) throw std::invalid_argument("threshold tau must be nonnegative");
    SupportPattern sp;
    if (y.size() == 0) return sp;
    const double cut = tau * (y.cwiseAbs().maxCoeff() + 1e-300);
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        if (y.row(i).cwiseAbs().maxCoeff() > cut) sp.rows.push_back(static_cast<int>(i));
    for (Eigen::Index j = 0; j < y.cols(); ++j)
        if (y.col(j).cwiseAbs().maxCoeff() > cut) sp.cols.push_back(static_cast<int>(j));
    return sp;
}

namespace {

Eigen::LLT<Matrix> factor_pd(const Matrix& p) {
    if (p.rows() != p.cols() || p.rows() == 0) throw NumericsError("P must be square and nonempty");
    const Matrix ps = symmetrize(p);
    const double scale = ps.cwiseAbs().maxCoeff();
    const double lmin = min_eigenvalue_sym(ps);
    if (!(lmin > 1e-10 * scale)) {
        throw NumericsError("P is not positive definite (min eigenvalue " + format_double(lmin) + ")");
    }
    Eigen::LLT<Matrix> llt(ps);
    if (llt.info() != Eigen::Success) throw NumericsError("Cholesky of P failed");
    return llt;
}

}  // namespace

Matrix reconstruct_gain(const Matrix& y, const Matrix& p) {
    if (y.cols() != p.rows()) throw NumericsError("Y and P have incompatible sizes");
    const auto llt = factor_pd(p);
    return llt.solve(y.transpose()).transpose();
}

namespace {

double tolerance_for(double kappa) { return 1e-6 * (1.0 + std::abs(kappa)); }

struct Solved {
    Vector x;
    SolverStats stats;
};

Solved run_solver(const LmiHandle& h, const DesignOptions& opts, const char* stage) {
    const ConicProgram prog = h.program();
    const ConicSolution sol = solve(prog, opts.solver);
    Solved out;
    out.stats.status = to_string(sol.status);
    out.stats.iterations = sol.iterations;
    out.stats.runtime = sol.runtime;
    out.stats.primal_residual = sol.primal_residual;
    out.stats.dual_residual = sol.dual_residual;
    out.stats.duality_gap = sol.duality_gap;
    out.stats.objective = sol.objective;

    std::ostringstream why;
    why << stage << ": solver returned " << to_string(sol.status) << " (" << sol.message << ")";
    switch (sol.status) {
        case SolveStatus::optimal: break;
        case SolveStatus::infeasible:
            throw DesignError(DesignError::Kind::infeasible,
                              why.str() + "; the system is not stabilizable at this eps or under these constraints");
        case SolveStatus::unbounded:
            throw DesignError(DesignError::Kind::numerical, why.str() + "; the relaxation is unbounded");
        case SolveStatus::max_iters:
        case SolveStatus::numerical_failure: {
            // A primal-feasible point is still usable when it is merely less optimal:
            // kappa is read off the primal side, and the oracle below re-checks both
            // stability and the cost bound for whatever gain it produces.
            const double loose = std::max(1e-6, 100.0 * opts.solver.tolerance);
            const double slack = std::max(1e-3, loose);
            // A vanishing homogeneous scale means the residuals describe a ray,
            // not a point: typical of problems on the stabilizability boundary.
            const bool collapsed = sol.tau < 1e-10;
            if (!collapsed && sol.x.size() == prog.num_vars && sol.primal_residual <= loose &&
                sol.dual_residual <= slack && sol.duality_gap <= slack) {
                out.stats.status = "nearOptimal";
                break;
            }
            why << "; residuals pres=" << sol.primal_residual << " dres=" << sol.dual_residual
                << " gap=" << sol.duality_gap;
            if (collapsed) why << "; homogeneous scale collapsed (tau=" << sol.tau << "), likely ill-posed or infeasible";
            throw DesignError(DesignError::Kind::numerical, why.str());
        }
    }
    out.x = sol.x;
    return out;
}

// Verifies a candidate gain against the oracle. Returns false when it fails.
bool passes(const StochasticSystem& sys, const std::optional<LqrWeights>& w, const Matrix& k,
            const std::optional<double>& kappa, MsReport& rep, std::optional<double>& cost) {
    rep = ms_stable(sys, k);
    cost.reset();
    if (!rep.stable) return false;
    if (w) {
        try {
            cost = lqrm_cost(sys, k, w->q, w->r);
        } catch (const NumericsError&) {
            return false;
        }
        if (kappa && !(*cost <= *kappa + tolerance_for(*kappa))) return false;
    }
    return true;
}

LmiHandle base_problem(const StochasticSystem& sys, const std::optional<LqrWeights>& w, const DesignOptions& opts) {
    const double eps = opts.eps.value_or(default_eps(sys));
    if (w) return build_lqrm_sdp(sys, w->q, w->r, eps);
    return build_stability_lmi(sys, eps, opts.p_floor);
}

std::vector<int> complement(const std::vector<int>& keep, int n) {
    std::vector<int> out;
    std::size_t k = 0;
    for (int i = 0; i < n; ++i) {
        if (k < keep.size() && keep[k] == i) {
            ++k;
        } else {
            out.push_back(i);
        }
    }
    return out;
}

std::string describe_failure(const MsReport& rep, const std::optional<double>& cost, const std::optional<double>& kappa) {
    std::ostringstream msg;
    msg << "oracle rejected the synthesized gain: stable=" << (rep.stable ? "yes" : "no")
        << " margin=" << rep.margin;
    if (cost) msg << " cost=" << *cost;
    if (kappa) msg << " kappa=" << *kappa;
    return msg.str();
}

// Applies the row threshold to a full gain, keeping rows whose removal breaks
// the oracle check. Fills K, row data and the oracle fields of `res`.
void truncate_rows(const StochasticSystem& sys, const std::optional<LqrWeights>& w, DesignResult& res,
                   const Matrix& k_full, const std::function<Matrix(const Matrix&)>& to_state_gain) {
    MsReport rep;
    std::optional<double> cost;
    const std::vector<int> dropped = complement(res.row_support, static_cast<int>(k_full.rows()));
    Matrix k = k_full;
    for (int i : dropped) k.row(i).setZero();

    bool ok = passes(sys, w, to_state_gain(k), res.kappa, rep, cost);
    if (!ok && !dropped.empty()) {
        // Thresholding is heuristic; fall back to the certified gain.
        res.unremovable_rows.clear();
        for (int i : dropped)
            if (k_full.row(i).cwiseAbs().maxCoeff() > 0.0) res.unremovable_rows.push_back(i);
        k = k_full;
        ok = passes(sys, w, to_state_gain(k), res.kappa, rep, cost);
    }
    if (!ok) throw DesignError(DesignError::Kind::unverified, describe_failure(rep, cost, res.kappa));
    res.K = k;
    res.oracle = rep;
    res.oracle_cost = cost;
}

}  // namespace

DesignResult design_state_feedback(const StochasticSystem& sys, const std::optional<LqrWeights>& weights,
                                   const RegularizerSpec& spec, const DesignOptions& opts) {
    spec.check();
    if (spec.col_oriented()) throw std::invalid_argument("state feedback needs a row-oriented regularizer");

    LmiHandle h = add_regularizer(base_problem(sys, weights, opts), spec);
    const Solved s = run_solver(h, opts, "state-feedback SDP");

    DesignResult res;
    res.gamma = spec.gamma;
    res.regularizer = spec;
    res.solves.push_back(s.stats);
    res.P = symmetrize(h.P(s.x));
    res.Y = h.Y(s.x);
    res.kappa = h.kappa_value(s.x);
    const SupportPattern pat = threshold_pattern(res.Y, opts.tau);
    res.row_support = pat.rows;
    res.col_support = pat.cols;

    try {
        res.K_full = reconstruct_gain(res.Y, res.P);
    } catch (const NumericsError& e) {
        throw DesignError(DesignError::Kind::numerical, std::string("gain reconstruction failed: ") + e.what());
    }
    // The certificate covers the untruncated gain; check it before thresholding.
    MsReport rep;
    std::optional<double> cost;
    if (!passes(sys, weights, res.K_full, res.kappa, rep, cost)) {
        throw DesignError(DesignError::Kind::unverified, describe_failure(rep, cost, res.kappa));
    }
    truncate_rows(sys, weights, res, res.K_full, [](const Matrix& k) { return k; });
    return res;
}

DesignResult design_output_feedback(const StochasticSystem& sys, const std::optional<LqrWeights>& weights,
                                    const RegularizerSpec& col_spec, const RegularizerSpec& row_spec,
                                    const DesignOptions& opts) {
    col_spec.check();
    row_spec.check();
    if (col_spec.row_oriented()) throw std::invalid_argument("phase one needs a column-oriented regularizer");
    if (row_spec.col_oriented()) throw std::invalid_argument("phase two needs a row-oriented regularizer");
    const int n = static_cast<int>(sys.states());

    // Phase 1: column sparsity identifies the states worth measuring.
    LmiHandle h1 = add_regularizer(base_problem(sys, weights, opts), col_spec);
    const Solved s1 = run_solver(h1, opts, "output feedback phase 1");
    const Matrix y1 = h1.Y(s1.x);
    const std::vector<int> cols = threshold_pattern(y1, opts.tau).cols;
    const std::vector<int> zero_cols = complement(cols, n);

    // Phase 2: row sparsity with the zero columns pinned.
    LmiHandle h2 = add_regularizer(base_problem(sys, weights, opts), row_spec);
    h2 = add_zero_column_constraints(std::move(h2), std::set<int>(zero_cols.begin(), zero_cols.end()));
    Solved s2;
    try {
        s2 = run_solver(h2, opts, "output feedback phase 2");
    } catch (const DesignError& e) {
        if (e.kind() == DesignError::Kind::infeasible) {
            throw DesignError(e.kind(), std::string(e.what()) +
                                            "; try a smaller column weight in phase 1 so fewer columns are pinned");
        }
        throw;
    }

    DesignResult res;
    res.gamma = row_spec.gamma;
    res.regularizer = row_spec;
    res.solves = {s1.stats, s2.stats};
    res.zero_columns = zero_cols;
    res.P = symmetrize(h2.P(s2.x));
    res.Y = h2.Y(s2.x);
    for (int c : zero_cols) res.Y.col(c).setZero();  // pinned by equality; remove solver round-off
    res.kappa = h2.kappa_value(s2.x);
    res.col_support = cols;
    res.row_support = threshold_pattern(res.Y, opts.tau).rows;

    Matrix pinv;
    try {
        const auto llt = factor_pd(res.P);
        pinv = symmetrize(llt.solve(Matrix::Identity(n, n)));
    } catch (const NumericsError& e) {
        throw DesignError(DesignError::Kind::numerical, std::string("gain reconstruction failed: ") + e.what());
    }
    res.K_full = res.Y * pinv;

    MsReport rep;
    std::optional<double> cost;
    if (!passes(sys, weights, res.K_full, res.kappa, rep, cost)) {
        throw DesignError(DesignError::Kind::unverified, describe_failure(rep, cost, res.kappa));
    }

    const auto ny = static_cast<Eigen::Index>(cols.size());
    Matrix c(ny, n);
    Matrix k_cols(sys.inputs(), ny);
    for (Eigen::Index t = 0; t < ny; ++t) {
        c.row(t) = pinv.row(cols[t]);
        k_cols.col(t) = res.Y.col(cols[t]);
    }
    res.C = c;
    truncate_rows(sys, weights, res, k_cols, [&c](const Matrix& k) { return Matrix(k * c); });

    // Reconstruction identity on the rows that were kept.
    Matrix diff = res.K * c - res.K_full;
    for (Eigen::Index i = 0; i < diff.rows(); ++i)
        if (res.K.row(i).isZero(0.0) && !res.K_full.row(i).isZero(0.0)) diff.row(i).setZero();
    const double gap = diff.size() ? diff.cwiseAbs().maxCoeff() : 0.0;
    if (gap > 1e-8) {
        throw DesignError(DesignError::Kind::numerical,
                          "output feedback reconstruction mismatch |K C - Y P^-1| = " + format_double(gap));
    }
    return res;
}

std::vector<SweepPoint> sweep_gamma(const StochasticSystem& sys, const LqrWeights& weights, const RegularizerSpec& spec,
                                    const std::vector<double>& grid, const DesignOptions& opts, int jobs) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!(grid[k] >= 0.0)) throw std::invalid_argument("gamma grid values must be nonnegative");
        if (k > 0 && grid[k] < grid[k - 1]) throw std::invalid_argument("gamma grid must be sorted ascending");
    }
    std::vector<SweepPoint> points(grid.size());
    auto run_point = [&](std::size_t k) {
        SweepPoint& pt = points[k];
        pt.gamma = grid[k];
        const auto t0 = std::chrono::steady_clock::now();
        RegularizerSpec s = spec;
        s.gamma = grid[k];
        try {
            pt.result = design_state_feedback(sys, weights, s, opts);
        } catch (const std::exception& e) {
            pt.error = e.what();
        }
        pt.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < points.size(); k = next++) run_point(k);
    };
    const int nthreads = std::max(1, std::min<int>(jobs, static_cast<int>(points.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    // Reference cost at gamma = 0, solved separately if the grid lacks it.
    std::optional<double> kappa0;
    if (!points.empty() && points.front().gamma == 0.0 && points.front().result) {
        kappa0 = points.front().result->kappa;
    } else {
        RegularizerSpec s = spec;
        s.gamma = 0.0;
        try {
            kappa0 = design_state_feedback(sys, weights, s, opts).kappa;
        } catch (const std::exception&) {
        }
    }
    for (auto& pt : points) {
        if (pt.result && pt.result->kappa && kappa0 && *kappa0 != 0.0) {
            pt.rel_cost = (*pt.result->kappa - *kappa0) / *kappa0;
        } else {
            pt.rel_cost = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return points;
}

}  // namespace sparselmi
