// Homogeneous self-dual interior point method with Nesterov-Todd scaling,
// organised after the conelp scheme (predictor + Mehrotra corrector).
// The cones handled natively are the nonnegative orthant and the PSD cone;
// second-order cones are embedded as arrow matrices and equalities (including
// zero cones) go to the A block.

#include "sparselmi/conic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

namespace sparselmi {

namespace {

using Triplet = Eigen::Triplet<double, int>;

struct PsdBlock {
    int side = 0;
    int offset = 0;  // first row in the internal cone vector
    Matrix r;        // W z = r^T z r
    Matrix rti;      // r^{-T}
    Vector lambda;   // scaled point, diagonal
    // Per variable: symmetric coefficient matrix restricted to its support.
    std::vector<int> vars;
    std::vector<std::vector<int>> support;
    std::vector<Matrix> coef;
};

struct Internal {
    int n = 0;       // variables
    Vector c;
    SparseMatrix a;  // equalities
    Vector b;
    SparseMatrix g;  // cone rows (nonneg first, then PSD blocks)
    Vector h;
    int lp = 0;
    std::vector<PsdBlock> psd;
    int rows = 0;
    // Map back: original cone row -> internal row (for nonneg/psd/soc blocks).
    SparseMatrix embed;        // internal rows x original rows
    std::vector<int> zero_rows;  // original rows that became equalities
    // Equilibration: internal data is E A D, F G D with x = D x~, y = E y~,
    // z = F z~, s = F^{-1} s~. F is constant on each PSD block.
    Vector d, e, f;
};

// Ruiz-style scaling. Cone membership only survives a single positive factor
// per PSD block, so those blocks share one row scale.
void equilibrate(Internal& in) {
    const int n = in.n;
    const int neq = static_cast<int>(in.a.rows());
    in.d = Vector::Ones(n);
    in.e = Vector::Ones(neq);
    in.f = Vector::Ones(in.rows);
    auto clamp = [](double v) { return std::clamp(v, 1e-4, 1e4); };
    for (int round = 0; round < 15; ++round) {
        Vector cn = Vector::Zero(n), en = Vector::Zero(neq), fn = Vector::Zero(in.rows);
        for (int k = 0; k < in.a.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(in.a, k); it; ++it) {
                const double v = std::abs(it.value() * in.e(it.row()) * in.d(k));
                cn(k) = std::max(cn(k), v);
                en(it.row()) = std::max(en(it.row()), v);
            }
        for (int k = 0; k < in.g.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(in.g, k); it; ++it) {
                const double v = std::abs(it.value() * in.f(it.row()) * in.d(k));
                cn(k) = std::max(cn(k), v);
                fn(it.row()) = std::max(fn(it.row()), v);
            }
        for (const auto& pb : in.psd) {
            const int len = pb.side * (pb.side + 1) / 2;
            const double m = fn.segment(pb.offset, len).maxCoeff();
            fn.segment(pb.offset, len).setConstant(m);
        }
        double worst = 0.0;
        auto update = [&](Vector& scale, const Vector& nrm) {
            for (Eigen::Index i = 0; i < scale.size(); ++i) {
                if (nrm(i) <= 0.0) continue;
                worst = std::max(worst, std::abs(std::log(nrm(i))));
                scale(i) = clamp(scale(i) / std::sqrt(nrm(i)));
            }
        };
        update(in.d, cn);
        update(in.e, en);
        update(in.f, fn);
        if (worst < std::log(1.5)) break;
    }
    in.a = in.e.asDiagonal() * in.a * in.d.asDiagonal();
    in.g = in.f.asDiagonal() * in.g * in.d.asDiagonal();
    in.c = in.d.cwiseProduct(in.c);
    in.b = in.e.cwiseProduct(in.b);
    in.h = in.f.cwiseProduct(in.h);
}

// Builds the internal problem. SOC (t, u) becomes [[t, u^T], [u, t I]].
Internal prepare(const ConicProgram& p) {
    Internal in;
    in.n = p.num_vars;
    in.c = p.c;

    // First pass: decide internal layout.
    std::vector<Triplet> emb;
    int lp_rows = 0;
    for (const auto& blk : p.blocks)
        if (blk.kind == ConeKind::nonneg) lp_rows += blk.dim;
    in.lp = lp_rows;

    int orig = 0;
    int lp_next = 0;
    int psd_next = lp_rows;
    for (const auto& blk : p.blocks) {
        switch (blk.kind) {
            case ConeKind::zero:
                for (int k = 0; k < blk.dim; ++k) in.zero_rows.push_back(orig + k);
                break;
            case ConeKind::nonneg:
                for (int k = 0; k < blk.dim; ++k) emb.emplace_back(lp_next++, orig + k, 1.0);
                break;
            case ConeKind::psd: {
                PsdBlock pb;
                pb.side = blk.dim;
                pb.offset = psd_next;
                const int len = blk.slack_size();
                for (int k = 0; k < len; ++k) emb.emplace_back(psd_next + k, orig + k, 1.0);
                psd_next += len;
                in.psd.push_back(std::move(pb));
                break;
            }
            case ConeKind::soc: {
                PsdBlock pb;
                pb.side = blk.dim;
                pb.offset = psd_next;
                const int q = blk.dim;
                for (int i = 0; i < q; ++i) emb.emplace_back(psd_next + svec_index(i, i, q), orig, 1.0);
                for (int i = 1; i < q; ++i) emb.emplace_back(psd_next + svec_index(i, 0, q), orig + i, std::sqrt(2.0));
                psd_next += q * (q + 1) / 2;
                in.psd.push_back(std::move(pb));
                break;
            }
        }
        orig += blk.slack_size();
    }
    in.rows = psd_next;
    in.embed.resize(in.rows, p.g.rows());
    in.embed.setFromTriplets(emb.begin(), emb.end());
    in.g = in.embed * p.g;
    in.h = in.embed * p.h;

    // Equalities: A plus zero-cone rows (G x = h there).
    std::vector<Triplet> at;
    const int neq = static_cast<int>(p.a.rows() + in.zero_rows.size());
    in.b.resize(neq);
    for (int k = 0; k < p.a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(p.a, k); it; ++it) at.emplace_back(it.row(), it.col(), it.value());
    for (int r = 0; r < p.a.rows(); ++r) in.b(r) = p.b(r);
    if (!in.zero_rows.empty()) {
        SparseMatrix gt = p.g.transpose();  // row access
        for (std::size_t k = 0; k < in.zero_rows.size(); ++k) {
            const int row = static_cast<int>(p.a.rows() + k);
            for (SparseMatrix::InnerIterator it(gt, in.zero_rows[k]); it; ++it) at.emplace_back(row, it.row(), it.value());
            in.b(row) = p.h(in.zero_rows[k]);
        }
    }
    in.a.resize(neq, in.n);
    in.a.setFromTriplets(at.begin(), at.end());
    equilibrate(in);

    // Per-variable coefficient matrices of each PSD block.
    const double r2 = 1.0 / std::sqrt(2.0);
    for (auto& pb : in.psd) {
        const int len = pb.side * (pb.side + 1) / 2;
        // Decode svec row index -> (i, j).
        std::vector<std::pair<int, int>> pos(len);
        for (int j = 0; j < pb.side; ++j)
            for (int i = j; i < pb.side; ++i) pos[svec_index(i, j, pb.side)] = {i, j};
        for (int v = 0; v < in.n; ++v) {
            std::vector<std::tuple<int, int, double>> ent;
            for (SparseMatrix::InnerIterator it(in.g, v); it; ++it) {
                const int row = it.row() - pb.offset;
                if (row < 0 || row >= len) continue;
                const auto [i, j] = pos[row];
                ent.emplace_back(i, j, i == j ? it.value() : it.value() * r2);
            }
            if (ent.empty()) continue;
            std::vector<int> sup;
            for (const auto& [i, j, _] : ent) {
                sup.push_back(i);
                sup.push_back(j);
            }
            std::sort(sup.begin(), sup.end());
            sup.erase(std::unique(sup.begin(), sup.end()), sup.end());
            Matrix f = Matrix::Zero(static_cast<Eigen::Index>(sup.size()), static_cast<Eigen::Index>(sup.size()));
            auto local = [&](int idx) {
                return static_cast<Eigen::Index>(std::lower_bound(sup.begin(), sup.end(), idx) - sup.begin());
            };
            for (const auto& [i, j, val] : ent) {
                f(local(i), local(j)) += val;
                if (i != j) f(local(j), local(i)) += val;
            }
            pb.vars.push_back(v);
            pb.support.push_back(std::move(sup));
            pb.coef.push_back(std::move(f));
        }
    }
    return in;
}

// Lower-triangular Cholesky factor with a clear failure signal.
bool cholesky(const Matrix& m, Matrix& l) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return false;
    l = llt.matrixL();
    return l.allFinite();
}

Vector svec_sym(const Matrix& m) {
    const int n = static_cast<int>(m.rows());
    Vector v(n * (n + 1) / 2);
    int k = 0;
    const double s2 = std::sqrt(2.0);
    for (int j = 0; j < n; ++j) {
        v(k++) = m(j, j);
        for (int i = j + 1; i < n; ++i) v(k++) = s2 * 0.5 * (m(i, j) + m(j, i));
    }
    return v;
}

// Largest alpha with lambda + alpha * d in the cone (infinity if unlimited).
double max_step_psd(const Vector& lambda, const Matrix& d) {
    const Vector isq = lambda.cwiseSqrt().cwiseInverse();
    Matrix t = isq.asDiagonal() * d * isq.asDiagonal();
    const double lmin = min_eigenvalue_sym(t);
    return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

class Solver {
public:
    Solver(const ConicProgram& p, const SolverSettings& settings) : p_(p), set_(settings), in_(prepare(p)) {}

    ConicSolution run();

private:
    // Cone vector helpers (internal layout).
    Vector identity() const;
    Vector apply_w(const Vector& v) const;          // W v
    Vector apply_wt(const Vector& v) const;         // W^T v
    Vector apply_wtw_inv(const Vector& v) const;    // (W^T W)^{-1} v
    Vector jordan_lambda_div(const Vector& v) const;  // lambda^{-1} diamond v
    Vector lambda_square() const;
    Vector jordan_product(const Vector& u, const Vector& v) const;
    double max_step(const Vector& ds, const Vector& dz) const;
    void update_scaling(const Vector& ds, const Vector& dz, double alpha);
    void init_scaling();

    bool factor();
    void kkt_solve(const Vector& px, const Vector& py, const Vector& pz, Vector& ux, Vector& uy, Vector& uz) const;
    void kkt_solve_raw(const Vector& px, const Vector& py, const Vector& pz, Vector& ux, Vector& uy, Vector& uz) const;

    ConicSolution finish(SolveStatus status, const std::string& msg);

    const ConicProgram& p_;
    SolverSettings set_;
    Internal in_;

    Vector x_, y_, s_, z_;
    double tau_ = 1.0, kappa_ = 1.0;
    Vector w_lp_, lambda_lp_;

    Matrix hmat_;
    Eigen::LLT<Matrix> m_llt_;
    Eigen::LLT<Matrix> s_llt_;
    Matrix minv_at_;  // M^{-1} A^T
    Vector hscale_;   // Jacobi scaling of H
    Matrix msolve(const Matrix& r) const;
    double reg_ = 0.0;

    // Best iterate so far, for graceful failure.
    struct Snapshot {
        Vector x, y, s, z;
        double tau = 1, kappa = 1, merit = std::numeric_limits<double>::infinity();
        double pres = 0, dres = 0, gap = 0, pcost = 0, dcost = 0;
    } best_;
    int iter_ = 0;
    std::chrono::steady_clock::time_point start_;
};

Vector Solver::identity() const {
    Vector e = Vector::Zero(in_.rows);
    e.head(in_.lp).setOnes();
    for (const auto& pb : in_.psd)
        for (int i = 0; i < pb.side; ++i) e(pb.offset + svec_index(i, i, pb.side)) = 1.0;
    return e;
}

Vector Solver::apply_w(const Vector& v) const {
    Vector out(in_.rows);
    out.head(in_.lp) = v.head(in_.lp).cwiseProduct(w_lp_);
    for (const auto& pb : in_.psd) {
        const int len = pb.side * (pb.side + 1) / 2;
        const Matrix m = smat(v.segment(pb.offset, len), pb.side);
        out.segment(pb.offset, len) = svec_sym(pb.r.transpose() * m * pb.r);
    }
    return out;
}

Vector Solver::apply_wt(const Vector& v) const {
    Vector out(in_.rows);
    out.head(in_.lp) = v.head(in_.lp).cwiseProduct(w_lp_);
    for (const auto& pb : in_.psd) {
        const int len = pb.side * (pb.side + 1) / 2;
        const Matrix m = smat(v.segment(pb.offset, len), pb.side);
        out.segment(pb.offset, len) = svec_sym(pb.r * m * pb.r.transpose());
    }
    return out;
}

Vector Solver::apply_wtw_inv(const Vector& v) const {
    Vector out(in_.rows);
    out.head(in_.lp) = v.head(in_.lp).cwiseQuotient(w_lp_.cwiseAbs2());
    for (const auto& pb : in_.psd) {
        const int len = pb.side * (pb.side + 1) / 2;
        const Matrix m = smat(v.segment(pb.offset, len), pb.side);
        const Matrix t = pb.rti.transpose() * m * pb.rti;
        out.segment(pb.offset, len) = svec_sym(pb.rti * t * pb.rti.transpose());
    }
    return out;
}

Vector Solver::lambda_square() const {
    Vector out = Vector::Zero(in_.rows);
    out.head(in_.lp) = lambda_lp_.cwiseAbs2();
    for (const auto& pb : in_.psd)
        for (int i = 0; i < pb.side; ++i) out(pb.offset + svec_index(i, i, pb.side)) = pb.lambda(i) * pb.lambda(i);
    return out;
}

Vector Solver::jordan_lambda_div(const Vector& v) const {
    Vector out(in_.rows);
    out.head(in_.lp) = v.head(in_.lp).cwiseQuotient(lambda_lp_);
    for (const auto& pb : in_.psd) {
        const int len = pb.side * (pb.side + 1) / 2;
        Matrix m = smat(v.segment(pb.offset, len), pb.side);
        for (int j = 0; j < pb.side; ++j)
            for (int i = 0; i < pb.side; ++i) m(i, j) *= 2.0 / (pb.lambda(i) + pb.lambda(j));
        out.segment(pb.offset, len) = svec_sym(m);
    }
    return out;
}

Vector Solver::jordan_product(const Vector& u, const Vector& v) const {
    Vector out(in_.rows);
    out.head(in_.lp) = u.head(in_.lp).cwiseProduct(v.head(in_.lp));
    for (const auto& pb : in_.psd) {
        const int len = pb.side * (pb.side + 1) / 2;
        const Matrix a = smat(u.segment(pb.offset, len), pb.side);
        const Matrix b = smat(v.segment(pb.offset, len), pb.side);
        out.segment(pb.offset, len) = svec_sym(0.5 * (a * b + b * a));
    }
    return out;
}

double Solver::max_step(const Vector& ds, const Vector& dz) const {
    double alpha = std::numeric_limits<double>::infinity();
    for (int i = 0; i < in_.lp; ++i) {
        if (ds(i) < 0) alpha = std::min(alpha, -lambda_lp_(i) / ds(i));
        if (dz(i) < 0) alpha = std::min(alpha, -lambda_lp_(i) / dz(i));
    }
    for (const auto& pb : in_.psd) {
        const int len = pb.side * (pb.side + 1) / 2;
        alpha = std::min(alpha, max_step_psd(pb.lambda, smat(ds.segment(pb.offset, len), pb.side)));
        alpha = std::min(alpha, max_step_psd(pb.lambda, smat(dz.segment(pb.offset, len), pb.side)));
    }
    return alpha;
}

void Solver::init_scaling() {
    w_lp_ = Vector::Ones(in_.lp);
    lambda_lp_ = Vector::Ones(in_.lp);
    for (auto& pb : in_.psd) {
        pb.r = Matrix::Identity(pb.side, pb.side);
        pb.rti = Matrix::Identity(pb.side, pb.side);
        pb.lambda = Vector::Ones(pb.side);
    }
}

// Refreshes the NT scaling in place after a step along the scaled directions.
void Solver::update_scaling(const Vector& ds, const Vector& dz, double alpha) {
    for (int i = 0; i < in_.lp; ++i) {
        const double sn = lambda_lp_(i) + alpha * ds(i);
        const double zn = lambda_lp_(i) + alpha * dz(i);
        // Unscaled s = w * s~, z = z~ / w.
        const double s = w_lp_(i) * sn;
        const double z = zn / w_lp_(i);
        w_lp_(i) = std::sqrt(s / z);
        lambda_lp_(i) = std::sqrt(s * z);
    }
    for (auto& pb : in_.psd) {
        const int len = pb.side * (pb.side + 1) / 2;
        Matrix st = smat(ds.segment(pb.offset, len), pb.side) * alpha;
        Matrix zt = smat(dz.segment(pb.offset, len), pb.side) * alpha;
        st.diagonal() += pb.lambda;
        zt.diagonal() += pb.lambda;
        Matrix ls, lz;
        if (!cholesky(symmetrize(st), ls) || !cholesky(symmetrize(zt), lz))
            throw NumericsError("iterate left the PSD cone");
        Eigen::BDCSVD<Matrix> svd(lz.transpose() * ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Vector sv = svd.singularValues();
        if (!(sv.minCoeff() > 0.0)) throw NumericsError("degenerate NT scaling");
        const Vector isq = sv.cwiseSqrt().cwiseInverse();
        pb.r = pb.r * ls * svd.matrixV() * isq.asDiagonal();
        pb.rti = pb.rti * lz * svd.matrixU() * isq.asDiagonal();
        pb.lambda = sv;
    }
}

// Assembles H = G^T (W^T W)^{-1} G and factors the reduced KKT system.
bool Solver::factor() {
    const int n = in_.n;
    hmat_ = Matrix::Zero(n, n);
    if (in_.lp > 0) {
        const SparseMatrix glp = in_.g.topRows(in_.lp);
        const Vector d = w_lp_.cwiseAbs2().cwiseInverse();
        SparseMatrix hl = SparseMatrix(glp.transpose()) * d.asDiagonal() * glp;
        hmat_ += Matrix(hl);
    }
    for (const auto& pb : in_.psd) {
        const int len = pb.side * (pb.side + 1) / 2;
        const Matrix what = pb.rti * pb.rti.transpose();
        SparseMatrix gb = in_.g.middleRows(pb.offset, len);
        SparseMatrix gbt = gb.transpose();
        for (std::size_t k = 0; k < pb.vars.size(); ++k) {
            const auto& sup = pb.support[k];
            const Eigen::Index ns = static_cast<Eigen::Index>(sup.size());
            Matrix wcols(pb.side, ns);
            for (Eigen::Index t = 0; t < ns; ++t) wcols.col(t) = what.col(sup[t]);
            const Matrix tmp = wcols * pb.coef[k];
            const Matrix mj = tmp * wcols.transpose();
            const Vector col = gbt * svec_sym(mj);
            hmat_.col(pb.vars[k]) += col;
        }
    }
    hmat_ = symmetrize(hmat_);

    // Jacobi scaling first: the diagonal of H spans many orders of magnitude
    // near the optimum and a uniform shift would swamp the small entries.
    hscale_ = hmat_.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    Matrix m = hscale_.asDiagonal() * hmat_ * hscale_.asDiagonal();
    reg_ = 1e-14;
    for (int attempt = 0; attempt < 4; ++attempt, reg_ *= 1e2) {
        Matrix mr = m;
        mr.diagonal().array() += reg_;
        m_llt_.compute(mr);
        if (m_llt_.info() == Eigen::Success) break;
    }
    if (m_llt_.info() != Eigen::Success) return false;
    if (in_.a.rows() > 0) {
        const Matrix at = Matrix(in_.a.transpose());
        minv_at_ = msolve(at);
        Matrix sch = Matrix(in_.a * minv_at_);
        const double sreg = 1e-14 * std::max(1.0, sch.diagonal().maxCoeff());
        sch.diagonal().array() += sreg;
        s_llt_.compute(symmetrize(sch));
        if (s_llt_.info() != Eigen::Success) return false;
    }
    return true;
}

Matrix Solver::msolve(const Matrix& r) const {
    return hscale_.asDiagonal() * m_llt_.solve(hscale_.asDiagonal() * r);
}

void Solver::kkt_solve_raw(const Vector& px, const Vector& py, const Vector& pz, Vector& ux, Vector& uy,
                           Vector& uz) const {
    const Vector rhs = px + in_.g.transpose() * apply_wtw_inv(pz);
    if (in_.a.rows() > 0) {
        const Vector mr = msolve(rhs);
        uy = s_llt_.solve(in_.a * mr - py);
        ux = mr - minv_at_ * uy;
    } else {
        uy = Vector::Zero(0);
        ux = msolve(rhs);
    }
    uz = apply_wtw_inv(in_.g * ux - pz);
}

// Iterative refinement against the unregularized KKT operator
//   [0 A^T G^T; A 0 0; G 0 -W^T W].
void Solver::kkt_solve(const Vector& px, const Vector& py, const Vector& pz, Vector& ux, Vector& uy,
                       Vector& uz) const {
    kkt_solve_raw(px, py, pz, ux, uy, uz);
    const double nrm = 1.0 + std::max({px.lpNorm<Eigen::Infinity>(), py.size() ? py.lpNorm<Eigen::Infinity>() : 0.0,
                                       pz.lpNorm<Eigen::Infinity>()});
    for (int it = 0; it < 4; ++it) {
        Vector rx = px - (in_.a.transpose() * uy + in_.g.transpose() * uz);
        Vector ry = py - in_.a * ux;
        Vector rz = pz - (in_.g * ux - apply_wt(apply_w(uz)));
        const double res = std::max({rx.lpNorm<Eigen::Infinity>(), ry.size() ? ry.lpNorm<Eigen::Infinity>() : 0.0,
                                     rz.lpNorm<Eigen::Infinity>()});
        if (res <= 1e-14 * nrm) break;
        Vector dx, dy, dz;
        kkt_solve_raw(rx, ry, rz, dx, dy, dz);
        ux += dx;
        uy += dy;
        uz += dz;
    }
}

ConicSolution Solver::finish(SolveStatus status, const std::string& msg) {
    ConicSolution sol;
    sol.status = status;
    sol.iterations = iter_;
    sol.message = msg;
    sol.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();

    const Snapshot& b = best_;
    const double tau = b.tau;
    if (status == SolveStatus::infeasible || status == SolveStatus::unbounded) {
        // Certificates are reported unnormalized by tau.
        sol.x = in_.d.cwiseProduct(x_);
        sol.y = in_.e.cwiseProduct(y_).head(p_.a.rows());
        sol.z = in_.embed.transpose() * in_.f.cwiseProduct(z_);
        sol.s = p_.h - p_.g * sol.x;
        sol.objective = status == SolveStatus::infeasible ? std::numeric_limits<double>::infinity()
                                                          : -std::numeric_limits<double>::infinity();
        sol.dual_objective = sol.objective;
        return sol;
    }
    sol.tau = b.tau;
    sol.kappa = b.kappa;
    sol.x = in_.d.cwiseProduct(b.x) / tau;
    const Vector yall = in_.e.cwiseProduct(b.y) / tau;
    sol.y = yall.head(p_.a.rows());
    Vector zint = in_.f.cwiseProduct(b.z) / tau;
    sol.z = in_.embed.transpose() * zint;
    for (std::size_t k = 0; k < in_.zero_rows.size(); ++k) sol.z(in_.zero_rows[k]) = yall(p_.a.rows() + k);
    sol.s = p_.h - p_.g * sol.x;
    sol.objective = b.pcost;
    sol.dual_objective = b.dcost;
    sol.primal_residual = b.pres;
    sol.dual_residual = b.dres;
    sol.duality_gap = b.gap;
    return sol;
}

ConicSolution Solver::run() {
    start_ = std::chrono::steady_clock::now();
    const int n = in_.n;
    const int neq = static_cast<int>(in_.a.rows());
    const double nu = in_.lp + [&] {
        int d = 0;
        for (const auto& pb : in_.psd) d += pb.side;
        return d;
    }();
    const double tol = set_.tolerance;

    x_ = Vector::Zero(n);
    y_ = Vector::Zero(neq);
    s_ = identity();
    z_ = identity();
    tau_ = 1.0;
    kappa_ = 1.0;
    init_scaling();

    // Residual norms are measured in the units of the caller's problem.
    const Vector dinv = in_.d.cwiseInverse(), einv = in_.e.cwiseInverse(), finv = in_.f.cwiseInverse();
    const double bh_norm =
        std::max(1.0, std::sqrt(einv.cwiseProduct(in_.b).squaredNorm() + finv.cwiseProduct(in_.h).squaredNorm()));
    const double c_norm = std::max(1.0, dinv.cwiseProduct(in_.c).norm());

    int stall = 0;
    double last_merit = std::numeric_limits<double>::infinity();
    double last_mu = std::numeric_limits<double>::infinity();
    for (iter_ = 0; iter_ <= set_.max_iters; ++iter_) {
        const Vector rx = in_.a.transpose() * y_ + in_.g.transpose() * z_ + in_.c * tau_;
        const Vector ry = in_.b * tau_ - in_.a * x_;
        const Vector rz = s_ + in_.g * x_ - in_.h * tau_;
        const double cx = in_.c.dot(x_);
        const double by_hz = in_.b.dot(y_) + in_.h.dot(z_);
        const double rt = kappa_ + cx + by_hz;
        const double sz = s_.dot(z_);
        const double mu = (sz + tau_ * kappa_) / (nu + 1.0);

        const double pres =
            std::sqrt(einv.cwiseProduct(ry).squaredNorm() + finv.cwiseProduct(rz).squaredNorm()) / tau_ / bh_norm;
        const double dres = dinv.cwiseProduct(rx).norm() / tau_ / c_norm;
        const double pcost = cx / tau_;
        const double dcost = -by_hz / tau_;
        const double gap = std::max(sz / (tau_ * tau_), std::abs(pcost - dcost)) / std::max(1.0, std::abs(pcost));

        if (set_.verbose) {
            std::fprintf(stderr, "%3d  pcost % .8e  dcost % .8e  pres %.2e  dres %.2e  gap %.2e  tau %.2e  kappa %.2e\n",
                         iter_, pcost, dcost, pres, dres, gap, tau_, kappa_);
        }
        const double merit = std::max({pres, dres, gap});
        if (std::isfinite(merit) && merit < best_.merit) {
            best_ = {x_, y_, s_, z_, tau_, kappa_, merit, pres, dres, gap, pcost, dcost};
        }
        if (pres <= tol && dres <= tol && gap <= tol) return finish(SolveStatus::optimal, "converged");

        // Infeasibility certificates.
        if (by_hz < 0.0) {
            const double pinf =
                dinv.cwiseProduct(in_.a.transpose() * y_ + in_.g.transpose() * z_).norm() / c_norm / (-by_hz);
            if (pinf <= tol) return finish(SolveStatus::infeasible, "primal infeasibility certificate found");
        }
        if (cx < 0.0) {
            const double dinf = std::sqrt(einv.cwiseProduct(in_.a * x_).squaredNorm() +
                                          finv.cwiseProduct(s_ + in_.g * x_).squaredNorm()) /
                                bh_norm / (-cx);
            if (dinf <= tol) return finish(SolveStatus::unbounded, "dual infeasibility certificate found");
        }
        if (iter_ == set_.max_iters) break;

        // Badly scaled problems can sit at a constant relative gap while mu
        // still falls steadily, so either measure counts as progress.
        if (!(merit < 0.999 * last_merit) && !(mu < 0.9 * last_mu)) {
            if (++stall >= 8) return finish(SolveStatus::numerical_failure, "no progress (stalled iterates)");
        } else {
            stall = 0;
        }
        last_merit = std::min(last_merit, merit);
        last_mu = std::min(last_mu, mu);

        if (!factor()) return finish(SolveStatus::numerical_failure, "KKT factorization failed");

        Vector u2x, u2y, u2z;
        kkt_solve(-in_.c, in_.b, in_.h, u2x, u2y, u2z);
        const double den_base = in_.c.dot(u2x) + in_.b.dot(u2y) + in_.h.dot(u2z);

        Vector dx, dy, dz, dsc, dzc;
        double dtau = 0, dkappa = 0, eta_used = 0;

        // eta = 0 predictor, then corrector with sigma.
        auto direction = [&](double eta, const Vector& rc, double rct) {
            Vector u1x, u1y, u1z;
            const Vector pz = -(1.0 - eta) * rz - apply_wt(jordan_lambda_div(rc));
            kkt_solve(-(1.0 - eta) * rx, (1.0 - eta) * ry, pz, u1x, u1y, u1z);
            const double num = -(1.0 - eta) * rt - rct / tau_ - (in_.c.dot(u1x) + in_.b.dot(u1y) + in_.h.dot(u1z));
            const double den = den_base - kappa_ / tau_;
            dtau = num / den;
            eta_used = eta;
            dx = u1x + dtau * u2x;
            dy = u1y + dtau * u2y;
            dz = u1z + dtau * u2z;
            dkappa = (rct - kappa_ * dtau) / tau_;
            dzc = apply_w(dz);
            dsc = jordan_lambda_div(rc) - dzc;
        };
        auto step_limit = [&]() {
            double a = max_step(dsc, dzc);
            if (dtau < 0) a = std::min(a, -tau_ / dtau);
            if (dkappa < 0) a = std::min(a, -kappa_ / dkappa);
            return a;
        };

        double alpha = 0.0;
        try {
            const Vector rc_aff = -lambda_square();
            direction(0.0, rc_aff, -tau_ * kappa_);
            const double a_aff = std::min(1.0, step_limit());
            const double sigma = std::pow(1.0 - a_aff, 3);

            const Vector corr = jordan_product(dsc, dzc);
            const Vector rc = sigma * mu * identity() - lambda_square() - corr;
            const double rct = sigma * mu - tau_ * kappa_ - dtau * dkappa;
            direction(sigma, rc, rct);
            alpha = std::min(1.0, 0.99 * step_limit());
            if (!std::isfinite(alpha) || alpha <= 1e-12) {
                return finish(SolveStatus::numerical_failure, "step length collapsed");
            }
            // s and z move linearly so the residuals stay exact; rebuilding them
            // from the scaling would inject its round-off every iteration.
            s_ += alpha * (-(1.0 - eta_used) * rz - in_.g * dx + in_.h * dtau);
            z_ += alpha * dz;
            x_ += alpha * dx;
            y_ += alpha * dy;
            tau_ += alpha * dtau;
            kappa_ += alpha * dkappa;
            update_scaling(dsc, dzc, alpha);
        } catch (const NumericsError& e) {
            return finish(SolveStatus::numerical_failure, e.what());
        }
        if (!x_.allFinite() || !std::isfinite(tau_)) return finish(SolveStatus::numerical_failure, "non-finite iterate");
    }
    return finish(SolveStatus::max_iters, "iteration limit reached");
}

}  // namespace

ConicSolution solve(const ConicProgram& p, const SolverSettings& settings) {
    p.check();
    Solver solver(p, settings);
    return solver.run();
}

}  // namespace sparselmi
