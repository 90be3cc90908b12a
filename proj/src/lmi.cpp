#include "sparselmi/lmi.hpp"

#include <cmath>
#include <stdexcept>

namespace sparselmi {

void RegularizerSpec::check() const {
    const bool sgl = kind == RegKind::row_sparse_group_lasso || kind == RegKind::col_sparse_group_lasso;
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("regularizer gamma must be >= 0");
    if (sgl && !mu) throw std::invalid_argument("sparse group LASSO needs mu");
    if (!sgl && mu) throw std::invalid_argument("mu only applies to sparse group LASSO");
    if (mu && !(*mu >= 0.0 && *mu <= 1.0)) throw std::invalid_argument("mu must lie in [0, 1]");
}

bool RegularizerSpec::row_oriented() const {
    return kind == RegKind::row_norm || kind == RegKind::row_group_lasso || kind == RegKind::row_sparse_group_lasso;
}

bool RegularizerSpec::col_oriented() const {
    return kind == RegKind::col_norm || kind == RegKind::col_group_lasso || kind == RegKind::col_sparse_group_lasso;
}

RegKind parse_reg_kind(std::string_view text) {
    if (text == "none") return RegKind::none;
    if (text == "row-norm") return RegKind::row_norm;
    if (text == "col-norm") return RegKind::col_norm;
    if (text == "row-gl") return RegKind::row_group_lasso;
    if (text == "col-gl") return RegKind::col_group_lasso;
    if (text == "row-sgl") return RegKind::row_sparse_group_lasso;
    if (text == "col-sgl") return RegKind::col_sparse_group_lasso;
    throw std::invalid_argument("unknown regularizer '" + std::string(text) +
                                "' (expected none, row-norm, col-norm, row-gl, col-gl, row-sgl, col-sgl)");
}

const char* to_string(RegKind kind) {
    switch (kind) {
        case RegKind::none: return "none";
        case RegKind::row_norm: return "row-norm";
        case RegKind::col_norm: return "col-norm";
        case RegKind::row_group_lasso: return "row-gl";
        case RegKind::col_group_lasso: return "col-gl";
        case RegKind::row_sparse_group_lasso: return "row-sgl";
        case RegKind::col_sparse_group_lasso: return "col-sgl";
    }
    return "none";
}

double regularizer_value(const RegularizerSpec& spec, const Matrix& y) {
    spec.check();
    const Matrix groups = spec.col_oriented() ? Matrix(y.transpose()) : y;  // one group per row
    double total = 0.0;
    for (Eigen::Index g = 0; g < groups.rows(); ++g) {
        const auto row = groups.row(g);
        switch (spec.kind) {
            case RegKind::none: break;
            case RegKind::row_norm:
            case RegKind::col_norm: total += row.cwiseAbs().maxCoeff(); break;
            case RegKind::row_group_lasso:
            case RegKind::col_group_lasso: total += row.norm(); break;
            case RegKind::row_sparse_group_lasso:
            case RegKind::col_sparse_group_lasso:
                total += (1.0 - *spec.mu) * row.cwiseAbs().sum() + *spec.mu * row.norm();
                break;
        }
    }
    return total;
}

Matrix LmiHandle::P(const Vector& x) const {
    return LinearMatrix::symmetric(p.first, n).evaluate(x);
}

Matrix LmiHandle::Y(const Vector& x) const {
    return LinearMatrix::general(y.first, m, n).evaluate(x);
}

std::optional<double> LmiHandle::kappa_value(const Vector& x) const {
    if (!kappa.present()) return std::nullopt;
    return x(kappa.first);
}

double default_eps(const StochasticSystem& sys) {
    const double inf = sys.a0.size() ? sys.a0.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
    return 1e-6 * std::max(1.0, inf);
}

namespace {

struct Vars {
    LinearMatrix p;
    LinearMatrix y;
};

LmiHandle start(const StochasticSystem& sys, TimeDomain expected, double eps, Vars& v) {
    validate(sys);
    if (sys.domain != expected) {
        throw std::invalid_argument(std::string("LMI builder for ") + to_string(expected) + " time called with a " +
                                    to_string(sys.domain) + " system");
    }
    if (!(eps >= 0.0)) throw std::invalid_argument("eps must be nonnegative");
    LmiHandle h;
    h.domain = sys.domain;
    h.n = sys.states();
    h.m = sys.inputs();
    h.eps = eps;
    const int np = static_cast<int>(h.n * (h.n + 1) / 2);
    h.p = {h.builder.add_variables(np), np};
    const int ny = static_cast<int>(h.m * h.n);
    h.y = {h.builder.add_variables(ny), ny};
    v.p = LinearMatrix::symmetric(h.p.first, h.n);
    v.y = LinearMatrix::general(h.y.first, h.m, h.n);
    return h;
}

// D_i P for the closed-loop diffusion D_i = A_i + B_i K, expressed via Y = K P.
LinearMatrix diffusion_times_p(const NoiseChannel& ch, const Vars& v, Eigen::Index n) {
    LinearMatrix out = LinearMatrix::zero(n, n);
    if (ch.state) out += *ch.state * v.p;
    if (ch.input) out += *ch.input * v.y;
    return ch.intensity * out;
}

void add_shifted_psd(LmiHandle& h, LinearMatrix mat, double shift) {
    for (Eigen::Index i = 0; i < mat.rows(); ++i) mat(i, i) -= shift;
    h.builder.add_psd(static_cast<int>(mat.rows()), mat.lower());
    h.psd_dims.push_back(static_cast<int>(mat.rows()));
}

void add_p_floor(LmiHandle& h, const Vars& v, double floor) {
    add_shifted_psd(h, v.p, floor);
}

std::pair<Matrix, Matrix> weight_inverses(const StochasticSystem& sys, const Matrix& q, const Matrix& r) {
    const auto n = sys.states();
    const auto m = sys.inputs();
    if (q.rows() != n || q.cols() != n) throw std::invalid_argument("Q must be " + std::to_string(n) + "x" + std::to_string(n));
    if (r.rows() != m || r.cols() != m) throw std::invalid_argument("R must be " + std::to_string(m) + "x" + std::to_string(m));
    try {
        return {inverse_spd(q, 1e10), inverse_spd(r, 1e10)};
    } catch (const NumericsError& e) {
        throw std::invalid_argument(std::string("Q and R must be positive definite: ") + e.what());
    }
}

// Tr(Pi) <= kappa and [[Pi, S^{1/2}], [S^{1/2}, P]] >= 0; objective kappa.
void add_cost_bound(LmiHandle& h, const StochasticSystem& sys, const Vars& v) {
    const auto n = h.n;
    const int npi = static_cast<int>(n * (n + 1) / 2);
    h.pi = {h.builder.add_variables(npi), npi};
    h.kappa = {h.builder.add_variables(1), 1};
    const LinearMatrix pi = LinearMatrix::symmetric(h.pi.first, n);

    LinExpr slack = LinExpr::var(h.kappa.first);
    for (Eigen::Index i = 0; i < n; ++i) slack -= pi(i, i);
    h.builder.add_nonneg({slack});

    const Matrix root = sqrt_psd(symmetrize(sys.sigma0));
    const LinearMatrix blk = symmetric_blocks({n, n}, {{pi}, {LinearMatrix::constant(root), v.p}});
    h.builder.add_psd(static_cast<int>(2 * n), blk.lower());
    h.psd_dims.push_back(static_cast<int>(2 * n));
    h.builder.add_objective(h.kappa.first, 1.0);
}

}  // namespace

LmiHandle build_stability_lmi_ct(const StochasticSystem& sys, double eps, std::optional<double> p_floor) {
    Vars v;
    LmiHandle h = start(sys, TimeDomain::continuous, eps, v);
    const auto n = h.n;
    const auto q = static_cast<Eigen::Index>(sys.channels.size());

    const LinearMatrix fp = sys.a0 * v.p + sys.b0 * v.y;
    std::vector<Eigen::Index> sizes(1 + q, n);
    std::vector<std::vector<LinearMatrix>> parts(1 + q);
    parts[0] = {fp + fp.transpose()};
    for (Eigen::Index i = 0; i < q; ++i) {
        parts[1 + i].resize(2 + i);
        parts[1 + i][0] = diffusion_times_p(sys.channels[i], v, n);  // Z^T row
        parts[1 + i][1 + i] = -v.p;
    }
    h.main_block = -symmetric_blocks(sizes, parts);
    add_shifted_psd(h, h.main_block, eps);
    add_p_floor(h, v, p_floor.value_or(eps));
    return h;
}

LmiHandle build_stability_lmi_dt(const StochasticSystem& sys, double eps, std::optional<double> p_floor) {
    Vars v;
    LmiHandle h = start(sys, TimeDomain::discrete, eps, v);
    const auto n = h.n;
    const auto q = static_cast<Eigen::Index>(sys.channels.size());

    std::vector<Eigen::Index> sizes(2 + q, n);
    std::vector<std::vector<LinearMatrix>> parts(2 + q);
    parts[0] = {v.p};
    parts[1] = {sys.a0 * v.p + sys.b0 * v.y, v.p};
    for (Eigen::Index i = 0; i < q; ++i) {
        parts[2 + i].resize(3 + i);
        parts[2 + i][0] = diffusion_times_p(sys.channels[i], v, n);
        parts[2 + i][2 + i] = v.p;
    }
    h.main_block = symmetric_blocks(sizes, parts);
    add_shifted_psd(h, h.main_block, eps);
    add_p_floor(h, v, p_floor.value_or(eps));
    return h;
}

LmiHandle build_stability_lmi(const StochasticSystem& sys, double eps, std::optional<double> p_floor) {
    return sys.domain == TimeDomain::continuous ? build_stability_lmi_ct(sys, eps, p_floor)
                                                : build_stability_lmi_dt(sys, eps, p_floor);
}

LmiHandle build_lqrm_sdp_ct(const StochasticSystem& sys, const Matrix& q, const Matrix& r, double eps) {
    Vars v;
    LmiHandle h = start(sys, TimeDomain::continuous, eps, v);
    const auto [qinv, rinv] = weight_inverses(sys, q, r);
    const auto n = h.n;
    const auto m = h.m;
    const auto nc = static_cast<Eigen::Index>(sys.channels.size());

    const LinearMatrix fp = sys.a0 * v.p + sys.b0 * v.y;
    std::vector<Eigen::Index> sizes(1 + nc, n);
    sizes.push_back(m);
    sizes.push_back(n);
    std::vector<std::vector<LinearMatrix>> parts(sizes.size());
    parts[0] = {fp + fp.transpose()};
    for (Eigen::Index i = 0; i < nc; ++i) {
        parts[1 + i].resize(2 + i);
        parts[1 + i][0] = diffusion_times_p(sys.channels[i], v, n);
        parts[1 + i][1 + i] = -v.p;
    }
    const std::size_t iy = 1 + nc, ip = 2 + nc;
    parts[iy].resize(iy + 1);
    parts[iy][0] = v.y;
    parts[iy][iy] = LinearMatrix::constant(-rinv);
    parts[ip].resize(ip + 1);
    parts[ip][0] = v.p;
    parts[ip][ip] = LinearMatrix::constant(-qinv);

    h.main_block = -symmetric_blocks(sizes, parts);
    add_shifted_psd(h, h.main_block, eps);
    add_p_floor(h, v, eps);
    add_cost_bound(h, sys, v);
    return h;
}

LmiHandle build_lqrm_sdp_dt(const StochasticSystem& sys, const Matrix& q, const Matrix& r, double eps) {
    Vars v;
    LmiHandle h = start(sys, TimeDomain::discrete, eps, v);
    const auto [qinv, rinv] = weight_inverses(sys, q, r);
    const auto n = h.n;
    const auto m = h.m;
    const auto nc = static_cast<Eigen::Index>(sys.channels.size());

    std::vector<Eigen::Index> sizes(2 + nc, n);
    sizes.push_back(m);
    sizes.push_back(n);
    std::vector<std::vector<LinearMatrix>> parts(sizes.size());
    parts[0] = {v.p};
    parts[1] = {sys.a0 * v.p + sys.b0 * v.y, v.p};
    for (Eigen::Index i = 0; i < nc; ++i) {
        parts[2 + i].resize(3 + i);
        parts[2 + i][0] = diffusion_times_p(sys.channels[i], v, n);
        parts[2 + i][2 + i] = v.p;
    }
    const std::size_t iy = 2 + nc, ip = 3 + nc;
    parts[iy].resize(iy + 1);
    parts[iy][0] = v.y;
    parts[iy][iy] = LinearMatrix::constant(rinv);
    parts[ip].resize(ip + 1);
    parts[ip][0] = v.p;
    parts[ip][ip] = LinearMatrix::constant(qinv);

    h.main_block = symmetric_blocks(sizes, parts);
    add_shifted_psd(h, h.main_block, eps);
    add_p_floor(h, v, eps);
    add_cost_bound(h, sys, v);
    return h;
}

LmiHandle build_lqrm_sdp(const StochasticSystem& sys, const Matrix& q, const Matrix& r, double eps) {
    return sys.domain == TimeDomain::continuous ? build_lqrm_sdp_ct(sys, q, r, eps)
                                                : build_lqrm_sdp_dt(sys, q, r, eps);
}

LmiHandle add_regularizer(LmiHandle h, const RegularizerSpec& spec) {
    spec.check();
    if (spec.kind == RegKind::none || spec.gamma == 0.0) return h;
    if (!h.y.present()) throw std::invalid_argument("handle has no Y variable");

    const LinearMatrix y = LinearMatrix::general(h.y.first, h.m, h.n);
    const LinearMatrix groups = spec.col_oriented() ? y.transpose() : y;  // one group per row
    const Eigen::Index ng = groups.rows();
    const Eigen::Index len = groups.cols();
    const double gamma = spec.gamma;

    for (Eigen::Index g = 0; g < ng; ++g) {
        const int t = h.builder.add_variables(1);
        switch (spec.kind) {
            case RegKind::row_norm:
            case RegKind::col_norm: {
                std::vector<LinExpr> rows;
                for (Eigen::Index j = 0; j < len; ++j) {
                    rows.push_back(LinExpr::var(t) - groups(g, j));
                    rows.push_back(LinExpr::var(t) + groups(g, j));
                }
                h.builder.add_nonneg(rows);
                h.builder.add_objective(t, gamma);
                break;
            }
            case RegKind::row_group_lasso:
            case RegKind::col_group_lasso: {
                std::vector<LinExpr> cone{LinExpr::var(t)};
                for (Eigen::Index j = 0; j < len; ++j) cone.push_back(groups(g, j));
                h.builder.add_soc(cone);
                h.builder.add_objective(t, gamma);
                break;
            }
            case RegKind::row_sparse_group_lasso:
            case RegKind::col_sparse_group_lasso: {
                const double mu = *spec.mu;
                const int s = h.builder.add_variables(static_cast<int>(len));
                std::vector<LinExpr> rows;
                for (Eigen::Index j = 0; j < len; ++j) {
                    const LinExpr sj = LinExpr::var(s + static_cast<int>(j));
                    rows.push_back(sj - groups(g, j));
                    rows.push_back(sj + groups(g, j));
                    h.builder.add_objective(s + static_cast<int>(j), gamma * (1.0 - mu));
                }
                h.builder.add_nonneg(rows);
                std::vector<LinExpr> cone{LinExpr::var(t)};
                for (Eigen::Index j = 0; j < len; ++j) cone.push_back(groups(g, j));
                h.builder.add_soc(cone);
                h.builder.add_objective(t, gamma * mu);
                break;
            }
            case RegKind::none: break;
        }
    }
    return h;
}

LmiHandle add_zero_column_constraints(LmiHandle h, const std::set<int>& columns) {
    for (int c : columns) {
        if (c < 0 || c >= h.n) throw std::out_of_range("zero-column index " + std::to_string(c) + " out of range");
        for (Eigen::Index i = 0; i < h.m; ++i) {
            h.builder.add_equality(LinExpr::var(h.y.first + static_cast<int>(i * h.n + c)));
        }
    }
    return h;
}

}  // namespace sparselmi
