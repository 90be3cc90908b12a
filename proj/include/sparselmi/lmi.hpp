#pragma once

// Conic encodings of the mean-square stability LMIs and the LQRm relaxation
// over the variables P = P^T (n x n) and Y = K P (m x n).

#include "sparselmi/affine_matrix.hpp"
#include "sparselmi/model.hpp"

#include <optional>
#include <set>
#include <string>

namespace sparselmi {

enum class RegKind {
    none,
    row_norm,
    col_norm,
    row_group_lasso,
    col_group_lasso,
    row_sparse_group_lasso,
    col_sparse_group_lasso,
};

struct RegularizerSpec {
    RegKind kind = RegKind::none;
    double gamma = 0.0;
    std::optional<double> mu;  // sparse group LASSO only

    void check() const;
    bool row_oriented() const;
    bool col_oriented() const;
};

/// CLI spellings: none, row-norm, col-norm, row-gl, col-gl, row-sgl, col-sgl.
RegKind parse_reg_kind(std::string_view text);
const char* to_string(RegKind kind);

/// Value of the (unweighted) regularizer at a concrete Y.
double regularizer_value(const RegularizerSpec& spec, const Matrix& y);

struct VarSlice {
    int first = -1;
    int count = 0;
    bool present() const { return first >= 0; }
};

struct LmiHandle {
    ProgramBuilder builder;
    TimeDomain domain = TimeDomain::continuous;
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    VarSlice p, y, kappa, pi;
    std::vector<int> psd_dims;  // in the order the blocks were added
    double eps = 0.0;
    // Main stability block, written so that the constraint reads
    // main_block >= eps I  (the continuous case stores the negated matrix).
    LinearMatrix main_block;

    ConicProgram program() const { return builder.build(); }
    Matrix P(const Vector& x) const;
    Matrix Y(const Vector& x) const;
    std::optional<double> kappa_value(const Vector& x) const;
};

/// Default strictness margin 1e-6 * max(1, ||A0||_inf).
double default_eps(const StochasticSystem& sys);

// `p_floor` replaces eps as the lower bound in P >= p_floor * I. Pure
// stabilization problems are homogeneous in (P, Y), so any positive floor can
// be used to normalize them; leaving it at eps lets the solver shrink P
// toward the strictness margin.
LmiHandle build_stability_lmi_ct(const StochasticSystem& sys, double eps, std::optional<double> p_floor = {});
LmiHandle build_stability_lmi_dt(const StochasticSystem& sys, double eps, std::optional<double> p_floor = {});
LmiHandle build_stability_lmi(const StochasticSystem& sys, double eps, std::optional<double> p_floor = {});

LmiHandle build_lqrm_sdp_ct(const StochasticSystem& sys, const Matrix& q, const Matrix& r, double eps);
LmiHandle build_lqrm_sdp_dt(const StochasticSystem& sys, const Matrix& q, const Matrix& r, double eps);
LmiHandle build_lqrm_sdp(const StochasticSystem& sys, const Matrix& q, const Matrix& r, double eps);

LmiHandle add_regularizer(LmiHandle h, const RegularizerSpec& spec);
LmiHandle add_zero_column_constraints(LmiHandle h, const std::set<int>& columns);

}  // namespace sparselmi
