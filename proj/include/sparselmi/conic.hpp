#pragma once

// Standard-form conic programs
//
//   minimize    c^T x
//   subject to  A x = b
//               s = h - G x  in  K1 x K2 x ...
//
// where every Ki is a zero, nonnegative, second-order or PSD cone. PSD slacks
// are stored in svec form: lower triangle, column-major, with off-diagonal
// entries multiplied by sqrt(2) so that svec(X).svec(Y) = trace(X Y).

#include "sparselmi/numerics.hpp"

#include <Eigen/SparseCore>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace sparselmi {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

enum class ConeKind { zero, nonneg, soc, psd };

struct ConeBlock {
    ConeKind kind = ConeKind::nonneg;
    int dim = 0;  // PSD: matrix side length; others: slack length

    int slack_size() const { return kind == ConeKind::psd ? dim * (dim + 1) / 2 : dim; }
};

struct ConicProgram {
    int num_vars = 0;
    Vector c;
    SparseMatrix a;  // equalities, rows x num_vars
    Vector b;
    SparseMatrix g;  // cone rows x num_vars
    Vector h;
    std::vector<ConeBlock> blocks;

    int cone_rows() const;
    /// Throws std::invalid_argument describing the first inconsistency.
    void check() const;
};

int svec_index(int i, int j, int side);  // i >= j assumed after swap
Vector svec(const Matrix& s);
Matrix smat(const Eigen::Ref<const Vector>& v, int side);

// Sparse scalar affine expression: constant + sum coef * x[var].
struct LinExpr {
    double constant = 0.0;
    std::vector<std::pair<int, double>> terms;

    LinExpr() = default;
    LinExpr(double c) : constant(c) {}  // NOLINT(google-explicit-constructor)
    static LinExpr var(int index, double coef = 1.0);

    LinExpr& operator+=(const LinExpr& o);
    LinExpr& operator-=(const LinExpr& o);
    LinExpr& operator*=(double s);
    double evaluate(const Vector& x) const;
    bool is_zero() const { return constant == 0.0 && terms.empty(); }
    /// Merges duplicate variables and drops zero coefficients.
    void compress();
};

LinExpr operator+(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a);
LinExpr operator*(double s, LinExpr a);

class ProgramBuilder {
public:
    /// Reserves `count` consecutive variables and returns the first index.
    int add_variables(int count);
    int num_vars() const { return num_vars_; }

    void add_objective(int var, double coef);

    void add_equality(const LinExpr& e);                 // e == 0
    void add_nonneg(const std::vector<LinExpr>& rows);    // each row >= 0
    void add_soc(const std::vector<LinExpr>& rows);       // rows[0] >= ||rows[1:]||
    /// `lower` holds the lower triangle column-major (svec order, unscaled).
    void add_psd(int side, const std::vector<LinExpr>& lower);

    ConicProgram build() const;

private:
    void push_rows(const std::vector<LinExpr>& rows, const std::vector<double>& scale);

    int num_vars_ = 0;
    std::vector<std::pair<int, double>> objective_;
    std::vector<LinExpr> equalities_;
    std::vector<ConeBlock> blocks_;
    std::vector<Eigen::Triplet<double, int>> g_;
    std::vector<double> h_;
};

struct SolverSettings {
    double tolerance = 1e-8;
    int max_iters = 50000;
    bool verbose = false;
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iters, numerical_failure };
const char* to_string(SolveStatus s);

struct ConicSolution {
    SolveStatus status = SolveStatus::numerical_failure;
    Vector x, y, z, s;
    double objective = 0.0;
    double dual_objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double duality_gap = 0.0;
    int iterations = 0;
    double runtime = 0.0;
    std::string message;
    double tau = 1.0, kappa = 0.0;  // homogeneous scale of the returned iterate
};

/// Homogeneous self-dual interior point method with Nesterov-Todd scaling.
ConicSolution solve(const ConicProgram& p, const SolverSettings& settings = {});

struct ResidualReport {
    double equality = 0.0;                 // ||A x - b||_inf
    std::vector<double> cone_distance;     // per block, 0 when inside
    double max_cone_distance = 0.0;
    double objective = 0.0;
};

/// Recomputes feasibility of x from the program data alone.
ResidualReport check_solution(const ConicProgram& p, const Vector& x);

// SDPA sparse format. Equalities become pairs of LP rows and second-order
// cones become arrow-shaped PSD blocks.
std::string to_sdpa(const ConicProgram& p);
void export_sdpa(const ConicProgram& p, const std::filesystem::path& path);
/// Reads SDPA sparse text back as a program with nonneg and PSD blocks only.
ConicProgram parse_sdpa(std::string_view text);

}  // namespace sparselmi
