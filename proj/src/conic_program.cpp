#include "sparselmi/conic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sparselmi {

int ConicProgram::cone_rows() const {
    int rows = 0;
    for (const auto& b : blocks) rows += b.slack_size();
    return rows;
}

void ConicProgram::check() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("conic program: " + msg); };
    if (num_vars < 0) fail("negative variable count");
    if (c.size() != num_vars) fail("objective length differs from variable count");
    if (a.cols() != num_vars || g.cols() != num_vars) fail("constraint matrices have wrong column count");
    if (a.rows() != b.size()) fail("A and b disagree in row count");
    if (g.rows() != h.size()) fail("G and h disagree in row count");
    if (cone_rows() != g.rows()) fail("cone blocks cover " + std::to_string(cone_rows()) + " rows, G has " +
                                      std::to_string(g.rows()));
    for (const auto& blk : blocks) {
        if (blk.dim <= 0) fail("empty cone block");
        if (blk.kind == ConeKind::soc && blk.dim < 1) fail("second-order cone needs at least one row");
    }
    if (!c.allFinite() || !b.allFinite() || !h.allFinite()) fail("non-finite data");
}

int svec_index(int i, int j, int side) {
    if (i < j) std::swap(i, j);
    return j * side - j * (j - 1) / 2 + (i - j);
}

Vector svec(const Matrix& s) {
    const int n = static_cast<int>(s.rows());
    Vector v(n * (n + 1) / 2);
    int k = 0;
    for (int j = 0; j < n; ++j)
        for (int i = j; i < n; ++i) v(k++) = (i == j) ? s(i, j) : std::sqrt(2.0) * s(i, j);
    return v;
}

Matrix smat(const Eigen::Ref<const Vector>& v, int side) {
    Matrix s(side, side);
    int k = 0;
    const double r = 1.0 / std::sqrt(2.0);
    for (int j = 0; j < side; ++j)
        for (int i = j; i < side; ++i) {
            const double x = (i == j) ? v(k) : v(k) * r;
            s(i, j) = x;
            s(j, i) = x;
            ++k;
        }
    return s;
}

LinExpr LinExpr::var(int index, double coef) {
    LinExpr e;
    e.terms.emplace_back(index, coef);
    return e;
}

LinExpr& LinExpr::operator+=(const LinExpr& o) {
    constant += o.constant;
    terms.insert(terms.end(), o.terms.begin(), o.terms.end());
    return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) {
    constant -= o.constant;
    terms.reserve(terms.size() + o.terms.size());
    for (const auto& [v, c] : o.terms) terms.emplace_back(v, -c);
    return *this;
}

LinExpr& LinExpr::operator*=(double s) {
    constant *= s;
    for (auto& t : terms) t.second *= s;
    return *this;
}

double LinExpr::evaluate(const Vector& x) const {
    double v = constant;
    for (const auto& [i, c] : terms) v += c * x(i);
    return v;
}

void LinExpr::compress() {
    if (terms.size() > 1) {
        std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::size_t out = 0;
        for (std::size_t k = 0; k < terms.size(); ++k) {
            if (out > 0 && terms[out - 1].first == terms[k].first) {
                terms[out - 1].second += terms[k].second;
            } else {
                terms[out++] = terms[k];
            }
        }
        terms.resize(out);
    }
    terms.erase(std::remove_if(terms.begin(), terms.end(), [](const auto& t) { return t.second == 0.0; }),
                terms.end());
}

LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
LinExpr operator-(LinExpr a) { return a *= -1.0; }
LinExpr operator*(double s, LinExpr a) { return a *= s; }

int ProgramBuilder::add_variables(int count) {
    if (count < 0) throw std::invalid_argument("negative variable count");
    const int first = num_vars_;
    num_vars_ += count;
    return first;
}

void ProgramBuilder::add_objective(int var, double coef) {
    if (var < 0 || var >= num_vars_) throw std::out_of_range("objective references unknown variable");
    objective_.emplace_back(var, coef);
}

void ProgramBuilder::add_equality(const LinExpr& e) {
    for (const auto& [v, c] : e.terms)
        if (v < 0 || v >= num_vars_) throw std::out_of_range("equality references unknown variable");
    equalities_.push_back(e);
}

void ProgramBuilder::push_rows(const std::vector<LinExpr>& rows, const std::vector<double>& scale) {
    int row = static_cast<int>(h_.size());
    for (std::size_t k = 0; k < rows.size(); ++k, ++row) {
        LinExpr e = rows[k];
        e.compress();
        h_.push_back(scale[k] * e.constant);
        for (const auto& [v, c] : e.terms) {
            if (v < 0 || v >= num_vars_) throw std::out_of_range("cone row references unknown variable");
            g_.emplace_back(row, v, -scale[k] * c);
        }
    }
}

void ProgramBuilder::add_nonneg(const std::vector<LinExpr>& rows) {
    if (rows.empty()) return;
    push_rows(rows, std::vector<double>(rows.size(), 1.0));
    blocks_.push_back({ConeKind::nonneg, static_cast<int>(rows.size())});
}

void ProgramBuilder::add_soc(const std::vector<LinExpr>& rows) {
    if (rows.empty()) throw std::invalid_argument("second-order cone needs at least one row");
    push_rows(rows, std::vector<double>(rows.size(), 1.0));
    blocks_.push_back({ConeKind::soc, static_cast<int>(rows.size())});
}

void ProgramBuilder::add_psd(int side, const std::vector<LinExpr>& lower) {
    if (side <= 0 || static_cast<int>(lower.size()) != side * (side + 1) / 2)
        throw std::invalid_argument("PSD block entry count does not match side length");
    std::vector<double> scale;
    scale.reserve(lower.size());
    for (int j = 0; j < side; ++j)
        for (int i = j; i < side; ++i) scale.push_back(i == j ? 1.0 : std::sqrt(2.0));
    push_rows(lower, scale);
    blocks_.push_back({ConeKind::psd, side});
}

ConicProgram ProgramBuilder::build() const {
    ConicProgram p;
    p.num_vars = num_vars_;
    p.c = Vector::Zero(num_vars_);
    for (const auto& [v, c] : objective_) p.c(v) += c;

    std::vector<Eigen::Triplet<double, int>> at;
    p.b.resize(static_cast<Eigen::Index>(equalities_.size()));
    for (std::size_t r = 0; r < equalities_.size(); ++r) {
        LinExpr e = equalities_[r];
        e.compress();
        p.b(r) = -e.constant;
        for (const auto& [v, c] : e.terms) at.emplace_back(static_cast<int>(r), v, c);
    }
    p.a.resize(static_cast<Eigen::Index>(equalities_.size()), num_vars_);
    p.a.setFromTriplets(at.begin(), at.end());

    p.g.resize(static_cast<Eigen::Index>(h_.size()), num_vars_);
    p.g.setFromTriplets(g_.begin(), g_.end());
    p.h = Eigen::Map<const Vector>(h_.data(), static_cast<Eigen::Index>(h_.size()));
    p.blocks = blocks_;
    p.check();
    return p;
}

ResidualReport check_solution(const ConicProgram& p, const Vector& x) {
    if (x.size() != p.num_vars) throw std::invalid_argument("check_solution: x has wrong length");
    ResidualReport rep;
    rep.objective = p.c.dot(x);
    if (p.a.rows() > 0) rep.equality = (p.a * x - p.b).cwiseAbs().maxCoeff();
    const Vector s = p.h - p.g * x;
    int off = 0;
    for (const auto& blk : p.blocks) {
        const int len = blk.slack_size();
        auto seg = s.segment(off, len);
        double dist = 0.0;
        switch (blk.kind) {
            case ConeKind::zero: dist = seg.cwiseAbs().maxCoeff(); break;
            case ConeKind::nonneg: dist = std::max(0.0, -seg.minCoeff()); break;
            case ConeKind::soc: dist = std::max(0.0, seg.tail(len - 1).norm() - seg(0)); break;
            case ConeKind::psd: dist = std::max(0.0, -min_eigenvalue_sym(smat(seg, blk.dim))); break;
        }
        rep.cone_distance.push_back(dist);
        rep.max_cone_distance = std::max(rep.max_cone_distance, dist);
        off += len;
    }
    return rep;
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::unbounded: return "unbounded";
        case SolveStatus::max_iters: return "maxIters";
        case SolveStatus::numerical_failure: return "numericalFailure";
    }
    return "unknown";
}

}  // namespace sparselmi
