#include "sparselmi/affine_matrix.hpp"

#include <stdexcept>

namespace sparselmi {

LinearMatrix::LinearMatrix(Eigen::Index rows, Eigen::Index cols)
    : rows_(rows), cols_(cols), e_(static_cast<std::size_t>(rows * cols)) {}

LinearMatrix LinearMatrix::constant(const Matrix& m) {
    LinearMatrix out(m.rows(), m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) out(i, j).constant = m(i, j);
    return out;
}

LinearMatrix LinearMatrix::symmetric(int first, Eigen::Index n) {
    LinearMatrix out(n, n);
    int v = first;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j; i < n; ++i, ++v) {
            out(i, j) = LinExpr::var(v);
            if (i != j) out(j, i) = LinExpr::var(v);
        }
    return out;
}

LinearMatrix LinearMatrix::general(int first, Eigen::Index rows, Eigen::Index cols) {
    LinearMatrix out(rows, cols);
    int v = first;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = LinExpr::var(v++);
    return out;
}

LinearMatrix LinearMatrix::transpose() const {
    LinearMatrix out(cols_, rows_);
    for (Eigen::Index j = 0; j < cols_; ++j)
        for (Eigen::Index i = 0; i < rows_; ++i) out(j, i) = (*this)(i, j);
    return out;
}

LinearMatrix& LinearMatrix::operator+=(const LinearMatrix& o) {
    if (o.rows_ != rows_ || o.cols_ != cols_) throw std::invalid_argument("LinearMatrix: size mismatch in +");
    for (std::size_t k = 0; k < e_.size(); ++k) e_[k] += o.e_[k];
    return *this;
}

LinearMatrix& LinearMatrix::operator-=(const LinearMatrix& o) {
    if (o.rows_ != rows_ || o.cols_ != cols_) throw std::invalid_argument("LinearMatrix: size mismatch in -");
    for (std::size_t k = 0; k < e_.size(); ++k) e_[k] -= o.e_[k];
    return *this;
}

LinearMatrix& LinearMatrix::operator*=(double s) {
    for (auto& e : e_) e *= s;
    return *this;
}

Matrix LinearMatrix::evaluate(const Vector& x) const {
    Matrix out(rows_, cols_);
    for (Eigen::Index j = 0; j < cols_; ++j)
        for (Eigen::Index i = 0; i < rows_; ++i) out(i, j) = (*this)(i, j).evaluate(x);
    return out;
}

std::vector<LinExpr> LinearMatrix::lower() const {
    if (rows_ != cols_) throw std::invalid_argument("LinearMatrix: lower() needs a square matrix");
    std::vector<LinExpr> out;
    out.reserve(static_cast<std::size_t>(rows_ * (rows_ + 1) / 2));
    for (Eigen::Index j = 0; j < cols_; ++j)
        for (Eigen::Index i = j; i < rows_; ++i) out.push_back((*this)(i, j));
    return out;
}

LinearMatrix operator+(LinearMatrix a, const LinearMatrix& b) { return a += b; }
LinearMatrix operator-(LinearMatrix a, const LinearMatrix& b) { return a -= b; }
LinearMatrix operator-(LinearMatrix a) { return a *= -1.0; }
LinearMatrix operator*(double s, LinearMatrix a) { return a *= s; }

LinearMatrix operator*(const Matrix& m, const LinearMatrix& a) {
    if (m.cols() != a.rows()) throw std::invalid_argument("LinearMatrix: size mismatch in product");
    LinearMatrix out(m.rows(), a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            const LinExpr& src = a(k, j);
            if (src.is_zero()) continue;
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                const double f = m(i, k);
                if (f == 0.0) continue;
                LinExpr& dst = out(i, j);
                dst.constant += f * src.constant;
                for (const auto& [v, c] : src.terms) dst.terms.emplace_back(v, f * c);
            }
        }
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j).compress();
    return out;
}

LinearMatrix operator*(const LinearMatrix& a, const Matrix& m) {
    return (m.transpose() * a.transpose()).transpose();
}

LinearMatrix symmetric_blocks(const std::vector<Eigen::Index>& sizes,
                              const std::vector<std::vector<LinearMatrix>>& parts) {
    Eigen::Index total = 0;
    std::vector<Eigen::Index> off;
    for (auto s : sizes) {
        off.push_back(total);
        total += s;
    }
    LinearMatrix out(total, total);
    for (std::size_t bi = 0; bi < parts.size(); ++bi) {
        for (std::size_t bj = 0; bj < parts[bi].size() && bj <= bi; ++bj) {
            const LinearMatrix& blk = parts[bi][bj];
            if (blk.rows() == 0 && blk.cols() == 0) continue;
            if (blk.rows() != sizes[bi] || blk.cols() != sizes[bj])
                throw std::invalid_argument("symmetric_blocks: block (" + std::to_string(bi) + "," +
                                            std::to_string(bj) + ") has the wrong size");
            for (Eigen::Index j = 0; j < blk.cols(); ++j)
                for (Eigen::Index i = 0; i < blk.rows(); ++i) {
                    out(off[bi] + i, off[bj] + j) = blk(i, j);
                    out(off[bj] + j, off[bi] + i) = blk(i, j);
                }
        }
    }
    return out;
}

}  // namespace sparselmi
