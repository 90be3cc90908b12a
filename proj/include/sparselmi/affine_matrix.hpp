#pragma once

// Matrices whose entries are affine in the decision variables. Just enough
// algebra to write block LMIs the way they are usually printed.

#include "sparselmi/conic.hpp"

namespace sparselmi {

class LinearMatrix {
public:
    LinearMatrix() = default;
    LinearMatrix(Eigen::Index rows, Eigen::Index cols);

    static LinearMatrix constant(const Matrix& m);
    static LinearMatrix zero(Eigen::Index rows, Eigen::Index cols) { return {rows, cols}; }
    /// Symmetric n x n matrix over n(n+1)/2 variables starting at `first`,
    /// lower triangle column-major.
    static LinearMatrix symmetric(int first, Eigen::Index n);
    /// General rows x cols matrix over variables starting at `first`, row-major.
    static LinearMatrix general(int first, Eigen::Index rows, Eigen::Index cols);

    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }
    LinExpr& operator()(Eigen::Index i, Eigen::Index j) { return e_[j * rows_ + i]; }
    const LinExpr& operator()(Eigen::Index i, Eigen::Index j) const { return e_[j * rows_ + i]; }

    LinearMatrix transpose() const;
    LinearMatrix& operator+=(const LinearMatrix& o);
    LinearMatrix& operator-=(const LinearMatrix& o);
    LinearMatrix& operator*=(double s);
    Matrix evaluate(const Vector& x) const;

    /// Lower triangle in svec order, ready for ProgramBuilder::add_psd.
    std::vector<LinExpr> lower() const;

private:
    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
    std::vector<LinExpr> e_;
};

LinearMatrix operator+(LinearMatrix a, const LinearMatrix& b);
LinearMatrix operator-(LinearMatrix a, const LinearMatrix& b);
LinearMatrix operator-(LinearMatrix a);
LinearMatrix operator*(double s, LinearMatrix a);
LinearMatrix operator*(const Matrix& m, const LinearMatrix& a);
LinearMatrix operator*(const LinearMatrix& a, const Matrix& m);

/// Symmetric block matrix from its lower blocks. `parts[i][j]` for j <= i;
/// empty (0x0) entries are zero blocks of the size implied by `sizes`.
LinearMatrix symmetric_blocks(const std::vector<Eigen::Index>& sizes,
                              const std::vector<std::vector<LinearMatrix>>& parts);

}  // namespace sparselmi
