#pragma once

// Dense real matrix kernel shared by every other module.

#include <Eigen/Dense>

#include <complex>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sparselmi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class NumericsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Spectrum {
    std::vector<std::complex<double>> eigenvalues;

    double max_real() const;
    double spectral_radius() const;
};

/// Kronecker product: block (i,j) of the result is a(i,j) * b.
Matrix kron(const Matrix& a, const Matrix& b);

/// Eigenvalues of a general square matrix via Hessenberg reduction and
/// shifted QR on the real Schur form. Throws NumericsError on non-convergence.
Spectrum spectrum(const Matrix& a);

struct Definiteness {
    bool holds = false;
    double margin = 0.0;  // -lambda_max
};

/// Tests M <= -eps*I. M must be symmetric to 1e-12 * ||M||.
Definiteness assert_negdef(const Matrix& m, double eps);

/// Solves a x = b by LU with partial pivoting. Throws when the reciprocal
/// condition estimate is below 1e-12 or the residual check fails.
Matrix solve_linear(const Matrix& a, const Matrix& b);

Matrix symmetrize(const Matrix& m);
double max_eigenvalue_sym(const Matrix& m);
double min_eigenvalue_sym(const Matrix& m);

/// Symmetric PSD square root; negative eigenvalues above -1e-12*||M|| are clipped.
Matrix sqrt_psd(const Matrix& m);

/// Inverse of a symmetric positive definite matrix by Cholesky. Throws when
/// the matrix is not PD or its condition exceeds max_condition.
Matrix inverse_spd(const Matrix& m, double max_condition = 1e10);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

// Matrix CSV: one row per line, comma separated, no header.
std::string format_matrix_csv(const Matrix& m);
Matrix parse_matrix_csv(std::string_view text);
Matrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace sparselmi
