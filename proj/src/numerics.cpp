#include "sparselmi/numerics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sparselmi {

double Spectrum::max_real() const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& ev : eigenvalues) best = std::max(best, ev.real());
    return best;
}

double Spectrum::spectral_radius() const {
    double best = 0.0;
    for (const auto& ev : eigenvalues) best = std::max(best, std::abs(ev));
    return best;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

Spectrum spectrum(const Matrix& a) {
    if (a.rows() != a.cols()) throw NumericsError("spectrum: matrix is not square");
    if (!a.allFinite()) throw NumericsError("spectrum: matrix has non-finite entries");
    Spectrum out;
    if (a.rows() == 0) return out;
    Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw NumericsError("spectrum: QR iteration did not converge (n = " +
                            std::to_string(a.rows()) + ")");
    }
    const auto& values = solver.eigenvalues();
    out.eigenvalues.assign(values.data(), values.data() + values.size());
    return out;
}

namespace {

void require_symmetric(const Matrix& m, const char* who) {
    if (m.rows() != m.cols()) throw NumericsError(std::string(who) + ": matrix is not square");
    const double scale = m.cwiseAbs().maxCoeff();
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(scale, 1e-300) && asym > 0.0) {
        std::ostringstream msg;
        msg << who << ": matrix asymmetric beyond tolerance (|M - M^T| = " << asym
            << ", |M| = " << scale << ")";
        throw NumericsError(msg.str());
    }
}

}  // namespace

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double max_eigenvalue_sym(const Matrix& m) {
    if (m.rows() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(m), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericsError("symmetric eigensolver failed");
    return solver.eigenvalues().maxCoeff();
}

double min_eigenvalue_sym(const Matrix& m) {
    if (m.rows() == 0) return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(m), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericsError("symmetric eigensolver failed");
    return solver.eigenvalues().minCoeff();
}

Definiteness assert_negdef(const Matrix& m, double eps) {
    if (eps < 0.0) throw NumericsError("assert_negdef: eps must be nonnegative");
    require_symmetric(m, "assert_negdef");
    const double lmax = max_eigenvalue_sym(m);
    return {lmax <= -eps, -lmax};
}

Matrix solve_linear(const Matrix& a, const Matrix& b) {
    if (a.rows() != a.cols()) throw NumericsError("solve_linear: matrix is not square");
    if (a.rows() != b.rows()) throw NumericsError("solve_linear: dimension mismatch");
    Eigen::PartialPivLU<Matrix> lu(a);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-12)) {
        std::ostringstream msg;
        msg << "solve_linear: matrix singular or ill-conditioned (condition estimate "
            << (rcond > 0 ? 1.0 / rcond : std::numeric_limits<double>::infinity()) << ")";
        throw NumericsError(msg.str());
    }
    Matrix x = lu.solve(b);
    // One step of refinement keeps the residual at working precision.
    Matrix r = b - a * x;
    x += lu.solve(r);
    return x;
}

Matrix sqrt_psd(const Matrix& m) {
    require_symmetric(m, "sqrt_psd");
    if (m.rows() == 0) return m;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(m));
    Vector ev = solver.eigenvalues();
    const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    if (ev.minCoeff() < -1e-10 * scale) throw NumericsError("sqrt_psd: matrix is not PSD");
    ev = ev.cwiseMax(0.0).cwiseSqrt();
    const Matrix& v = solver.eigenvectors();
    return symmetrize(v * ev.asDiagonal() * v.transpose());
}

Matrix inverse_spd(const Matrix& m, double max_condition) {
    require_symmetric(m, "inverse_spd");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(m), Eigen::EigenvaluesOnly);
    const double lo = solver.eigenvalues().minCoeff();
    const double hi = solver.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > max_condition) {
        std::ostringstream msg;
        msg << "matrix is not positive definite or is ill-conditioned (eigenvalues in [" << lo
            << ", " << hi << "])";
        throw NumericsError(msg.str());
    }
    Eigen::LLT<Matrix> llt(symmetrize(m));
    return symmetrize(llt.solve(Matrix::Identity(m.rows(), m.cols())));
}

std::string format_double(double v) {
    if (v == 0.0) return "0";  // folds -0 as well
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw NumericsError("not a number: '" + std::string(text) + "'");
    }
    return v;
}

std::string format_matrix_csv(const Matrix& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

Matrix parse_matrix_csv(std::string_view text) {
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    while (!text.empty()) {
        auto eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (true) {
            auto comma = line.find(',', start);
            auto field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
            try {
                row.push_back(parse_double(field));
            } catch (const NumericsError& e) {
                throw NumericsError("matrix csv line " + std::to_string(line_no) + ": " + e.what());
            }
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw NumericsError("matrix csv line " + std::to_string(line_no) + ": ragged row (" +
                                std::to_string(row.size()) + " fields, expected " +
                                std::to_string(rows.front().size()) + ")");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw NumericsError("matrix csv: no rows");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    if (!m.allFinite()) throw NumericsError("matrix csv: non-finite entry");
    return m;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
    return parse_matrix_csv(read_text_file(path));
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
    write_text_file(path, format_matrix_csv(m));
}

}  // namespace sparselmi
