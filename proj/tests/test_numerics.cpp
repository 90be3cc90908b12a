#include "sparselmi/numerics.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace sparselmi;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> nd;
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = nd(rng);
    return m;
}

// Random matrix with singular values in [1, 3].
Matrix well_conditioned(std::mt19937_64& rng, Eigen::Index n) {
    Eigen::HouseholderQR<Matrix> q1(random_matrix(rng, n, n)), q2(random_matrix(rng, n, n));
    std::uniform_real_distribution<double> ud(1.0, 3.0);
    Vector s(n);
    for (Eigen::Index i = 0; i < n; ++i) s(i) = ud(rng);
    return Matrix(q1.householderQ()) * s.asDiagonal() * Matrix(q2.householderQ());
}

std::vector<std::complex<double>> sorted(std::vector<std::complex<double>> v) {
    std::sort(v.begin(), v.end(), [](auto a, auto b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return v;
}

}  // namespace

TEST_CASE("kron small cases") {
    CHECK(kron(Matrix::Identity(2, 2), Matrix::Identity(2, 2)) == Matrix::Identity(4, 4));
    Matrix a(1, 1), b(1, 1);
    a << 2;
    b << 3;
    CHECK(kron(a, b)(0, 0) == 6.0);

    Matrix e00 = Matrix::Zero(2, 2), e01 = Matrix::Zero(2, 2);
    e00(0, 0) = 1;
    e01(0, 1) = 1;
    Matrix expect = Matrix::Zero(4, 4);
    expect(0, 1) = 1;
    CHECK(kron(e00, e01) == expect);
}

TEST_CASE("kron mixed product") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_matrix(rng, 2, 3), b = random_matrix(rng, 3, 2);
        const Matrix c = random_matrix(rng, 3, 4), d = random_matrix(rng, 2, 2);
        const Matrix lhs = kron(a, b) * kron(c, d);
        const Matrix rhs = kron(a * c, b * d);
        CHECK((lhs - rhs).norm() <= 1e-10 * rhs.norm());
    }
}

TEST_CASE("spectrum") {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = -1;
    d(1, 1) = 2;
    auto ev = sorted(spectrum(d).eigenvalues);
    CHECK(ev[0].real() == doctest::Approx(-1.0));
    CHECK(ev[1].real() == doctest::Approx(2.0));

    Matrix rot(2, 2);
    rot << 0, 1, -1, 0;
    ev = sorted(spectrum(rot).eigenvalues);
    CHECK(std::abs(ev[0] - std::complex<double>(0, -1)) < 1e-12);
    CHECK(std::abs(ev[1] - std::complex<double>(0, 1)) < 1e-12);
    CHECK(spectrum(rot).spectral_radius() == doctest::Approx(1.0));

    std::mt19937_64 rng(5);
    const Matrix t = well_conditioned(rng, 5);
    Vector diag(5);
    diag << 1, 2, 3, 4, 5;
    const Matrix j = t * diag.asDiagonal() * t.inverse();
    ev = sorted(spectrum(j).eigenvalues);
    for (int i = 0; i < 5; ++i) {
        CHECK(std::abs(ev[i].real() - (i + 1)) < 1e-8);
        CHECK(std::abs(ev[i].imag()) < 1e-8);
    }
}

TEST_CASE("spectrum is similarity invariant") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_matrix(rng, 6, 6);
        const Matrix t = well_conditioned(rng, 6);
        const auto e1 = sorted(spectrum(a).eigenvalues);
        const auto e2 = sorted(spectrum(t * a * t.inverse()).eigenvalues);
        REQUIRE(e1.size() == e2.size());
        for (std::size_t i = 0; i < e1.size(); ++i) CHECK(std::abs(e1[i] - e2[i]) < 1e-7);
    }
}

TEST_CASE("assert_negdef") {
    auto r = assert_negdef(-Matrix::Identity(3, 3), 0.0);
    CHECK(r.holds);
    CHECK(r.margin == doctest::Approx(1.0));

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = -1;
    CHECK_FALSE(assert_negdef(d, 1e-9).holds);

    r = assert_negdef(-1e-6 * Matrix::Identity(2, 2), 1e-7);
    CHECK(r.holds);
    CHECK(r.margin == doctest::Approx(1e-6));

    Matrix asym(2, 2);
    asym << -1, 1, 0, -1;
    CHECK_THROWS(assert_negdef(asym, 0.0));

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix m = symmetrize(random_matrix(rng, 4, 4));
        CHECK_FALSE((assert_negdef(m, 0.0).holds && assert_negdef(-m, 0.0).holds));
    }
}

TEST_CASE("solve_linear") {
    std::mt19937_64 rng(9);
    const Matrix b = random_matrix(rng, 4, 2);
    CHECK((solve_linear(Matrix::Identity(4, 4), b) - b).norm() == 0.0);
    CHECK((solve_linear(2.0 * Matrix::Identity(4, 4), b) - b / 2).norm() < 1e-15);

    const Matrix a = well_conditioned(rng, 7);
    const Matrix x0 = random_matrix(rng, 7, 3);
    CHECK((solve_linear(a, a * x0) - x0).cwiseAbs().maxCoeff() < 1e-9);

    Matrix sing = Matrix::Ones(3, 3);
    CHECK_THROWS_AS(solve_linear(sing, b.topRows(3)), NumericsError);
}

TEST_CASE("symmetric helpers") {
    Matrix m(2, 2);
    m << 4, 0, 0, 9;
    CHECK((sqrt_psd(m) - Matrix(Vector::Map(std::array{2.0, 3.0}.data(), 2).asDiagonal())).norm() < 1e-14);
    CHECK(max_eigenvalue_sym(m) == doctest::Approx(9));
    CHECK(min_eigenvalue_sym(m) == doctest::Approx(4));
    CHECK((inverse_spd(m) * m - Matrix::Identity(2, 2)).norm() < 1e-14);
    Matrix indef(2, 2);
    indef << 1, 2, 2, 1;
    CHECK_THROWS_AS(inverse_spd(indef), NumericsError);
}

TEST_CASE("text formats round trip") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, 123456789.0, 40.0}) CHECK(parse_double(format_double(v)) == v);
    CHECK(format_double(40.0) == "40");
    CHECK_THROWS(parse_double("abc"));

    std::mt19937_64 rng(1);
    const Matrix m = random_matrix(rng, 3, 4);
    const std::string text = format_matrix_csv(m);
    CHECK(parse_matrix_csv(text) == m);
    CHECK(format_matrix_csv(parse_matrix_csv(text)) == text);
}
