#include "sparselmi/msstab.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace sparselmi;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

StochasticSystem scalar_system(TimeDomain d, double a, double b, double sigma, double rho = 0.0) {
    StochasticSystem s;
    s.domain = d;
    s.a0 = scalar(a);
    s.b0 = scalar(b);
    if (sigma != 0.0) s.channels.push_back({sigma, scalar(1), std::nullopt});
    if (rho != 0.0) s.channels.push_back({rho, std::nullopt, scalar(1)});
    s.sigma0 = scalar(1);
    return s;
}

ClosedLoop scalar_loop(double f, double c) { return {scalar(f), {{c, scalar(1)}}}; }

// Draws random systems until K = 0 is mean-square stable with a usable margin.
StochasticSystem stable_random(std::mt19937_64& rng, TimeDomain d) {
    for (;;) {
        auto s = oracle::random_system(rng, d);
        if (d == TimeDomain::continuous) s.a0 -= 0.5 * Matrix::Identity(s.states(), s.states());
        const auto rep = ms_stable(s, Matrix::Zero(s.inputs(), s.states()));
        if (rep.stable && rep.margin > 0.05) return s;
    }
}

}  // namespace

TEST_CASE("generator closed forms") {
    CHECK(ms_generator(scalar_loop(-1, 1), TimeDomain::continuous)(0, 0) == doctest::Approx(-1.0));
    CHECK(ms_generator(scalar_loop(0.9, 0.3), TimeDomain::discrete)(0, 0) == doctest::Approx(0.9));

    ClosedLoop cl;
    cl.drift = Matrix::Zero(2, 2);
    cl.drift(0, 0) = -1;
    cl.drift(1, 1) = -2;
    auto ev = spectrum(ms_generator(cl, TimeDomain::continuous)).eigenvalues;
    std::vector<double> re;
    for (auto e : ev) re.push_back(e.real());
    std::sort(re.begin(), re.end());
    CHECK(re == std::vector<double>{-4, -3, -3, -2});
}

TEST_CASE("symmetric lift has the same dominant eigenvalue") {
    std::mt19937_64 rng(31);
    for (auto d : {TimeDomain::continuous, TimeDomain::discrete}) {
        for (int trial = 0; trial < 20; ++trial) {
            const auto s = oracle::random_system(rng, d);
            const auto cl = close_loop(s, oracle::gaussian(rng, s.inputs(), s.states(), 0.3));
            const auto full = spectrum(ms_generator(cl, d)), sym = spectrum(ms_generator_sym(cl, d));
            if (d == TimeDomain::continuous)
                CHECK(std::abs(full.max_real() - sym.max_real()) < 1e-8 * (1 + std::abs(full.max_real())));
            else
                CHECK(std::abs(full.spectral_radius() - sym.spectral_radius()) < 1e-8 * (1 + full.spectral_radius()));
        }
    }
}

TEST_CASE("ms_stable scalar examples") {
    auto rep = ms_stable(scalar_system(TimeDomain::continuous, -1, 0, 1), scalar(0));
    CHECK(rep.stable);
    CHECK(rep.margin == doctest::Approx(1.0));
    CHECK_FALSE(ms_stable(scalar_system(TimeDomain::continuous, -1, 0, 1.5), scalar(0)).stable);
    rep = ms_stable(scalar_system(TimeDomain::discrete, 0.9, 0, 0.3), scalar(0));
    CHECK(rep.stable);
    CHECK(rep.margin == doctest::Approx(0.1));
}

TEST_CASE("ms_stable is similarity invariant") {
    std::mt19937_64 rng(37);
    for (auto d : {TimeDomain::continuous, TimeDomain::discrete}) {
        for (int trial = 0; trial < 20; ++trial) {
            const auto s = oracle::random_system(rng, d);
            const Matrix k = oracle::gaussian(rng, s.inputs(), s.states(), 0.3);
            Matrix t = oracle::gaussian(rng, s.states(), s.states());
            t += 3.0 * Matrix::Identity(s.states(), s.states());
            const Matrix ti = t.inverse();
            auto st = s;
            st.a0 = t * s.a0 * ti;
            st.b0 = t * s.b0;
            for (auto& ch : st.channels) {
                if (ch.state) ch.state = Matrix(t * *ch.state * ti);
                if (ch.input) ch.input = Matrix(t * *ch.input);
            }
            st.sigma0 = symmetrize(t * s.sigma0 * t.transpose());
            const auto r1 = ms_stable(s, k), r2 = ms_stable(st, Matrix(k * ti));
            if (std::abs(r1.margin) > 1e-6) CHECK(r1.stable == r2.stable);
            CHECK(std::abs(r1.margin - r2.margin) < 1e-7 * (1 + std::abs(r1.margin)));
        }
    }
}

TEST_CASE("lqrm_cost closed forms") {
    const Matrix one = scalar(1);
    CHECK(lqrm_cost(scalar_system(TimeDomain::continuous, -1, 0, 0), scalar(0), one, one) == doctest::Approx(0.5));
    CHECK(lqrm_cost(scalar_system(TimeDomain::continuous, -1, 0, 1), scalar(0), one, one) == doctest::Approx(1.0));
    CHECK(std::isinf(lqrm_cost(scalar_system(TimeDomain::continuous, 1, 1, 0), scalar(0), one, one)));
    // Discrete: X = 1 / (1 - a^2 - s^2).
    CHECK(lqrm_cost(scalar_system(TimeDomain::discrete, 0.9, 0, 0.3), scalar(0), one, one) ==
          doctest::Approx(10.0));
    CHECK_THROWS_AS(lqrm_cost(scalar_system(TimeDomain::continuous, 0, 0, 0), scalar(0), one, one), NumericsError);
}

TEST_CASE("lqrm_cost agrees with direct moment propagation") {
    std::mt19937_64 rng(41);
    for (auto d : {TimeDomain::continuous, TimeDomain::discrete}) {
        for (int trial = 0; trial < 15; ++trial) {
            const auto s = stable_random(rng, d);
            const Eigen::Index n = s.states(), m = s.inputs();
            const Matrix k = Matrix::Zero(m, n);
            const Matrix q = Matrix::Identity(n, n), r = Matrix::Identity(m, m);
            const double margin = ms_stable(s, k).margin;
            const double cost = lqrm_cost(s, k, q, r);
            const auto cl = close_loop(s, k);
            oracle::MomentRun run;
            if (d == TimeDomain::continuous) {
                const double horizon = std::min(400.0, 40.0 / margin);
                const double fnorm = cl.drift.norm() + 1;
                run = oracle::moments_ct(cl, s.sigma0, q, horizon, std::min(0.01, 0.2 / fnorm));
            } else {
                run = oracle::moments_dt(cl, s.sigma0, q, std::lround(std::min(20000.0, 60.0 / margin)));
            }
            CHECK(cost >= 0.0);
            CHECK(std::abs(cost - run.cost) <= 1e-5 * (1 + cost));
        }
    }
}

TEST_CASE("lqrm_cost is zero only for zero initial moment") {
    auto s = scalar_system(TimeDomain::continuous, -1, 0, 0.5);
    s.sigma0 = scalar(0);
    CHECK(lqrm_cost(s, scalar(0), scalar(1), scalar(1)) == 0.0);
    s.sigma0 = scalar(1e-3);
    CHECK(lqrm_cost(s, scalar(0), scalar(1), scalar(1)) > 0.0);
}

TEST_CASE("policy iteration scalar Riccati") {
    const Matrix one = scalar(1);
    auto pi = lqrm_policy_iteration(scalar_system(TimeDomain::continuous, 0, 1, 0), one, one, scalar(-3));
    CHECK(pi.k(0, 0) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(pi.cost == doctest::Approx(1.0).epsilon(1e-9));

    pi = lqrm_policy_iteration(scalar_system(TimeDomain::continuous, 1, 1, 0), one, one, scalar(-5));
    CHECK(pi.k(0, 0) == doctest::Approx(-(1 + std::sqrt(2.0))).epsilon(1e-9));
    CHECK(pi.cost == doctest::Approx(1 + std::sqrt(2.0)).epsilon(1e-9));

    const auto scaled =
        lqrm_policy_iteration(scalar_system(TimeDomain::continuous, 1, 1, 0), scalar(7), scalar(7), scalar(-5));
    CHECK(scaled.k(0, 0) == doctest::Approx(pi.k(0, 0)).epsilon(1e-9));
    CHECK(scaled.cost == doctest::Approx(7 * pi.cost).epsilon(1e-9));

    // Discrete scalar Riccati: x = q + a^2 x - (abx)^2 / (r + b^2 x).
    const double a = 0.5, b = 1.0;
    const double x = (a * a + std::sqrt(a * a * a * a + 4)) / 2.0;  // root of x^2 - a^2 x - 1 = 0
    pi = lqrm_policy_iteration(scalar_system(TimeDomain::discrete, a, b, 0), one, one, scalar(0));
    CHECK(pi.cost == doctest::Approx(x).epsilon(1e-9));
    CHECK(pi.k(0, 0) == doctest::Approx(-a * b * x / (1 + b * b * x)).epsilon(1e-9));

    CHECK_THROWS(lqrm_policy_iteration(scalar_system(TimeDomain::continuous, 1, 1, 0), one, one, scalar(0)));
}

TEST_CASE("policy iteration is monotone and locally optimal") {
    std::mt19937_64 rng(43);
    for (auto d : {TimeDomain::continuous, TimeDomain::discrete}) {
        for (int trial = 0; trial < 8; ++trial) {
            const auto s = stable_random(rng, d);
            const Eigen::Index n = s.states(), m = s.inputs();
            const Matrix q = Matrix::Identity(n, n), r = Matrix::Identity(m, m);
            const auto pi = lqrm_policy_iteration(s, q, r, Matrix::Zero(m, n));
            for (std::size_t i = 1; i < pi.history.size(); ++i) CHECK(pi.history[i] <= pi.history[i - 1] + 1e-9);
            int checked = 0;
            while (checked < 20) {
                const Matrix k = pi.k + oracle::gaussian(rng, m, n, 0.05);
                const double c = lqrm_cost(s, k, q, r);
                if (!std::isfinite(c)) continue;
                CHECK(pi.cost <= c + 1e-9 * (1 + c));
                ++checked;
            }
        }
    }
}
