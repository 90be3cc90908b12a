#include "sparselmi/lmi.hpp"
#include "sparselmi/msstab.hpp"
#include "sparselmi/powergrid.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace sparselmi;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

bool has_block(const LmiHandle& h, int side) {
    return std::find(h.psd_dims.begin(), h.psd_dims.end(), side) != h.psd_dims.end();
}

StochasticSystem with_channels(TimeDomain d, int n, int m, int state_only, int input_only, int coupled) {
    StochasticSystem s;
    s.domain = d;
    s.a0 = Matrix::Identity(n, n) * (d == TimeDomain::discrete ? 0.5 : -1.0);
    s.b0 = Matrix::Ones(n, m);
    for (int i = 0; i < state_only; ++i) s.channels.push_back({0.1, Matrix(Matrix::Identity(n, n)), std::nullopt});
    for (int i = 0; i < input_only; ++i) s.channels.push_back({0.1, std::nullopt, Matrix(Matrix::Ones(n, m))});
    for (int i = 0; i < coupled; ++i)
        s.channels.push_back({0.1, Matrix(Matrix::Identity(n, n)), Matrix(Matrix::Ones(n, m))});
    s.sigma0 = Matrix::Identity(n, n);
    return s;
}

StochasticSystem fourbus() {
    return build_swing_system(read_network(std::string(SPARSELMI_SOURCE_DIR) + "/data/fourbus.net"));
}

}  // namespace

TEST_CASE("block dimensions") {
    auto s = with_channels(TimeDomain::continuous, 2, 1, 1, 1, 0);
    auto h = build_stability_lmi_ct(s, 1e-6);
    CHECK(has_block(h, 6));
    CHECK(has_block(h, 2));
    CHECK(h.main_block.rows() == 6);

    const auto fb = fourbus();
    REQUIRE(fb.states() == 6);
    REQUIRE(fb.inputs() == 3);
    REQUIRE(fb.channels.size() == 3);
    CHECK(build_stability_lmi_ct(fb, 1e-6).main_block.rows() == 24);
    const Matrix q6 = Matrix::Identity(6, 6), r3 = Matrix::Identity(3, 3);
    CHECK(build_lqrm_sdp_ct(fb, q6, r3, 1e-6).main_block.rows() == 33);

    s = with_channels(TimeDomain::discrete, 1, 1, 1, 0, 0);
    CHECK(build_stability_lmi_dt(s, 1e-6).main_block.rows() == 3);
    CHECK(build_lqrm_sdp_dt(s, scalar(1), scalar(1), 1e-6).main_block.rows() == 5);

    for (int q = 0; q <= 3; ++q) {
        for (auto d : {TimeDomain::continuous, TimeDomain::discrete}) {
            const int n = 3, m = 2;
            s = with_channels(d, n, m, q > 0, q > 1, q > 2);
            const int base = d == TimeDomain::continuous ? 1 : 2;
            CHECK(build_stability_lmi(s, 1e-6).main_block.rows() == n * (base + q));
            CHECK(build_lqrm_sdp(s, Matrix::Identity(n, n), Matrix::Identity(m, m), 1e-6).main_block.rows() ==
                  n * (base + q) + m + n);
        }
    }

    CHECK_THROWS(build_stability_lmi_ct(with_channels(TimeDomain::discrete, 1, 1, 0, 0, 0), 1e-6));
    CHECK_THROWS(build_stability_lmi_dt(with_channels(TimeDomain::continuous, 1, 1, 0, 0, 0), 1e-6));
    CHECK_THROWS(build_lqrm_sdp_ct(fb, -q6, r3, 1e-6));
}

TEST_CASE("zero channels reduce to the Lyapunov LMI") {
    StochasticSystem s = with_channels(TimeDomain::continuous, 2, 1, 0, 0, 0);
    s.a0 << 0, 1, -2, -3;
    s.b0 << 0, 1;
    const auto h = build_stability_lmi_ct(s, 1e-6);
    const auto prog = h.program();
    Vector x = Vector::Zero(prog.num_vars);
    x(h.p.first) = 1.0;
    x(h.p.first + 1) = 0.2;
    x(h.p.first + 2) = 2.0;
    x(h.y.first) = 0.3;
    x(h.y.first + 1) = -0.7;
    const Matrix p = h.P(x), y = h.Y(x);
    const Matrix lyap = s.a0 * p + p * s.a0.transpose() + s.b0 * y + y.transpose() * s.b0.transpose();
    CHECK((h.main_block.evaluate(x) + lyap).norm() < 1e-12);
}

TEST_CASE("main block matches the direct formula") {
    std::mt19937_64 rng(47);
    for (auto d : {TimeDomain::continuous, TimeDomain::discrete}) {
        for (int trial = 0; trial < 10; ++trial) {
            const auto s = oracle::random_system(rng, d);
            const Eigen::Index n = s.states(), m = s.inputs();
            const auto h = build_stability_lmi(s, 1e-6);
            Vector x = Vector::Zero(h.program().num_vars);
            const Matrix l = oracle::gaussian(rng, n, n);
            const Matrix p = l * l.transpose() + Matrix::Identity(n, n);
            for (Eigen::Index j = 0, idx = 0; j < n; ++j)
                for (Eigen::Index i = j; i < n; ++i) x(h.p.first + idx++) = p(i, j);
            const Matrix y = oracle::gaussian(rng, m, n);
            for (Eigen::Index i = 0; i < m; ++i)
                for (Eigen::Index j = 0; j < n; ++j) x(h.y.first + i * n + j) = y(i, j);
            REQUIRE((h.P(x) - p).norm() < 1e-12);
            REQUIRE((h.Y(x) - y).norm() < 1e-12);

            const Eigen::Index q = static_cast<Eigen::Index>(s.channels.size());
            Matrix z = Matrix::Zero(n, n * q);
            for (Eigen::Index i = 0; i < q; ++i) {
                const auto& ch = s.channels[i];
                Matrix col = Matrix::Zero(n, n);
                if (d == TimeDomain::continuous) {
                    if (ch.state) col += p * ch.state->transpose();
                    if (ch.input) col += y.transpose() * ch.input->transpose();
                } else {
                    if (ch.state) col += *ch.state * p;
                    if (ch.input) col += *ch.input * y;
                }
                z.middleCols(i * n, n) = ch.intensity * col;
            }
            Matrix big;
            if (d == TimeDomain::continuous) {
                big = Matrix::Zero(n * (1 + q), n * (1 + q));
                big.topLeftCorner(n, n) = s.a0 * p + p * s.a0.transpose() + s.b0 * y + y.transpose() * s.b0.transpose();
                big.topRightCorner(n, n * q) = z;
                big.bottomLeftCorner(n * q, n) = z.transpose();
                for (Eigen::Index i = 0; i < q; ++i) big.block(n * (1 + i), n * (1 + i), n, n) = -p;
                big = -big;
            } else {
                big = Matrix::Zero(n * (2 + q), n * (2 + q));
                const Matrix f = s.a0 * p + s.b0 * y;
                // Certificate X = P^{-1} on the primal side: off-diagonal blocks are F P and D_i P.
                big.topLeftCorner(n, n) = p;
                big.block(n, 0, n, n) = f;
                big.block(0, n, n, n) = f.transpose();
                big.block(n, n, n, n) = p;
                for (Eigen::Index i = 0; i < q; ++i) {
                    big.block(n * (2 + i), 0, n, n) = z.middleCols(i * n, n);
                    big.block(0, n * (2 + i), n, n) = z.middleCols(i * n, n).transpose();
                }
                for (Eigen::Index i = 0; i < q; ++i) big.block(n * (2 + i), n * (2 + i), n, n) = p;
            }
            CHECK((h.main_block.evaluate(x) - big).norm() <= 1e-10 * (1 + big.norm()));
        }
    }
}

TEST_CASE("regularizer values") {
    Matrix y(2, 2);
    y << 1, -2, 0, 3;
    CHECK(regularizer_value({RegKind::row_norm, 1.0, {}}, y) == doctest::Approx(5.0));
    CHECK(regularizer_value({RegKind::row_group_lasso, 1.0, {}}, y) == doctest::Approx(std::sqrt(5.0) + 3));
    CHECK(regularizer_value({RegKind::row_sparse_group_lasso, 1.0, 0.5}, y) ==
          doctest::Approx(4.5 + 0.5 * std::sqrt(5.0)));
    CHECK(regularizer_value({RegKind::col_norm, 1.0, {}}, y) == doctest::Approx(1 + 3));
    CHECK(regularizer_value({RegKind::col_group_lasso, 1.0, {}}, y) == doctest::Approx(1 + std::sqrt(13.0)));

    CHECK(parse_reg_kind("row-sgl") == RegKind::row_sparse_group_lasso);
    CHECK(std::string(to_string(RegKind::col_norm)) == "col-norm");
    CHECK_THROWS(parse_reg_kind("diagonal"));
    CHECK_THROWS(RegularizerSpec{RegKind::row_norm, -1.0, {}}.check());
    CHECK_THROWS(RegularizerSpec{RegKind::row_sparse_group_lasso, 1.0, {}}.check());
    CHECK_THROWS(RegularizerSpec{RegKind::row_sparse_group_lasso, 1.0, 1.5}.check());
}

TEST_CASE("row-norm epigraph size") {
    StochasticSystem s = with_channels(TimeDomain::continuous, 2, 1, 0, 0, 0);
    auto h = build_stability_lmi_ct(s, 1e-6);
    const auto before = h.program();
    h = add_regularizer(std::move(h), {RegKind::row_norm, 1.0, {}});
    const auto after = h.program();
    CHECK(after.num_vars == before.num_vars + 1);
    int nonneg_before = 0, nonneg_after = 0;
    for (const auto& b : before.blocks)
        if (b.kind == ConeKind::nonneg) nonneg_before += b.dim;
    for (const auto& b : after.blocks)
        if (b.kind == ConeKind::nonneg) nonneg_after += b.dim;
    CHECK(nonneg_after - nonneg_before == 4);

    // gamma = 0 leaves the objective untouched.
    auto lq = build_lqrm_sdp_ct(s, Matrix::Identity(2, 2), scalar(1), 1e-6);
    const Vector c0 = lq.program().c;
    const auto lq0 = add_regularizer(lq, {RegKind::row_norm, 0.0, {}});
    const Vector c1 = lq0.program().c;
    CHECK(c1.head(c0.size()) == c0);
    CHECK(c1.tail(c1.size() - c0.size()).isZero(0));
}

TEST_CASE("zero column constraints") {
    const auto fb = fourbus();
    auto h = build_lqrm_sdp_ct(fb, Matrix::Identity(6, 6), Matrix::Identity(3, 3), 1e-6);
    const auto rows0 = h.program().a.rows();
    CHECK(add_zero_column_constraints(h, {}).program().a.rows() == rows0);
    CHECK(add_zero_column_constraints(h, {3, 4, 5}).program().a.rows() == rows0 + 9);
    CHECK_THROWS(add_zero_column_constraints(h, {6}));

    // All columns pinned: feasible exactly when the open loop is stable.
    StochasticSystem st = with_channels(TimeDomain::continuous, 2, 1, 1, 0, 0);
    auto hs = add_zero_column_constraints(build_stability_lmi(st, 1e-6, 1.0), {0, 1});
    CHECK(solve(hs.program()).status == SolveStatus::optimal);
    st.a0 = Matrix::Identity(2, 2);
    hs = add_zero_column_constraints(build_stability_lmi(st, 1e-6, 1.0), {0, 1});
    CHECK(solve(hs.program()).status == SolveStatus::infeasible);
}

TEST_CASE("scalar LQRm bounds") {
    // No channels: the SDP value equals the Riccati cost.
    StochasticSystem s;
    s.domain = TimeDomain::discrete;
    s.a0 = scalar(0.5);
    s.b0 = scalar(1);
    s.sigma0 = scalar(1);
    auto h = build_lqrm_sdp_dt(s, scalar(1), scalar(1), 1e-9);
    auto sol = solve(h.program());
    REQUIRE(sol.status == SolveStatus::optimal);
    const double x = (0.25 + std::sqrt(0.0625 + 4)) / 2;
    CHECK(std::abs(*h.kappa_value(sol.x) - x) <= 1e-4);

    s.domain = TimeDomain::continuous;
    s.a0 = scalar(1);
    h = build_lqrm_sdp_ct(s, scalar(1), scalar(1), 1e-9);
    sol = solve(h.program());
    REQUIRE(sol.status == SolveStatus::optimal);
    CHECK(std::abs(*h.kappa_value(sol.x) - (1 + std::sqrt(2.0))) <= 1e-4);

    for (auto d : {TimeDomain::continuous, TimeDomain::discrete}) {
        s.domain = d;
        s.a0 = scalar(d == TimeDomain::continuous ? 1.0 : 1.2);
        s.sigma0 = scalar(0);
        h = build_lqrm_sdp(s, scalar(1), scalar(1), 1e-6);
        sol = solve(h.program());
        REQUIRE(sol.status == SolveStatus::optimal);
        CHECK(std::abs(*h.kappa_value(sol.x)) <= 1e-6);
        s.sigma0 = scalar(1);
    }
}

TEST_CASE("open-loop stable discrete scalar is feasible") {
    StochasticSystem s;
    s.domain = TimeDomain::discrete;
    s.a0 = scalar(0.9);
    s.b0 = scalar(0);
    s.channels.push_back({0.3, scalar(1), std::nullopt});
    s.sigma0 = scalar(1);
    CHECK(solve(build_stability_lmi_dt(s, 1e-6, 1.0).program()).status == SolveStatus::optimal);
    s.a0 = scalar(1.0);
    CHECK(solve(build_stability_lmi_dt(s, 1e-6, 1.0).program()).status == SolveStatus::infeasible);
}

TEST_CASE("stability LMI solutions pass the oracle") {
    std::mt19937_64 rng(53);
    int solved = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto d = trial % 2 ? TimeDomain::discrete : TimeDomain::continuous;
        const auto s = oracle::random_system(rng, d);
        const double eps = default_eps(s);
        const auto h = build_stability_lmi(s, eps, 1.0);
        const auto sol = solve(h.program());
        if (sol.status != SolveStatus::optimal) continue;
        ++solved;
        const Matrix k = h.Y(sol.x) * inverse_spd(h.P(sol.x));
        CHECK(ms_stable(s, k).stable);
        // The assembled block agrees with the solver's claim.
        const Matrix blk = symmetrize(h.main_block.evaluate(sol.x));
        CHECK(assert_negdef(-blk, 0.0).holds);
    }
    CHECK(solved >= 80);
}

TEST_CASE("objective scaling keeps the argmin") {
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = oracle::random_system(rng, TimeDomain::continuous);
        const Eigen::Index n = s.states(), m = s.inputs();
        auto h = add_regularizer(build_lqrm_sdp(s, Matrix::Identity(n, n), Matrix::Identity(m, m), default_eps(s)),
                                 {RegKind::row_group_lasso, 0.3, {}});
        auto p = h.program();
        const auto s1 = solve(p);
        if (s1.status != SolveStatus::optimal) continue;
        p.c *= 4.0;
        const auto s2 = solve(p);
        REQUIRE(s2.status == SolveStatus::optimal);
        CHECK(s2.objective == doctest::Approx(4 * s1.objective).epsilon(1e-5));
        const Matrix y1 = h.Y(s1.x), y2 = h.Y(s2.x);
        CHECK((y1 - y2).cwiseAbs().maxCoeff() <= 1e-3 * (1 + y1.cwiseAbs().maxCoeff()));
    }
}
