#include "sparselmi/model.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>

using namespace sparselmi;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

StochasticSystem two_state() {
    StochasticSystem s;
    s.a0 = Matrix::Identity(2, 2);
    s.b0 = Matrix::Ones(2, 1);
    s.channels.push_back({0.3, Matrix(Matrix::Identity(2, 2)), std::nullopt});
    s.sigma0 = Matrix::Identity(2, 2);
    return s;
}

bool mentions(const ModelError& e, const std::string& needle) {
    return std::any_of(e.violations().begin(), e.violations().end(),
                       [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("validate") {
    CHECK_NOTHROW(validate(two_state()));

    auto s = two_state();
    s.sigma0 << 1, 2, 2, 1;
    try {
        validate(s);
        FAIL("indefinite Sigma0 accepted");
    } catch (const ModelError& e) {
        CHECK(mentions(e, "Sigma0 not PSD"));
    }

    s = two_state();
    s.channels[0].state = Matrix::Identity(3, 3);
    CHECK_THROWS_AS(validate(s), ModelError);

    // Every violation is listed, not just the first.
    s = two_state();
    s.channels[0].intensity = -1;
    s.sigma0 = Matrix::Identity(3, 3);
    try {
        validate(s);
        FAIL("bad system accepted");
    } catch (const ModelError& e) {
        CHECK(e.violations().size() >= 2);
    }

    s = two_state();
    s.channels[0].state.reset();
    CHECK_THROWS_AS(validate(s), ModelError);
}

TEST_CASE("close_loop") {
    auto s = two_state();
    s.channels.push_back({0.5, std::nullopt, Matrix(Matrix::Ones(2, 1))});
    auto cl = close_loop(s, Matrix::Zero(1, 2));
    CHECK(cl.drift == s.a0);
    REQUIRE(cl.diffusion.size() == 2);
    CHECK(cl.diffusion[1].matrix.isZero(0));

    StochasticSystem sc;
    sc.a0 = scalar(0);
    sc.b0 = scalar(1);
    sc.sigma0 = scalar(1);
    sc.channels.push_back({1.0, scalar(0), scalar(1)});
    cl = close_loop(sc, scalar(-2));
    CHECK(cl.drift(0, 0) == -2.0);
    CHECK(cl.diffusion[0].matrix(0, 0) == -2.0);
    CHECK(cl.diffusion[0].intensity == 1.0);

    CHECK_THROWS_AS(close_loop(sc, Matrix::Zero(2, 1)), ModelError);
}

TEST_CASE("close_loop is affine in K") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const auto s = oracle::random_system(rng, TimeDomain::continuous);
        const Matrix k1 = oracle::gaussian(rng, s.inputs(), s.states());
        const Matrix k2 = oracle::gaussian(rng, s.inputs(), s.states());
        const auto c0 = close_loop(s, Matrix::Zero(s.inputs(), s.states()));
        const auto c1 = close_loop(s, k1), c2 = close_loop(s, k2), c12 = close_loop(s, k1 + k2);
        CHECK(((c12.drift - c0.drift) - (c1.drift - c0.drift) - (c2.drift - c0.drift)).norm() < 1e-12);
        for (std::size_t i = 0; i < s.channels.size(); ++i) {
            const Matrix lhs = c12.diffusion[i].matrix - c0.diffusion[i].matrix;
            const Matrix rhs = c1.diffusion[i].matrix - c0.diffusion[i].matrix + c2.diffusion[i].matrix -
                               c0.diffusion[i].matrix;
            CHECK((lhs - rhs).norm() < 1e-12);
        }
    }
}

TEST_CASE("system JSON round trip") {
    std::mt19937_64 rng(29);
    for (auto domain : {TimeDomain::continuous, TimeDomain::discrete}) {
        for (int trial = 0; trial < 10; ++trial) {
            const auto s = oracle::random_system(rng, domain);
            const std::string text = system_to_json(s);
            const auto back = system_from_json(text);
            CHECK(system_to_json(back) == text);
            CHECK(back.a0 == s.a0);
            CHECK(back.domain == domain);
        }
    }
}

TEST_CASE("system JSON errors") {
    CHECK_THROWS_AS(system_from_json("{"), ModelError);
    CHECK_THROWS_AS(system_from_json("[]"), ModelError);
    CHECK_THROWS_AS(system_from_json(R"({"time_domain":"continuous","A0":[[1]],"B0":[[1]],"Sigma0":[[1]],"extra":1})"),
                    ModelError);
    CHECK_THROWS_AS(system_from_json(R"({"time_domain":"sideways","A0":[[1]],"B0":[[1]],"Sigma0":[[1]]})"),
                    std::exception);
    CHECK_THROWS_AS(system_from_json(R"({"time_domain":"continuous","A0":[[1,2],[3]],"B0":[[1]],"Sigma0":[[1]]})"),
                    ModelError);
    const auto s = system_from_json(R"({"time_domain":"discrete","A0":[[0.5]],"B0":[[1]],"Sigma0":[[1]]})");
    CHECK(s.domain == TimeDomain::discrete);
    CHECK(s.channels.empty());
}
