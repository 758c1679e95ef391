#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "poiseuille/linear.hpp"

using namespace poiseuille;

namespace {

CVector gaussian(const Grid1D& g, double a = 1.0) {
    CVector w(g.size());
    for (int i = 0; i < g.size(); ++i) w[i] = a * std::exp(-0.5 * g.node(i) * g.node(i));
    clamp_boundary(w);
    return w;
}

double grad2(const CVector& w, double k, const Grid1D& g) { return k * k * norm2(w, g) + norm2(diff_y(w, g), g); }

}  // namespace

TEST_CASE("generator action") {
    const Grid1D g(10.0, 96);
    std::mt19937_64 rng(1);

    SUBCASE("k = 0 reduces to nu d_y^2") {
        const Generator gen(0.0, 0.03, g);
        const CVector w = oracle::random_bumps(g, rng);
        CVector want = 0.03 * (g.d2().cast<Complex>() * w);
        want[0] = want[g.size() - 1] = 0.0;
        CHECK(oracle::max_abs_diff(gen.apply(w), want) < 1e-12 * (1.0 + want.cwiseAbs().maxCoeff()));
    }
    SUBCASE("energy identity Re<Aw, w> = -nu ||grad_k w||^2") {
        for (double k : {0.0, 0.5, 3.0, 12.0}) {
            for (double nu : {1e-1, 1e-3}) {
                const Generator gen(k, nu, g);
                for (int s = 0; s < 5; ++s) {
                    const CVector w = oracle::random_bumps(g, rng);
                    const double lhs = inner(gen.apply(w), w, g).real();
                    const double rhs = -nu * grad2(w, k, g);
                    CHECK(std::abs(lhs - rhs) <= 1e-8 * std::abs(rhs));
                }
            }
        }
    }
    SUBCASE("linearity") {
        const Generator gen(2.0, 1e-2, g);
        const CVector a = oracle::random_bumps(g, rng), b = oracle::random_bumps(g, rng);
        const Complex ca(1.5, -0.5), cb(-0.25, 2.0);
        const CVector lhs = gen.apply(ca * a + cb * b);
        CHECK(oracle::max_abs_diff(lhs, ca * gen.apply(a) + cb * gen.apply(b)) < 1e-12 * lhs.cwiseAbs().maxCoeff());
    }
    SUBCASE("boundary rows vanish") {
        const Generator gen(1.0, 1e-2, g);
        const CVector v = gen.apply(oracle::random_bumps(g, rng));
        CHECK(v[0] == Complex(0.0));
        CHECK(v[g.size() - 1] == Complex(0.0));
    }
    SUBCASE("nu outside [0, 1) is rejected") {
        CHECK_THROWS(Generator(1.0, -1e-3, g));
        CHECK_THROWS(Generator(1.0, 1.0, g));
    }
}

TEST_CASE("implicit midpoint stepping") {
    SUBCASE("inviscid generator conserves ||w||") {
        const Grid1D g(10.0, 96);
        std::mt19937_64 rng(3);
        const Generator gen(1.5, 0.0, g);
        ModeState s{1.5, 0.0, 0.0, oracle::random_bumps(g, rng)};
        for (int n = 0; n < 50; ++n) {
            const double before = norm2(s.omega, g);
            s = step_linear(s, gen, 0.05);
            CHECK(std::abs(norm2(s.omega, g) / before - 1.0) < 1e-12);
        }
    }
    SUBCASE("heat kernel at k = 0") {
        const Grid1D g(10.0, 96);
        for (double nu : {0.1, 0.01}) {
            const Generator gen(0.0, nu, g);
            const double T = 1.0 / nu;
            const Trajectory tr = evolve({0.0, nu, 0.0, gaussian(g)}, gen, T, 0.01 / nu, 10);
            for (const auto& smp : tr.samples) {
                const double want = std::sqrt(M_PI) / std::sqrt(1.0 + 2.0 * nu * smp.t);
                CHECK(std::abs(norm2(smp.omega, g) / want - 1.0) < 1e-3);
            }
        }
    }
    SUBCASE("second order in dt") {
        const Grid1D g(10.0, 64);
        const Generator gen(1.0, 0.05, g);
        const ModeState s0{1.0, 0.05, 0.0, gaussian(g)};
        auto solve = [&](double dt) { return evolve(s0, gen, 1.0, dt, 1).final_state.omega; };
        const CVector u1 = solve(0.02), u2 = solve(0.01), u4 = solve(0.005);
        const double ratio = std::sqrt(norm2(u1 - u2, g) / norm2(u2 - u4, g));
        CHECK(ratio > 3.6);
        CHECK(ratio < 4.4);
    }
}

TEST_CASE("evolve bookkeeping") {
    const Grid1D g(10.0, 32);
    const Generator gen(2.0, 0.01, g);
    const ModeState s0{2.0, 0.01, 0.0, gaussian(g)};

    const Trajectory none = evolve(s0, gen, 0.0, 0.1, 1);
    CHECK(none.samples.size() == 1);
    CHECK(none.final_state.omega == s0.omega);

    for (int stride : {1, 3, 7}) {
        const double T = 2.0, dt = 0.05;
        const Trajectory tr = evolve(s0, gen, T, dt, stride);
        CHECK(tr.samples.size() == static_cast<std::size_t>(std::floor(T / (dt * stride) + 1e-9)) + 1);
    }

    int calls = 0;
    evolve(s0, gen, 1.0, 0.1, 2, [&](const ModeState&) { ++calls; });
    CHECK(calls == 6);

    CHECK_THROWS_AS(evolve({3.0, 0.01, 0.0, s0.omega}, gen, 1.0, 0.1, 1), ConfigError);
    CHECK_THROWS_AS(evolve(s0, gen, -1.0, 0.1, 1), ConfigError);
}

TEST_CASE("modes evolve independently") {
    const Grid1D g(10.0, 48);
    const Generator ga(1.0, 0.01, g), gb(4.0, 0.01, g);
    const ModeState a{1.0, 0.01, 0.0, gaussian(g)}, b{4.0, 0.01, 0.0, gaussian(g, 2.0)};
    const CVector a_first = evolve(a, ga, 1.0, 0.1, 1).final_state.omega;
    const CVector b_then = evolve(b, gb, 1.0, 0.1, 1).final_state.omega;
    const CVector b_first = evolve(b, gb, 1.0, 0.1, 1).final_state.omega;
    const CVector a_then = evolve(a, ga, 1.0, 0.1, 1).final_state.omega;
    CHECK(a_first == a_then);
    CHECK(b_first == b_then);
}

TEST_CASE("time step helpers") {
    CHECK(default_time_step(0.2, 1e-3, 10.0) == doctest::Approx(std::min(0.1 / 0.2, 0.05 / (0.1 + 1.0))));
    CHECK(default_time_step(0.0, 0.5, 0.0) == doctest::Approx(0.05));
    CHECK(rotation_time_step(80.0, 10.0) == doctest::Approx(0.5 / 8000.0));
    CHECK(std::isinf(rotation_time_step(0.0, 10.0)));
}
