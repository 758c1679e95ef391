#include <doctest.h>

#include <cmath>
#include <random>

#include "poiseuille/errors.hpp"
#include "poiseuille/multipliers.hpp"

using namespace poiseuille;

namespace {

// M' = c J^2 lambda u^2 / <u>^4 M with u = c lambda t, integrated by classical RK4.
double rk4_weight(double lambda, double c, double J, double t, int steps) {
    auto rhs = [&](double s, double m) {
        const double u = c * lambda * s;
        const double b2 = 1.0 + u * u;
        return c * J * J * lambda * u * u / (b2 * b2) * m;
    };
    double m = 1.0, s = 0.0;
    const double h = t / steps;
    for (int i = 0; i < steps; ++i) {
        const double k1 = rhs(s, m);
        const double k2 = rhs(s + 0.5 * h, m + 0.5 * h * k1);
        const double k3 = rhs(s + 0.5 * h, m + 0.5 * h * k2);
        const double k4 = rhs(s + h, m + h * k3);
        m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s += h;
    }
    return m;
}

}  // namespace

TEST_CASE("multiplier tables") {
    SUBCASE("branch point nu = 1e-3, k = 10") {
        const MultiplierSet m = eval_multipliers(10.0, 1e-3);
        CHECK(m.alpha == doctest::Approx(1e-2).epsilon(1e-12));
        CHECK(m.beta == doctest::Approx(1e-1).epsilon(1e-12));
        CHECK(m.gamma == doctest::Approx(1e2).epsilon(1e-12));
        CHECK(m.lambda == doctest::Approx(1e-1).epsilon(1e-12));
    }
    SUBCASE("k = 0") {
        const double nu = 0.02;
        const MultiplierSet m = eval_multipliers(0.0, nu);
        CHECK(m.lambda == 0.0);
        CHECK(m.alpha == doctest::Approx(std::pow(nu, 2.0 / 3.0)).epsilon(1e-14));
        CHECK(m.beta == doctest::Approx(std::cbrt(nu)).epsilon(1e-14));
        CHECK(m.gamma == doctest::Approx(std::pow(nu, -2.0 / 3.0)).epsilon(1e-14));
    }
    SUBCASE("enhanced branch rate") {
        CHECK(eval_multipliers(100.0, 1e-3).lambda == doctest::Approx(0.31622776601683794).epsilon(1e-12));
        CHECK(eval_multipliers(-100.0, 1e-3).lambda == doctest::Approx(std::sqrt(0.1)).epsilon(1e-12));
    }
    SUBCASE("domain errors") {
        CHECK_THROWS_AS(eval_multipliers(1.0, 0.0), DomainError);
        CHECK_THROWS_AS(eval_multipliers(1.0, 1.0), DomainError);
        CHECK_THROWS_AS(eval_multipliers(1.0, -0.5), DomainError);
    }
}

TEST_CASE("multiplier invariants") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> lognu(-4.0, -0.01), logk(-3.0, 3.0);
    for (int i = 0; i < 10000; ++i) {
        const double nu = std::pow(10.0, lognu(rng));
        const double k = (i % 2 ? -1.0 : 1.0) * std::pow(10.0, logk(rng));
        const MultiplierSet m = eval_multipliers(k, nu);
        CHECK(m.alpha > 0.0);
        CHECK(m.beta > 0.0);
        CHECK(m.gamma > 0.0);
        CHECK(m.lambda > 0.0);
        CHECK(std::abs(m.alpha * m.gamma - 1.0) < 1e-12);
    }

    SUBCASE("continuity across the branch point") {
        for (double nu : {1e-1, 1e-2, 1e-3, 3.7e-4}) {
            const double kc = std::cbrt(1.0 / nu);
            // Both closed forms evaluated at the threshold.
            const double lo_alpha = std::pow(nu, 2.0 / 3.0), hi_alpha = std::sqrt(nu / kc);
            const double lo_lambda = nu * kc * kc, hi_lambda = std::sqrt(nu * kc);
            CHECK(std::abs(lo_alpha / hi_alpha - 1.0) < 1e-12);
            CHECK(std::abs(lo_lambda / hi_lambda - 1.0) < 1e-12);
            const MultiplierSet below = eval_multipliers(kc * (1.0 - 1e-14), nu);
            const MultiplierSet above = eval_multipliers(kc * (1.0 + 1e-14), nu);
            CHECK(std::abs(below.lambda / above.lambda - 1.0) < 1e-12);
            CHECK(std::abs(below.beta / above.beta - 1.0) < 1e-12);
        }
    }
    SUBCASE("lambda nondecreasing in |k|") {
        for (double nu : {0.3, 1e-2, 1e-4}) {
            double prev = 0.0;
            for (int i = 0; i <= 2000; ++i) {
                const double lam = eval_multipliers(0.1 * i, nu).lambda;
                CHECK(lam >= prev);
                prev = lam;
            }
        }
    }
}

TEST_CASE("time weight M") {
    CHECK(time_weight_M(3.0, 1e-2, 0.01, 1.0, 0.0) == 1.0);
    CHECK(time_weight_M_from_rate(1.0, 1.0, 2.0, 1e6) ==
          doctest::Approx(std::exp(M_PI * 4.0 / 4.0)).epsilon(1e-3));
    CHECK(time_weight_M_from_rate(1.0, 1.0, 1.0, 1.0) == doctest::Approx(1.15338).epsilon(1e-5 / 1.15338));
    CHECK(std::abs(rk4_weight(1.0, 1.0, 1.0, 1.0, 2000) - time_weight_M_from_rate(1.0, 1.0, 1.0, 1.0)) < 1e-10);

    SUBCASE("solves its ODE and stays in [1, e^{pi J^2/4}]") {
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> J(1.0, 3.0), lognu(-3.0, -0.5), k(-50.0, 50.0), t(0.0, 500.0);
        for (int i = 0; i < 200; ++i) {
            const double j = J(rng), nu = std::pow(10.0, lognu(rng)), kk = k(rng), tt = t(rng), c = 0.05;
            const double lam = eval_multipliers(kk, nu).lambda;
            const double M = time_weight_M(kk, nu, c, j, tt);
            CHECK(M >= 1.0);
            CHECK(M <= std::exp(M_PI * j * j / 4.0));
            CHECK(std::abs(rk4_weight(lam, c, j, tt, 4000) / M - 1.0) < 1e-6);
            // Central difference against the right-hand side.
            const double h = 1e-4 * std::max(1.0, tt);
            if (tt > h) {
                const double fd = (time_weight_M(kk, nu, c, j, tt + h) - time_weight_M(kk, nu, c, j, tt - h)) / (2 * h);
                const double u = c * lam * tt;
                const double want = c * j * j * lam * u * u / std::pow(1.0 + u * u, 2) * M;
                CHECK(std::abs(fd - want) <= 1e-6 * std::abs(want) + 1e-12);
            }
        }
    }
}

TEST_CASE("bracket") {
    CHECK(bracket(0.0) == 1.0);
    CHECK(bracket(1.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    for (double x : {0.3, 2.0, 1e3}) {
        CHECK(bracket(-x) == bracket(x));
        CHECK(bracket(x) >= 1.0);
    }
}

TEST_CASE("epsilon weights") {
    const double nu = 1e-3;
    const auto w0 = epsilon_weights(0.0, nu, 0.8);
    CHECK(w0[0] == doctest::Approx(1.0));
    CHECK(w0[1] == doctest::Approx(std::cbrt(nu)));
    CHECK(w0[2] == doctest::Approx(1.0 / std::cbrt(nu)));
    CHECK(w0[3] == doctest::Approx(1.0 / std::cbrt(nu)));
    CHECK(w0[4] == 1.0);
    CHECK(w0[5] == 1.0);
    for (double k : {-7.0, 0.5, 3.0, 40.0}) {
        const auto w = epsilon_weights(k, nu, 0.8);
        CHECK(w[2] == w[3]);
    }
    // <10>^{0.8} = 101^{0.4}
    CHECK(std::abs(epsilon_weights(10.0, nu, 0.8)[0] - 6.33474) < 1e-3);
    CHECK_THROWS_AS(epsilon_weights(1.0, 0.0, 0.8), DomainError);
}

TEST_CASE("energy constants") {
    EnergyConstants c;
    CHECK_NOTHROW(c.validate());
    EnergyConstants bad = c;
    bad.c_beta = 0.005;  // c_beta - c_alpha^2 < 0
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.c_gamma = 0.1;  // 0.1 - 8 * 0.0025 / 0.1 < 0
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.J = 0.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.m = 0.75;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.c = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}
