#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "poiseuille/grid.hpp"

using namespace poiseuille;

namespace {

CVector sample(const Grid1D& g, double (*f)(double)) {
    CVector v(g.size());
    for (int i = 0; i < g.size(); ++i) v[i] = f(g.node(i));
    return v;
}

double gauss(double y) { return std::exp(-0.5 * y * y); }

}  // namespace

TEST_CASE("grid construction") {
    SUBCASE("weights integrate the constant") {
        for (int n : {8, 17, 64, 129}) CHECK(Grid1D(1.0, n).weights().sum() == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("Lobatto endpoints and ordering") {
        const Grid1D g(8.0, 64);
        CHECK(g.node(0) == doctest::Approx(-8.0).epsilon(1e-15));
        CHECK(g.node(63) == doctest::Approx(8.0).epsilon(1e-15));
        for (int i = 1; i < g.size(); ++i) CHECK(g.node(i) > g.node(i - 1));
        for (int i = 0; i < g.size(); ++i) CHECK(g.weights()[i] > 0.0);
    }
    SUBCASE("integral of y^2") {
        const Grid1D g(8.0, 64);
        double s = 0.0;
        for (int i = 0; i < g.size(); ++i) s += g.weights()[i] * g.node(i) * g.node(i);
        CHECK(std::abs(s - 2.0 * 512.0 / 3.0) < 1e-9);
    }
    SUBCASE("invalid parameters") {
        CHECK_THROWS_AS(Grid1D(1.0, 7), ConfigError);
        CHECK_THROWS_AS(Grid1D(0.0, 32), ConfigError);
        CHECK_THROWS_AS(Grid1D(-1.0, 32), ConfigError);
    }
}

TEST_CASE("diff_y") {
    const Grid1D g(10.0, 96);
    CHECK(diff_y(CVector::Constant(g.size(), Complex(3.0, -1.0)), g).cwiseAbs().maxCoeff() < 1e-11);

    const Grid1D small(1.0, 9);
    CVector cube(small.size()), want(small.size());
    for (int i = 0; i < small.size(); ++i) {
        const double y = small.node(i);
        cube[i] = y * y * y;
        want[i] = 3.0 * y * y;
    }
    CHECK(oracle::max_abs_diff(diff_y(cube, small), want) < 1e-12);

    CVector want_g(g.size());
    for (int i = 0; i < g.size(); ++i) want_g[i] = -g.node(i) * gauss(g.node(i));
    CHECK(oracle::max_abs_diff(diff_y(sample(g, gauss), g), want_g) < 1e-10);

    CHECK_THROWS_AS(diff_y(CVector::Zero(5), g), ShapeError);
}

TEST_CASE("laplacian_k") {
    const Grid1D g(10.0, 96);
    CVector y2(g.size());
    for (int i = 0; i < g.size(); ++i) y2[i] = g.node(i) * g.node(i);
    // Second-derivative roundoff grows like n^4 |f|; |y^2| reaches 100 here.
    CHECK(oracle::max_abs_diff(laplacian_k(y2, 0.0, g), CVector::Constant(g.size(), 2.0)) < 1e-7);

    const CVector f = sample(g, gauss);
    const CVector lap = laplacian_k(f, 1.0, g);
    double err = 0.0;
    for (int i = 1; i + 1 < g.size(); ++i) {
        const double y = g.node(i);
        err = std::max(err, std::abs(lap[i] - (y * y - 2.0) * gauss(y)));
    }
    CHECK(err < 1e-9);

    std::mt19937_64 rng(11);
    const CVector r = oracle::random_bumps(g, rng);
    const double k = 2.7;
    CHECK((laplacian_k(r, k, g) - (laplacian_k(r, 0.0, g) - k * k * r)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solve_poisson") {
    const Grid1D g(10.0, 96);
    CVector w(g.size()), psi_exact(g.size());
    for (int i = 0; i < g.size(); ++i) {
        const double y = g.node(i);
        w[i] = (y * y - 2.0) * gauss(y);
        psi_exact[i] = gauss(y);
    }
    clamp_boundary(psi_exact);
    CHECK(oracle::max_abs_diff(solve_poisson(w, 1.0, g), psi_exact) < 1e-8);

    SUBCASE("residual and boundary values") {
        std::mt19937_64 rng(5);
        const CVector r = oracle::random_bumps(g, rng);
        const CVector psi = solve_poisson(r, 0.7, g);
        CHECK(std::abs(psi[0]) == 0.0);
        CHECK(std::abs(psi[g.size() - 1]) == 0.0);
        CVector res = laplacian_k(psi, 0.7, g) - r;
        res[0] = res[g.size() - 1] = 0.0;
        CHECK(std::sqrt(norm2(res, g) / norm2(r, g)) <= 1e-10);
    }
    SUBCASE("linearity and zero") {
        std::mt19937_64 rng(6);
        const CVector a = oracle::random_bumps(g, rng), b = oracle::random_bumps(g, rng);
        const Complex ca(0.3, -1.2), cb(2.0, 0.5);
        const CVector lhs = solve_poisson(ca * a + cb * b, 3.0, g);
        const CVector rhs = ca * solve_poisson(a, 3.0, g) + cb * solve_poisson(b, 3.0, g);
        CHECK(oracle::max_abs_diff(lhs, rhs) < 1e-13 * (1.0 + rhs.cwiseAbs().maxCoeff()));
        CHECK(solve_poisson(CVector::Zero(g.size()), 3.0, g).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("k = 0 is rejected") { CHECK_THROWS_AS(solve_poisson(w, 0.0, g), DomainError); }
    SUBCASE("spectral convergence from 48 to 96 nodes") {
        double err[2];
        int idx = 0;
        for (int n : {48, 96}) {
            const Grid1D gn(10.0, n);
            CVector wn(n), pn(n);
            for (int i = 0; i < n; ++i) {
                const double y = gn.node(i);
                wn[i] = (y * y - 2.0) * gauss(y);
                pn[i] = gauss(y);
            }
            clamp_boundary(pn);
            err[idx++] = oracle::max_abs_diff(solve_poisson(wn, 1.0, gn), pn);
        }
        CHECK(err[0] >= 10.0 * err[1]);
    }
}

TEST_CASE("antiderivative_stream") {
    const Grid1D g(10.0, 96);
    CHECK(antiderivative_stream(CVector::Zero(g.size()), g).cwiseAbs().maxCoeff() == 0.0);

    CVector w(g.size()), want(g.size());
    for (int i = 0; i < g.size(); ++i) {
        const double y = g.node(i);
        w[i] = -y * gauss(y);
        want[i] = gauss(y) - std::exp(-50.0);
    }
    const CVector d = antiderivative_stream(w, g);
    CHECK(oracle::max_abs_diff(d, want) < 1e-9);
    CHECK(std::abs(d[g.size() - 1]) < 1e-12);
    CHECK(std::abs(d[0]) < 1e-15);
}

TEST_CASE("weighted norms and inner products") {
    const Grid1D g(10.0, 96);
    CHECK(weighted_norm(CVector::Zero(g.size()), 1, g) == 0.0);
    const Grid1D unit(1.0, 32);
    CHECK(weighted_norm(CVector::Ones(unit.size()), 1, unit) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));

    std::mt19937_64 rng(7);
    const CVector f = oracle::random_bumps(g, rng), h = oracle::random_bumps(g, rng);
    CHECK(weighted_norm(2.0 * f, 1, g) == doctest::Approx(2.0 * weighted_norm(f, 1, g)).epsilon(1e-14));
    CHECK(std::abs(inner(f, f, g).imag()) < 1e-14 * norm2(f, g));
    CHECK(inner(f, f, g).real() >= 0.0);
    CHECK(std::abs(inner(f, h, g) - std::conj(inner(h, f, g))) < 1e-13);

    const CVector ga = sample(g, gauss);
    CHECK(std::abs(inner(ga, ga, g).real() - std::sqrt(M_PI)) < 1e-9);
    CHECK_THROWS_AS(inner(f, CVector::Zero(3), g), ShapeError);
}

TEST_CASE("operator properties on random states") {
    const Grid1D g(10.0, 128);
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const CVector f = oracle::random_bumps(g, rng), h = oracle::random_bumps(g, rng);
        const Complex a(0.4, 1.1), b(-0.7, 0.2);

        // Linearity of derivative, Laplacian and quadrature.
        CHECK(oracle::max_abs_diff(diff_y(a * f + b * h, g), a * diff_y(f, g) + b * diff_y(h, g)) < 1e-11);
        CHECK(oracle::max_abs_diff(laplacian_k(a * f + b * h, 2.0, g),
                                   a * laplacian_k(f, 2.0, g) + b * laplacian_k(h, 2.0, g)) < 1e-10);
        CHECK(std::abs(integral(a * f + b * h, g) - (a * integral(f, g) + b * integral(h, g))) < 1e-12);

        // Discrete integration by parts.
        const double nf = std::sqrt(norm2(f, g)), nh = std::sqrt(norm2(h, g));
        CHECK(std::abs(inner(diff_y(f, g), h, g) + inner(f, diff_y(h, g), g)) <= 1e-9 * nf * nh);

        // Agmon: max |f| <= sqrt(2) ||f||^{1/2} ||f'||^{1/2}.
        const double bound = std::sqrt(2.0) * std::sqrt(nf) * std::pow(norm2(diff_y(f, g), g), 0.25);
        CHECK(f.cwiseAbs().maxCoeff() <= bound * (1.0 + 1e-6));
        CHECK(sup_norm(f, g) <= bound * (1.0 + 1e-6));
    }
}

TEST_CASE("boundary helpers") {
    CVector f = CVector::Ones(10);
    CHECK(boundary_ratio(f) == doctest::Approx(1.0));
    clamp_boundary(f);
    CHECK(boundary_ratio(f) == 0.0);
    CHECK(boundary_ratio(CVector::Zero(10)) == 0.0);
}
