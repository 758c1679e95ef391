#include "poiseuille/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace poiseuille {

namespace {

constexpr double kPi = std::numbers::pi;

// Clenshaw-Curtis weights on [-1, 1] for the N+1 Lobatto points.
RVector clenshaw_curtis(int N) {
    RVector w = RVector::Zero(N + 1);
    RVector v = RVector::Ones(N - 1);
    auto theta = [N](int j) { return kPi * j / N; };
    if (N % 2 == 0) {
        w[0] = w[N] = 1.0 / (double(N) * N - 1.0);
        for (int k = 1; k < N / 2; ++k)
            for (int j = 1; j < N; ++j) v[j - 1] -= 2.0 * std::cos(2.0 * k * theta(j)) / (4.0 * k * k - 1.0);
        for (int j = 1; j < N; ++j) v[j - 1] -= std::cos(N * theta(j)) / (double(N) * N - 1.0);
    } else {
        w[0] = w[N] = 1.0 / (double(N) * N);
        for (int k = 1; k <= (N - 1) / 2; ++k)
            for (int j = 1; j < N; ++j) v[j - 1] -= 2.0 * std::cos(2.0 * k * theta(j)) / (4.0 * k * k - 1.0);
    }
    for (int j = 1; j < N; ++j) w[j] = 2.0 * v[j - 1] / N;
    return w;
}

}  // namespace

Grid1D::Grid1D(double half_width, int n_y) : half_width_(half_width), n_(n_y) {
    if (!(half_width > 0.0) || !std::isfinite(half_width))
        throw ConfigError("grid half-width L_y must be positive, got " + std::to_string(half_width));
    if (n_y < 8) throw ConfigError("grid needs n_y >= 8 nodes, got " + std::to_string(n_y));

    const int N = n_ - 1;
    // sin form keeps the node set exactly antisymmetric.
    nodes_.resize(n_);
    for (int i = 0; i < n_; ++i) nodes_[i] = half_width_ * std::sin(kPi * (2.0 * i - N) / (2.0 * N));

    // Ordering does not matter for CC weights: they are symmetric.
    weights_ = clenshaw_curtis(N) * half_width_;

    bary_.resize(n_);
    for (int i = 0; i < n_; ++i) bary_[i] = ((i % 2) ? -1.0 : 1.0) * ((i == 0 || i == N) ? 0.5 : 1.0);

    d1_ = RMatrix::Zero(n_, n_);
    for (int i = 0; i < n_; ++i) {
        double diag = 0.0;
        for (int j = 0; j < n_; ++j) {
            if (i == j) continue;
            const double dij = (bary_[j] / bary_[i]) / (nodes_[i] - nodes_[j]);
            d1_(i, j) = dij;
            diag -= dij;
        }
        d1_(i, i) = diag;
    }
    d2_ = d1_ * d1_;

    // Cumulative integration: values -> Chebyshev coefficients -> integrate -> values.
    // theta_i = pi (N - i) / N gives x_i = -cos(pi i / N), the increasing node order.
    auto theta = [N](int i) { return kPi * (N - i) / N; };
    RMatrix to_coef(n_, n_);
    for (int j = 0; j <= N; ++j) {
        const double cj = (j == 0 || j == N) ? 2.0 : 1.0;
        for (int i = 0; i <= N; ++i) {
            const double ci = (i == 0 || i == N) ? 2.0 : 1.0;
            to_coef(j, i) = 2.0 / (N * cj * ci) * std::cos(j * theta(i));
        }
    }
    // b = integ * a, degree N+1.
    RMatrix integ = RMatrix::Zero(N + 2, N + 1);
    for (int j = 1; j <= N + 1; ++j) {
        const int lo = j - 1;
        const int hi = j + 1;
        const double scale = (lo == 0) ? 1.0 : 1.0 / (2.0 * j);
        integ(j, lo) += scale;  // ∫T_0 = T_1, ∫T_{j-1} contributes T_j/(2j)
        if (hi <= N) integ(j, hi) -= 1.0 / (2.0 * j);
    }
    // Fix the constant so the antiderivative vanishes at x = -1.
    for (int col = 0; col <= N; ++col) {
        double at_minus_one = 0.0;
        for (int j = 1; j <= N + 1; ++j) at_minus_one += integ(j, col) * ((j % 2) ? -1.0 : 1.0);
        integ(0, col) = -at_minus_one;
    }
    RMatrix eval(n_, N + 2);
    for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N + 1; ++j) eval(i, j) = std::cos(j * theta(i));
    cumint_ = half_width_ * (eval * integ * to_coef);
}

void Grid1D::check_shape(const CVector& f, const char* who) const {
    if (f.size() != n_)
        throw ShapeError(std::string(who) + ": array length " + std::to_string(f.size()) +
                         " does not match grid size " + std::to_string(n_));
}

CVector Grid1D::interpolate(const CVector& f, const RVector& points) const {
    check_shape(f, "interpolate");
    CVector out(points.size());
    for (Eigen::Index p = 0; p < points.size(); ++p) {
        const double x = points[p];
        Complex num = 0.0;
        double den = 0.0;
        bool exact = false;
        for (int j = 0; j < n_; ++j) {
            const double diff = x - nodes_[j];
            if (diff == 0.0) {
                out[p] = f[j];
                exact = true;
                break;
            }
            const double t = bary_[j] / diff;
            num += t * f[j];
            den += t;
        }
        if (!exact) out[p] = num / den;
    }
    return out;
}

RVector Grid1D::dense_points(int factor) const {
    factor = std::max(factor, 1);
    RVector pts((n_ - 1) * factor + 1);
    Eigen::Index idx = 0;
    for (int i = 0; i + 1 < n_; ++i)
        for (int s = 0; s < factor; ++s)
            pts[idx++] = nodes_[i] + (nodes_[i + 1] - nodes_[i]) * double(s) / factor;
    pts[idx] = nodes_[n_ - 1];
    return pts;
}

Grid1D build_grid(double half_width, int n_y) { return Grid1D(half_width, n_y); }

CVector diff_y(const CVector& f, const Grid1D& grid) {
    grid.check_shape(f, "diff_y");
    return grid.d1() * f;
}

CVector laplacian_k(const CVector& f, double k, const Grid1D& grid) {
    grid.check_shape(f, "laplacian_k");
    return grid.d2() * f - (k * k) * f;
}

HelmholtzSolver::HelmholtzSolver(double k, const Grid1D& grid) : k_(k), grid_(&grid) {
    const int m = grid.interior_size();
    RMatrix op = grid.d2().block(1, 1, m, m);
    op.diagonal().array() -= k * k;
    lu_.compute(op);
    rcond_ = lu_.rcond();
    if (!(rcond_ > 1e-14))
        throw NumericalError("Helmholtz operator singular for k = " + std::to_string(k) +
                             " (reciprocal condition estimate " + std::to_string(rcond_) + ")");
}

CVector HelmholtzSolver::solve(const CVector& omega) const {
    grid_->check_shape(omega, "HelmholtzSolver::solve");
    const int m = grid_->interior_size();
    CVector psi = CVector::Zero(grid_->size());
    psi.segment(1, m) = lu_.solve(omega.segment(1, m));
    return psi;
}

RMatrix HelmholtzSolver::interior_inverse() const {
    const int m = grid_->interior_size();
    return lu_.solve(RMatrix::Identity(m, m));
}

CVector solve_poisson(const CVector& omega, double k, const Grid1D& grid) {
    if (k == 0.0) throw DomainError("solve_poisson: k = 0 has no decaying Dirichlet solution; use antiderivative_stream");
    grid.check_shape(omega, "solve_poisson");
    HelmholtzSolver solver(k, grid);
    CVector psi = solver.solve(omega);

    const int m = grid.interior_size();
    CVector res = (laplacian_k(psi, k, grid) - omega).segment(1, m);
    const double scale = omega.segment(1, m).norm();
    if (scale > 0.0 && res.norm() / scale > 1e-10)
        throw NumericalError("solve_poisson: relative residual " + std::to_string(res.norm() / scale) +
                             " exceeds 1e-10 (reciprocal condition " +
                             std::to_string(solver.condition_estimate()) + ")");
    return psi;
}

CVector antiderivative_stream(const CVector& omega0, const Grid1D& grid) {
    grid.check_shape(omega0, "antiderivative_stream");
    return grid.cumulative_integral() * omega0;
}

Complex integral(const CVector& f, const Grid1D& grid) {
    grid.check_shape(f, "integral");
    return (grid.weights().cast<Complex>().array() * f.array()).sum();
}

double weighted_norm(const CVector& f, int weight_power, const Grid1D& grid) {
    if (weight_power != 0 && weight_power != 1)
        throw DomainError("weighted_norm: weight power must be 0 or 1");
    grid.check_shape(f, "weighted_norm");
    const RVector& y = grid.nodes();
    const RVector& w = grid.weights();
    double acc = 0.0;
    for (int i = 0; i < grid.size(); ++i) {
        const double yw = weight_power ? y[i] * y[i] : 1.0;
        acc += w[i] * yw * std::norm(f[i]);
    }
    return std::sqrt(acc);
}

Complex inner(const CVector& f, const CVector& g, const Grid1D& grid) {
    grid.check_shape(f, "inner");
    grid.check_shape(g, "inner");
    const RVector& w = grid.weights();
    Complex acc = 0.0;
    for (int i = 0; i < grid.size(); ++i) acc += w[i] * f[i] * std::conj(g[i]);
    return acc;
}

double sup_norm(const CVector& f, const Grid1D& grid, int factor) {
    const CVector vals = grid.interpolate(f, grid.dense_points(factor));
    return vals.size() ? vals.cwiseAbs().maxCoeff() : 0.0;
}

double boundary_ratio(const CVector& f) {
    if (f.size() == 0) return 0.0;
    const double peak = f.cwiseAbs().maxCoeff();
    if (peak == 0.0) return 0.0;
    return std::max(std::abs(f[0]), std::abs(f[f.size() - 1])) / peak;
}

void clamp_boundary(CVector& f) {
    if (f.size() == 0) return;
    f[0] = 0.0;
    f[f.size() - 1] = 0.0;
}

}  // namespace poiseuille
