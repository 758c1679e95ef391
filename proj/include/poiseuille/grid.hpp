#pragma once

#include <complex>
#include <memory>
#include <span>

#include <Eigen/Dense>

#include "poiseuille/errors.hpp"

namespace poiseuille {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;

/**
 * Chebyshev-Gauss-Lobatto collocation grid on [-L_y, L_y].
 *
 * Nodes are stored in increasing order. Endpoints carry homogeneous
 * Dirichlet conditions; operators below act on the full node vector and
 * callers keep boundary samples at zero.
 *
 * Immutable after construction; share by const reference across threads.
 */
class Grid1D {
public:
    // Requires n_y >= 8 and half_width > 0, else ConfigError.
    Grid1D(double half_width, int n_y);

    double half_width() const { return half_width_; }
    int size() const { return n_; }
    int interior_size() const { return n_ - 2; }

    const RVector& nodes() const { return nodes_; }
    const RVector& weights() const { return weights_; }
    double node(int i) const { return nodes_[i]; }

    // First and second derivative matrices on the full node set.
    const RMatrix& d1() const { return d1_; }
    const RMatrix& d2() const { return d2_; }
    // Row i gives the integral of the interpolant from -L_y to node i.
    const RMatrix& cumulative_integral() const { return cumint_; }

    // Evaluate the polynomial interpolant of nodal data at arbitrary points.
    CVector interpolate(const CVector& f, const RVector& points) const;

    // Node sets used for dense sup-norm sampling: `factor` points per node gap.
    RVector dense_points(int factor) const;

    void check_shape(const CVector& f, const char* who) const;

private:
    double half_width_;
    int n_;
    RVector nodes_;
    RVector weights_;
    RVector bary_;
    RMatrix d1_;
    RMatrix d2_;
    RMatrix cumint_;
};

Grid1D build_grid(double half_width, int n_y);

CVector diff_y(const CVector& f, const Grid1D& grid);

// d^2/dy^2 f - k^2 f.
CVector laplacian_k(const CVector& f, double k, const Grid1D& grid);

/// Dirichlet Helmholtz solver for Delta_k psi = omega, factorized once per k.
///
/// The factorization lives on the interior nodes; psi(+-L_y) = 0.
class HelmholtzSolver {
public:
    HelmholtzSolver(double k, const Grid1D& grid);

    double k() const { return k_; }
    CVector solve(const CVector& omega) const;
    // Dense inverse on interior nodes, (D2_II - k^2)^{-1}.
    RMatrix interior_inverse() const;
    double condition_estimate() const { return rcond_; }

private:
    double k_;
    const Grid1D* grid_;
    Eigen::PartialPivLU<RMatrix> lu_;
    double rcond_;
};

// Throws DomainError for k == 0 (use antiderivative_stream), NumericalError
// if the interior residual exceeds 1e-10 relative.
CVector solve_poisson(const CVector& omega, double k, const Grid1D& grid);

// d/dy psi_0 (y) = integral of omega_0 from -L_y to y.
CVector antiderivative_stream(const CVector& omega0, const Grid1D& grid);

// Total integral of omega over the grid (for the k = 0 decay warning).
Complex integral(const CVector& f, const Grid1D& grid);

double weighted_norm(const CVector& f, int weight_power, const Grid1D& grid);

// sum_i w_i f_i conj(g_i)
Complex inner(const CVector& f, const CVector& g, const Grid1D& grid);

inline double norm2(const CVector& f, const Grid1D& grid) { return inner(f, f, grid).real(); }

// Max |f| over the dense interpolant sampling.
double sup_norm(const CVector& f, const Grid1D& grid, int factor = 4);

// max |f(+-L_y)| relative to max |f|; 0 for the zero vector.
double boundary_ratio(const CVector& f);

// Zero the two Dirichlet samples in place.
void clamp_boundary(CVector& f);

}  // namespace poiseuille
