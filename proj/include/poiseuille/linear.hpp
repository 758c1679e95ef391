#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "poiseuille/grid.hpp"

namespace poiseuille {

// One x-frequency of the vorticity perturbation, sampled on the grid nodes.
struct ModeState {
    double k = 0.0;
    double nu = 0.0;
    double t = 0.0;
    CVector omega;
};

/**
 * Per-mode linear generator
 *
 *     A w = -i k y^2 w + 2 i k Delta_k^{-1} w + nu Delta_k w
 *
 * assembled as a dense complex matrix on the interior nodes (Dirichlet rows
 * eliminated). Delta_k^{-1} enters through its symmetric part in the
 * quadrature inner product, which differs from the collocation inverse only at
 * discretization level. At k = 0 the stream term is omitted since its
 * coefficient vanishes. nu = 0 is accepted as an inviscid diagnostic mode.
 */
class Generator {
public:
    Generator(double k, double nu, const Grid1D& grid);

    double k() const { return k_; }
    double nu() const { return nu_; }
    const Grid1D& grid() const { return *grid_; }
    const CMatrix& matrix() const { return a_; }

    // A applied to a full-grid vector; boundary entries of the result are zero.
    CVector apply(const CVector& omega) const;

    // Stream function for this mode (Poisson solve; k = 0 returns zero since
    // only d_y psi_0 is ever needed, see stream_derivative).
    CVector stream(const CVector& omega) const;
    // d_y psi: derivative of the Poisson solution, or the antiderivative at k = 0.
    CVector stream_derivative(const CVector& omega) const;
    const HelmholtzSolver* helmholtz() const { return helmholtz_.get(); }

private:
    double k_;
    double nu_;
    const Grid1D* grid_;
    std::shared_ptr<const HelmholtzSolver> helmholtz_;
    CMatrix a_;
};

Generator build_generator(double k, double nu, const Grid1D& grid);

/// Implicit-midpoint propagator for a fixed (generator, dt):
///   (I - dt/2 A) w_{n+1} = (I + dt/2 A) w_n + dt * forcing
/// The LU factorization is computed once at construction.
class MidpointPropagator {
public:
    MidpointPropagator(const Generator& gen, double dt);

    double dt() const { return dt_; }
    const Generator& generator() const { return *gen_; }

    CVector step(const CVector& omega) const;
    // Same left-hand side with an extra explicit forcing term (interior part used).
    CVector step_forced(const CVector& omega, const CVector& forcing) const;

private:
    const Generator* gen_;
    double dt_;
    CMatrix explicit_half_;
    Eigen::PartialPivLU<CMatrix> implicit_half_;
};

ModeState step_linear(const ModeState& state, const Generator& gen, double dt);

struct TrajectorySample {
    double t;
    CVector omega;
};

struct Trajectory {
    ModeState final_state;
    std::vector<TrajectorySample> samples;
};

// Observers receive read-only snapshots; they cannot alter the evolution.
using Observer = std::function<void(const ModeState&)>;

/// Repeated step_linear up to horizon T. Samples are recorded (and the
/// observer called) at t = 0 and every `stride` steps; the sample count is
/// floor(T / (dt * stride)) + 1.
Trajectory evolve(const ModeState& state, const Generator& gen, double T, double dt, int stride,
                  const Observer& observer = {});

// min(0.1 / max(lambda_k, nu), 0.05 / (nu k_max^2 + 1)).
double default_time_step(double lambda, double nu, double k_max);

// 0.5 / (|k| L_y^2): keeps the midpoint rotation angle of -i k y^2 below one
// radian per step across the interval, so strongly sheared outer regions are
// damped at their true rate. Infinite at k = 0.
double rotation_time_step(double k, double half_width);

}  // namespace poiseuille
