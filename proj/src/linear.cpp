#include "poiseuille/linear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace poiseuille {

Generator::Generator(double k, double nu, const Grid1D& grid) : k_(k), nu_(nu), grid_(&grid) {
    if (!(nu >= 0.0 && nu < 1.0))
        throw DomainError("build_generator: nu must lie in [0, 1), got " + std::to_string(nu));
    const int m = grid.interior_size();
    const Complex ik(0.0, k);

    RMatrix lap = grid.d2().block(1, 1, m, m);
    lap.diagonal().array() -= k * k;
    a_ = (nu * lap).cast<Complex>();
    for (int i = 0; i < m; ++i) {
        const double y = grid.node(i + 1);
        a_(i, i) -= ik * (y * y);
    }
    if (k != 0.0) {
        helmholtz_ = std::make_shared<HelmholtzSolver>(k, grid);
        // Weighted-symmetric part of the collocation inverse, so the inviscid
        // generator is exactly skew in the quadrature inner product.
        const RMatrix s = helmholtz_->interior_inverse();
        const RVector w = grid.weights().segment(1, m);
        const RMatrix adj = w.cwiseInverse().asDiagonal() * s.transpose() * w.asDiagonal();
        a_ += (2.0 * ik) * (0.5 * (s + adj)).cast<Complex>();
    }
}

CVector Generator::apply(const CVector& omega) const {
    grid_->check_shape(omega, "Generator::apply");
    const int m = grid_->interior_size();
    CVector out = CVector::Zero(grid_->size());
    out.segment(1, m) = a_ * omega.segment(1, m);
    return out;
}

CVector Generator::stream(const CVector& omega) const {
    if (!helmholtz_) return CVector::Zero(grid_->size());
    return helmholtz_->solve(omega);
}

CVector Generator::stream_derivative(const CVector& omega) const {
    if (!helmholtz_) return antiderivative_stream(omega, *grid_);
    return diff_y(helmholtz_->solve(omega), *grid_);
}

Generator build_generator(double k, double nu, const Grid1D& grid) { return Generator(k, nu, grid); }

MidpointPropagator::MidpointPropagator(const Generator& gen, double dt) : gen_(&gen), dt_(dt) {
    if (!(dt > 0.0)) throw ConfigError("time step dt must be positive");
    const int m = gen.grid().interior_size();
    const CMatrix id = CMatrix::Identity(m, m);
    explicit_half_ = id + (0.5 * dt) * gen.matrix();
    implicit_half_.compute(id - (0.5 * dt) * gen.matrix());
    const double rc = implicit_half_.rcond();
    if (!(rc > 1e-14) || !std::isfinite(rc))
        throw NumericalError("implicit midpoint matrix singular for k = " + std::to_string(gen.k()) +
                             ", dt = " + std::to_string(dt));
}

CVector MidpointPropagator::step(const CVector& omega) const {
    const int m = gen_->grid().interior_size();
    CVector out = CVector::Zero(gen_->grid().size());
    out.segment(1, m) = implicit_half_.solve(explicit_half_ * omega.segment(1, m));
    return out;
}

CVector MidpointPropagator::step_forced(const CVector& omega, const CVector& forcing) const {
    const int m = gen_->grid().interior_size();
    CVector rhs = explicit_half_ * omega.segment(1, m) + dt_ * forcing.segment(1, m);
    CVector out = CVector::Zero(gen_->grid().size());
    out.segment(1, m) = implicit_half_.solve(rhs);
    return out;
}

ModeState step_linear(const ModeState& state, const Generator& gen, double dt) {
    if (state.k != gen.k()) throw ConfigError("step_linear: state k does not match generator k");
    gen.grid().check_shape(state.omega, "step_linear");
    MidpointPropagator prop(gen, dt);
    ModeState next = state;
    next.omega = prop.step(state.omega);
    next.t = state.t + dt;
    if (!next.omega.allFinite()) throw NumericalError("step_linear: non-finite state at t = " + std::to_string(next.t));
    return next;
}

Trajectory evolve(const ModeState& state, const Generator& gen, double T, double dt, int stride,
                  const Observer& observer) {
    if (!(T >= 0.0)) throw ConfigError("evolve: horizon T must be nonnegative");
    if (stride < 1) throw ConfigError("evolve: observer stride must be >= 1");
    if (state.k != gen.k()) throw ConfigError("evolve: state k does not match generator k");
    gen.grid().check_shape(state.omega, "evolve");

    Trajectory traj;
    traj.final_state = state;
    auto record = [&](const ModeState& s) {
        traj.samples.push_back({s.t, s.omega});
        if (observer) observer(s);
    };
    record(state);
    const long n_steps = static_cast<long>(std::floor(T / dt + 1e-9));
    if (n_steps == 0) return traj;

    MidpointPropagator prop(gen, dt);
    ModeState cur = state;
    const double t0 = state.t;
    for (long n = 1; n <= n_steps; ++n) {
        cur.omega = prop.step(cur.omega);
        cur.t = t0 + n * dt;
        if (!cur.omega.allFinite())
            throw NumericalError("evolve: non-finite state at t = " + std::to_string(cur.t));
        if (n % stride == 0) record(cur);
    }
    traj.final_state = cur;
    return traj;
}

double default_time_step(double lambda, double nu, double k_max) {
    const double rate = std::max(lambda, nu);
    return std::min(0.1 / rate, 0.05 / (nu * k_max * k_max + 1.0));
}

double rotation_time_step(double k, double half_width) {
    if (k == 0.0) return std::numeric_limits<double>::infinity();
    return 0.5 / (std::abs(k) * half_width * half_width);
}

}  // namespace poiseuille
