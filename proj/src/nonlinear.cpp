#include "poiseuille/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace poiseuille {

ConvolutionPlan::ConvolutionPlan(const KGrid& kgrid, double dealias) : kgrid_(kgrid), dealias_(dealias) {
    if (!(dealias > 0.0 && dealias <= 1.0)) throw ConfigError("dealias cutoff must lie in (0, 1]");
    const double cutoff = dealias * kgrid.k_max() * (1.0 + 1e-12);
    keep_.resize(kgrid.size());
    for (int j = 0; j < kgrid.size(); ++j) keep_[j] = std::abs(kgrid.k(j)) <= cutoff;
}

void ConvolutionPlan::project(Field& field) const {
    if (field.size() != kgrid_.size()) throw ShapeError("ConvolutionPlan::project: k-grid size mismatch");
    for (int j = 0; j < field.size(); ++j)
        if (!keep_[j]) field.modes[j].setZero();
}

StreamData stream_data(const Field& field, const ModeBank& bank) {
    if (field.size() != bank.kgrid().size()) throw ShapeError("stream_data: field and mode bank k-grids differ");
    const Grid1D& grid = bank.grid();
    StreamData d;
    d.psi.resize(field.size());
    d.dpsi.resize(field.size());
    d.domega.resize(field.size());
    for (int j = 0; j < field.size(); ++j) {
        grid.check_shape(field.modes[j], "stream_data");
        d.domega[j] = diff_y(field.modes[j], grid);
        if (const HelmholtzSolver* h = bank.generator(j).helmholtz()) {
            d.psi[j] = h->solve(field.modes[j]);
            d.dpsi[j] = diff_y(d.psi[j], grid);
        } else {
            d.psi[j] = CVector::Zero(grid.size());
            d.dpsi[j] = antiderivative_stream(field.modes[j], grid);
        }
    }
    return d;
}

Field nonlinear_term(const Field& field, const StreamData& data, const ConvolutionPlan& plan) {
    const KGrid& kg = plan.kgrid();
    if (field.size() != kg.size() || static_cast<int>(data.psi.size()) != kg.size())
        throw ShapeError("nonlinear_term: k-grid size mismatch");
    const int n_y = field.modes.empty() ? 0 : static_cast<int>(field.modes[0].size());
    const int M = kg.half_count();
    const int size = kg.size();
    const Complex i1(0.0, 1.0);

    Field out = field;
    out.modes.assign(size, CVector::Zero(n_y));
    const int first = field.reality ? M : 0;
    for (int j = first; j < size; ++j) {
        if (!plan.retained(j)) continue;
        CVector acc = CVector::Zero(n_y);
        const int l_lo = std::max(0, j - M);
        const int l_hi = std::min(size - 1, j + M);
        for (int l = l_lo; l <= l_hi; ++l) {
            const int d = j - l + M;
            const Complex ikd = i1 * kg.k(d);
            const Complex ikl = i1 * kg.k(l);
            acc.array() += ikd * data.psi[d].array() * data.domega[l].array() -
                           ikl * data.dpsi[d].array() * field.modes[l].array();
        }
        acc *= -kg.delta_k();
        clamp_boundary(acc);
        out.modes[j] = std::move(acc);
    }
    if (field.reality) {
        for (int j = M + 1; j < size; ++j) out.modes[kg.mirror(j)] = out.modes[j].conjugate();
        out.modes[M] = out.modes[M].real().cast<Complex>();
    }
    return out;
}

Field nonlinear_term(const Field& field, const ModeBank& bank, const ConvolutionPlan& plan) {
    return nonlinear_term(field, stream_data(field, bank), plan);
}

double velocity_bound(const Field& field, const StreamData& data, const Grid1D& grid) {
    (void)grid;
    double acc = 0.0;
    for (int j = 0; j < field.size(); ++j) {
        const double k = field.k(j);
        const double peak =
            (k * k * data.psi[j].array().abs2() + data.dpsi[j].array().abs2()).maxCoeff();
        acc += std::sqrt(peak);
    }
    return field.kgrid.delta_k() * acc;
}

NonlinearStepper::NonlinearStepper(const ModeBank& bank, const ConvolutionPlan& plan, double dt)
    : bank_(&bank), plan_(&plan), dt_(dt) {
    if (!(dt > 0.0)) throw ConfigError("time step dt must be positive");
    if (bank.kgrid().size() != plan.kgrid().size()) throw ShapeError("NonlinearStepper: k-grid mismatch");
    props_.resize(bank.kgrid().size());
    for (int j = 0; j < bank.kgrid().size(); ++j)
        if (plan.retained(j)) props_[j] = std::make_unique<MidpointPropagator>(bank.generator(j), dt);
}

double NonlinearStepper::guard_time_step(const Field& field) const {
    const double u = velocity_bound(field, stream_data(field, *bank_), bank_->grid());
    return 0.5 / (plan_->kgrid().k_max() * u + 1e-12);
}

void NonlinearStepper::step(Field& field) const {
    const int size = field.size();
    const Field n0 = nonlinear_term(field, *bank_, *plan_);

    Field star = field;
    for (int j = 0; j < size; ++j)
        star.modes[j] = props_[j] ? props_[j]->step_forced(field.modes[j], n0.modes[j])
                                  : CVector::Zero(field.modes[j].size());
    star.t = field.t + dt_;
    if (field.reality) star.enforce_reality();

    const Field n1 = nonlinear_term(star, *bank_, *plan_);
    for (int j = 0; j < size; ++j) {
        if (!props_[j]) {
            field.modes[j].setZero();
            continue;
        }
        field.modes[j] = props_[j]->step_forced(field.modes[j], 0.5 * (n0.modes[j] + n1.modes[j]));
    }
    field.t += dt_;
    if (field.reality) field.enforce_reality();
    for (const auto& m : field.modes)
        if (!m.allFinite()) throw NumericalError("nonlinear blow-up: non-finite state at t = " + std::to_string(field.t));
}

Field step_nonlinear(const Field& field, double dt, const ConvolutionPlan& plan, const ModeBank& bank) {
    NonlinearStepper stepper(bank, plan, dt);
    Field out = field;
    stepper.step(out);
    return out;
}

BudgetTerms nl_budget(const FieldSnapshot& snap, const Field& nl, const ModeBank& bank,
                      const EnergyConstants& constants) {
    const KGrid& kg = bank.kgrid();
    const Grid1D& grid = bank.grid();
    if (nl.size() != kg.size() || static_cast<int>(snap.fields.size()) != kg.size())
        throw ShapeError("nl_budget: k-grid size mismatch");
    BudgetTerms b;
    b.t = snap.t;
    b.y_pairing.assign(kg.size(), 0.0);
    b.psi_pairing.assign(kg.size(), 0.0);
    for (int j = 0; j < kg.size(); ++j) {
        const ModeFields& f = snap.fields[j];
        const ModeFields g = mode_fields(nl.modes[j], bank.generator(j));
        const double k = f.k;
        const MultiplierSet mult = eval_multipliers(k, bank.nu());
        const double w = kg.quadrature_weight(j) * snap.weights[j];

        const double plain = inner(f.omega, g.omega, grid).real();
        const double grad = k * k * plain + inner(f.domega, g.domega, grid).real();
        const double yp = inner_y2(f.omega, g.omega, grid).real();
        const double pp = k * k * inner(f.psi, g.psi, grid).real() + inner(f.dpsi, g.dpsi, grid).real();

        b.rates[0] += w * plain;
        b.rates[1] += w * constants.c_alpha * mult.alpha * grad;
        b.rates[2] += w * 2.0 * constants.c_beta * mult.beta * re_iky(k, g.omega, f.domega, grid);
        b.rates[3] += w * 2.0 * constants.c_beta * mult.beta * re_iky(k, f.omega, g.domega, grid);
        b.rates[4] += w * constants.c_gamma * mult.gamma * yp;
        b.rates[5] += w * 2.0 * constants.c_gamma * mult.gamma * pp;
        b.y_pairing[j] = yp;
        b.psi_pairing[j] = pp;
        b.nl1_pairing += w * energy_pairing(f, g, constants, mult, grid);
    }
    return b;
}

BudgetAccumulator::BudgetAccumulator(const KGrid& kgrid)
    : kgrid_(kgrid), y_int_(kgrid.size(), 0.0), psi_int_(kgrid.size(), 0.0) {}

void BudgetAccumulator::add(const BudgetTerms& terms) {
    if (static_cast<int>(terms.y_pairing.size()) != kgrid_.size())
        throw ShapeError("BudgetAccumulator: k-grid size mismatch");
    if (last_) {
        const double h = terms.t - last_->t;
        if (h < 0.0) throw DomainError("BudgetAccumulator: samples must arrive in time order");
        for (int i = 0; i < 6; ++i) t16_[i] += 0.5 * h * (last_->rates[i] + terms.rates[i]);
        for (int j = 0; j < kgrid_.size(); ++j) {
            y_int_[j] += 0.5 * h * (last_->y_pairing[j] + terms.y_pairing[j]);
            psi_int_[j] += 0.5 * h * (last_->psi_pairing[j] + terms.psi_pairing[j]);
        }
        nl1_pair_ += 0.5 * h * (last_->nl1_pairing + terms.nl1_pairing);
    }
    last_ = terms;
}

std::array<double, 8> BudgetAccumulator::totals() const {
    std::array<double, 8> out{};
    for (int i = 0; i < 6; ++i) out[i] = t16_[i];
    out[6] = 2.0 * *std::max_element(y_int_.begin(), y_int_.end());
    out[7] = 4.0 * *std::max_element(psi_int_.begin(), psi_int_.end());
    return out;
}

double BudgetAccumulator::nl_total() const {
    double s = 0.0;
    for (double v : totals()) s += v;
    return s;
}

double implied_threshold(double c, double C, double nu) {
    if (!(C > 0.0) || !std::isfinite(C)) throw DomainError("implied_threshold: empirical C must be positive and finite");
    return c * c / (C * C) * std::pow(nu, 7.0 / 3.0);
}

BootstrapRun run_bootstrap(const Field& initial, const ModeBank& bank, const ConvolutionPlan& plan,
                           const EnergyConstants& constants, const BootstrapRunOptions& opts) {
    constants.validate();
    if (!(opts.T >= 0.0)) throw ConfigError("bootstrap horizon T must be nonnegative");
    if (opts.observer_stride < 1) throw ConfigError("observer_stride must be >= 1");
    const KGrid& kg = bank.kgrid();
    const Grid1D& grid = bank.grid();

    Field field = initial;
    field.t = 0.0;
    if (field.reality) field.enforce_reality();
    plan.project(field);

    double dt = opts.dt;
    if (!(dt > 0.0)) {
        double lam = opts.nu;
        for (int j = 0; j < kg.size(); ++j)
            if (plan.retained(j)) lam = std::max(lam, eval_multipliers(kg.k(j), opts.nu).lambda);
        dt = default_time_step(lam, opts.nu, kg.k_max());
    }

    BootstrapRun run;
    GlobalAccumulator gacc(kg, opts.nu);
    BudgetAccumulator bacc(kg);
    double c_best = 0.0;
    bool c_defined = false;
    const double nu_pow = std::pow(opts.nu, -7.0 / 6.0);

    auto observe = [&](const Field& f) {
        const FieldSnapshot snap = snapshot(f, bank, constants);
        gacc.add(snap, grid);
        const GlobalEnergies g = global_energy(snap, kg);
        const Field nl = nonlinear_term(f, bank, plan);
        bacc.add(nl_budget(snap, nl, bank, constants));
        BootstrapSample s;
        s.t = f.t;
        s.energy = g.total_energy();
        s.dissipation = gacc.D1() + gacc.D2();
        s.terms = bacc.totals();
        s.nl = bacc.nl_total();
        s.nl1_pairing = bacc.nl1_pairing_integral();
        if (run.series.empty()) {
            run.energy0 = s.energy;
            run.sup_energy = s.energy;
        }
        run.sup_energy = std::max(run.sup_energy, s.energy);
        if (s.energy > 2.0 * run.energy0) run.bound_held = false;
        const double den = nu_pow * s.dissipation * std::sqrt(run.sup_energy);
        if (den > 0.0) {
            c_best = std::max(c_best, std::abs(s.nl) / den);
            c_defined = true;
        }
        run.series.push_back(s);
    };

    try {
        dt = std::min(dt, NonlinearStepper(bank, plan, dt).guard_time_step(field));
        auto stepper = std::make_unique<NonlinearStepper>(bank, plan, dt);
        observe(field);
        const double t_end = opts.T;
        long n = 0;
        int halvings = 0;
        while (field.t < t_end - 1e-12 * std::max(1.0, t_end)) {
            const double remaining = t_end - field.t;
            if (remaining < stepper->dt() * (1.0 - 1e-9)) {
                NonlinearStepper last(bank, plan, remaining);
                last.step(field);
                field.t = t_end;
                observe(field);
                break;
            }
            stepper->step(field);
            ++n;
            if (n % opts.observer_stride == 0) {
                observe(field);
                if (stepper->guard_time_step(field) < stepper->dt()) {
                    if (++halvings > 30) throw NumericalError("advection guard: time step underflow at t = " +
                                                              std::to_string(field.t));
                    stepper = std::make_unique<NonlinearStepper>(bank, plan, 0.5 * stepper->dt());
                }
            }
        }
        if (run.series.back().t < field.t) observe(field);
        run.final_dt = stepper->dt();
    } catch (const NumericalError& e) {
        run.blew_up = true;
        run.failure = e.what();
        run.bound_held = false;
    }
    if (c_defined && run.energy0 > 0.0) run.empirical_C = c_best;
    run.amplitude = 0.0;
    return run;
}

}  // namespace poiseuille
