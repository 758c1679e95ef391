#include "poiseuille/energy.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <numbers>

namespace poiseuille {

namespace {

double re_inner(const CVector& f, const CVector& g, const Grid1D& grid) { return inner(f, g, grid).real(); }

IdentityCheck make_check(std::initializer_list<double> lhs_terms, std::initializer_list<double> rhs_terms) {
    IdentityCheck c;
    for (double v : lhs_terms) {
        c.lhs += v;
        c.normalizer += std::abs(v);
    }
    for (double v : rhs_terms) {
        c.rhs += v;
        c.normalizer += std::abs(v);
    }
    c.residual = c.normalizer > 0.0 ? std::abs(c.lhs - c.rhs) / c.normalizer : 0.0;
    return c;
}

double pow_bracket(double x, double p) { return std::pow(bracket(x), p); }

EnergyBreakdown breakdown(const ModeNorms& n, double k, double nu, const EnergyConstants& constants,
                          const MultiplierSet& mult) {
    const double k2 = k * k;
    const double ca = constants.c_alpha * mult.alpha;
    const double cb = constants.c_beta * mult.beta;
    const double cg = constants.c_gamma * mult.gamma;
    EnergyBreakdown b;
    b.e_terms = {0.5 * n.omega2, 0.5 * ca * n.grad2, 2.0 * cb * n.cross, 0.5 * cg * (n.yomega2 + 2.0 * n.gradpsi2)};
    b.d_terms = {cg * nu * n.omega2, nu * n.grad2,         ca * nu * n.lap2,
                 4.0 * cb * k2 * n.yomega2, cg * nu * n.ygrad2, 8.0 * cb * k2 * n.dpsi2};
    for (double v : b.e_terms) b.e_total += v;
    for (double v : b.d_terms) b.d_total += v;
    return b;
}

// Ratio convention shared by the embedding diagnostics: 0/0 -> 0, x/0 -> inf (flagged).
double safe_ratio(double num, double den, bool& flagged) {
    flagged = false;
    if (den > 0.0) return num / den;
    if (num == 0.0) return 0.0;
    flagged = true;
    return std::numeric_limits<double>::infinity();
}

}  // namespace

// sum_i w_i y_i^2 f_i conj(g_i)
Complex inner_y2(const CVector& f, const CVector& g, const Grid1D& grid) {
    const RVector& w = grid.weights();
    const RVector& y = grid.nodes();
    Complex acc = 0.0;
    for (int i = 0; i < grid.size(); ++i) acc += w[i] * y[i] * y[i] * f[i] * std::conj(g[i]);
    return acc;
}

// Re<i k y f, g>
double re_iky(double k, const CVector& f, const CVector& g, const Grid1D& grid) {
    const RVector& w = grid.weights();
    const RVector& y = grid.nodes();
    Complex acc = 0.0;
    for (int i = 0; i < grid.size(); ++i) acc += w[i] * y[i] * f[i] * std::conj(g[i]);
    return (Complex(0.0, k) * acc).real();
}


ModeFields mode_fields(const CVector& omega, const Generator& gen) {
    const Grid1D& grid = gen.grid();
    grid.check_shape(omega, "mode_fields");
    ModeFields f;
    f.k = gen.k();
    f.nu = gen.nu();
    f.omega = omega;
    f.domega = diff_y(omega, grid);
    f.lap_omega = laplacian_k(omega, f.k, grid);
    if (const HelmholtzSolver* h = gen.helmholtz()) {
        f.psi = h->solve(omega);
        f.dpsi = diff_y(f.psi, grid);
    } else {
        f.psi = CVector::Zero(grid.size());
        f.dpsi = antiderivative_stream(omega, grid);
    }
    return f;
}

ModeFields mode_fields(const CVector& omega, double k, double nu, const Grid1D& grid) {
    grid.check_shape(omega, "mode_fields");
    ModeFields f;
    f.k = k;
    f.nu = nu;
    f.omega = omega;
    f.domega = diff_y(omega, grid);
    f.lap_omega = laplacian_k(omega, k, grid);
    if (k != 0.0) {
        f.psi = solve_poisson(omega, k, grid);
        f.dpsi = diff_y(f.psi, grid);
    } else {
        f.psi = CVector::Zero(grid.size());
        f.dpsi = antiderivative_stream(omega, grid);
    }
    return f;
}

ModeNorms mode_norms(const ModeFields& f, const Grid1D& grid) {
    const double k2 = f.k * f.k;
    ModeNorms n{};
    n.omega2 = norm2(f.omega, grid);
    const double dom2 = norm2(f.domega, grid);
    n.grad2 = k2 * n.omega2 + dom2;
    n.lap2 = norm2(f.lap_omega, grid);
    n.yomega2 = inner_y2(f.omega, f.omega, grid).real();
    n.ygrad2 = k2 * n.yomega2 + inner_y2(f.domega, f.domega, grid).real();
    n.dpsi2 = norm2(f.dpsi, grid);
    n.kpsi2 = k2 * norm2(f.psi, grid);
    n.gradpsi2 = n.kpsi2 + n.dpsi2;
    n.cross = re_iky(f.k, f.omega, f.domega, grid);
    // Re<Delta w, i k y d_y w> = Re( conj(ik) <y Delta w, d_y w> )
    {
        const RVector& w = grid.weights();
        const RVector& y = grid.nodes();
        Complex acc = 0.0;
        for (int i = 0; i < grid.size(); ++i) acc += w[i] * y[i] * f.lap_omega[i] * std::conj(f.domega[i]);
        n.visc_cross = (std::conj(Complex(0.0, f.k)) * acc).real();
    }
    n.psi_cross = re_iky(f.k, f.psi, f.dpsi, grid);
    return n;
}

EnergyBreakdown energy_and_dissipation(const ModeFields& f, const EnergyConstants& constants,
                                       const MultiplierSet& mult, const Grid1D& grid) {
    constants.validate();
    return breakdown(mode_norms(f, grid), f.k, f.nu, constants, mult);
}

EnergyBreakdown energy_Ek(const ModeFields& f, const EnergyConstants& constants, const MultiplierSet& mult,
                          const Grid1D& grid) {
    return energy_and_dissipation(f, constants, mult, grid);
}

EnergyBreakdown dissipation_Dk(const ModeFields& f, const EnergyConstants& constants, const MultiplierSet& mult,
                               const Grid1D& grid) {
    return energy_and_dissipation(f, constants, mult, grid);
}

double energy_pairing(const ModeFields& f, const ModeFields& v, const EnergyConstants& constants,
                      const MultiplierSet& mult, const Grid1D& grid) {
    const double k = f.k;
    const double k2 = k * k;
    const double plain = re_inner(f.omega, v.omega, grid);
    const double grad = k2 * plain + re_inner(f.domega, v.domega, grid);
    const double cross = re_iky(k, v.omega, f.domega, grid) + re_iky(k, f.omega, v.domega, grid);
    const double ygam = inner_y2(f.omega, v.omega, grid).real() +
                        2.0 * (k2 * re_inner(f.psi, v.psi, grid) + re_inner(f.dpsi, v.dpsi, grid));
    return plain + constants.c_alpha * mult.alpha * grad + 2.0 * constants.c_beta * mult.beta * cross +
           constants.c_gamma * mult.gamma * ygam;
}

double energy_rate_from_identities(const ModeFields& f, const EnergyConstants& constants,
                                   const MultiplierSet& mult, const Grid1D& grid) {
    const ModeNorms n = mode_norms(f, grid);
    const EnergyBreakdown b = breakdown(n, f.k, f.nu, constants, mult);
    return -b.d_total - 2.0 * constants.c_alpha * mult.alpha * n.cross -
           4.0 * constants.c_beta * mult.beta * f.nu * n.visc_cross;
}

double check_equivalence(const ModeFields& f, const EnergyConstants& constants, const MultiplierSet& mult,
                         const Grid1D& grid) {
    constants.validate();
    const ModeNorms n = mode_norms(f, grid);
    const double ref = n.omega2 + mult.alpha * n.grad2 + mult.gamma * n.yomega2 + mult.gamma * n.dpsi2;
    if (!(ref > 0.0)) throw DomainError("check_equivalence: ratio undefined for the zero state");
    return breakdown(n, f.k, f.nu, constants, mult).e_total / ref;
}

double IdentityResiduals::max_residual() const {
    double worst = combined.residual;
    for (const auto& c : identities) worst = std::max(worst, c.residual);
    return worst;
}

IdentityResiduals verify_identities(const ModeState& state, const Generator& gen) {
    const Grid1D& grid = gen.grid();
    const ModeFields f = mode_fields(state.omega, gen);
    const ModeNorms n = mode_norms(f, grid);
    const ModeFields v = mode_fields(gen.apply(state.omega), gen);
    const double k = f.k;
    const double k2 = k * k;
    const double nu = gen.nu();

    IdentityResiduals r;
    const double wv = re_inner(v.omega, f.omega, grid);
    r.identities[0] = make_check({2.0 * wv}, {-2.0 * nu * n.grad2});
    r.identities[1] = make_check({2.0 * k2 * wv, 2.0 * re_inner(v.domega, f.domega, grid)},
                                 {-2.0 * nu * n.lap2, -4.0 * n.cross});
    r.identities[2] = make_check({re_iky(k, v.omega, f.domega, grid), re_iky(k, f.omega, v.domega, grid)},
                                 {-2.0 * k2 * n.yomega2, -4.0 * k2 * n.dpsi2, -2.0 * nu * n.visc_cross});
    const double yv = 2.0 * inner_y2(v.omega, f.omega, grid).real();
    r.identities[3] = make_check({yv}, {2.0 * nu * n.omega2, -2.0 * nu * n.ygrad2, -8.0 * n.psi_cross});
    const double psi_rate = 2.0 * k2 * re_inner(v.psi, f.psi, grid) + 2.0 * re_inner(v.dpsi, f.dpsi, grid);
    r.identities[4] = make_check({psi_rate}, {-2.0 * nu * n.omega2, 4.0 * n.psi_cross});
    r.combined = make_check({yv, 2.0 * psi_rate}, {-2.0 * nu * n.omega2, -2.0 * nu * n.ygrad2});
    return r;
}

std::vector<EnergySample> energy_series(const Trajectory& traj, const Generator& gen,
                                        const EnergyConstants& constants) {
    constants.validate();
    const Grid1D& grid = gen.grid();
    const MultiplierSet mult = eval_multipliers(gen.k(), gen.nu());
    std::vector<EnergySample> out;
    out.reserve(traj.samples.size());
    for (const auto& s : traj.samples) {
        const ModeFields f = mode_fields(s.omega, gen);
        const ModeNorms n = mode_norms(f, grid);
        const EnergyBreakdown b = breakdown(n, f.k, f.nu, constants, mult);
        const double rate = -b.d_total - 2.0 * constants.c_alpha * mult.alpha * n.cross -
                            4.0 * constants.c_beta * mult.beta * f.nu * n.visc_cross;
        out.push_back({s.t, b.e_total, b.d_total, rate});
    }
    return out;
}

InequalityReport check_energy_inequality(const Trajectory& traj, const Generator& gen,
                                         const EnergyConstants& constants) {
    if (traj.samples.empty()) throw DomainError("check_energy_inequality: empty trajectory");
    const double lambda = eval_multipliers(gen.k(), gen.nu()).lambda;
    InequalityReport rep;
    rep.series = energy_series(traj, gen, constants);
    rep.c_star = std::numeric_limits<double>::infinity();
    for (const auto& s : rep.series) {
        const double den = 4.0 * s.dissipation + 4.0 * lambda * s.energy;
        if (!(s.energy > 0.0) || !(den > 0.0)) continue;
        rep.c_star = std::min(rep.c_star, -s.rate / den);
        ++rep.samples_used;
    }
    if (rep.samples_used == 0) throw DomainError("check_energy_inequality: trajectory holds only zero states");
    return rep;
}

FieldSnapshot snapshot(const Field& field, const ModeBank& bank, const EnergyConstants& constants) {
    constants.validate();
    const Grid1D& grid = bank.grid();
    if (field.size() != bank.kgrid().size()) throw ShapeError("snapshot: field and mode bank k-grids differ");
    FieldSnapshot snap;
    snap.t = field.t;
    const int n = field.size();
    snap.fields.reserve(n);
    snap.norms.reserve(n);
    snap.energies.reserve(n);
    snap.weights.reserve(n);
    for (int j = 0; j < n; ++j) {
        const double k = field.k(j);
        const MultiplierSet mult = eval_multipliers(k, field.nu);
        snap.fields.push_back(mode_fields(field.modes[j], bank.generator(j)));
        snap.norms.push_back(mode_norms(snap.fields.back(), grid));
        snap.energies.push_back(breakdown(snap.norms.back(), k, field.nu, constants, mult));
        const double u = constants.c * mult.lambda * field.t;
        snap.weights.push_back(pow_bracket(u, 2.0 * constants.J) * pow_bracket(k, 2.0 * constants.m) /
                               time_weight_M_from_rate(mult.lambda, constants.c, constants.J, field.t));
    }
    return snap;
}

GlobalEnergies global_energy(const FieldSnapshot& snap, const KGrid& kgrid) {
    if (static_cast<int>(snap.energies.size()) != kgrid.size())
        throw ShapeError("global_energy: snapshot and k-grid sizes differ");
    GlobalEnergies g;
    for (int j = 0; j < kgrid.size(); ++j) {
        const double q = kgrid.quadrature_weight(j) * snap.weights[j];
        g.E1 += q * snap.energies[j].e_total;
        g.D_tilde += q * snap.energies[j].d_total;
        g.E2 = std::max(g.E2, 0.5 * snap.norms[j].yomega2 + snap.norms[j].gradpsi2);
    }
    return g;
}

GlobalEnergies global_energy(const Field& field, const ModeBank& bank, const EnergyConstants& constants) {
    return global_energy(snapshot(field, bank, constants), field.kgrid);
}

GlobalAccumulator::GlobalAccumulator(const KGrid& kgrid, double nu)
    : kgrid_(kgrid),
      nu_(nu),
      d2_per_k_(kgrid.size(), 0.0),
      d2_last_(kgrid.size(), 0.0),
      psi_sup_int_(kgrid.size(), 0.0),
      psi_sup_last_(kgrid.size(), 0.0) {}

void GlobalAccumulator::add(const FieldSnapshot& snap, const Grid1D& grid) {
    const double dtilde = global_energy(snap, kgrid_).D_tilde;
    std::vector<double> d2(kgrid_.size());
    std::vector<double> psi_sup(kgrid_.size());
    for (int j = 0; j < kgrid_.size(); ++j) {
        d2[j] = nu_ * (snap.norms[j].omega2 + snap.norms[j].ygrad2);
        const double g = grad_sup_norm(snap.fields[j].k, snap.fields[j].psi, snap.fields[j].dpsi, grid);
        psi_sup[j] = g * g;
    }
    if (t_last_) {
        const double h = snap.t - *t_last_;
        if (h < 0.0) throw DomainError("GlobalAccumulator: snapshots must arrive in time order");
        d1_ += 0.5 * h * (dtilde_last_ + dtilde);
        for (int j = 0; j < kgrid_.size(); ++j) {
            d2_per_k_[j] += 0.5 * h * (d2_last_[j] + d2[j]);
            psi_sup_int_[j] += 0.5 * h * (psi_sup_last_[j] + psi_sup[j]);
        }
    }
    t_last_ = snap.t;
    dtilde_last_ = dtilde;
    d2_last_ = std::move(d2);
    psi_sup_last_ = std::move(psi_sup);
}

double GlobalAccumulator::D2() const {
    double worst = 0.0;
    for (double v : d2_per_k_) worst = std::max(worst, v);
    return worst;
}

double GlobalAccumulator::stream_sup_time_integral() const {
    double acc = 0.0;
    for (int j = 0; j < kgrid_.size(); ++j) acc += kgrid_.quadrature_weight(j) * std::sqrt(psi_sup_int_[j]);
    return acc;
}

EpsilonNorm epsilon_norm(const Field& field, double t, double nu, const EnergyConstants& constants,
                         const ModeBank& bank) {
    constants.validate();
    const Grid1D& grid = bank.grid();
    std::array<double, 4> sq{};
    EpsilonNorm out;
    for (int j = 0; j < field.size(); ++j) {
        const double k = field.k(j);
        const ModeNorms n = mode_norms(mode_fields(field.modes[j], bank.generator(j)), grid);
        const auto w = epsilon_weights(k, nu, constants.m);
        const double lambda = eval_multipliers(k, nu).lambda;
        const double tw = pow_bracket(constants.c * lambda * t, constants.J);
        const double q = field.kgrid.quadrature_weight(j);
        const std::array<double, 4> vals = {n.omega2, n.grad2, n.yomega2, n.dpsi2};
        for (int i = 0; i < 4; ++i) sq[i] += q * (tw * w[i]) * (tw * w[i]) * vals[i];
        out.components[4] = std::max(out.components[4], std::sqrt(n.yomega2));
        out.components[5] = std::max(out.components[5], std::sqrt(n.gradpsi2));
    }
    const double two_pi = 2.0 * std::numbers::pi;
    for (int i = 0; i < 4; ++i) out.components[i] = std::sqrt(two_pi * sq[i]);
    for (double c : out.components) out.total += c;
    return out;
}

EmbeddingRatios check_embedding_ratios(const FieldSnapshot& snap, const KGrid& kgrid, double nu,
                                       const Grid1D& grid, const GlobalAccumulator& acc,
                                       const EnergyConstants& constants) {
    const GlobalEnergies g = global_energy(snap, kgrid);
    const double energy = g.total_energy();
    const double diss = acc.D1() + acc.D2();
    std::array<double, 4> num{};
    for (int j = 0; j < kgrid.size(); ++j) {
        const ModeFields& f = snap.fields[j];
        const double q = kgrid.quadrature_weight(j);
        const double gw = grad_sup_norm(f.k, f.omega, f.domega, grid);
        const double gp = grad_sup_norm(f.k, f.psi, f.dpsi, grid);
        const double lambda = eval_multipliers(f.k, nu).lambda;
        num[0] += q * gw;
        num[1] += q * gp;
        num[3] += q * pow_bracket(constants.c * lambda * snap.t, 2.0 * constants.J) *
                  pow_bracket(f.k, 2.0 * constants.m) * std::abs(f.k) * gp * gp;
    }
    num[2] = acc.stream_sup_time_integral();
    const std::array<double, 4> den = {std::pow(nu, -5.0 / 6.0) * std::sqrt(g.D_tilde), std::sqrt(energy),
                                       std::pow(nu, -2.0 / 3.0) * std::sqrt(diss), std::pow(nu, -1.0 / 3.0) * g.D_tilde};
    EmbeddingRatios r;
    for (int i = 0; i < 4; ++i) {
        bool flag = false;
        r.ratios[i] = safe_ratio(num[i], den[i], flag);
        r.flagged[i] = flag;
    }
    return r;
}

double grad_sup_norm(double k, const CVector& f, const CVector& df, const Grid1D& grid) {
    const RVector pts = grid.dense_points(4);
    const CVector fv = grid.interpolate(f, pts);
    const CVector dv = grid.interpolate(df, pts);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < pts.size(); ++i)
        worst = std::max(worst, k * k * std::norm(fv[i]) + std::norm(dv[i]));
    return std::sqrt(worst);
}

}  // namespace poiseuille
