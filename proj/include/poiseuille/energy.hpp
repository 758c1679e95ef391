#pragma once

#include <array>
#include <optional>
#include <vector>

#include "poiseuille/field.hpp"
#include "poiseuille/grid.hpp"
#include "poiseuille/linear.hpp"
#include "poiseuille/multipliers.hpp"

namespace poiseuille {

/// Derived fields of one mode needed by every functional: derivatives of
/// omega, the stream function and d_y psi (the antiderivative at k = 0).
struct ModeFields {
    double k = 0.0;
    double nu = 0.0;
    CVector omega;
    CVector domega;
    CVector lap_omega;  // Delta_k omega
    CVector psi;        // zero at k = 0 (only d_y psi_0 is defined)
    CVector dpsi;
};

ModeFields mode_fields(const CVector& omega, const Generator& gen);
// Stand-alone variant: builds a Helmholtz factorization for k != 0.
ModeFields mode_fields(const CVector& omega, double k, double nu, const Grid1D& grid);

// The quadratic pieces used throughout the per-mode energy functionals.
struct ModeNorms {
    double omega2;      // ||w||^2
    double grad2;       // ||grad_k w||^2 = k^2||w||^2 + ||d_y w||^2
    double lap2;        // ||Delta_k w||^2
    double yomega2;     // ||y w||^2
    double ygrad2;      // ||y grad_k w||^2
    double gradpsi2;    // ||grad_k psi||^2
    double dpsi2;       // ||d_y psi||^2
    double kpsi2;       // ||k psi||^2
    double cross;       // Re<i k y w, d_y w>
    double visc_cross;  // Re<Delta_k w, i k y d_y w>
    double psi_cross;   // Re<i k y psi, d_y psi>
};

ModeNorms mode_norms(const ModeFields& f, const Grid1D& grid);

// sum_i w_i y_i^2 f_i conj(g_i)
Complex inner_y2(const CVector& f, const CVector& g, const Grid1D& grid);
// Re<i k y f, g>
double re_iky(double k, const CVector& f, const CVector& g, const Grid1D& grid);

struct EnergyBreakdown {
    // 1/2||w||^2, 1/2 c_a a ||grad w||^2, 2 c_b b Re<ikyw, d_y w>, 1/2 c_g g (||yw||^2 + 2||grad psi||^2)
    std::array<double, 4> e_terms{};
    double e_total = 0.0;
    // c_g g nu||w||^2, nu||grad w||^2, c_a a nu||Delta w||^2, 4 c_b b k^2||yw||^2,
    // c_g g nu||y grad w||^2, 8 c_b b k^2||d_y psi||^2
    std::array<double, 6> d_terms{};
    double d_total = 0.0;
};

EnergyBreakdown energy_Ek(const ModeFields& f, const EnergyConstants& constants, const MultiplierSet& mult,
                          const Grid1D& grid);
EnergyBreakdown dissipation_Dk(const ModeFields& f, const EnergyConstants& constants, const MultiplierSet& mult,
                               const Grid1D& grid);
// Both sides in one pass.
EnergyBreakdown energy_and_dissipation(const ModeFields& f, const EnergyConstants& constants,
                                       const MultiplierSet& mult, const Grid1D& grid);

/// Directional derivative of E_k at omega in direction v:
///   Re<w,v> + c_a a Re<grad w, grad v> + 2 c_b b (Re<iky v, d_y w> + Re<iky w, d_y v>)
///   + c_g g (Re<yw, yv> + 2 Re<grad psi, grad Delta^{-1} v>)
/// `v_fields` must hold v with its own stream function.
double energy_pairing(const ModeFields& f, const ModeFields& v_fields, const EnergyConstants& constants,
                      const MultiplierSet& mult, const Grid1D& grid);

/// Right-hand side of the energy identities combined into dE_k/dt.
double energy_rate_from_identities(const ModeFields& f, const EnergyConstants& constants,
                                   const MultiplierSet& mult, const Grid1D& grid);

// E_k / (||w||^2 + a||grad w||^2 + g||y w||^2 + g||d_y psi||^2); DomainError on the zero state.
double check_equivalence(const ModeFields& f, const EnergyConstants& constants, const MultiplierSet& mult,
                         const Grid1D& grid);

struct IdentityCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double normalizer = 0.0;
    double residual = 0.0;  // |lhs - rhs| / normalizer, 0 when normalizer is 0
};

struct IdentityResiduals {
    // d/dt of ||w||^2, ||grad w||^2, Re<ikyw, d_y w>, ||yw||^2, ||grad psi||^2
    std::array<IdentityCheck, 5> identities;
    // ||yw||^2 + 2||grad psi||^2 combined form
    IdentityCheck combined;
    double max_residual() const;
};

// d/dt replaced by the generator action; no time stepping involved.
IdentityResiduals verify_identities(const ModeState& state, const Generator& gen);

struct EnergySample {
    double t;
    double energy;
    double dissipation;
    double rate;  // spatial dE/dt
};

struct InequalityReport {
    double c_star = 0.0;
    std::size_t samples_used = 0;
    std::vector<EnergySample> series;
};

// Energy series along a linear trajectory, dE/dt by L_k substitution.
std::vector<EnergySample> energy_series(const Trajectory& traj, const Generator& gen,
                                        const EnergyConstants& constants);

/// c* = min over samples of -(dE/dt) / (4 D_k + 4 lambda_k E_k). Zero states
/// are skipped; an empty trajectory (or one with only zero states) throws.
InequalityReport check_energy_inequality(const Trajectory& traj, const Generator& gen,
                                         const EnergyConstants& constants);

// -------------------------------------------------------------------------
// Global (k-integrated) functionals.

/// Instantaneous per-mode data reused by global functionals and budgets.
struct FieldSnapshot {
    double t = 0.0;
    std::vector<ModeFields> fields;
    std::vector<ModeNorms> norms;
    std::vector<EnergyBreakdown> energies;
    std::vector<double> weights;  // <c lambda_k t>^{2J} <k>^{2m} / M_k(t)
};

FieldSnapshot snapshot(const Field& field, const ModeBank& bank, const EnergyConstants& constants);

struct GlobalEnergies {
    double E1 = 0.0;
    double E2 = 0.0;
    double D_tilde = 0.0;
    double D1 = 0.0;  // filled by GlobalAccumulator
    double D2 = 0.0;
    double total_energy() const { return E1 + E2; }
    double total_dissipation() const { return D1 + D2; }
};

GlobalEnergies global_energy(const FieldSnapshot& snap, const KGrid& kgrid);
GlobalEnergies global_energy(const Field& field, const ModeBank& bank, const EnergyConstants& constants);

/// Running time integrals (trapezoid rule in t) needed by the time-accumulated
/// dissipations and the sup-norm embedding ratios.
class GlobalAccumulator {
public:
    explicit GlobalAccumulator(const KGrid& kgrid, double nu);

    void add(const FieldSnapshot& snap, const Grid1D& grid);

    double D1() const { return d1_; }
    double D2() const;
    double elapsed() const { return t_last_.value_or(0.0); }
    // int_k ( int_0^t ||grad_k psi_k||_inf^2 ds )^{1/2} dk
    double stream_sup_time_integral() const;

private:
    KGrid kgrid_;
    double nu_;
    std::optional<double> t_last_;
    double d1_ = 0.0;
    double dtilde_last_ = 0.0;
    std::vector<double> d2_per_k_;
    std::vector<double> d2_last_;
    std::vector<double> psi_sup_int_;
    std::vector<double> psi_sup_last_;
};

struct EpsilonNorm {
    double total = 0.0;
    std::array<double, 6> components{};
};

/// Weighted stability norm at time t (t = 0 gives the data-size epsilon). L^2_{x,y}
/// norms use Plancherel for f_k = (2 pi)^{-1} int f e^{-ikx} dx, i.e.
/// ||f||^2 = 2 pi int ||f_k||^2 dk.
EpsilonNorm epsilon_norm(const Field& field, double t, double nu, const EnergyConstants& constants,
                         const ModeBank& bank);

struct EmbeddingRatios {
    std::array<double, 4> ratios{};
    std::array<bool, 4> flagged{};  // denominator zero with nonzero numerator
};

/// Empirical ratios LHS / RHS of the sup-norm embedding estimates:
///   0: int ||grad w||_inf dk        vs nu^{-5/6} D_tilde^{1/2}
///   1: int ||grad psi||_inf dk      vs E^{1/2}
///   2: int (int_0^t ||grad psi||_inf^2)^{1/2} dk  vs nu^{-2/3} D^{1/2}
///   3: int <c l s>^{2J} <k>^{2m} |k| ||grad psi||_inf^2 dk  vs nu^{-1/3} D_tilde
EmbeddingRatios check_embedding_ratios(const FieldSnapshot& snap, const KGrid& kgrid, double nu,
                                       const Grid1D& grid, const GlobalAccumulator& acc,
                                       const EnergyConstants& constants);

// sup_y |grad_k f| = sup_y sqrt(k^2 |f|^2 + |d_y f|^2) on dense interpolant samples.
double grad_sup_norm(double k, const CVector& f, const CVector& df, const Grid1D& grid);

}  // namespace poiseuille
