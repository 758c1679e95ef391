#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "poiseuille/energy.hpp"
#include "poiseuille/field.hpp"

namespace poiseuille {

/// Index bookkeeping for the discrete k-convolution on a uniform grid.
///
/// int f_{k-k'} g_{k'} dk' becomes delta_k * sum_l f_{j-l+M} g_l, keeping only
/// pairs whose difference lands inside the grid. Modes with
/// |k| > dealias * K_max are zeroed after every evaluation.
class ConvolutionPlan {
public:
    ConvolutionPlan(const KGrid& kgrid, double dealias = 2.0 / 3.0);

    const KGrid& kgrid() const { return kgrid_; }
    double dealias() const { return dealias_; }
    bool retained(int j) const { return keep_[j]; }
    // Zero the modes above the cutoff in place.
    void project(Field& field) const;

private:
    KGrid kgrid_;
    double dealias_;
    std::vector<bool> keep_;
};

// Velocity-side data reused by the convolution: psi_k, d_y psi_k and d_y omega_k.
struct StreamData {
    std::vector<CVector> psi;
    std::vector<CVector> dpsi;
    std::vector<CVector> domega;
};

StreamData stream_data(const Field& field, const ModeBank& bank);

/// NL_k = -delta_k sum_{k'} [ i(k-k') psi_{k-k'} d_y w_{k'} - d_y psi_{k-k'} i k' w_{k'} ],
/// truncated to the grid, dealiased and made conjugate-symmetric.
Field nonlinear_term(const Field& field, const ModeBank& bank, const ConvolutionPlan& plan);
Field nonlinear_term(const Field& field, const StreamData& data, const ConvolutionPlan& plan);

// Bound on sup_{x,y} |u| from the mode amplitudes: int ||grad_k psi_k||_inf dk (node maximum).
double velocity_bound(const Field& field, const StreamData& data, const Grid1D& grid);

/// Heun-type IMEX step for the full per-mode system: linear part by implicit
/// midpoint, NL_k explicit with a predictor/corrector average.
class NonlinearStepper {
public:
    NonlinearStepper(const ModeBank& bank, const ConvolutionPlan& plan, double dt);

    double dt() const { return dt_; }
    // Largest dt allowed by the advection guard 0.5 / (K_max u_max + eps).
    double guard_time_step(const Field& field) const;
    // Advance one step in place. Throws NumericalError on non-finite data.
    void step(Field& field) const;

private:
    const ModeBank* bank_;
    const ConvolutionPlan* plan_;
    double dt_;
    std::vector<std::unique_ptr<MidpointPropagator>> props_;
};

Field step_nonlinear(const Field& field, double dt, const ConvolutionPlan& plan, const ModeBank& bank);

// -------------------------------------------------------------------------
// Nonlinear budget.

struct BudgetTerms {
    double t = 0.0;
    // Instantaneous k-integrands of T1..T6 (weights included, not yet time-integrated).
    std::array<double, 6> rates{};
    // Per-k integrands of T7 and T8 before the factor 2 / 4 and the sup.
    std::vector<double> y_pairing;
    std::vector<double> psi_pairing;
    // NL_1 integrand rebuilt from the directional derivative of E_k.
    double nl1_pairing = 0.0;
};

BudgetTerms nl_budget(const FieldSnapshot& snap, const Field& nl, const ModeBank& bank,
                      const EnergyConstants& constants);

/// Trapezoid-in-time accumulation of T1..T8 and NN L(t).
class BudgetAccumulator {
public:
    explicit BudgetAccumulator(const KGrid& kgrid);

    void add(const BudgetTerms& terms);
    // T1..T8 at the current time.
    std::array<double, 8> totals() const;
    double nl_total() const;
    double nl1_pairing_integral() const { return nl1_pair_; }

private:
    KGrid kgrid_;
    std::optional<BudgetTerms> last_;
    std::array<double, 6> t16_{};
    std::vector<double> y_int_;
    std::vector<double> psi_int_;
    double nl1_pair_ = 0.0;
};

// -------------------------------------------------------------------------
// Bootstrap experiment.

struct BootstrapSample {
    double t = 0.0;
    double energy = 0.0;       // E = E1 + E2
    double dissipation = 0.0;  // D = D1 + D2
    double nl = 0.0;           // NN L(t)
    std::array<double, 8> terms{};
    double nl1_pairing = 0.0;
};

struct BootstrapRun {
    double amplitude = 0.0;
    double energy0 = 0.0;
    double sup_energy = 0.0;
    bool bound_held = true;  // E(t) <= 2 E(0) on every sample
    std::optional<double> empirical_C;
    bool blew_up = false;
    std::string failure;
    double final_dt = 0.0;
    std::vector<BootstrapSample> series;
};

struct BootstrapRunOptions {
    double nu = 1e-2;
    double T = 1.0;
    double dt = 0.0;  // 0: automatic
    int observer_stride = 1;
};

/// Evolve the truncated nonlinear system from `initial`, recording E, D, NN L
/// and the empirical constant C = sup_t |NN L| / (nu^{-7/6} D sup_{s<=t} E^{1/2}).
BootstrapRun run_bootstrap(const Field& initial, const ModeBank& bank, const ConvolutionPlan& plan,
                           const EnergyConstants& constants, const BootstrapRunOptions& opts);

// Threshold of the bootstrap argument: c^2 C^{-2} nu^{7/3}.
double implied_threshold(double c, double C, double nu);

}  // namespace poiseuille
