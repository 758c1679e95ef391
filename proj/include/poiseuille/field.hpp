#pragma once

#include <memory>
#include <vector>

#include "poiseuille/grid.hpp"
#include "poiseuille/linear.hpp"

namespace poiseuille {

// Uniform symmetric wavenumber grid k_j = (j - M) * delta_k, j = 0..2M.
class KGrid {
public:
    KGrid(double k_max, double delta_k);

    double delta_k() const { return delta_k_; }
    double k_max() const { return half_count_ * delta_k_; }
    int half_count() const { return half_count_; }
    int size() const { return 2 * half_count_ + 1; }
    double k(int j) const { return (j - half_count_) * delta_k_; }
    int zero_index() const { return half_count_; }
    int mirror(int j) const { return 2 * half_count_ - j; }
    // Trapezoid weight for the k-integral (half weight at +-K_max).
    double quadrature_weight(int j) const;

private:
    double delta_k_;
    int half_count_;
};

/// Family of modes on a KGrid. With `reality` set, omega_{-k} = conj(omega_k).
struct Field {
    KGrid kgrid{1.0, 1.0};
    double nu = 0.0;
    double t = 0.0;
    bool reality = true;
    std::vector<CVector> modes;

    static Field zeros(const KGrid& kgrid, int n_y, double nu);
    int size() const { return static_cast<int>(modes.size()); }
    double k(int j) const { return kgrid.k(j); }
    ModeState mode_state(int j) const { return {kgrid.k(j), nu, t, modes[j]}; }

    // max_j max_i |omega_{-k}(y_i) - conj(omega_k(y_i))|
    double reality_defect() const;
    // Average each +-k pair onto the conjugate-symmetric subspace (k = 0 made real).
    void enforce_reality();
    Field scaled(double a) const;
};

/// Per-k Helmholtz factorizations and generators shared by diagnostics and
/// time stepping. Immutable once built.
class ModeBank {
public:
    ModeBank(const Grid1D& grid, const KGrid& kgrid, double nu);

    const Grid1D& grid() const { return *grid_; }
    const KGrid& kgrid() const { return kgrid_; }
    double nu() const { return nu_; }
    const Generator& generator(int j) const { return *generators_[j]; }

private:
    const Grid1D* grid_;
    KGrid kgrid_;
    double nu_;
    std::vector<std::shared_ptr<const Generator>> generators_;
};

}  // namespace poiseuille
