#include "poiseuille/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace poiseuille {

KGrid::KGrid(double k_max, double delta_k) : delta_k_(delta_k) {
    if (!(delta_k > 0.0)) throw ConfigError("delta_k must be positive");
    if (!(k_max >= 0.0)) throw ConfigError("K_max must be nonnegative");
    const double ratio = k_max / delta_k;
    half_count_ = static_cast<int>(std::llround(ratio));
    if (std::abs(ratio - half_count_) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError("K_max must be an integer multiple of delta_k");
}

double KGrid::quadrature_weight(int j) const {
    if (half_count_ == 0) return delta_k_;
    return (j == 0 || j == size() - 1) ? 0.5 * delta_k_ : delta_k_;
}

Field Field::zeros(const KGrid& kgrid, int n_y, double nu) {
    Field f;
    f.kgrid = kgrid;
    f.nu = nu;
    f.modes.assign(kgrid.size(), CVector::Zero(n_y));
    return f;
}

double Field::reality_defect() const {
    double worst = 0.0;
    for (int j = 0; j < size(); ++j) {
        const int mj = kgrid.mirror(j);
        worst = std::max(worst, (modes[mj] - modes[j].conjugate()).cwiseAbs().maxCoeff());
    }
    return worst;
}

void Field::enforce_reality() {
    const int z = kgrid.zero_index();
    for (int j = z; j < size(); ++j) {
        const int mj = kgrid.mirror(j);
        if (mj == j) {
            modes[j] = modes[j].real().cast<Complex>();
            continue;
        }
        CVector sym = 0.5 * (modes[j] + modes[mj].conjugate());
        modes[j] = sym;
        modes[mj] = sym.conjugate();
    }
}

Field Field::scaled(double a) const {
    Field out = *this;
    for (auto& m : out.modes) m *= a;
    return out;
}

ModeBank::ModeBank(const Grid1D& grid, const KGrid& kgrid, double nu) : grid_(&grid), kgrid_(kgrid), nu_(nu) {
    generators_.reserve(kgrid.size());
    for (int j = 0; j < kgrid.size(); ++j)
        generators_.push_back(std::make_shared<Generator>(kgrid.k(j), nu, grid));
}

}  // namespace poiseuille
