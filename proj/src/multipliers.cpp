#include "poiseuille/multipliers.hpp"

#include <cmath>
#include <string>

#include "poiseuille/errors.hpp"

namespace poiseuille {

namespace {

void require_viscosity(double nu) {
    if (!(nu > 0.0 && nu < 1.0))
        throw DomainError("viscosity nu must lie in (0, 1), got " + std::to_string(nu));
}

}  // namespace

void EnergyConstants::validate() const {
    if (!(c_alpha > 0.0 && c_beta > 0.0 && c_gamma > 0.0 && c > 0.0))
        throw ConfigError("energy constants c_alpha, c_beta, c_gamma, c must be positive");
    if (!(c_beta - c_alpha * c_alpha > 0.0))
        throw ConfigError("energy constants violate c_beta - c_alpha^2 > 0");
    if (!(c_gamma - 8.0 * c_beta * c_beta / c_alpha > 0.0))
        throw ConfigError("energy constants violate c_gamma - 8 c_beta^2 / c_alpha > 0");
    if (!(J >= 1.0) || !std::isfinite(J)) throw ConfigError("time-weight exponent J must be >= 1");
    if (!(m > 0.75 && m < 1.0)) throw ConfigError("x-regularity exponent m must lie in (3/4, 1)");
}

bool high_frequency_branch(double k, double nu) { return std::abs(k) >= std::cbrt(1.0 / nu); }

MultiplierSet eval_multipliers(double k, double nu) {
    require_viscosity(nu);
    const double ak = std::abs(k);
    if (high_frequency_branch(k, nu)) {
        const double root = std::sqrt(nu / ak);
        return {root, 1.0 / ak, 1.0 / root, std::sqrt(nu * ak)};
    }
    const double nu13 = std::cbrt(nu);
    return {nu13 * nu13, nu13, 1.0 / (nu13 * nu13), nu * ak * ak};
}

double time_weight_M_from_rate(double lambda, double c, double J, double t) {
    const double u = c * lambda * t;
    return std::exp(0.5 * J * J * (std::atan(u) - u / (1.0 + u * u)));
}

double time_weight_M(double k, double nu, double c, double J, double t) {
    return time_weight_M_from_rate(eval_multipliers(k, nu).lambda, c, J, t);
}

double bracket(double x) { return std::hypot(1.0, x); }

std::array<double, 6> epsilon_weights(double k, double nu, double m) {
    require_viscosity(nu);
    if (!(m > 0.75 && m < 1.0)) throw DomainError("epsilon_weights: m must lie in (3/4, 1)");
    const double nu13 = std::cbrt(nu);
    const double base = std::pow(bracket(k), m);
    const double inner = bracket(nu13 * k);
    const double grad = nu13 * base * std::pow(inner, -0.25);
    const double moment = base * std::pow(inner, 0.25) / nu13;
    return {base, grad, moment, moment, 1.0, 1.0};
}

}  // namespace poiseuille
