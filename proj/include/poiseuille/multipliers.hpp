#pragma once

#include <array>

namespace poiseuille {

// Fourier-side weights for one (k, nu).
struct MultiplierSet {
    double alpha;
    double beta;
    double gamma;
    double lambda;  // decay-rate multiplier, 1/time
};

// Tunable constants of the energy functional and the global time weights.
struct EnergyConstants {
    double c_alpha = 0.1;
    double c_beta = 0.05;
    double c_gamma = 0.5;
    double c = 0.01;
    double J = 1.0;
    double m = 0.8;

    // Throws ConfigError when c_beta - c_alpha^2 <= 0, c_gamma - 8 c_beta^2 / c_alpha <= 0,
    // any constant nonpositive, J < 1, or m outside (3/4, 1).
    void validate() const;
};

// |k| >= nu^{-1/3} is the enhanced-dissipation branch.
bool high_frequency_branch(double k, double nu);

// Requires nu in (0, 1), else DomainError.
MultiplierSet eval_multipliers(double k, double nu);

// Closed-form time weight: exp[(J^2/2)(atan u - u/(1+u^2))], u = c lambda_k t.
double time_weight_M(double k, double nu, double c, double J, double t);
double time_weight_M_from_rate(double lambda, double c, double J, double t);

// <x> = sqrt(1 + x^2)
double bracket(double x);

// Weights multiplying, in order: omega, grad omega, y omega, d_y Delta^{-1} omega,
// and the two L^inf_k L^2_y terms (unit weights).
std::array<double, 6> epsilon_weights(double k, double nu, double m);

}  // namespace poiseuille
