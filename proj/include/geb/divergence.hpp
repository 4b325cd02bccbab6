#ifndef GEB_DIVERGENCE_HPP
#define GEB_DIVERGENCE_HPP

#include "geb/errors.hpp"

namespace geb {

// Alpha-divergence generator family on alpha in [0, 1], convex orientation:
//
//   f(u) = (u^a - a*u - (1-a)) / (a*(a-1)),   f''(u) = u^(a-2) > 0,
//
// with the closed-form limits u*ln(u) - u + 1 at a=1 (reverse KL) and
// u - 1 - ln(u) at a=0 (forward KL). Evaluation switches to the limit
// branch when a is within boundary_tol of 0 or 1; interior evaluation is
// expm1/log1p based so the two branches agree tightly near the switch.
struct DivergenceSpec {
    double alpha = 1.0;
    double boundary_tol = 1e-9;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw ConfigError("alpha must lie in [0,1], got " + std::to_string(alpha));
        if (!(boundary_tol > 0.0))
            throw ConfigError("boundary_tol must be positive");
    }
};

double f_value(const DivergenceSpec& spec, double u);
double f_prime(const DivergenceSpec& spec, double u);
double f_second(const DivergenceSpec& spec, double u);

// Inverse of f_prime. Domain: v < 1/(1-a) for a < 1; all reals at a=1.
double f_prime_inverse(const DivergenceSpec& spec, double v);

// h(u) = u*f'(u) - f(u), the reparameterized bonus integrand. Simplifies
// to (u^a - 1)/a, with limit ln(u) at a=0; h'(u) = u*f''(u) = u^(a-1).
double h_value(const DivergenceSpec& spec, double u);
double h_prime(const DivergenceSpec& spec, double u);

} // namespace geb

#endif
