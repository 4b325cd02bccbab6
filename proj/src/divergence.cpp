#include "geb/divergence.hpp"

#include <cmath>
#include <string>

namespace geb {

namespace {

void check_u(double u) {
    if (!(u > 0.0))
        throw DomainError("generator argument must be positive, got " + std::to_string(u));
}

} // namespace

double f_value(const DivergenceSpec& spec, double u) {
    spec.validate();
    check_u(u);
    const double a = spec.alpha;
    if (a < spec.boundary_tol) return u - 1.0 - std::log(u);
    if (1.0 - a < spec.boundary_tol) return u * std::log(u) - u + 1.0;
    // (u^a - a*u - (1-a)) / (a*(a-1)). Two algebraic forms of the
    // numerator, each with both terms O(distance to the near boundary),
    // so neither suffers cancellation on its half of [0,1].
    const double lu = std::log(u);
    if (a <= 0.5) return (std::expm1(a * lu) - a * (u - 1.0)) / (a * (a - 1.0));
    return (u * std::expm1((a - 1.0) * lu) + (1.0 - a) * (u - 1.0)) / (a * (a - 1.0));
}

double f_prime(const DivergenceSpec& spec, double u) {
    spec.validate();
    check_u(u);
    const double a = spec.alpha;
    if (a < spec.boundary_tol) return 1.0 - 1.0 / u;
    if (1.0 - a < spec.boundary_tol) return std::log(u);
    return std::expm1((a - 1.0) * std::log(u)) / (a - 1.0);
}

double f_second(const DivergenceSpec& spec, double u) {
    spec.validate();
    check_u(u);
    return std::pow(u, spec.alpha - 2.0);
}

double f_prime_inverse(const DivergenceSpec& spec, double v) {
    spec.validate();
    const double a = spec.alpha;
    if (1.0 - a < spec.boundary_tol) return std::exp(v);
    // f' maps (0, inf) onto (-inf, 1/(1-a)) for a < 1.
    const double t = (a - 1.0) * v;
    if (!(t > -1.0))
        throw DomainError("f_prime_inverse: v=" + std::to_string(v) +
                          " outside range of f'; admissible v < " +
                          std::to_string(1.0 / (1.0 - a)));
    if (a < spec.boundary_tol) return 1.0 / (1.0 - v);
    // log1p keeps full precision when (a-1)v is tiny.
    return std::exp(std::log1p(t) / (a - 1.0));
}

double h_value(const DivergenceSpec& spec, double u) {
    spec.validate();
    check_u(u);
    const double a = spec.alpha;
    if (a < spec.boundary_tol) return std::log(u);
    return std::expm1(a * std::log(u)) / a;
}

double h_prime(const DivergenceSpec& spec, double u) {
    spec.validate();
    check_u(u);
    return std::pow(u, spec.alpha - 1.0);
}

} // namespace geb
