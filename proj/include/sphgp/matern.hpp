#pragma once

#include <algorithm>
#include <cmath>

#include "sphgp/errors.hpp"

namespace sphgp {

/// Unit-range Matern correlation M_nu(r) = 2^(1-nu)/Gamma(nu) r^nu K_nu(r).
///
/// Half-integer orders 1/2, 3/2, 5/2 use their closed forms; every other order
/// goes through the modified Bessel function of the second kind. M_nu(0) = 1.
[[nodiscard]] inline double matern_general(double r, double nu) {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw InvalidSmoothness(nu);
    if (r < 1e-12) return 1.0;
    const double log_k = std::log(std::cyl_bessel_k(nu, r));
    if (!std::isfinite(log_k)) return 0.0;  // K_nu underflow far in the tail
    const double log_m = (1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(r) + log_k;
    return std::min(1.0, std::exp(log_m));
}

[[nodiscard]] inline double matern(double r, double nu) {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw InvalidSmoothness(nu);
    if (r <= 0.0) return 1.0;
    if (nu == 0.5) return std::exp(-r);
    if (nu == 1.5) return (1.0 + r) * std::exp(-r);
    if (nu == 2.5) return (1.0 + r + r * r / 3.0) * std::exp(-r);
    return matern_general(r, nu);
}

}  // namespace sphgp
