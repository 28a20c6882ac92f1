#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sphgp/covariance.hpp"
#include "sphgp/errors.hpp"
#include "sphgp/geometry.hpp"
#include "sphgp/rng.hpp"
#include "sphgp/vecchia.hpp"

namespace sphgp {

/// Regular lon/lat grid. Longitudes start at -pi with the +pi endpoint
/// excluded; latitudes sit at the centers of n_lat equal bands, so the poles
/// are never included.
struct GridSpec {
    std::size_t n_lon = 50;
    std::size_t n_lat = 50;
};

/// Grid points, latitude-major (lat outer, lon inner).
[[nodiscard]] inline std::vector<SphericalPoint> latlon_grid(const GridSpec& spec) {
    if (spec.n_lon == 0 || spec.n_lat == 0) throw InvalidInput("grid dimensions must be >= 1");
    std::vector<SphericalPoint> out;
    out.reserve(spec.n_lon * spec.n_lat);
    for (std::size_t j = 0; j < spec.n_lat; ++j) {
        const double lat = -half_pi + pi * (static_cast<double>(j) + 0.5) / static_cast<double>(spec.n_lat);
        for (std::size_t i = 0; i < spec.n_lon; ++i) {
            const double lon = -pi + 2.0 * pi * static_cast<double>(i) / static_cast<double>(spec.n_lon);
            out.push_back({lon, lat});
        }
    }
    return out;
}

/// Exact realization y = L z with C = L L'. If the factorization fails, a
/// diagonal jitter starting at 1e-12 sigma^2 is raised tenfold up to 1e-6.
[[nodiscard]] inline std::vector<double> sample_gp(const CovarianceModel& model, std::span<const SphericalPoint> locs,
                                                   std::uint64_t seed) {
    if (locs.size() > max_dense_size) throw InvalidInput("dense simulation limited to 5000 locations");
    Eigen::MatrixXd cov = covariance_matrix(locs, model);
    const auto n = cov.rows();
    double scale = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, cov(i, i));

    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    double jitter = 1e-12 * scale;
    while (llt.info() != Eigen::Success) {
        if (jitter > 1e-6 * scale * (1.0 + 1e-9)) {
            throw SimulationInfeasible("covariance not positive definite after jitter 1e-6");
        }
        llt.compute(cov + jitter * Eigen::MatrixXd::Identity(n, n));
        jitter *= 10.0;
    }

    Rng rng(seed);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
    const Eigen::VectorXd y = llt.matrixL() * z;
    return {y.data(), y.data() + n};
}

}  // namespace sphgp
