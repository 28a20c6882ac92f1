#pragma once

// Test-only reference computations. Each one takes a different route from the
// library code it checks: dense generic solvers, explicit tangent bases,
// quadrature, brute-force enumeration.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sphgp/geometry.hpp"
#include "sphgp/rng.hpp"

namespace sphgp::oracle {

/// Sigma(s) from an explicit orthonormal frame: s s' + g1 a1 a1' + g2 a2 a2',
/// where (a1, a2) is the (east, north) tangent basis rotated by kappa.
inline Eigen::Matrix3d anisotropy(const SphericalPoint& s, double g1, double g2, double kappa) {
    const Eigen::Vector3d radial(std::cos(s.lat) * std::cos(s.lon), std::cos(s.lat) * std::sin(s.lon), std::sin(s.lat));
    const Eigen::Vector3d east(-std::sin(s.lon), std::cos(s.lon), 0.0);
    const Eigen::Vector3d north(-std::sin(s.lat) * std::cos(s.lon), -std::sin(s.lat) * std::sin(s.lon), std::cos(s.lat));
    const Eigen::Vector3d a1 = std::cos(kappa) * east + std::sin(kappa) * north;
    const Eigen::Vector3d a2 = -std::sin(kappa) * east + std::cos(kappa) * north;
    return radial * radial.transpose() + g1 * a1 * a1.transpose() + g2 * a2 * a2.transpose();
}

/// q via a pivoted LU solve on the dense sum.
inline double mahalanobis_q(const Eigen::Vector3d& xi, const Eigen::Vector3d& xj, const Eigen::Matrix3d& si,
                            const Eigen::Matrix3d& sj) {
    const Eigen::Vector3d d = xi - xj;
    const Eigen::Matrix3d sum = si + sj;
    const Eigen::Vector3d sol = sum.fullPivLu().solve(d);
    return std::sqrt(2.0 * d.dot(sol));
}

/// c via LU determinants.
inline double normalizer_c(const Eigen::Matrix3d& si, const Eigen::Matrix3d& sj) {
    const double di = si.fullPivLu().determinant();
    const double dj = sj.fullPivLu().determinant();
    const double dm = (0.5 * (si + sj)).fullPivLu().determinant();
    return std::pow(di, 0.25) * std::pow(dj, 0.25) / std::sqrt(dm);
}

/// K_nu(r) = int_0^inf exp(-r cosh t) cosh(nu t) dt by composite Simpson.
inline double bessel_k_quadrature(double nu, double r) {
    // integrand is below 1e-300 relative once r cosh t > r + 700
    const double upper = std::acosh(1.0 + 700.0 / r) + 1.0;
    const int n = 20000;
    const double h = upper / n;
    const auto f = [&](double t) { return std::exp(-r * std::cosh(t)) * std::cosh(nu * t); };
    double s = f(0.0) + f(upper);
    for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return s * h / 3.0;
}

inline double matern_quadrature(double r, double nu) {
    if (r == 0.0) return 1.0;
    return std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(r, nu) * bessel_k_quadrature(nu, r);
}

/// log N(y; 0, C) through a dense LDLT with explicit determinant.
inline double mvn_logpdf(const Eigen::MatrixXd& cov, const Eigen::VectorXd& y) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    const Eigen::VectorXd sol = ldlt.solve(y);
    double logdet = 0.0;
    const Eigen::VectorXd dg = ldlt.vectorD();
    for (Eigen::Index i = 0; i < dg.size(); ++i) logdet += std::log(dg(i));
    return -0.5 * (static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi) + logdet + y.dot(sol));
}

/// Moments of the Gaussian conditional of block `b` given block `a` = y_a.
struct Conditional {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

inline Conditional gaussian_conditional(const Eigen::MatrixXd& s_aa, const Eigen::MatrixXd& s_ab,
                                        const Eigen::MatrixXd& s_bb, const Eigen::VectorXd& y_a) {
    const Eigen::MatrixXd inv = s_aa.inverse();
    return {s_ab.transpose() * inv * y_a, s_bb - s_ab.transpose() * inv * s_ab};
}

/// Uniformly random point on the sphere, away from the poles by `margin`.
inline SphericalPoint random_point(Rng& rng, double margin = 1e-3) {
    const double z = rng.uniform(-1.0, 1.0) * std::cos(margin);
    return {rng.uniform(-pi, pi), std::asin(z)};
}

/// Haar-distributed rotation (QR of a Gaussian matrix, sign-corrected, det +1).
inline Eigen::Matrix3d random_rotation(Rng& rng) {
    Eigen::Matrix3d g;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) g(i, j) = rng.normal();
    }
    Eigen::HouseholderQR<Eigen::Matrix3d> qr(g);
    Eigen::Matrix3d q = qr.householderQ();
    const Eigen::Matrix3d r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < 3; ++i) {
        if (r(i, i) < 0) q.col(i) *= -1.0;
    }
    if (q.determinant() < 0) q.col(0) *= -1.0;
    return q;
}

inline SphericalPoint rotate(const Eigen::Matrix3d& q, const SphericalPoint& s) {
    const Eigen::Vector3d v = q * to_vec3(s);
    const double lat = std::asin(std::clamp(v.z(), -1.0, 1.0));
    return {std::atan2(v.y(), v.x()), lat};
}

}  // namespace sphgp::oracle
