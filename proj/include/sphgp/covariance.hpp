#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sphgp/errors.hpp"
#include "sphgp/geometry.hpp"
#include "sphgp/matern.hpp"

namespace sphgp {

/// Largest admissible |linear predictor| of a log-linear scale field.
inline constexpr double max_log_scale = 40.0;

/// gamma(s) = exp(b0 + b1 sin(lon) + b2 lat).
struct GammaField {
    double b0 = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;

    [[nodiscard]] double log_value(const SphericalPoint& s) const {
        const double eta = b0 + b1 * std::sin(s.lon) + b2 * s.lat;
        if (!std::isfinite(eta) || std::abs(eta) > max_log_scale) {
            throw ParameterOverflow("log scale " + std::to_string(eta) + " outside [-40, 40]");
        }
        return eta;
    }
    [[nodiscard]] double operator()(const SphericalPoint& s) const { return std::exp(log_value(s)); }
    [[nodiscard]] std::array<double, 3> coefficients() const { return {b0, b1, b2}; }

    friend bool operator==(const GammaField&, const GammaField&) = default;
};

/// Positive field over the sphere: a constant, or an arbitrary callable hook.
class ScalarField {
public:
    ScalarField(double value = 1.0) : constant_(value) {}  // NOLINT(google-explicit-constructor)

    static ScalarField from_function(std::function<double(const SphericalPoint&)> f) {
        ScalarField out;
        out.fn_ = std::make_shared<const std::function<double(const SphericalPoint&)>>(std::move(f));
        return out;
    }

    [[nodiscard]] double operator()(const SphericalPoint& s) const { return fn_ ? (*fn_)(s) : constant_; }
    [[nodiscard]] bool is_constant() const { return fn_ == nullptr; }
    [[nodiscard]] double constant() const { return constant_; }

private:
    double constant_;
    std::shared_ptr<const std::function<double(const SphericalPoint&)>> fn_;
};

enum class ModelKind { isotropic, axially_symmetric, general };

[[nodiscard]] inline std::string_view to_string(ModelKind k) {
    switch (k) {
        case ModelKind::isotropic: return "isotropic";
        case ModelKind::axially_symmetric: return "axially_symmetric";
        case ModelKind::general: return "general";
    }
    return "general";
}

[[nodiscard]] inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "isotropic" || s == "iso") return ModelKind::isotropic;
    if (s == "axially_symmetric" || s == "axial") return ModelKind::axially_symmetric;
    if (s == "general" || s == "nonstationary") return ModelKind::general;
    throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

inline constexpr std::array<ModelKind, 3> all_model_kinds = {ModelKind::isotropic, ModelKind::axially_symmetric,
                                                             ModelKind::general};

/// Fixed (non-estimated) part of the Matern covariance.
struct KernelSettings {
    double sigma = 1.0;
    double nu = 0.5;
    double nugget = 0.0;
};

/// Nonstationary Matern covariance on the sphere.
///
/// The local anisotropy at s is Sigma(s) = R(s) Rx(kappa) diag(1, g1(s), g2(s)) Rx(kappa)' R(s)'
/// where g1 scales the east-west and g2 the north-south tangent direction.
struct CovarianceModel {
    ModelKind kind = ModelKind::general;
    GammaField gamma1;
    GammaField gamma2;
    double kappa = 0.0;
    ScalarField sigma{1.0};
    ScalarField nu{0.5};
    double nugget = 0.0;

    /// Checks the structural constraints of `kind` and the parameter ranges.
    void validate() const {
        if (!(kappa >= 0.0 && kappa < half_pi)) throw ConfigError("kappa must lie in [0, pi/2)");
        if (!(nugget >= 0.0) || !std::isfinite(nugget)) throw ConfigError("nugget must be >= 0");
        if (sigma.is_constant() && !(sigma.constant() > 0.0)) throw ConfigError("sigma must be > 0");
        if (nu.is_constant() && !(nu.constant() > 0.0)) throw ConfigError("nu must be > 0");
        switch (kind) {
            case ModelKind::isotropic:
                if (gamma1.b1 != 0 || gamma1.b2 != 0 || gamma2.b1 != 0 || gamma2.b2 != 0 || gamma1.b0 != gamma2.b0 ||
                    kappa != 0) {
                    throw ConfigError("isotropic model requires beta10 = beta20, other betas and kappa zero");
                }
                break;
            case ModelKind::axially_symmetric:
                if (gamma1.b1 != 0 || gamma2.b1 != 0 || kappa != 0) {
                    throw ConfigError("axially symmetric model requires beta11 = beta21 = kappa = 0");
                }
                break;
            case ModelKind::general:
                break;
        }
    }
};

[[nodiscard]] inline CovarianceModel make_isotropic(double beta0, const KernelSettings& k = {}) {
    CovarianceModel m;
    m.kind = ModelKind::isotropic;
    m.gamma1 = {beta0, 0.0, 0.0};
    m.gamma2 = {beta0, 0.0, 0.0};
    m.sigma = k.sigma;
    m.nu = k.nu;
    m.nugget = k.nugget;
    return m;
}

[[nodiscard]] inline CovarianceModel make_axially_symmetric(double beta10, double beta12, double beta20,
                                                            double beta22, const KernelSettings& k = {}) {
    CovarianceModel m;
    m.kind = ModelKind::axially_symmetric;
    m.gamma1 = {beta10, 0.0, beta12};
    m.gamma2 = {beta20, 0.0, beta22};
    m.sigma = k.sigma;
    m.nu = k.nu;
    m.nugget = k.nugget;
    return m;
}

[[nodiscard]] inline CovarianceModel make_general(const std::array<double, 3>& beta1, const std::array<double, 3>& beta2,
                                                  double kappa, const KernelSettings& k = {}) {
    CovarianceModel m;
    m.kind = ModelKind::general;
    m.gamma1 = {beta1[0], beta1[1], beta1[2]};
    m.gamma2 = {beta2[0], beta2[1], beta2[2]};
    m.kappa = kappa;
    m.sigma = k.sigma;
    m.nu = k.nu;
    m.nugget = k.nugget;
    return m;
}

/// Data-generating parameters of the three simulation scenarios.
[[nodiscard]] inline CovarianceModel reference_model(ModelKind kind, const KernelSettings& k = {}) {
    switch (kind) {
        case ModelKind::isotropic: return make_isotropic(-0.5, k);
        case ModelKind::axially_symmetric: return make_axially_symmetric(-0.5, 1.44, -3.2, 1.44, k);
        case ModelKind::general: return make_general({-0.5, -1.2, 1.44}, {-3.2, -0.3, 1.44}, 0.8, k);
    }
    return make_general({-0.5, -1.2, 1.44}, {-3.2, -0.3, 1.44}, 0.8, k);
}

[[nodiscard]] inline Mat3 local_anisotropy(const SphericalPoint& s, const CovarianceModel& model) {
    const double g1 = model.gamma1(s);
    const double g2 = model.gamma2(s);
    const Mat3 rot = frame_rotation(s) * rotation(Axis::x, model.kappa);
    const Mat3 sigma = rot * Eigen::Vector3d(1.0, g1, g2).asDiagonal() * rot.transpose();
    return 0.5 * (sigma + sigma.transpose());
}

/// Everything a pairwise covariance needs about one location.
struct LocalFrame {
    Vec3 xyz;
    Mat3 root;                 // Sigma(s) = root * root'
    double det_quarter = 1.0;  // |Sigma(s)|^(1/4)
    double sd = 1.0;
    double nu = 0.5;
};

[[nodiscard]] inline LocalFrame local_frame(const SphericalPoint& s, const CovarianceModel& model) {
    LocalFrame f;
    const double g1 = model.gamma1(s);
    const double g2 = model.gamma2(s);
    f.xyz = to_vec3(s);
    f.root = frame_rotation(s) * rotation(Axis::x, model.kappa) *
             Eigen::Vector3d(1.0, std::sqrt(g1), std::sqrt(g2)).asDiagonal();
    f.det_quarter = std::pow(g1 * g2, 0.25);
    f.sd = model.sigma(s);
    f.nu = model.nu(s);
    return f;
}

[[nodiscard]] inline std::vector<LocalFrame> local_frames(std::span<const SphericalPoint> locs,
                                                          const CovarianceModel& model) {
    std::vector<LocalFrame> out;
    out.reserve(locs.size());
    for (const auto& s : locs) out.push_back(local_frame(s, model));
    return out;
}

/// Mahalanobis distance q and normalizer c for a pair of frames.
struct PairTerms {
    double q = 0.0;
    double c = 1.0;
};

[[nodiscard]] inline PairTerms pair_terms(const LocalFrame& first, const LocalFrame& second) {
    // canonical order so the result is bitwise symmetric in its arguments
    const bool swap = std::lexicographical_compare(second.xyz.begin(), second.xyz.end(), first.xyz.begin(),
                                                   first.xyz.end());
    const LocalFrame& a = swap ? second : first;
    const LocalFrame& b = swap ? first : second;
    if (a.xyz == b.xyz && a.root == b.root) return {};
    const Vec3 d = a.xyz - b.xyz;
    const Mat3 sum = a.root * a.root.transpose() + b.root * b.root.transpose();
    Mat3 r;  // upper factor, Sa + Sb = R'R
    const Eigen::LLT<Mat3> llt(sum);
    const Mat3 l = llt.matrixL();
    if (llt.info() == Eigen::Success && l.diagonal().minCoeff() > 1e-3) {
        r = l.transpose();
    } else {
        // Near-singular sum (tiny tangent scales): factor B' with B = [root_a root_b]
        // so the small eigenvalues are not lost when Sa + Sb is formed.
        Eigen::Matrix<double, 6, 3> bt;
        bt.topRows<3>() = a.root.transpose();
        bt.bottomRows<3>() = b.root.transpose();
        const Eigen::HouseholderQR<Eigen::Matrix<double, 6, 3>> qr(bt);
        r = qr.matrixQR().topRows<3>().triangularView<Eigen::Upper>();
    }
    const double diag_prod = r(0, 0) * r(1, 1) * r(2, 2);
    const double det_sum = diag_prod * diag_prod;
    if (!(det_sum > 0.0) || !std::isfinite(det_sum)) {
        throw NumericalSingularity("anisotropy sum has determinant " + std::to_string(det_sum));
    }
    // d' (R'R)^-1 d = |R'^-1 d|^2
    const Vec3 w = r.transpose().triangularView<Eigen::Lower>().solve(d);
    const double quad = w.squaredNorm();
    PairTerms t;
    t.q = std::sqrt(std::max(0.0, 2.0 * quad));
    // |(Sa + Sb)/2|^(1/2) = sqrt(det_sum / 8)
    t.c = std::min(1.0, a.det_quarter * b.det_quarter / std::sqrt(det_sum / 8.0));
    return t;
}

/// Covariance between two frames, without the nugget.
[[nodiscard]] inline double frame_covariance(const LocalFrame& a, const LocalFrame& b) {
    const PairTerms t = pair_terms(a, b);
    return a.sd * b.sd * t.c * matern(t.q, 0.5 * (a.nu + b.nu));
}

[[nodiscard]] inline double mahalanobis_q(const SphericalPoint& si, const SphericalPoint& sj,
                                          const CovarianceModel& model) {
    return pair_terms(local_frame(si, model), local_frame(sj, model)).q;
}

[[nodiscard]] inline double normalizer_c(const SphericalPoint& si, const SphericalPoint& sj,
                                         const CovarianceModel& model) {
    return pair_terms(local_frame(si, model), local_frame(sj, model)).c;
}

/// Nonstationary correlation c(si,sj) M(q(si,sj)).
[[nodiscard]] inline double correlation(const SphericalPoint& si, const SphericalPoint& sj,
                                        const CovarianceModel& model) {
    const LocalFrame a = local_frame(si, model);
    const LocalFrame b = local_frame(sj, model);
    const PairTerms t = pair_terms(a, b);
    return t.c * matern(t.q, 0.5 * (a.nu + b.nu));
}

/// Full covariance; the nugget is added when the two points coincide.
[[nodiscard]] inline double covariance(const SphericalPoint& si, const SphericalPoint& sj,
                                       const CovarianceModel& model) {
    const LocalFrame a = local_frame(si, model);
    const LocalFrame b = local_frame(sj, model);
    double c = frame_covariance(a, b);
    if (a.xyz == b.xyz) c += model.nugget;
    return c;
}

/// Points closer than this (chordal) count as the same location.
inline constexpr double duplicate_tolerance = 1e-12;

/// Dense covariance over `locs`. The nugget is added on the diagonal only, so
/// repeated locations are admissible when nugget > 0.
[[nodiscard]] inline Eigen::MatrixXd covariance_matrix(std::span<const LocalFrame> frames, double nugget) {
    const auto n = static_cast<Eigen::Index>(frames.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& fi = frames[static_cast<std::size_t>(i)];
        out(i, i) = fi.sd * fi.sd + nugget;
        for (Eigen::Index j = 0; j < i; ++j) {
            const auto& fj = frames[static_cast<std::size_t>(j)];
            if (nugget == 0.0 && (fi.xyz - fj.xyz).norm() < duplicate_tolerance) {
                throw DuplicateLocation(static_cast<std::size_t>(j), static_cast<std::size_t>(i));
            }
            out(i, j) = out(j, i) = frame_covariance(fi, fj);
        }
    }
    return out;
}

[[nodiscard]] inline Eigen::MatrixXd covariance_matrix(std::span<const SphericalPoint> locs,
                                                       const CovarianceModel& model) {
    const auto frames = local_frames(locs, model);
    return covariance_matrix(frames, model.nugget);
}

/// Cross-covariance block between two location sets (no nugget).
[[nodiscard]] inline Eigen::MatrixXd cross_covariance(std::span<const LocalFrame> rows,
                                                      std::span<const LocalFrame> cols) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = frame_covariance(rows[i], cols[j]);
        }
    }
    return out;
}

}  // namespace sphgp
