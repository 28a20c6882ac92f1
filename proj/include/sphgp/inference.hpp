#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sphgp/covariance.hpp"
#include "sphgp/rng.hpp"
#include "sphgp/scoring.hpp"
#include "sphgp/vecchia.hpp"

namespace sphgp {

// ---------------------------------------------------------------------------
// Parameter transforms
// ---------------------------------------------------------------------------

/// Number of unconstrained coordinates sampled for each model kind.
[[nodiscard]] inline std::size_t free_dimension(ModelKind kind) {
    switch (kind) {
        case ModelKind::isotropic: return 1;
        case ModelKind::axially_symmetric: return 4;
        case ModelKind::general: return 7;
    }
    return 7;
}

[[nodiscard]] inline std::vector<std::string> parameter_names(ModelKind kind) {
    switch (kind) {
        case ModelKind::isotropic: return {"beta0"};
        case ModelKind::axially_symmetric: return {"beta10", "beta12", "beta20", "beta22"};
        case ModelKind::general: return {"beta10", "beta11", "beta12", "beta20", "beta21", "beta22", "kappa_logit"};
    }
    return {};
}

namespace detail {
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
}  // namespace detail

/// kappa = (pi/2) * logistic(r).
[[nodiscard]] inline double kappa_from_raw(double r) { return half_pi / (1.0 + std::exp(-r)); }
[[nodiscard]] inline double raw_from_kappa(double kappa) {
    const double p = kappa / half_pi;
    return std::log(p) - std::log1p(-p);
}
/// log d kappa / d r.
[[nodiscard]] inline double log_jacobian_kappa(double r) {
    return std::log(half_pi) - detail::softplus(-r) - detail::softplus(r);
}

/// Maps an unconstrained vector onto a model of the given kind.
[[nodiscard]] inline CovarianceModel build_model(ModelKind kind, std::span<const double> raw,
                                                 const KernelSettings& kernel) {
    if (raw.size() != free_dimension(kind)) throw InvalidInput("parameter vector has wrong dimension");
    switch (kind) {
        case ModelKind::isotropic: return make_isotropic(raw[0], kernel);
        case ModelKind::axially_symmetric: return make_axially_symmetric(raw[0], raw[1], raw[2], raw[3], kernel);
        case ModelKind::general:
            return make_general({raw[0], raw[1], raw[2]}, {raw[3], raw[4], raw[5]}, kappa_from_raw(raw[6]), kernel);
    }
    throw InvalidInput("unknown model kind");
}

/// Inverse of build_model on the free coordinates.
[[nodiscard]] inline std::vector<double> unconstrain(const CovarianceModel& m) {
    switch (m.kind) {
        case ModelKind::isotropic: return {m.gamma1.b0};
        case ModelKind::axially_symmetric: return {m.gamma1.b0, m.gamma1.b2, m.gamma2.b0, m.gamma2.b2};
        case ModelKind::general:
            return {m.gamma1.b0, m.gamma1.b1, m.gamma1.b2, m.gamma2.b0, m.gamma2.b1, m.gamma2.b2,
                    raw_from_kappa(m.kappa)};
    }
    return {};
}

/// Callable raw -> model for a fixed kind and fixed kernel settings.
struct ModelBuilder {
    ModelKind kind = ModelKind::isotropic;
    KernelSettings kernel;

    [[nodiscard]] CovarianceModel operator()(std::span<const double> raw) const { return build_model(kind, raw, kernel); }
};

// ---------------------------------------------------------------------------
// Posterior
// ---------------------------------------------------------------------------

/// Independent Normal(0, beta_sd^2) on each beta coordinate; kappa uniform on
/// (0, pi/2). With `flat` the beta prior is dropped (the kappa Jacobian stays).
struct Prior {
    bool flat = false;
    double beta_sd = 10.0;
};

[[nodiscard]] inline double log_prior(ModelKind kind, std::span<const double> raw, const Prior& prior) {
    if (prior.flat) return 0.0;
    const std::size_t n_beta = kind == ModelKind::general ? 6 : raw.size();
    double lp = 0.0;
    for (std::size_t i = 0; i < n_beta; ++i) {
        const double z = raw[i] / prior.beta_sd;
        lp += -0.5 * (log_two_pi + z * z) - std::log(prior.beta_sd);
    }
    if (kind == ModelKind::general) lp -= std::log(half_pi);
    return lp;
}

/// Training data and fixed settings for one fit.
struct FitProblem {
    ModelKind kind = ModelKind::isotropic;
    KernelSettings kernel;
    std::span<const SphericalPoint> locs;
    std::span<const double> y;
    const VecchiaPlan* plan = nullptr;
    Prior prior;
};

/// Vecchia log-likelihood + log prior + kappa log-Jacobian. Numerical
/// failures (overflowing scales, singular blocks) give -inf.
[[nodiscard]] inline double log_posterior(std::span<const double> raw, const FitProblem& p) {
    if (raw.size() != free_dimension(p.kind)) throw InvalidInput("parameter vector has wrong dimension");
    for (const double r : raw) {
        if (!std::isfinite(r)) return -std::numeric_limits<double>::infinity();
    }
    double lj = 0.0;
    if (p.kind == ModelKind::general) lj = log_jacobian_kappa(raw[6]);
    try {
        const CovarianceModel model = build_model(p.kind, raw, p.kernel);
        return vecchia_loglik(model, p.locs, p.y, *p.plan) + log_prior(p.kind, raw, p.prior) + lj;
    } catch (const Error& e) {
        if (e.error_class() == ErrorClass::numerical) return -std::numeric_limits<double>::infinity();
        throw;
    }
}

// ---------------------------------------------------------------------------
// Robust adaptive Metropolis
// ---------------------------------------------------------------------------

struct RamSettings {
    std::size_t n_iter = 5000;
    std::uint64_t seed = 0;
    double target_accept = 0.234;
    double init_scale = 0.1;
    /// Adaptation step eta_t = t^(-adapt_exponent); disabled when `adapt` is false.
    double adapt_exponent = 2.0 / 3.0;
    bool adapt = true;
};

struct Chain {
    std::size_t dim = 0;
    std::vector<std::vector<double>> draws;
    std::vector<double> log_posts;
    std::vector<char> accepted;
    /// Lower-triangular proposal factor after each step, row-major packed.
    std::vector<std::vector<double>> scale_history;
    std::size_t nan_count = 0;

    [[nodiscard]] std::size_t size() const { return draws.size(); }

    [[nodiscard]] double acceptance_rate() const {
        if (accepted.empty()) return 0.0;
        std::size_t a = 0;
        for (const char f : accepted) a += f ? 1 : 0;
        return static_cast<double>(a) / static_cast<double>(accepted.size());
    }
};

using LogDensity = std::function<double(std::span<const double>)>;

/// Robust adaptive Metropolis (Gaussian proposals, rank-one adaptation of the
/// proposal factor S toward the target acceptance rate):
///   S S' <- S (I + eta_t (alpha_t - alpha*) u u' / |u|^2) S'.
[[nodiscard]] inline Chain run_mcmc(const LogDensity& target, std::vector<double> init, const RamSettings& cfg) {
    if (cfg.n_iter < 1) throw InvalidInput("n_iter must be >= 1");
    if (!(cfg.target_accept > 0.0 && cfg.target_accept < 1.0)) throw InvalidInput("target_accept must be in (0,1)");
    const auto d = static_cast<Eigen::Index>(init.size());
    if (d == 0) throw InvalidInput("empty parameter vector");

    Chain chain;
    chain.dim = init.size();
    chain.draws.reserve(cfg.n_iter);
    chain.log_posts.reserve(cfg.n_iter);
    chain.accepted.reserve(cfg.n_iter);
    chain.scale_history.reserve(cfg.n_iter);

    Rng rng(cfg.seed);
    bool warned = false;
    const auto eval = [&](std::span<const double> x) {
        const double v = target(x);
        if (std::isnan(v)) {
            ++chain.nan_count;
            if (!warned) {
                std::cerr << "warning: target density returned NaN; treating as -inf\n";
                warned = true;
            }
            return -std::numeric_limits<double>::infinity();
        }
        return v;
    };

    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(init.data(), d);
    double lp = eval(init);
    Eigen::MatrixXd s = cfg.init_scale * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd u(d);
    std::vector<double> prop(init.size());

    for (std::size_t t = 1; t <= cfg.n_iter; ++t) {
        for (Eigen::Index i = 0; i < d; ++i) u(i) = rng.normal();
        const Eigen::VectorXd y = x + s * u;
        for (Eigen::Index i = 0; i < d; ++i) prop[static_cast<std::size_t>(i)] = y(i);
        const double lp_prop = eval(prop);
        double alpha = 0.0;
        if (lp_prop > -std::numeric_limits<double>::infinity()) {
            alpha = lp == -std::numeric_limits<double>::infinity() ? 1.0 : std::min(1.0, std::exp(lp_prop - lp));
        }
        const bool accept = rng.uniform() < alpha;
        if (accept) {
            x = y;
            lp = lp_prop;
        }

        if (cfg.adapt) {
            const double eta = std::pow(static_cast<double>(t), -cfg.adapt_exponent);
            const double un2 = u.squaredNorm();
            if (un2 > 0.0) {
                const Eigen::MatrixXd inner = Eigen::MatrixXd::Identity(d, d) +
                                              (eta * (alpha - cfg.target_accept) / un2) * (u * u.transpose());
                const Eigen::MatrixXd m = s * inner * s.transpose();
                Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (m + m.transpose()));
                if (llt.info() == Eigen::Success) s = llt.matrixL();
            }
        }

        chain.draws.emplace_back(x.data(), x.data() + d);
        chain.log_posts.push_back(lp);
        chain.accepted.push_back(accept ? 1 : 0);
        std::vector<double> packed;
        packed.reserve(static_cast<std::size_t>(d * (d + 1) / 2));
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) packed.push_back(s(i, j));
        }
        chain.scale_history.push_back(std::move(packed));
    }
    return chain;
}

// ---------------------------------------------------------------------------
// Posterior predictive
// ---------------------------------------------------------------------------

struct RetainSettings {
    std::size_t burn_in = 1000;
    std::size_t thin = 1;
    std::size_t max_draws = 500;
};

/// Post-burn-in draws, thinned, then evenly subsampled down to `max_draws`.
[[nodiscard]] inline std::vector<std::vector<double>> retained_draws(const Chain& chain, const RetainSettings& r) {
    if (r.burn_in >= chain.size()) throw InvalidInput("burn-in must be shorter than the chain");
    if (r.thin == 0) throw InvalidInput("thin must be >= 1");
    std::vector<std::size_t> idx;
    for (std::size_t i = r.burn_in; i < chain.size(); i += r.thin) idx.push_back(i);
    if (r.max_draws > 0 && idx.size() > r.max_draws) {
        std::vector<std::size_t> sub;
        for (std::size_t j = 0; j < r.max_draws; ++j) sub.push_back(idx[j * idx.size() / r.max_draws]);
        idx = std::move(sub);
    }
    std::vector<std::vector<double>> out;
    out.reserve(idx.size());
    for (const auto i : idx) out.push_back(chain.draws[i]);
    return out;
}

/// Data shared by the predictive routines.
struct PredictionProblem {
    std::span<const SphericalPoint> train_locs;
    std::span<const double> y_train;
    std::span<const SphericalPoint> test_locs;
    std::size_t m = 10;
};

/// Equal-weight Gaussian mixture per test location, one component per draw.
/// Repeated draws (rejected proposals) reuse their kriging result.
[[nodiscard]] inline std::vector<PredictiveMixture> posterior_predictive(
    std::span<const std::vector<double>> draws, const std::function<CovarianceModel(std::span<const double>)>& builder,
    const PredictionProblem& p) {
    if (draws.empty()) throw InvalidInput("no posterior draws");
    std::map<std::vector<double>, std::vector<GaussianPredictive>> cache;
    std::vector<PredictiveMixture> out(p.test_locs.size());
    const double w = 1.0 / static_cast<double>(draws.size());
    for (const auto& draw : draws) {
        auto it = cache.find(draw);
        if (it == cache.end()) {
            it = cache.emplace(draw, vecchia_predict(builder(draw), p.train_locs, p.y_train, p.test_locs, p.m)).first;
        }
        for (std::size_t t = 0; t < out.size(); ++t) {
            out[t].means.push_back(it->second[t].mean);
            out[t].variances.push_back(it->second[t].variance);
            out[t].weights.push_back(w);
        }
    }
    return out;
}

[[nodiscard]] inline std::vector<PredictiveMixture> posterior_predictive(const Chain& chain, const RetainSettings& r,
                                                                         const ModelBuilder& builder,
                                                                         const PredictionProblem& p) {
    const auto draws = retained_draws(chain, r);
    return posterior_predictive(draws, builder, p);
}

/// Joint draws from the posterior predictive: each draw picks a posterior
/// sample uniformly, then samples the sequential joint predictive under it.
[[nodiscard]] inline std::vector<std::vector<double>> posterior_joint_samples(
    std::span<const std::vector<double>> draws, const std::function<CovarianceModel(std::span<const double>)>& builder,
    const PredictionProblem& p, std::size_t n_samples, std::uint64_t seed) {
    if (draws.empty()) throw InvalidInput("no posterior draws");
    Rng rng(seed);
    std::map<std::vector<double>, SequentialPredictor> cache;
    std::vector<std::vector<double>> out;
    out.reserve(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) {
        const auto& draw = draws[rng.below(draws.size())];
        auto it = cache.find(draw);
        if (it == cache.end()) {
            it = cache.emplace(draw, SequentialPredictor(builder(draw), p.train_locs, p.test_locs, p.m)).first;
        }
        out.push_back(it->second.sample(p.y_train, rng));
    }
    return out;
}

}  // namespace sphgp
