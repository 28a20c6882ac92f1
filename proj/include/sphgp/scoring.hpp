#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "sphgp/errors.hpp"
#include "sphgp/vecchia.hpp"

namespace sphgp {

/// Finite Gaussian mixture predictive distribution for one location.
struct PredictiveMixture {
    std::vector<double> means;
    std::vector<double> variances;
    std::vector<double> weights;

    /// Equal-weight mixture of the given components.
    static PredictiveMixture equal_weights(std::span<const GaussianPredictive> comps) {
        PredictiveMixture m;
        const double w = 1.0 / static_cast<double>(comps.size());
        for (const auto& c : comps) {
            m.means.push_back(c.mean);
            m.variances.push_back(c.variance);
            m.weights.push_back(w);
        }
        return m;
    }

    [[nodiscard]] std::size_t size() const { return means.size(); }

    void validate() const {
        if (means.empty()) throw InvalidInput("empty mixture");
        if (variances.size() != means.size() || weights.size() != means.size()) {
            throw InvalidInput("mixture component arrays differ in length");
        }
        double total = 0.0;
        for (std::size_t i = 0; i < means.size(); ++i) {
            if (!(variances[i] > 0.0)) throw InvalidInput("mixture variance must be > 0");
            if (!(weights[i] >= 0.0)) throw InvalidInput("mixture weight must be >= 0");
            total += weights[i];
        }
        if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("mixture weights do not sum to 1");
    }

    [[nodiscard]] double mean() const {
        double s = 0.0;
        for (std::size_t i = 0; i < means.size(); ++i) s += weights[i] * means[i];
        return s;
    }

    [[nodiscard]] double variance() const {
        const double mu = mean();
        double s = 0.0;
        for (std::size_t i = 0; i < means.size(); ++i) {
            s += weights[i] * (variances[i] + (means[i] - mu) * (means[i] - mu));
        }
        return s;
    }
};

namespace detail {

inline void check_pair(std::span<const double> a, std::span<const double> b) {
    if (a.empty()) throw InvalidInput("no predictions to score");
    if (a.size() != b.size()) throw InvalidInput("predictions and observations differ in length");
}

/// E|X| for X ~ N(mu, v).
inline double abs_normal_mean(double mu, double v) {
    const double sd = std::sqrt(v);
    const double z = mu / sd;
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
    return mu * (2.0 * cdf - 1.0) + 2.0 * sd * pdf;
}

}  // namespace detail

[[nodiscard]] inline double mae(std::span<const double> pred, std::span<const double> y) {
    detail::check_pair(pred, y);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(pred[i] - y[i]);
    return s / static_cast<double>(y.size());
}

[[nodiscard]] inline double rmse(std::span<const double> pred, std::span<const double> y) {
    detail::check_pair(pred, y);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (pred[i] - y[i]) * (pred[i] - y[i]);
    return std::sqrt(s / static_cast<double>(y.size()));
}

/// Closed-form CRPS of a Gaussian mixture:
/// sum_i w_i E|X_i - y| - 1/2 sum_ij w_i w_j E|X_i - X_j|.
[[nodiscard]] inline double crps_mixture(const PredictiveMixture& mix, double y) {
    mix.validate();
    const std::size_t k = mix.size();
    double first = 0.0;
    for (std::size_t i = 0; i < k; ++i) first += mix.weights[i] * detail::abs_normal_mean(y - mix.means[i], mix.variances[i]);
    double second = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            row += mix.weights[j] *
                   detail::abs_normal_mean(mix.means[i] - mix.means[j], mix.variances[i] + mix.variances[j]);
        }
        second += mix.weights[i] * row;
    }
    return std::max(0.0, first - 0.5 * second);
}

/// Energy score of an ensemble of joint draws against the observed vector.
[[nodiscard]] inline double energy_score(std::span<const std::vector<double>> samples, std::span<const double> y) {
    if (samples.empty()) throw InvalidInput("energy score needs at least one sample");
    for (const auto& s : samples) {
        if (s.size() != y.size()) throw InvalidInput("sample dimension does not match observation");
    }
    const auto dist = [](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    };
    // Visit samples in lexicographic order so the floating-point result does
    // not depend on how the caller ordered them.
    const std::size_t m = samples.size();
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(samples[a].begin(), samples[a].end(), samples[b].begin(), samples[b].end());
    });
    std::vector<double> to_obs(m);
    std::vector<double> row_sums(m);
    std::vector<double> row;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& si = samples[idx[i]];
        to_obs[i] = dist(si, y);
        row.clear();
        for (std::size_t j = 0; j < i; ++j) row.push_back(dist(si, samples[idx[j]]));
        row_sums[i] = pairwise_sum(row);
    }
    const double md = static_cast<double>(m);
    // the i<j pairs counted once, the full double sum is twice that
    return pairwise_sum(to_obs) / md - pairwise_sum(row_sums) / (md * md);
}

}  // namespace sphgp
