#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sphgp/covariance.hpp"
#include "sphgp/errors.hpp"
#include "sphgp/geometry.hpp"
#include "sphgp/rng.hpp"

namespace sphgp {

/// Ordering plus nearest-neighbor conditioning sets.
/// `cond_sets[i]` holds earlier *positions* (indices into `order`), nearest first.
struct VecchiaPlan {
    std::vector<std::size_t> order;
    std::vector<std::vector<std::size_t>> cond_sets;
    std::size_t m = 0;
};

struct GaussianPredictive {
    double mean = 0.0;
    double variance = 1.0;
};

inline constexpr double log_two_pi = 1.8378770664093454836;  // log(2 pi)

/// Pairwise summation; fixed reduction tree so totals are reproducible.
[[nodiscard]] inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (const double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

[[nodiscard]] inline std::vector<Vec3> to_vec3(std::span<const SphericalPoint> locs) {
    std::vector<Vec3> out;
    out.reserve(locs.size());
    for (const auto& s : locs) out.push_back(to_vec3(s));
    return out;
}

/// The `k` entries of `pool[0..count)` nearest to `target`, ties to the smaller index.
[[nodiscard]] inline std::vector<std::size_t> nearest_indices(const Vec3& target, std::span<const Vec3> pool,
                                                              std::size_t count, std::size_t k) {
    k = std::min(k, count);
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(count);
    for (std::size_t j = 0; j < count; ++j) cand.emplace_back((pool[j] - target).squaredNorm(), j);
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    std::vector<std::size_t> out(k);
    for (std::size_t j = 0; j < k; ++j) out[j] = cand[j].second;
    return out;
}

/// Maximum-minimum-distance ordering (chordal). Starts from the point nearest
/// the normalized centroid; a centroid at the origin falls back to index 0.
[[nodiscard]] inline std::vector<std::size_t> maxmin_order(std::span<const Vec3> pts) {
    const std::size_t n = pts.size();
    if (n == 0) return {};
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(n);

    std::size_t first = 0;
    if (centroid.norm() > 1e-12) {
        const Vec3 c = centroid.normalized();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const double d = (pts[i] - c).squaredNorm();
            if (d < best) {
                best = d;
                first = i;
            }
        }
    }

    std::vector<std::size_t> order;
    order.reserve(n);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> nearest(n, first);
    std::vector<char> used(n, 0);
    std::size_t next = first;
    for (std::size_t step = 0; step < n; ++step) {
        if (step > 0 && min_d2[next] < duplicate_tolerance * duplicate_tolerance) {
            throw DuplicateLocation(std::min(nearest[next], next), std::max(nearest[next], next));
        }
        order.push_back(next);
        used[next] = 1;
        const Vec3& p = pts[next];
        std::size_t best = n;
        double best_d2 = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            const double d2 = (pts[i] - p).squaredNorm();
            if (d2 < min_d2[i]) {
                min_d2[i] = d2;
                nearest[i] = next;
            }
            if (min_d2[i] > best_d2) {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        next = best;
    }
    return order;
}

[[nodiscard]] inline std::vector<std::size_t> maxmin_order(std::span<const SphericalPoint> locs) {
    const auto pts = to_vec3(locs);
    return maxmin_order(std::span<const Vec3>(pts));
}

/// For each position i in `ordered`, the min(m, i) nearest earlier positions.
[[nodiscard]] inline std::vector<std::vector<std::size_t>> nearest_neighbor_sets(std::span<const Vec3> ordered,
                                                                                 std::size_t m) {
    std::vector<std::vector<std::size_t>> sets(ordered.size());
    for (std::size_t i = 1; i < ordered.size(); ++i) sets[i] = nearest_indices(ordered[i], ordered, i, m);
    return sets;
}

[[nodiscard]] inline VecchiaPlan make_plan(std::span<const SphericalPoint> locs, std::size_t m) {
    const auto pts = to_vec3(locs);
    VecchiaPlan plan;
    plan.m = m;
    plan.order = maxmin_order(std::span<const Vec3>(pts));
    std::vector<Vec3> ordered;
    ordered.reserve(pts.size());
    for (const auto idx : plan.order) ordered.push_back(pts[idx]);
    plan.cond_sets = nearest_neighbor_sets(ordered, m);
    return plan;
}

namespace detail {

/// log N(y_i | y_g) from the Cholesky factor of Cov([y_g; y_i]).
inline double conditional_term(std::span<const LocalFrame> frames, std::span<const std::size_t> idx,
                               std::span<const double> y, double nugget, std::size_t position) {
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd a(k, k);
    Eigen::VectorXd v(k);
    for (Eigen::Index r = 0; r < k; ++r) {
        const auto& fr = frames[idx[static_cast<std::size_t>(r)]];
        a(r, r) = fr.sd * fr.sd + nugget;
        for (Eigen::Index c = 0; c < r; ++c) {
            a(r, c) = a(c, r) = frame_covariance(fr, frames[idx[static_cast<std::size_t>(c)]]);
        }
        v(r) = y[idx[static_cast<std::size_t>(r)]];
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    const double tail = llt.matrixLLT()(k - 1, k - 1);
    if (llt.info() != Eigen::Success || !(tail > 0.0) || !std::isfinite(tail)) {
        throw NumericalSingularity("conditional variance not positive", position);
    }
    llt.matrixL().solveInPlace(v);
    const double w = v(k - 1);
    return -0.5 * (log_two_pi + 2.0 * std::log(tail) + w * w);
}

}  // namespace detail

/// Vecchia log-likelihood: sum over positions of log f(y_i | y_g(i)).
[[nodiscard]] inline double vecchia_loglik(const CovarianceModel& model, std::span<const SphericalPoint> locs,
                                           std::span<const double> y, const VecchiaPlan& plan) {
    if (y.size() != locs.size() || plan.order.size() != locs.size()) {
        throw InvalidInput("observations, locations and plan differ in size");
    }
    const auto frames = local_frames(locs, model);
    std::vector<double> terms(locs.size());
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < plan.order.size(); ++i) {
        idx.clear();
        for (const auto pos : plan.cond_sets[i]) idx.push_back(plan.order[pos]);
        idx.push_back(plan.order[i]);
        terms[i] = detail::conditional_term(frames, idx, y, model.nugget, i);
    }
    return pairwise_sum(terms);
}

inline constexpr std::size_t max_dense_size = 5000;

/// Exact Gaussian log-density via dense Cholesky (n <= 5000).
[[nodiscard]] inline double exact_loglik(const CovarianceModel& model, std::span<const SphericalPoint> locs,
                                         std::span<const double> y) {
    if (y.size() != locs.size()) throw InvalidInput("observations and locations differ in size");
    if (locs.size() > max_dense_size) throw InvalidInput("dense likelihood limited to 5000 locations");
    const Eigen::MatrixXd cov = covariance_matrix(locs, model);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalSingularity("covariance matrix not positive definite");
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    llt.matrixL().solveInPlace(w);
    const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < diag.size(); ++i) logdet += 2.0 * std::log(diag(i));
    return -0.5 * (static_cast<double>(y.size()) * log_two_pi + logdet + w.squaredNorm());
}

namespace detail {

/// Kriging weights b = K^-1 c and conditional variance of `target` given `nbrs`.
struct KrigingStep {
    std::vector<std::size_t> nbrs;
    Eigen::VectorXd weights;
    double variance = 1.0;
};

inline KrigingStep kriging_step(const LocalFrame& target, std::span<const LocalFrame> pool,
                                std::vector<std::size_t> nbrs, double nugget, std::size_t position) {
    const auto k = static_cast<Eigen::Index>(nbrs.size());
    Eigen::MatrixXd a(k, k);
    Eigen::VectorXd c(k);
    for (Eigen::Index r = 0; r < k; ++r) {
        const auto& fr = pool[nbrs[static_cast<std::size_t>(r)]];
        a(r, r) = fr.sd * fr.sd + nugget;
        for (Eigen::Index q = 0; q < r; ++q) {
            a(r, q) = a(q, r) = frame_covariance(fr, pool[nbrs[static_cast<std::size_t>(q)]]);
        }
        c(r) = frame_covariance(target, fr);
    }
    const double prior = target.sd * target.sd + nugget;
    KrigingStep step;
    step.nbrs = std::move(nbrs);
    if (k == 0) {
        step.variance = prior;
        return step;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw NumericalSingularity("neighbor covariance not positive definite", position);
    step.weights = llt.solve(c);
    double var = prior - c.dot(step.weights);
    if (!std::isfinite(var) || var < -1e-8 * prior) {
        throw NumericalSingularity("predictive variance " + std::to_string(var), position);
    }
    step.variance = std::max(var, 1e-14 * prior);
    return step;
}

}  // namespace detail

/// Marginal kriging predictions from the m nearest training observations.
[[nodiscard]] inline std::vector<GaussianPredictive> vecchia_predict(const CovarianceModel& model,
                                                                     std::span<const SphericalPoint> train_locs,
                                                                     std::span<const double> y_train,
                                                                     std::span<const SphericalPoint> test_locs,
                                                                     std::size_t m) {
    if (train_locs.empty()) throw InvalidInput("no training data");
    if (y_train.size() != train_locs.size()) throw InvalidInput("training values and locations differ in size");
    if (m == 0) throw InvalidInput("conditioning set size must be >= 1");
    const auto train = local_frames(train_locs, model);
    const auto train_xyz = to_vec3(train_locs);
    std::vector<GaussianPredictive> out;
    out.reserve(test_locs.size());
    for (std::size_t t = 0; t < test_locs.size(); ++t) {
        const LocalFrame target = local_frame(test_locs[t], model);
        auto nbrs = nearest_indices(target.xyz, train_xyz, train_xyz.size(), m);
        const auto step = detail::kriging_step(target, train, std::move(nbrs), model.nugget, t);
        double mean = 0.0;
        for (std::size_t r = 0; r < step.nbrs.size(); ++r) {
            mean += step.weights(static_cast<Eigen::Index>(r)) * y_train[step.nbrs[r]];
        }
        out.push_back({mean, step.variance});
    }
    return out;
}

/// Sequential approximate joint predictive over test points.
///
/// Test points are visited in maxmin order; each conditions on its m nearest
/// among the training points and the test points already visited. The
/// weights depend only on the model and locations, so they are computed once
/// and reused for every draw.
class SequentialPredictor {
public:
    SequentialPredictor(const CovarianceModel& model, std::span<const SphericalPoint> train_locs,
                        std::span<const SphericalPoint> test_locs, std::size_t m)
        : n_train_(train_locs.size()), n_test_(test_locs.size()) {
        if (train_locs.empty()) throw InvalidInput("no training data");
        if (m == 0) throw InvalidInput("conditioning set size must be >= 1");
        auto pool = local_frames(train_locs, model);
        auto pool_xyz = to_vec3(train_locs);
        const auto test_frames = local_frames(test_locs, model);
        std::vector<Vec3> test_xyz;
        for (const auto& f : test_frames) test_xyz.push_back(f.xyz);
        order_ = maxmin_order(std::span<const Vec3>(test_xyz));
        pool.reserve(n_train_ + n_test_);
        pool_xyz.reserve(n_train_ + n_test_);
        steps_.reserve(n_test_);
        for (std::size_t pos = 0; pos < order_.size(); ++pos) {
            const auto& target = test_frames[order_[pos]];
            auto nbrs = nearest_indices(target.xyz, pool_xyz, pool_xyz.size(), m);
            steps_.push_back(detail::kriging_step(target, pool, std::move(nbrs), model.nugget, order_[pos]));
            pool.push_back(target);
            pool_xyz.push_back(target.xyz);
        }
    }

    /// One joint draw, returned in the original test-location order.
    [[nodiscard]] std::vector<double> sample(std::span<const double> y_train, Rng& rng) const {
        if (y_train.size() != n_train_) throw InvalidInput("training values and locations differ in size");
        std::vector<double> pool(y_train.begin(), y_train.end());
        pool.reserve(n_train_ + n_test_);
        std::vector<double> out(n_test_);
        for (std::size_t pos = 0; pos < steps_.size(); ++pos) {
            const auto& step = steps_[pos];
            double mean = 0.0;
            for (std::size_t r = 0; r < step.nbrs.size(); ++r) {
                mean += step.weights(static_cast<Eigen::Index>(r)) * pool[step.nbrs[r]];
            }
            const double draw = mean + std::sqrt(step.variance) * rng.normal();
            pool.push_back(draw);
            out[order_[pos]] = draw;
        }
        return out;
    }

    [[nodiscard]] std::span<const std::size_t> order() const { return order_; }

private:
    std::size_t n_train_;
    std::size_t n_test_;
    std::vector<std::size_t> order_;
    std::vector<detail::KrigingStep> steps_;
};

[[nodiscard]] inline std::vector<double> joint_predictive_sample(const CovarianceModel& model,
                                                                 std::span<const SphericalPoint> train_locs,
                                                                 std::span<const double> y_train,
                                                                 std::span<const SphericalPoint> test_locs,
                                                                 std::size_t m, std::uint64_t seed) {
    Rng rng(seed);
    return SequentialPredictor(model, train_locs, test_locs, m).sample(y_train, rng);
}

}  // namespace sphgp
