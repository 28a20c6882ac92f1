// Acceptance checks. Usage: acceptance [N ...]; with no arguments every
// check runs. Prints one PASS/FAIL line per check and exits nonzero if any
// check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "sphgp/covariance.hpp"
#include "sphgp/inference.hpp"
#include "sphgp/pipeline.hpp"
#include "sphgp/rng.hpp"
#include "sphgp/scoring.hpp"
#include "sphgp/simulate.hpp"
#include "sphgp/vecchia.hpp"
#include "test_support.hpp"

namespace {

using namespace sphgp;

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Rotation invariance of the isotropic model.
Outcome rotation_invariance() {
    constexpr double tol = 1e-10;
    constexpr double max_seconds = 10.0;
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = make_isotropic(-0.5);
    Rng rng(101);
    double worst = 0.0;
    for (int p = 0; p < 500; ++p) {
        const auto a = oracle::random_point(rng);
        const auto b = oracle::random_point(rng);
        const double base = correlation(a, b, model);
        for (int r = 0; r < 20; ++r) {
            const auto q = oracle::random_rotation(rng);
            worst = std::max(worst, std::abs(correlation(oracle::rotate(q, a), oracle::rotate(q, b), model) - base));
        }
    }
    const double secs = seconds_since(t0);
    return {worst < tol && secs < max_seconds,
            fmt("max |rho(Qa,Qb) - rho(a,b)| = %.3e (tol %.0e) over 500 pairs x 20 rotations, %.2f s", worst, tol, secs)};
}

// 2. Longitude-shift invariance of the axially symmetric model.
Outcome longitude_invariance() {
    constexpr double tol = 1e-10;
    constexpr double max_seconds = 10.0;
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = make_axially_symmetric(-0.5, 1.44, -3.2, 1.44);
    Rng rng(102);
    double worst = 0.0;
    for (int p = 0; p < 500; ++p) {
        const auto a = oracle::random_point(rng);
        const auto b = oracle::random_point(rng);
        const double base = covariance(a, b, model);
        for (int r = 0; r < 20; ++r) {
            const double shift = rng.uniform(-pi, pi);
            const SphericalPoint as{wrap_longitude(a.lon + shift), a.lat};
            const SphericalPoint bs{wrap_longitude(b.lon + shift), b.lat};
            worst = std::max(worst, std::abs(covariance(as, bs, model) - base));
        }
    }
    const double secs = seconds_since(t0);
    return {worst < tol && secs < max_seconds,
            fmt("max |C(a+t,b+t) - C(a,b)| = %.3e (tol %.0e) over 500 pairs x 20 shifts, %.2f s", worst, tol, secs)};
}

// 3. Vecchia with full conditioning is exact; m = 10 beats m = 1.
Outcome vecchia_exactness() {
    constexpr double rel_tol = 1e-8;
    constexpr int min_improved = 9;
    Rng rng(103);
    double worst_rel = 0.0;
    int improved = 0;
    bool finite = true;
    for (int k = 0; k < 10; ++k) {
        const auto model = testing::random_general_model(rng);
        const auto locs = testing::random_points(rng, 60);
        const auto y = sample_gp(model, locs, derive_seed(103, static_cast<std::uint64_t>(k)));
        const double exact = exact_loglik(model, locs, y);
        const double full = vecchia_loglik(model, locs, y, make_plan(locs, 59));
        const double e10 = std::abs(vecchia_loglik(model, locs, y, make_plan(locs, 10)) - exact);
        const double e1 = std::abs(vecchia_loglik(model, locs, y, make_plan(locs, 1)) - exact);
        worst_rel = std::max(worst_rel, std::abs(full - exact) / std::abs(exact));
        finite = finite && std::isfinite(e10);
        improved += e10 < e1 ? 1 : 0;
    }
    return {worst_rel <= rel_tol && finite && improved >= min_improved,
            fmt("m=59 max rel error %.3e (tol %.0e); m=10 error < m=1 error on %d/10 (need %d)", worst_rel, rel_tol,
                improved, min_improved)};
}

// 4. Positive definiteness over random models and point sets.
Outcome positive_definiteness() {
    constexpr double tol = -1e-8;
    Rng rng(104);
    double worst = 1e300;
    for (int k = 0; k < 200; ++k) {
        CovarianceModel model;
        switch (k % 3) {
            case 0: model = make_isotropic(rng.uniform(-3.5, 0.0)); break;
            case 1:
                model = make_axially_symmetric(rng.uniform(-1.0, 0.0), rng.uniform(0.0, 2.0), rng.uniform(-3.5, -0.5),
                                               rng.uniform(0.0, 2.0));
                break;
            default: model = testing::random_general_model(rng); break;
        }
        model.nu = rng.uniform(0.3, 2.5);
        const auto n = static_cast<std::size_t>(2 + rng.below(59));
        const auto locs = testing::random_points(rng, n);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance_matrix(locs, model),
                                                                 Eigen::EigenvaluesOnly);
        worst = std::min(worst, eig.eigenvalues().minCoeff());
    }
    return {worst >= tol, fmt("min eigenvalue over 200 configurations = %.3e (need >= %.0e)", worst, tol)};
}

// 5. Closed-form determinant of the local anisotropy matrix with kappa = 0.
Outcome determinant_identity() {
    constexpr double tol = 1e-10;
    Rng rng(105);
    double worst = 0.0;
    double worst_equal = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const double lat = rng.uniform(-half_pi, half_pi);
        const double g1 = rng.uniform(0.01, 2.0);
        const double g2 = rng.uniform(0.01, 2.0);
        const SphericalPoint s{rng.uniform(-pi, pi), lat};
        const auto model = make_general({std::log(g1), 0, 0}, {std::log(g2), 0, 0}, 0.0);
        const double direct = local_anisotropy(s, model).fullPivLu().determinant();
        const double sc = std::sin(lat) * std::cos(lat);
        const double formula = g1 * g2 - 4.0 * sc * sc * g1 * (g2 - g1) * (1.0 - g1);
        worst = std::max(worst, std::abs(direct - formula));

        const auto equal = make_general({std::log(g1), 0, 0}, {std::log(g1), 0, 0}, 0.0);
        worst_equal =
            std::max(worst_equal, std::abs(local_anisotropy(s, equal).fullPivLu().determinant() - g1 * g1));
    }
    return {worst < tol && worst_equal < tol,
            fmt("max |det - closed form| = %.3e; equal-gamma max |det - g^2| = %.3e (tol %.0e) over 1e4 samples",
                worst, worst_equal, tol)};
}

// 6. CRPS against Monte Carlo; energy score against a closed form.
Outcome scoring_oracles() {
    constexpr double crps_se = 3.0;
    constexpr double energy_rel = 0.02;
    Rng rng(106);
    int crps_ok = 0;
    double worst_z = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t k = 1 + rng.below(4);
        PredictiveMixture mix;
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            mix.means.push_back(rng.uniform(-2, 2));
            mix.variances.push_back(rng.uniform(0.05, 2.0));
            mix.weights.push_back(rng.uniform(0.1, 1.0));
            total += mix.weights.back();
        }
        for (auto& w : mix.weights) w /= total;
        const double y = rng.uniform(-3, 3);
        const auto draw = [&] {
            double u = rng.uniform();
            std::size_t c = 0;
            while (c + 1 < k && u > mix.weights[c]) u -= mix.weights[c++];
            return mix.means[c] + std::sqrt(mix.variances[c]) * rng.normal();
        };
        const int n = 1000000;
        double s = 0.0, s2 = 0.0;
        for (int d = 0; d < n; ++d) {
            const double x = draw();
            const double xp = draw();
            const double v = std::abs(x - y) - 0.5 * std::abs(x - xp);
            s += v;
            s2 += v * v;
        }
        const double mean = s / n;
        const double se = std::sqrt((s2 / n - mean * mean) / n);
        const double z = std::abs(crps_mixture(mix, y) - mean) / se;
        worst_z = std::max(worst_z, z);
        crps_ok += z <= crps_se ? 1 : 0;
    }
    // X ~ N(0, I2), y = 0: E|X| - E|X - X'|/2 = sqrt(pi/2) - sqrt(pi)/2
    const double expected = std::sqrt(std::numbers::pi / 2) - 0.5 * std::sqrt(std::numbers::pi);
    std::vector<std::vector<double>> samples(20000);
    for (auto& x : samples) x = {rng.normal(), rng.normal()};
    const std::vector<double> origin{0.0, 0.0};
    const double rel = std::abs(energy_score(samples, origin) - expected) / expected;
    return {crps_ok == 20 && rel <= energy_rel,
            fmt("CRPS within 3 SE on %d/20 mixtures (max %.2f SE); energy rel error %.4f (tol %.2f)", crps_ok, worst_z,
                rel, energy_rel)};
}

// 7. RAM on a correlated bivariate normal.
Outcome ram_calibration() {
    constexpr double rho = 0.8;
    constexpr double accept_tol = 0.05;
    constexpr double mean_tol = 0.05;
    constexpr double var_rel_tol = 0.10;
    constexpr double corr_tol = 0.05;
    constexpr double max_seconds = 60.0;
    const auto t0 = std::chrono::steady_clock::now();
    const double det = 1.0 - rho * rho;
    const auto logp = [&](std::span<const double> x) {
        return -0.5 * (x[0] * x[0] - 2.0 * rho * x[0] * x[1] + x[1] * x[1]) / det;
    };
    RamSettings cfg;
    cfg.n_iter = 100000;
    cfg.seed = 107;
    const Chain chain = run_mcmc(logp, {0.0, 0.0}, cfg);
    const double secs = seconds_since(t0);
    const std::size_t burn = 10000;
    double m0 = 0, m1 = 0, s00 = 0, s11 = 0, s01 = 0;
    const double n = static_cast<double>(chain.size() - burn);
    for (std::size_t i = burn; i < chain.size(); ++i) {
        m0 += chain.draws[i][0] / n;
        m1 += chain.draws[i][1] / n;
    }
    for (std::size_t i = burn; i < chain.size(); ++i) {
        const double a = chain.draws[i][0] - m0;
        const double b = chain.draws[i][1] - m1;
        s00 += a * a / n;
        s11 += b * b / n;
        s01 += a * b / n;
    }
    const double corr = s01 / std::sqrt(s00 * s11);
    const double acc = chain.acceptance_rate();
    const bool ok = std::abs(acc - 0.234) <= accept_tol && std::abs(m0) <= mean_tol && std::abs(m1) <= mean_tol &&
                    std::abs(s00 - 1.0) <= var_rel_tol && std::abs(s11 - 1.0) <= var_rel_tol &&
                    std::abs(corr - rho) <= corr_tol && secs < max_seconds;
    return {ok, fmt("acceptance %.4f; mean (%.3f, %.3f); var (%.3f, %.3f); corr %.3f; %.1f s", acc, m0, m1, s00, s11,
                    corr, secs)};
}

ExperimentConfig desk_table_config() {
    auto c = preset("desk");
    c.seed = 2024;
    c.out = "";
    c.grid = {20, 20};
    c.mcmc.n_iter = 1000;
    c.mcmc.burn_in = 200;
    c.vecchia_m = 10;
    c.split.scheme = SplitScheme::random;
    c.split.test_frac = 0.2;
    c.experiment.splits = {SplitScheme::random};
    c.experiment.replicates = 3;
    return c;
}

double cell(const ExperimentResult& r, ModelKind t, ModelKind a, SplitScheme s, double Scores::*field) {
    const auto row = r.table.find({t, a});
    if (row == r.table.end()) return std::nan("");
    const auto e = row->second.find(s);
    if (e == row->second.end() || e->second.completed == 0) return std::nan("");
    return e->second.mean.*field;
}

// 8. Desk-scale score ordering over the 3 x 3 true/assumed grid.
Outcome desk_table() {
    constexpr double iso_spread = 0.02;
    constexpr double axial_ratio = 1.05;
    constexpr double crps_gap = 0.03;
    constexpr double max_seconds = 1800.0;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_experiment(desk_table_config());
    const double secs = seconds_since(t0);
    using enum ModelKind;
    const auto s = SplitScheme::random;

    const double ri = cell(r, isotropic, isotropic, s, &Scores::rmse);
    const double ra = cell(r, isotropic, axially_symmetric, s, &Scores::rmse);
    const double rg = cell(r, isotropic, general, s, &Scores::rmse);
    const double lo = std::min({ri, ra, rg});
    const double hi = std::max({ri, ra, rg});
    const bool a_ok = hi <= (1.0 + iso_spread) * lo;

    const double axi = cell(r, axially_symmetric, isotropic, s, &Scores::rmse);
    const double axa = cell(r, axially_symmetric, axially_symmetric, s, &Scores::rmse);
    const bool b_ok = axi >= axial_ratio * axa;

    const double ci = cell(r, general, isotropic, s, &Scores::crps);
    const double ca = cell(r, general, axially_symmetric, s, &Scores::crps);
    const double cg = cell(r, general, general, s, &Scores::crps);
    const bool c_ok = cg <= ca && ca <= ci && (ci - cg) >= crps_gap * ci;

    std::size_t failed = 0;
    for (const auto& c : r.cells) failed += c.scores ? 0 : 1;
    return {a_ok && b_ok && c_ok && failed == 0 && secs < max_seconds,
            fmt("(a) iso-truth RMSE %.4f/%.4f/%.4f spread %.2f%% %s; (b) axial-truth RMSE iso/axial %.4f/%.4f = %.3f %s; "
                "(c) general-truth CRPS gen/axial/iso %.4f/%.4f/%.4f gap %.2f%% %s; %zu failed cells; %.0f s",
                ri, ra, rg, 100.0 * (hi / lo - 1.0), a_ok ? "ok" : "MISS", axi, axa, axi / axa, b_ok ? "ok" : "MISS",
                cg, ca, ci, 100.0 * (ci - cg) / ci, c_ok ? "ok" : "MISS", failed, secs)};
}

// 9. Axially symmetric surrogate with smooth kernel and region split.
Outcome surrogate_region() {
    auto c = preset("desk");
    c.seed = 2025;
    c.out = "";
    c.grid = {36, 24};
    c.kernel.nu = 2.5;
    c.mcmc.n_iter = 1000;
    c.mcmc.burn_in = 200;
    c.split.scheme = SplitScheme::region;
    c.experiment.true_kinds = {ModelKind::axially_symmetric};
    c.experiment.splits = {SplitScheme::region};
    c.experiment.replicates = 3;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_experiment(c);
    const double secs = seconds_since(t0);
    using enum ModelKind;
    const auto s = SplitScheme::region;
    const double ri = cell(r, axially_symmetric, isotropic, s, &Scores::rmse);
    const double ra = cell(r, axially_symmetric, axially_symmetric, s, &Scores::rmse);
    const double rg = cell(r, axially_symmetric, general, s, &Scores::rmse);
    std::size_t failed = 0;
    for (const auto& cl : r.cells) failed += cl.scores ? 0 : 1;
    return {ri > ra && failed == 0,
            fmt("region RMSE iso %.4f > axial %.4f (general %.4f); %zu failed cells; %.0f s", ri, ra, rg, failed,
                secs)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> checks{
        {"rotation invariance", rotation_invariance},
        {"longitude invariance", longitude_invariance},
        {"vecchia exactness", vecchia_exactness},
        {"positive definiteness", positive_definiteness},
        {"determinant identity", determinant_identity},
        {"scoring oracles", scoring_oracles},
        {"mcmc calibration", ram_calibration},
        {"desk table ordering", desk_table},
        {"surrogate region split", surrogate_region},
    };
    std::vector<std::size_t> selected;
    for (int i = 1; i < argc; ++i) {
        const int k = std::atoi(argv[i]);
        if (k < 1 || k > static_cast<int>(checks.size())) {
            std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
            return 2;
        }
        selected.push_back(static_cast<std::size_t>(k));
    }
    if (selected.empty()) {
        for (std::size_t k = 1; k <= checks.size(); ++k) selected.push_back(k);
    }
    int failures = 0;
    for (const auto k : selected) {
        const auto& [name, run] = checks[k - 1];
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k, name, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
