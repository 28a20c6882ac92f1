#pragma once

// Batch pipeline: simulate -> split -> fit -> predict -> score, and the
// true x assumed experiment grid built from those steps.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sphgp/covariance.hpp"
#include "sphgp/data.hpp"
#include "sphgp/errors.hpp"
#include "sphgp/inference.hpp"
#include "sphgp/io.hpp"
#include "sphgp/rng.hpp"
#include "sphgp/scoring.hpp"
#include "sphgp/simulate.hpp"
#include "sphgp/vecchia.hpp"

namespace sphgp {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class SplitScheme { random, region };

[[nodiscard]] inline std::string_view to_string(SplitScheme s) { return s == SplitScheme::random ? "random" : "region"; }

[[nodiscard]] inline SplitScheme parse_split_scheme(std::string_view s) {
    if (s == "random") return SplitScheme::random;
    if (s == "region" || s == "regional") return SplitScheme::region;
    throw ConfigError("unknown split scheme '" + std::string(s) + "'");
}

struct DataConfig {
    std::string path;  // empty: simulate on the grid
    bool degrees = false;
    bool log_first = false;
    bool standardize = false;
};

struct SplitConfig {
    SplitScheme scheme = SplitScheme::random;
    double test_frac = 0.2;
    std::size_t n_regions = 10;
    double lon_halfwidth = 0.4;
    double lat_halfwidth = 0.2;

    [[nodiscard]] RegionSpec region_spec() const { return {n_regions, lon_halfwidth, lat_halfwidth, test_frac}; }
};

struct McmcConfig {
    std::size_t n_iter = 5000;
    std::size_t burn_in = 1000;
    std::size_t thin = 1;
    std::size_t max_draws = 500;
    double target_accept = 0.234;
    double init_scale = 0.1;
    double beta_sd = 10.0;
    std::vector<double> init;  // empty: all-zero raw vector
};

struct ExperimentGrid {
    std::vector<ModelKind> true_kinds{all_model_kinds.begin(), all_model_kinds.end()};
    std::vector<ModelKind> assumed_kinds{all_model_kinds.begin(), all_model_kinds.end()};
    std::vector<SplitScheme> splits{SplitScheme::random, SplitScheme::region};
    std::size_t replicates = 1;
    bool resume = false;
    std::size_t workers = 0;  // 0: hardware concurrency
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string out = "out";
    ModelKind true_kind = ModelKind::general;
    std::optional<CovarianceModel> true_model;  // overrides the reference parameters
    ModelKind assumed_kind = ModelKind::general;
    KernelSettings kernel;
    GridSpec grid{50, 50};
    DataConfig data;
    SplitConfig split;
    std::size_t vecchia_m = 10;
    McmcConfig mcmc;
    std::size_t energy_draws = 200;
    ExperimentGrid experiment;

    /// Generating model for a true kind: the explicit override when its kind
    /// matches, else the reference parameters, with this config's kernel.
    [[nodiscard]] CovarianceModel truth(ModelKind kind) const {
        if (true_model && true_model->kind == kind) return *true_model;
        return reference_model(kind, kernel);
    }

    void validate() const {
        if (vecchia_m < 1) throw ConfigError("vecchia_m must be >= 1");
        if (mcmc.n_iter < 1) throw ConfigError("mcmc.n_iter must be >= 1");
        if (mcmc.burn_in >= mcmc.n_iter) throw ConfigError("mcmc.burn_in must be < mcmc.n_iter");
        if (mcmc.thin < 1) throw ConfigError("mcmc.thin must be >= 1");
        if (!(mcmc.target_accept > 0.0 && mcmc.target_accept < 1.0)) throw ConfigError("mcmc.target_accept must be in (0, 1)");
        if (!(mcmc.init_scale > 0.0)) throw ConfigError("mcmc.init_scale must be > 0");
        if (!(mcmc.beta_sd > 0.0)) throw ConfigError("mcmc.beta_sd must be > 0");
        if (!(split.test_frac > 0.0 && split.test_frac < 1.0)) throw ConfigError("split.test_frac must be in (0, 1)");
        if (!(split.lon_halfwidth > 0.0 && split.lat_halfwidth > 0.0)) throw ConfigError("region half-widths must be > 0");
        if (grid.n_lon < 1 || grid.n_lat < 1) throw ConfigError("grid dimensions must be >= 1");
        if (!(kernel.sigma > 0.0)) throw ConfigError("sigma must be > 0");
        if (!(kernel.nu > 0.0)) throw ConfigError("nu must be > 0");
        if (!(kernel.nugget >= 0.0)) throw ConfigError("nugget must be >= 0");
        if (energy_draws < 1) throw ConfigError("score.energy_draws must be >= 1");
        if (experiment.replicates < 1) throw ConfigError("experiment.replicates must be >= 1");
        if (experiment.true_kinds.empty() || experiment.assumed_kinds.empty() || experiment.splits.empty()) {
            throw ConfigError("experiment lists must be nonempty");
        }
        if (!mcmc.init.empty() && mcmc.init.size() != free_dimension(assumed_kind)) {
            throw ConfigError("mcmc.init has " + std::to_string(mcmc.init.size()) + " entries; " +
                              std::string(to_string(assumed_kind)) + " needs " +
                              std::to_string(free_dimension(assumed_kind)));
        }
        if (true_model) true_model->validate();
    }
};

/// Named starting points. `desk` is a 20 x 20 grid with 500 iterations,
/// `paper` the full 50 x 50 grid with 5000 iterations and five replicates.
[[nodiscard]] inline ExperimentConfig preset(std::string_view name) {
    ExperimentConfig c;
    if (name == "desk") {
        c.grid = {20, 20};
        c.mcmc.n_iter = 500;
        c.mcmc.burn_in = 100;
        return c;
    }
    if (name == "paper") {
        c.experiment.replicates = 5;
        return c;
    }
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

namespace detail {

inline std::vector<ModelKind> kinds_from_json(const json& j, const char* key) {
    std::vector<ModelKind> out;
    try {
        for (const auto& s : j.get<std::vector<std::string>>()) out.push_back(parse_model_kind(s));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    return out;
}

inline ModelKind kind_from_json(const json& j, const char* key) {
    try {
        return parse_model_kind(j.get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace detail

/// Applies the keys present in `j` on top of `base`. Unknown keys are errors.
[[nodiscard]] inline ExperimentConfig apply_config_json(ExperimentConfig c, const json& j) {
    using detail::get_or;
    detail::reject_unknown(j,
                           {"schema_version", "seed", "out", "true_kind", "true_model", "assumed_kind", "kernel", "grid",
                            "data", "split", "vecchia_m", "mcmc", "score", "experiment"},
                           "config");
    if (j.contains("schema_version") && get_or<int>(j, "schema_version", schema_version) != schema_version) {
        throw ConfigError("unsupported schema_version");
    }
    c.seed = get_or(j, "seed", c.seed);
    c.out = get_or(j, "out", c.out);
    if (j.contains("true_kind")) c.true_kind = detail::kind_from_json(j["true_kind"], "true_kind");
    if (j.contains("assumed_kind")) c.assumed_kind = detail::kind_from_json(j["assumed_kind"], "assumed_kind");
    if (j.contains("true_model")) {
        try {
            c.true_model = model_from_json(j["true_model"]);
        } catch (const InvalidInput& e) {
            throw ConfigError(std::string("true_model: ") + e.what());
        } catch (const json::exception& e) {
            throw ConfigError(std::string("true_model: ") + e.what());
        }
    }
    if (j.contains("kernel")) {
        const auto& k = j["kernel"];
        detail::reject_unknown(k, {"sigma", "nu", "nugget"}, "kernel");
        c.kernel.sigma = get_or(k, "sigma", c.kernel.sigma);
        c.kernel.nu = get_or(k, "nu", c.kernel.nu);
        c.kernel.nugget = get_or(k, "nugget", c.kernel.nugget);
    }
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        detail::reject_unknown(g, {"n_lon", "n_lat"}, "grid");
        c.grid.n_lon = get_or(g, "n_lon", c.grid.n_lon);
        c.grid.n_lat = get_or(g, "n_lat", c.grid.n_lat);
    }
    if (j.contains("data")) {
        const auto& d = j["data"];
        detail::reject_unknown(d, {"path", "degrees", "log_first", "standardize"}, "data");
        c.data.path = get_or(d, "path", c.data.path);
        c.data.degrees = get_or(d, "degrees", c.data.degrees);
        c.data.log_first = get_or(d, "log_first", c.data.log_first);
        c.data.standardize = get_or(d, "standardize", c.data.standardize);
    }
    if (j.contains("split")) {
        const auto& s = j["split"];
        detail::reject_unknown(s, {"scheme", "test_frac", "n_regions", "lon_halfwidth", "lat_halfwidth"}, "split");
        if (s.contains("scheme")) c.split.scheme = parse_split_scheme(get_or<std::string>(s, "scheme", "random"));
        c.split.test_frac = get_or(s, "test_frac", c.split.test_frac);
        c.split.n_regions = get_or(s, "n_regions", c.split.n_regions);
        c.split.lon_halfwidth = get_or(s, "lon_halfwidth", c.split.lon_halfwidth);
        c.split.lat_halfwidth = get_or(s, "lat_halfwidth", c.split.lat_halfwidth);
    }
    c.vecchia_m = get_or(j, "vecchia_m", c.vecchia_m);
    if (j.contains("mcmc")) {
        const auto& m = j["mcmc"];
        detail::reject_unknown(m,
                               {"n_iter", "burn_in", "thin", "max_draws", "target_accept", "init_scale", "beta_sd", "init"},
                               "mcmc");
        c.mcmc.n_iter = get_or(m, "n_iter", c.mcmc.n_iter);
        c.mcmc.burn_in = get_or(m, "burn_in", c.mcmc.burn_in);
        c.mcmc.thin = get_or(m, "thin", c.mcmc.thin);
        c.mcmc.max_draws = get_or(m, "max_draws", c.mcmc.max_draws);
        c.mcmc.target_accept = get_or(m, "target_accept", c.mcmc.target_accept);
        c.mcmc.init_scale = get_or(m, "init_scale", c.mcmc.init_scale);
        c.mcmc.beta_sd = get_or(m, "beta_sd", c.mcmc.beta_sd);
        c.mcmc.init = get_or(m, "init", c.mcmc.init);
    }
    if (j.contains("score")) {
        const auto& s = j["score"];
        detail::reject_unknown(s, {"energy_draws"}, "score");
        c.energy_draws = get_or(s, "energy_draws", c.energy_draws);
    }
    if (j.contains("experiment")) {
        const auto& e = j["experiment"];
        detail::reject_unknown(e, {"true_kinds", "assumed_kinds", "splits", "replicates", "resume", "workers"},
                               "experiment");
        if (e.contains("true_kinds")) c.experiment.true_kinds = detail::kinds_from_json(e["true_kinds"], "true_kinds");
        if (e.contains("assumed_kinds")) {
            c.experiment.assumed_kinds = detail::kinds_from_json(e["assumed_kinds"], "assumed_kinds");
        }
        if (e.contains("splits")) {
            c.experiment.splits.clear();
            for (const auto& s : get_or<std::vector<std::string>>(e, "splits", {})) {
                c.experiment.splits.push_back(parse_split_scheme(s));
            }
        }
        c.experiment.replicates = get_or(e, "replicates", c.experiment.replicates);
        c.experiment.resume = get_or(e, "resume", c.experiment.resume);
        c.experiment.workers = get_or(e, "workers", c.experiment.workers);
    }
    return c;
}

[[nodiscard]] inline json config_to_json(const ExperimentConfig& c) {
    json kinds_true = json::array(), kinds_assumed = json::array(), splits = json::array();
    for (const auto k : c.experiment.true_kinds) kinds_true.push_back(std::string(to_string(k)));
    for (const auto k : c.experiment.assumed_kinds) kinds_assumed.push_back(std::string(to_string(k)));
    for (const auto s : c.experiment.splits) splits.push_back(std::string(to_string(s)));
    json j{{"schema_version", schema_version},
           {"seed", c.seed},
           {"out", c.out},
           {"true_kind", std::string(to_string(c.true_kind))},
           {"assumed_kind", std::string(to_string(c.assumed_kind))},
           {"kernel", {{"sigma", c.kernel.sigma}, {"nu", c.kernel.nu}, {"nugget", c.kernel.nugget}}},
           {"grid", {{"n_lon", c.grid.n_lon}, {"n_lat", c.grid.n_lat}}},
           {"data",
            {{"path", c.data.path},
             {"degrees", c.data.degrees},
             {"log_first", c.data.log_first},
             {"standardize", c.data.standardize}}},
           {"split",
            {{"scheme", std::string(to_string(c.split.scheme))},
             {"test_frac", c.split.test_frac},
             {"n_regions", c.split.n_regions},
             {"lon_halfwidth", c.split.lon_halfwidth},
             {"lat_halfwidth", c.split.lat_halfwidth}}},
           {"vecchia_m", c.vecchia_m},
           {"mcmc",
            {{"n_iter", c.mcmc.n_iter},
             {"burn_in", c.mcmc.burn_in},
             {"thin", c.mcmc.thin},
             {"max_draws", c.mcmc.max_draws},
             {"target_accept", c.mcmc.target_accept},
             {"init_scale", c.mcmc.init_scale},
             {"beta_sd", c.mcmc.beta_sd},
             {"init", c.mcmc.init}}},
           {"score", {{"energy_draws", c.energy_draws}}},
           {"experiment",
            {{"true_kinds", kinds_true},
             {"assumed_kinds", kinds_assumed},
             {"splits", splits},
             {"replicates", c.experiment.replicates},
             {"resume", c.experiment.resume},
             {"workers", c.experiment.workers}}}};
    if (c.true_model) j["true_model"] = model_to_json(*c.true_model);
    return j;
}

// ---------------------------------------------------------------------------
// Pipeline steps
// ---------------------------------------------------------------------------

/// Simulated field for `kind` on the configured grid.
[[nodiscard]] inline Dataset simulate_field(const ExperimentConfig& c, ModelKind kind, std::uint64_t seed) {
    Dataset d;
    d.locs = latlon_grid(c.grid);
    d.values = sample_gp(c.truth(kind), d.locs, seed);
    d.source = "simulated:" + std::string(to_string(kind));
    return d;
}

/// The configured CSV with optional log transform and standardization.
[[nodiscard]] inline Dataset load_dataset(const DataConfig& dc) {
    Dataset d = load_csv(dc.path, dc.degrees);
    if (d.size() == 0) throw InvalidInput("'" + dc.path + "' has no data rows");
    if (dc.standardize) return standardize(d, dc.log_first);
    if (dc.log_first) throw ConfigError("data.log_first requires data.standardize");
    return d;
}

[[nodiscard]] inline Split make_data_split(const Dataset& d, const SplitConfig& sc, std::uint64_t seed) {
    return sc.scheme == SplitScheme::random ? random_split(d, sc.test_frac, seed)
                                            : region_split(d, sc.region_spec(), seed);
}

struct FitResult {
    ModelKind kind = ModelKind::general;
    Chain chain;
    std::uint64_t seed = 0;
};

[[nodiscard]] inline FitResult fit_model(const Dataset& train, ModelKind kind, const ExperimentConfig& c,
                                         std::uint64_t seed) {
    if (train.size() == 0) throw InvalidInput("no training data");
    const VecchiaPlan plan = make_plan(train.locs, c.vecchia_m);
    FitProblem prob;
    prob.kind = kind;
    prob.kernel = c.kernel;
    prob.locs = train.locs;
    prob.y = train.values;
    prob.plan = &plan;
    prob.prior.beta_sd = c.mcmc.beta_sd;
    RamSettings ram;
    ram.n_iter = c.mcmc.n_iter;
    ram.seed = seed;
    ram.target_accept = c.mcmc.target_accept;
    ram.init_scale = c.mcmc.init_scale;
    std::vector<double> init = c.mcmc.init;
    if (init.empty() || init.size() != free_dimension(kind)) init.assign(free_dimension(kind), 0.0);
    if (log_posterior(init, prob) == -std::numeric_limits<double>::infinity()) {
        throw NumericalSingularity("log posterior is -inf at the initial parameters");
    }
    FitResult r;
    r.kind = kind;
    r.seed = seed;
    r.chain = run_mcmc([&](std::span<const double> x) { return log_posterior(x, prob); }, init, ram);
    return r;
}

[[nodiscard]] inline json fit_summary(const FitResult& f, const ExperimentConfig& c) {
    const auto names = parameter_names(f.kind);
    const auto draws = retained_draws(f.chain, {c.mcmc.burn_in, c.mcmc.thin, 0});
    json means = json::object();
    for (std::size_t i = 0; i < names.size(); ++i) {
        double s = 0.0;
        for (const auto& d : draws) s += d[i];
        means[names[i]] = s / static_cast<double>(draws.size());
    }
    json j{{"schema_version", schema_version},
           {"kind", std::string(to_string(f.kind))},
           {"n_iter", f.chain.size()},
           {"burn_in", c.mcmc.burn_in},
           {"acceptance_rate", f.chain.acceptance_rate()},
           {"posterior_mean", means},
           {"nan_count", f.chain.nan_count},
           {"seed", f.seed}};
    if (f.kind == ModelKind::general) {
        double s = 0.0;
        for (const auto& d : draws) s += kappa_from_raw(d[6]);
        j["posterior_mean_kappa"] = s / static_cast<double>(draws.size());
    }
    return j;
}

struct Prediction {
    std::vector<PredictiveMixture> mixtures;
    std::vector<std::vector<double>> joint;
};

[[nodiscard]] inline Prediction predict_test(const Chain& chain, ModelKind kind, const Split& split,
                                             const ExperimentConfig& c, std::uint64_t seed) {
    const ModelBuilder builder{kind, c.kernel};
    const auto draws = retained_draws(chain, {c.mcmc.burn_in, c.mcmc.thin, c.mcmc.max_draws});
    const PredictionProblem prob{split.train.locs, split.train.values, split.test.locs, c.vecchia_m};
    Prediction p;
    p.mixtures = posterior_predictive(draws, builder, prob);
    p.joint = posterior_joint_samples(draws, builder, prob, c.energy_draws, seed);
    return p;
}

/// MAE/RMSE of the mixture means, mean CRPS, and the energy score of the joint draws.
[[nodiscard]] inline Scores score_prediction(std::span<const PredictiveMixture> mix,
                                             std::span<const std::vector<double>> joint, std::span<const double> y,
                                             std::uint64_t seed) {
    if (mix.size() != y.size()) throw InvalidInput("predictive count does not match test set");
    std::vector<double> means;
    std::vector<double> crps;
    for (std::size_t i = 0; i < y.size(); ++i) {
        means.push_back(mix[i].mean());
        crps.push_back(crps_mixture(mix[i], y[i]));
    }
    Scores s;
    s.mae = mae(means, y);
    s.rmse = rmse(means, y);
    s.crps = pairwise_sum(crps) / static_cast<double>(crps.size());
    s.energy = energy_score(joint, y);
    s.n_test = y.size();
    s.seed = seed;
    return s;
}

// ---------------------------------------------------------------------------
// Artifact files
// ---------------------------------------------------------------------------

namespace detail {

inline std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw InvalidInput("cannot write '" + p.string() + "'");
    out << std::setprecision(17);
    return out;
}

inline std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw InvalidInput("cannot open '" + p.string() + "'");
    return in;
}

}  // namespace detail

/// lon,lat,value,mean,variance for each test location.
inline void write_predictive_csv(const fs::path& p, const Dataset& test, std::span<const PredictiveMixture> mix) {
    auto out = detail::open_out(p);
    out << "lon,lat,value,mean,variance\n";
    for (std::size_t i = 0; i < test.size(); ++i) {
        out << test.locs[i].lon << ',' << test.locs[i].lat << ',' << test.values[i] << ',' << mix[i].mean() << ','
            << mix[i].variance() << '\n';
    }
}

/// location,component,mean,variance,weight; location indexes the test set.
inline void write_mixture_csv(const fs::path& p, std::span<const PredictiveMixture> mix) {
    auto out = detail::open_out(p);
    out << "location,component,mean,variance,weight\n";
    for (std::size_t i = 0; i < mix.size(); ++i) {
        for (std::size_t k = 0; k < mix[i].size(); ++k) {
            out << i << ',' << k << ',' << mix[i].means[k] << ',' << mix[i].variances[k] << ',' << mix[i].weights[k]
                << '\n';
        }
    }
}

[[nodiscard]] inline std::vector<PredictiveMixture> read_mixture_csv(const fs::path& p) {
    auto in = detail::open_in(p);
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "location,component,mean,variance,weight") {
        throw ParseError(1, "mixture header must be location,component,mean,variance,weight");
    }
    std::vector<PredictiveMixture> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_fields(line);
        if (f.size() != 5) throw ParseError(line_no, "expected 5 fields");
        const auto loc = static_cast<std::size_t>(detail::parse_number(f[0], line_no, "location"));
        if (loc > out.size()) throw ParseError(line_no, "locations must be contiguous from 0");
        if (loc == out.size()) out.emplace_back();
        out[loc].means.push_back(detail::parse_number(f[2], line_no, "mean"));
        out[loc].variances.push_back(detail::parse_number(f[3], line_no, "variance"));
        out[loc].weights.push_back(detail::parse_number(f[4], line_no, "weight"));
    }
    return out;
}

/// One row per joint draw; column j is test location j.
inline void write_joint_csv(const fs::path& p, std::span<const std::vector<double>> joint, std::size_t n_test) {
    auto out = detail::open_out(p);
    for (std::size_t j = 0; j < n_test; ++j) out << (j ? "," : "") << 't' << j;
    out << '\n';
    for (const auto& row : joint) {
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
        out << '\n';
    }
}

[[nodiscard]] inline std::vector<std::vector<double>> read_joint_csv(const fs::path& p) {
    auto in = detail::open_in(p);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "missing joint-sample header");
    const std::size_t n = detail::split_fields(line).size();
    std::vector<std::vector<double>> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_fields(line);
        if (f.size() != n) throw ParseError(line_no, "expected " + std::to_string(n) + " fields");
        std::vector<double> row;
        for (const auto field : f) row.push_back(detail::parse_number(field, line_no, "sample"));
        out.push_back(std::move(row));
    }
    return out;
}

[[nodiscard]] inline Split read_split_file(const fs::path& p) {
    auto in = detail::open_in(p);
    return read_split_csv(in, p.string());
}

inline void write_split_file(const fs::path& p, const Dataset& d, const Split& s) {
    auto out = detail::open_out(p);
    write_split_csv(out, d, s);
}

inline void write_chain_file(const fs::path& p, const Chain& chain, ModelKind kind) {
    auto out = detail::open_out(p);
    write_chain_csv(out, chain, kind);
}

[[nodiscard]] inline Chain read_chain_file(const fs::path& p, ModelKind* kind) {
    auto in = detail::open_in(p);
    return read_chain_csv(in, kind);
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Seeds of the single-run commands, each derived from the root seed.
struct RunSeeds {
    std::uint64_t field, split, mcmc, joint;

    explicit RunSeeds(std::uint64_t root)
        : field(derive_seed(root, "field")),
          split(derive_seed(root, "split")),
          mcmc(derive_seed(root, "mcmc")),
          joint(derive_seed(root, "joint")) {}
};

inline void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw InvalidInput("cannot create '" + p.string() + "': " + ec.message());
}

/// Writes field.csv and truth.json.
inline void cmd_simulate(const ExperimentConfig& c) {
    c.validate();
    ensure_dir(c.out);
    const RunSeeds seeds(c.seed);
    const auto field = simulate_field(c, c.true_kind, seeds.field);
    write_csv((fs::path(c.out) / "field.csv").string(), field);
    json truth{{"schema_version", schema_version},
               {"model", model_to_json(c.truth(c.true_kind))},
               {"grid", {{"n_lon", c.grid.n_lon}, {"n_lat", c.grid.n_lat}}},
               {"seed", c.seed},
               {"field_seed", seeds.field}};
    write_json_file((fs::path(c.out) / "truth.json").string(), truth);
}

/// Input for fit: data.path when set, else <out>/field.csv.
[[nodiscard]] inline Dataset fit_input(const ExperimentConfig& c) {
    if (!c.data.path.empty()) return load_dataset(c.data);
    const auto p = fs::path(c.out) / "field.csv";
    if (!fs::exists(p)) throw InvalidInput("no data: set data.path or run simulate into '" + c.out + "' first");
    return load_csv(p.string());
}

/// Writes split.csv, chain.csv and fit_summary.json.
inline void cmd_fit(const ExperimentConfig& c) {
    c.validate();
    ensure_dir(c.out);
    const RunSeeds seeds(c.seed);
    const Dataset d = fit_input(c);
    const Split split = make_data_split(d, c.split, seeds.split);
    write_split_file(fs::path(c.out) / "split.csv", d, split);
    const auto fit = fit_model(split.train, c.assumed_kind, c, seeds.mcmc);
    write_chain_file(fs::path(c.out) / "chain.csv", fit.chain, fit.kind);
    write_json_file((fs::path(c.out) / "fit_summary.json").string(), fit_summary(fit, c));
}

/// Writes predictive.csv, mixture.csv, joint_samples.csv and scores.json.
inline void cmd_predict(const ExperimentConfig& c) {
    c.validate();
    const RunSeeds seeds(c.seed);
    const fs::path dir(c.out);
    const Split split = read_split_file(dir / "split.csv");
    if (split.test.size() == 0) throw InvalidInput("split has no test locations");
    ModelKind kind = ModelKind::general;
    const Chain chain = read_chain_file(dir / "chain.csv", &kind);
    const auto pred = predict_test(chain, kind, split, c, seeds.joint);
    write_predictive_csv(dir / "predictive.csv", split.test, pred.mixtures);
    write_mixture_csv(dir / "mixture.csv", pred.mixtures);
    write_joint_csv(dir / "joint_samples.csv", pred.joint, split.test.size());
    const auto s = score_prediction(pred.mixtures, pred.joint, split.test.values, c.seed);
    write_json_file((dir / "scores.json").string(), scores_to_json(s));
}

/// Recomputes scores.json from split.csv, mixture.csv and joint_samples.csv.
inline Scores cmd_score(const ExperimentConfig& c) {
    const fs::path dir(c.out);
    const Split split = read_split_file(dir / "split.csv");
    const auto mix = read_mixture_csv(dir / "mixture.csv");
    const auto joint = read_joint_csv(dir / "joint_samples.csv");
    const auto s = score_prediction(mix, joint, split.test.values, c.seed);
    write_json_file((dir / "scores.json").string(), scores_to_json(s));
    return s;
}

// ---------------------------------------------------------------------------
// Experiment grid
// ---------------------------------------------------------------------------

struct CellKey {
    ModelKind true_kind;
    ModelKind assumed_kind;
    SplitScheme split;
    std::size_t replicate;

    [[nodiscard]] std::string id() const {
        return std::string(to_string(true_kind)) + "__" + std::string(to_string(assumed_kind)) + "__" +
               std::string(to_string(split)) + "__r" + std::to_string(replicate);
    }
};

struct CellResult {
    CellKey key;
    std::optional<Scores> scores;
    std::string error;
    bool resumed = false;
};

/// Mean scores over the completed replicates of one (true, assumed, split) cell.
struct TableEntry {
    Scores mean;
    std::size_t completed = 0;
};

struct ExperimentResult {
    std::vector<CellResult> cells;
    /// (true, assumed) -> split -> averaged scores
    std::map<std::pair<ModelKind, ModelKind>, std::map<SplitScheme, TableEntry>> table;
};

namespace detail {

inline std::string field_label(ModelKind k, std::size_t rep) {
    return "field:" + std::string(to_string(k)) + ":" + std::to_string(rep);
}

inline std::string split_label(SplitScheme s, ModelKind k, std::size_t rep) {
    return "split:" + std::string(to_string(s)) + ":" + std::string(to_string(k)) + ":" + std::to_string(rep);
}

}  // namespace detail

/// One dataset per (true kind, replicate), one split per (dataset, scheme)
/// shared by every assumed kind, then fit + predict + score per cell. With a
/// nonempty `c.out` each cell writes cells/<id>/scores.json (or error.json)
/// and the table goes to table.csv.
[[nodiscard]] inline ExperimentResult run_experiment(const ExperimentConfig& c) {
    c.validate();
    const bool write = !c.out.empty();
    const fs::path root(c.out);
    if (write) {
        ensure_dir(root / "cells");
        ensure_dir(root / "fields");
        write_json_file((root / "config.json").string(), config_to_json(c));
    }
    const auto& ex = c.experiment;
    const bool real_data = !c.data.path.empty();
    const std::vector<ModelKind> true_kinds = real_data ? std::vector<ModelKind>{c.true_kind} : ex.true_kinds;

    // datasets
    std::map<std::pair<ModelKind, std::size_t>, Dataset> fields;
    std::optional<Dataset> loaded;
    if (real_data) loaded = load_dataset(c.data);
    for (const auto tk : true_kinds) {
        for (std::size_t r = 0; r < ex.replicates; ++r) {
            Dataset d = real_data ? *loaded : simulate_field(c, tk, derive_seed(c.seed, detail::field_label(tk, r)));
            if (write && !real_data) {
                write_csv((root / "fields" / (std::string(to_string(tk)) + "_r" + std::to_string(r) + ".csv")).string(),
                          d);
            }
            fields.emplace(std::pair{tk, r}, std::move(d));
        }
    }

    std::vector<CellKey> keys;
    for (const auto tk : true_kinds) {
        for (const auto ak : ex.assumed_kinds) {
            for (const auto sp : ex.splits) {
                for (std::size_t r = 0; r < ex.replicates; ++r) keys.push_back({tk, ak, sp, r});
            }
        }
    }

    std::vector<CellResult> results(keys.size());
    std::atomic<std::size_t> next{0};
    const std::function<void()> work = [&] {
        for (std::size_t i = next++; i < keys.size(); i = next++) {
            const CellKey& k = keys[i];
            CellResult& res = results[i];
            res.key = k;
            const fs::path dir = root / "cells" / k.id();
            const fs::path scores_path = dir / "scores.json";
            if (write && ex.resume && fs::exists(scores_path)) {
                try {
                    res.scores = scores_from_json(read_json_file(scores_path.string()));
                    res.resumed = true;
                    continue;
                } catch (const std::exception&) {
                    // unreadable record: recompute the cell
                }
            }
            try {
                const Dataset& d = fields.at({k.true_kind, k.replicate});
                const Split split = make_data_split(
                    d, SplitConfig{k.split, c.split.test_frac, c.split.n_regions, c.split.lon_halfwidth,
                                   c.split.lat_halfwidth},
                    derive_seed(c.seed, detail::split_label(k.split, k.true_kind, k.replicate)));
                const std::uint64_t cell_seed = derive_seed(c.seed, k.id());
                const auto fit = fit_model(split.train, k.assumed_kind, c, derive_seed(cell_seed, "mcmc"));
                const auto pred = predict_test(fit.chain, k.assumed_kind, split, c, derive_seed(cell_seed, "joint"));
                res.scores = score_prediction(pred.mixtures, pred.joint, split.test.values, cell_seed);
                if (write) {
                    ensure_dir(dir);
                    write_json_file((dir / "fit_summary.json").string(), fit_summary(fit, c));
                    write_json_file(scores_path.string(), scores_to_json(*res.scores));
                }
            } catch (const std::exception& e) {
                res.error = e.what();
                if (write) {
                    ensure_dir(dir);
                    write_json_file((dir / "error.json").string(),
                                    json{{"schema_version", schema_version}, {"cell", k.id()}, {"error", res.error}});
                }
            }
        }
    };
    std::size_t n_workers = ex.workers ? ex.workers : std::max(1u, std::thread::hardware_concurrency());
    n_workers = std::min(n_workers, keys.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    ExperimentResult out;
    out.cells = std::move(results);
    for (const auto& cell : out.cells) {
        if (!cell.scores) continue;
        auto& e = out.table[{cell.key.true_kind, cell.key.assumed_kind}][cell.key.split];
        e.mean.mae += cell.scores->mae;
        e.mean.rmse += cell.scores->rmse;
        e.mean.crps += cell.scores->crps;
        e.mean.energy += cell.scores->energy;
        e.mean.n_test += cell.scores->n_test;
        ++e.completed;
    }
    for (auto& [_, row] : out.table) {
        for (auto& [__, e] : row) {
            const double n = static_cast<double>(e.completed);
            e.mean.mae /= n;
            e.mean.rmse /= n;
            e.mean.crps /= n;
            e.mean.energy /= n;
            e.mean.n_test /= e.completed;
            e.mean.seed = c.seed;
        }
    }
    if (write) {
        auto csv = detail::open_out(root / "table.csv");
        csv << std::setprecision(10) << "true_model,assumed_model";
        for (const auto sp : ex.splits) {
            for (const char* s : {"mae", "rmse", "crps", "energy", "replicates"}) csv << ',' << to_string(sp) << '_' << s;
        }
        csv << '\n';
        for (const auto& [kinds, row] : out.table) {
            csv << to_string(kinds.first) << ',' << to_string(kinds.second);
            for (const auto sp : ex.splits) {
                const auto it = row.find(sp);
                if (it == row.end()) {
                    csv << ",,,,,0";
                    continue;
                }
                const auto& m = it->second.mean;
                csv << ',' << m.mae << ',' << m.rmse << ',' << m.crps << ',' << m.energy << ',' << it->second.completed;
            }
            csv << '\n';
        }
    }
    return out;
}

}  // namespace sphgp
