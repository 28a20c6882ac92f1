#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sphgp/covariance.hpp"
#include "sphgp/data.hpp"
#include "sphgp/errors.hpp"
#include "sphgp/inference.hpp"
#include "sphgp/vecchia.hpp"

namespace sphgp {

using json = nlohmann::json;

/// Version stamped into every JSON artifact except the score record.
inline constexpr int schema_version = 1;

// ---------------------------------------------------------------------------
// Model parameters
// ---------------------------------------------------------------------------

/// Flat parameter object: beta1, beta2, kappa, sigma, nu, nugget, kind.
/// Field-valued sigma/nu hooks are not serializable.
[[nodiscard]] inline json model_to_json(const CovarianceModel& m) {
    if (!m.sigma.is_constant() || !m.nu.is_constant()) throw InvalidInput("only constant sigma/nu serialize");
    return json{{"beta1", m.gamma1.coefficients()},
                {"beta2", m.gamma2.coefficients()},
                {"kappa", m.kappa},
                {"sigma", m.sigma.constant()},
                {"nu", m.nu.constant()},
                {"nugget", m.nugget},
                {"kind", std::string(to_string(m.kind))}};
}

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

}  // namespace detail

[[nodiscard]] inline CovarianceModel model_from_json(const json& j) {
    detail::reject_unknown(j, {"beta1", "beta2", "kappa", "sigma", "nu", "nugget", "kind", "schema_version"}, "model");
    CovarianceModel m;
    m.kind = parse_model_kind(detail::get_or<std::string>(j, "kind", "general"));
    const auto b1 = detail::get_or<std::vector<double>>(j, "beta1", {0, 0, 0});
    const auto b2 = detail::get_or<std::vector<double>>(j, "beta2", {0, 0, 0});
    if (b1.size() != 3 || b2.size() != 3) throw ConfigError("beta1 and beta2 need three coefficients");
    m.gamma1 = {b1[0], b1[1], b1[2]};
    m.gamma2 = {b2[0], b2[1], b2[2]};
    m.kappa = detail::get_or(j, "kappa", 0.0);
    m.sigma = detail::get_or(j, "sigma", 1.0);
    m.nu = detail::get_or(j, "nu", 0.5);
    m.nugget = detail::get_or(j, "nugget", 0.0);
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Vecchia plan (debugging aid)
// ---------------------------------------------------------------------------

[[nodiscard]] inline json plan_to_json(const VecchiaPlan& p) {
    return json{{"schema_version", schema_version}, {"m", p.m}, {"order", p.order}, {"neighbors", p.cond_sets}};
}

[[nodiscard]] inline VecchiaPlan plan_from_json(const json& j) {
    VecchiaPlan p;
    p.m = j.at("m").get<std::size_t>();
    p.order = j.at("order").get<std::vector<std::size_t>>();
    p.cond_sets = j.at("neighbors").get<std::vector<std::vector<std::size_t>>>();
    return p;
}

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

struct Scores {
    double mae = 0.0;
    double rmse = 0.0;
    double crps = 0.0;
    double energy = 0.0;
    std::size_t n_test = 0;
    std::uint64_t seed = 0;
};

/// Exactly {mae, rmse, crps, energy, n_test, seed}.
[[nodiscard]] inline json scores_to_json(const Scores& s) {
    return json{{"mae", s.mae},       {"rmse", s.rmse},     {"crps", s.crps},
                {"energy", s.energy}, {"n_test", s.n_test}, {"seed", s.seed}};
}

[[nodiscard]] inline Scores scores_from_json(const json& j) {
    detail::reject_unknown(j, {"mae", "rmse", "crps", "energy", "n_test", "seed"}, "scores");
    Scores s;
    s.mae = j.at("mae").get<double>();
    s.rmse = j.at("rmse").get<double>();
    s.crps = j.at("crps").get<double>();
    s.energy = j.at("energy").get<double>();
    s.n_test = j.at("n_test").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

// ---------------------------------------------------------------------------
// Chains
// ---------------------------------------------------------------------------

/// One row per iteration: raw coordinates, log_post, accepted.
inline void write_chain_csv(std::ostream& out, const Chain& chain, ModelKind kind) {
    const auto names = parameter_names(kind);
    if (names.size() != chain.dim) throw InvalidInput("chain dimension does not match model kind");
    for (const auto& n : names) out << n << ',';
    out << "log_post,accepted\n" << std::setprecision(17);
    for (std::size_t t = 0; t < chain.size(); ++t) {
        for (const double v : chain.draws[t]) out << v << ',';
        out << chain.log_posts[t] << ',' << static_cast<int>(chain.accepted[t]) << '\n';
    }
}

/// Reads a chain CSV; the header determines the model kind.
[[nodiscard]] inline Chain read_chain_csv(std::istream& in, ModelKind* kind_out = nullptr) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "missing chain header");
    auto header = detail::split_fields(line);
    if (header.size() < 3 || header[header.size() - 2] != "log_post" || header.back() != "accepted") {
        throw ParseError(1, "chain header must end with log_post,accepted");
    }
    std::vector<std::string> names(header.begin(), header.end() - 2);
    ModelKind kind = ModelKind::isotropic;
    bool found = false;
    for (const auto k : all_model_kinds) {
        if (parameter_names(k) == names) {
            kind = k;
            found = true;
        }
    }
    if (!found) throw ParseError(1, "chain columns match no model kind");
    Chain c;
    c.dim = names.size();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_fields(line);
        if (f.size() != c.dim + 2) throw ParseError(line_no, "wrong number of chain fields");
        std::vector<double> draw(c.dim);
        for (std::size_t i = 0; i < c.dim; ++i) draw[i] = detail::parse_number(f[i], line_no, names[i]);
        c.draws.push_back(std::move(draw));
        const auto lp = f[c.dim];
        c.log_posts.push_back(lp == "-inf" ? -std::numeric_limits<double>::infinity()
                                           : detail::parse_number(lp, line_no, "log_post"));
        c.accepted.push_back(f[c.dim + 1] == "1" ? 1 : 0);
    }
    if (kind_out) *kind_out = kind;
    return c;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

[[nodiscard]] inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path + "': " + e.what());
    }
}

}  // namespace sphgp
