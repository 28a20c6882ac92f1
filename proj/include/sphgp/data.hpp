#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sphgp/errors.hpp"
#include "sphgp/geometry.hpp"
#include "sphgp/rng.hpp"

namespace sphgp {

/// Invertible record of the value transform applied to a dataset.
struct Preprocessing {
    bool log_applied = false;
    bool standardized = false;
    double shift = 0.0;
    double scale = 1.0;
};

struct Dataset {
    std::vector<SphericalPoint> locs;
    std::vector<double> values;
    std::string source;
    Preprocessing prep;

    [[nodiscard]] std::size_t size() const { return values.size(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_number(std::string_view field, std::size_t line, std::string_view column) {
    double v = 0.0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ParseError(line, "column '" + std::string(column) + "' is not a number: '" + std::string(field) + "'");
    }
    return v;
}

}  // namespace detail

/// Optional extra column read alongside lon,lat,value.
struct CsvExtra {
    std::vector<std::string> split;  // contents of a `split` column, when present
};

/// Parses `lon,lat,value` CSV (header required, column order free, extra
/// columns ignored except `split`). Angles are radians unless `degrees`.
[[nodiscard]] inline Dataset parse_csv(std::istream& in, bool degrees = false, CsvExtra* extra = nullptr,
                                       const std::string& source = "csv") {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError(1, "missing header");
    ++line_no;
    const auto header = detail::split_fields(line);
    int c_lon = -1, c_lat = -1, c_val = -1, c_split = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "lon") c_lon = static_cast<int>(i);
        if (header[i] == "lat") c_lat = static_cast<int>(i);
        if (header[i] == "value") c_val = static_cast<int>(i);
        if (header[i] == "split") c_split = static_cast<int>(i);
    }
    if (c_lon < 0 || c_lat < 0 || c_val < 0) throw ParseError(1, "header must contain lon, lat and value");
    const auto needed = static_cast<std::size_t>(std::max({c_lon, c_lat, c_val, c_split})) + 1;
    const double to_rad = degrees ? pi / 180.0 : 1.0;

    Dataset d;
    d.source = source;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_fields(line);
        if (f.size() < needed) throw ParseError(line_no, "expected at least " + std::to_string(needed) + " fields");
        const double lon = detail::parse_number(f[static_cast<std::size_t>(c_lon)], line_no, "lon") * to_rad;
        const double lat = detail::parse_number(f[static_cast<std::size_t>(c_lat)], line_no, "lat") * to_rad;
        const double val = detail::parse_number(f[static_cast<std::size_t>(c_val)], line_no, "value");
        if (std::abs(lat) > half_pi) throw ParseError(line_no, "latitude " + std::to_string(lat) + " outside [-pi/2, pi/2]");
        d.locs.push_back({wrap_longitude(lon), lat});
        d.values.push_back(val);
        if (extra && c_split >= 0) extra->split.emplace_back(f[static_cast<std::size_t>(c_split)]);
    }
    return d;
}

[[nodiscard]] inline Dataset load_csv(const std::string& path, bool degrees = false, CsvExtra* extra = nullptr) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    return parse_csv(in, degrees, extra, path);
}

/// Writes lon,lat,value with round-trip precision.
inline void write_csv(std::ostream& out, const Dataset& d) {
    out << "lon,lat,value\n" << std::setprecision(17);
    for (std::size_t i = 0; i < d.size(); ++i) out << d.locs[i].lon << ',' << d.locs[i].lat << ',' << d.values[i] << '\n';
}

inline void write_csv(const std::string& path, const Dataset& d) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write '" + path + "'");
    write_csv(out, d);
}

/// Optional log transform, then centering and scaling to unit sample SD.
[[nodiscard]] inline Dataset standardize(const Dataset& d, bool log_first) {
    if (d.size() < 2) throw DegenerateScale("need at least two values");
    Dataset out = d;
    if (log_first) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (!(out.values[i] > 0.0)) throw TransformError(i, "log of non-positive value");
            out.values[i] = std::log(out.values[i]);
        }
    }
    const double n = static_cast<double>(out.size());
    double mean = 0.0;
    for (const double v : out.values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (const double v : out.values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0) || !std::isfinite(sd)) throw DegenerateScale("zero standard deviation");
    for (auto& v : out.values) v = (v - mean) / sd;
    out.prep = {log_first, true, mean, sd};
    return out;
}

/// Maps standardized values back to the original scale.
[[nodiscard]] inline std::vector<double> unstandardize(std::span<const double> z, const Preprocessing& p) {
    std::vector<double> out(z.begin(), z.end());
    for (auto& v : out) {
        if (p.standardized) v = v * p.scale + p.shift;
        if (p.log_applied) v = std::exp(v);
    }
    return out;
}

[[nodiscard]] inline Dataset unstandardize(const Dataset& d) {
    Dataset out = d;
    out.values = unstandardize(d.values, d.prep);
    out.prep = {};
    return out;
}

/// Train/test partition plus the original row indices of each side.
struct Split {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
};

[[nodiscard]] inline Dataset subset(const Dataset& d, std::span<const std::size_t> idx) {
    Dataset out;
    out.source = d.source;
    out.prep = d.prep;
    for (const auto i : idx) {
        out.locs.push_back(d.locs[i]);
        out.values.push_back(d.values[i]);
    }
    return out;
}

[[nodiscard]] inline Split make_split(const Dataset& d, const std::vector<char>& is_test) {
    Split s;
    for (std::size_t i = 0; i < d.size(); ++i) (is_test[i] ? s.test_idx : s.train_idx).push_back(i);
    s.train = subset(d, s.train_idx);
    s.test = subset(d, s.test_idx);
    return s;
}

/// round(frac * n) test points chosen by a seeded Fisher-Yates shuffle.
[[nodiscard]] inline Split random_split(const Dataset& d, double frac, std::uint64_t seed) {
    if (!(frac > 0.0 && frac < 1.0)) throw InvalidInput("test fraction must be in (0, 1)");
    const std::size_t n = d.size();
    const auto n_test = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<char> is_test(n, 0);
    for (std::size_t i = 0; i < n_test; ++i) is_test[perm[i]] = 1;
    return make_split(d, is_test);
}

/// Test regions: rectangles spanning center +/- half-width in longitude
/// (periodic) and latitude.
struct RegionSpec {
    std::size_t n_regions = 10;
    double lon_halfwidth = 0.4;
    double lat_halfwidth = 0.2;
    double target_frac = 0.2;
};

struct Region {
    double lon = 0.0;
    double lat = 0.0;
};

namespace detail {

inline double lon_gap(double a, double b) {
    const double d = std::abs(wrap_longitude(a - b));
    return d;
}

}  // namespace detail

[[nodiscard]] inline bool in_region(const SphericalPoint& s, const Region& r, const RegionSpec& spec) {
    return detail::lon_gap(s.lon, r.lon) <= spec.lon_halfwidth && std::abs(s.lat - r.lat) <= spec.lat_halfwidth;
}

/// Region split. Centers are drawn uniformly over the data's lon/lat extent and
/// accepted when they do not overlap an earlier region and capture at least
/// one point. Placement stops after `n_regions` regions, or once the test
/// fraction is within one average region of `target_frac`.
[[nodiscard]] inline Split region_split(const Dataset& d, const RegionSpec& spec, std::uint64_t seed,
                                        std::vector<Region>* regions_out = nullptr) {
    if (!(spec.target_frac > 0.0 && spec.target_frac < 1.0)) throw InvalidInput("target fraction must be in (0, 1)");
    if (!(spec.lon_halfwidth > 0.0) || !(spec.lat_halfwidth > 0.0)) throw InvalidInput("region widths must be > 0");
    if (d.size() == 0) throw InvalidInput("empty dataset");
    double lat_lo = d.locs[0].lat, lat_hi = d.locs[0].lat;
    for (const auto& s : d.locs) {
        lat_lo = std::min(lat_lo, s.lat);
        lat_hi = std::max(lat_hi, s.lat);
    }
    const double n = static_cast<double>(d.size());
    Rng rng(seed);
    std::vector<Region> regions;
    std::vector<char> is_test(d.size(), 0);
    std::size_t n_test = 0;
    constexpr std::size_t max_attempts = 10000;
    for (std::size_t attempt = 0; attempt < max_attempts && regions.size() < spec.n_regions; ++attempt) {
        const Region r{rng.uniform(-pi, pi), rng.uniform(lat_lo, lat_hi)};
        bool overlaps = false;
        for (const auto& q : regions) {
            if (detail::lon_gap(r.lon, q.lon) < 2.0 * spec.lon_halfwidth &&
                std::abs(r.lat - q.lat) < 2.0 * spec.lat_halfwidth) {
                overlaps = true;
                break;
            }
        }
        if (overlaps) continue;
        std::size_t captured = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (!is_test[i] && in_region(d.locs[i], r, spec)) ++captured;
        }
        if (captured == 0) continue;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (!is_test[i] && in_region(d.locs[i], r, spec)) is_test[i] = 1;
        }
        n_test += captured;
        regions.push_back(r);
        const double frac = static_cast<double>(n_test) / n;
        const double per_region = frac / static_cast<double>(regions.size());
        if (frac >= spec.target_frac - per_region) break;
    }
    if (regions.empty()) throw PlacementError("no region placed after 10000 attempts");
    if (n_test == d.size()) throw PlacementError("regions cover every location; nothing left to train on");
    if (regions_out) *regions_out = regions;
    return make_split(d, is_test);
}

/// lon,lat,value,split with split in {train,test}, rows in original order.
inline void write_split_csv(std::ostream& out, const Dataset& d, const Split& s) {
    std::vector<char> is_test(d.size(), 0);
    for (const auto i : s.test_idx) is_test[i] = 1;
    out << "lon,lat,value,split\n" << std::setprecision(17);
    for (std::size_t i = 0; i < d.size(); ++i) {
        out << d.locs[i].lon << ',' << d.locs[i].lat << ',' << d.values[i] << ',' << (is_test[i] ? "test" : "train")
            << '\n';
    }
}

/// Reads a split file written by write_split_csv.
[[nodiscard]] inline Split read_split_csv(std::istream& in, const std::string& source = "split") {
    CsvExtra extra;
    const Dataset d = parse_csv(in, false, &extra, source);
    if (extra.split.size() != d.size()) throw ParseError(1, "missing split column");
    std::vector<char> is_test(d.size(), 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (extra.split[i] == "test") {
            is_test[i] = 1;
        } else if (extra.split[i] != "train") {
            throw ParseError(i + 2, "split must be 'train' or 'test'");
        }
    }
    return make_split(d, is_test);
}

}  // namespace sphgp
