#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "sphgp/errors.hpp"

namespace sphgp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double pi = std::numbers::pi;
inline constexpr double half_pi = std::numbers::pi / 2.0;

/// Wraps a longitude into [-pi, pi).
[[nodiscard]] inline double wrap_longitude(double lon) {
    if (lon >= -pi && lon < pi) return lon;
    double w = std::fmod(lon + pi, 2.0 * pi);
    if (w < 0.0) w += 2.0 * pi;
    w -= pi;
    // fmod rounding can land exactly on +pi
    return w >= pi ? -pi : w;
}

/// Location on the unit sphere, radians. lon in [-pi, pi), lat in [-pi/2, pi/2].
struct SphericalPoint {
    double lon = 0.0;
    double lat = 0.0;

    friend bool operator==(const SphericalPoint&, const SphericalPoint&) = default;
};

/// Builds a point, wrapping longitude and rejecting latitudes off the sphere.
[[nodiscard]] inline SphericalPoint make_point(double lon, double lat) {
    if (!std::isfinite(lon) || !std::isfinite(lat)) throw InvalidPoint("non-finite coordinate");
    if (std::abs(lat) > half_pi) throw InvalidPoint("latitude " + std::to_string(lat) + " outside [-pi/2, pi/2]");
    return {wrap_longitude(lon), lat};
}

struct EuclideanPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    [[nodiscard]] Vec3 vec() const { return {x, y, z}; }
    [[nodiscard]] double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

[[nodiscard]] inline EuclideanPoint to_euclidean(const SphericalPoint& s) {
    const double cl = std::cos(s.lat);
    return {cl * std::cos(s.lon), cl * std::sin(s.lon), std::sin(s.lat)};
}

[[nodiscard]] inline Vec3 to_vec3(const SphericalPoint& s) { return to_euclidean(s).vec(); }

/// Inverse of to_euclidean. Longitude is 0 at the poles.
[[nodiscard]] inline SphericalPoint to_spherical(const EuclideanPoint& p) {
    const double r = p.norm();
    if (!std::isfinite(r) || std::abs(r - 1.0) > 1e-9) {
        throw InvalidPoint("norm " + std::to_string(r) + " is not 1");
    }
    const double h = std::hypot(p.x, p.y);
    const double lat = std::atan2(p.z, h);
    const double lon = h < 1e-15 ? 0.0 : wrap_longitude(std::atan2(p.y, p.x));
    return {lon, lat};
}

enum class Axis { x, y, z };

/// Right-handed rotation by `theta` about a coordinate axis.
[[nodiscard]] inline Mat3 rotation(Axis axis, double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Mat3 r;
    switch (axis) {
        case Axis::x:
            r << 1, 0, 0,
                 0, c, -s,
                 0, s, c;
            break;
        case Axis::y:
            r << c, 0, s,
                 0, 1, 0,
                 -s, 0, c;
            break;
        case Axis::z:
            r << c, -s, 0,
                 s, c, 0,
                 0, 0, 1;
            break;
    }
    return r;
}

/// Rotation carrying the reference point (1,0,0) onto s, with the tangent
/// basis (y, z) mapped onto (east, north) at s.
[[nodiscard]] inline Mat3 frame_rotation(const SphericalPoint& s) {
    return rotation(Axis::z, s.lon) * rotation(Axis::y, -s.lat);
}

[[nodiscard]] inline double chordal_distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

[[nodiscard]] inline double chordal_distance(const SphericalPoint& a, const SphericalPoint& b) {
    return chordal_distance(to_vec3(a), to_vec3(b));
}

[[nodiscard]] inline double chord_to_arc(double r) { return 2.0 * std::asin(std::clamp(r / 2.0, -1.0, 1.0)); }
[[nodiscard]] inline double arc_to_chord(double theta) { return 2.0 * std::sin(theta / 2.0); }

[[nodiscard]] inline double great_arc_distance(const SphericalPoint& a, const SphericalPoint& b) {
    return chord_to_arc(chordal_distance(a, b));
}

}  // namespace sphgp
