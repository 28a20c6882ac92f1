#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sphgp/geometry.hpp"

namespace sphgp {
namespace {

void expect_vec(const EuclideanPoint& p, double x, double y, double z, double tol = 1e-15) {
    EXPECT_NEAR(p.x, x, tol);
    EXPECT_NEAR(p.y, y, tol);
    EXPECT_NEAR(p.z, z, tol);
}

TEST(ToEuclidean, ReferenceAndAxes) {
    expect_vec(to_euclidean({0, 0}), 1, 0, 0);
    expect_vec(to_euclidean({half_pi, 0}), 0, 1, 0);
    expect_vec(to_euclidean({0, half_pi}), 0, 0, 1);
}

TEST(ToSpherical, Examples) {
    auto s = to_spherical({1, 0, 0});
    EXPECT_DOUBLE_EQ(s.lon, 0.0);
    EXPECT_DOUBLE_EQ(s.lat, 0.0);
    s = to_spherical({0, 0, -1});
    EXPECT_DOUBLE_EQ(s.lon, 0.0);
    EXPECT_DOUBLE_EQ(s.lat, -half_pi);
    s = to_spherical({0, 1, 0});
    EXPECT_DOUBLE_EQ(s.lon, half_pi);
    EXPECT_DOUBLE_EQ(s.lat, 0.0);
}

TEST(ToSpherical, RejectsNonUnit) { EXPECT_THROW((void)to_spherical({1.1, 0, 0}), InvalidPoint); }

TEST(MakePoint, WrapsAndValidates) {
    EXPECT_DOUBLE_EQ(make_point(pi, 0).lon, -pi);
    EXPECT_NEAR(make_point(3 * pi / 2, 0).lon, -half_pi, 1e-15);
    EXPECT_THROW((void)make_point(0, 2.0), InvalidPoint);
}

TEST(ToSpherical, RoundTripProperty) {
    Rng rng(17);
    for (int k = 0; k < 2000; ++k) {
        const SphericalPoint s{rng.uniform(-pi, pi), rng.uniform(-half_pi + 1e-6, half_pi - 1e-6)};
        const EuclideanPoint e = to_euclidean(s);
        EXPECT_NEAR(e.norm(), 1.0, 1e-12);
        const SphericalPoint back = to_spherical(e);
        EXPECT_NEAR(back.lat, s.lat, 1e-12);
        EXPECT_NEAR(wrap_longitude(back.lon - s.lon), 0.0, 1e-12);
        const EuclideanPoint e2 = to_euclidean(back);
        expect_vec(e2, e.x, e.y, e.z, 1e-12);
    }
}

TEST(Rotation, Examples) {
    const Vec3 ex(1, 0, 0);
    EXPECT_TRUE((rotation(Axis::z, half_pi) * ex).isApprox(Vec3(0, 1, 0), 1e-15));
    EXPECT_TRUE(rotation(Axis::x, 0.0).isIdentity(0.0));
    EXPECT_NEAR(((rotation(Axis::y, pi) * ex) - Vec3(-1, 0, 0)).norm(), 0.0, 1e-15);
}

TEST(Rotation, OrthonormalProperty) {
    Rng rng(3);
    for (const Axis a : {Axis::x, Axis::y, Axis::z}) {
        for (int k = 0; k < 200; ++k) {
            const Mat3 r = rotation(a, rng.uniform(-10, 10));
            EXPECT_LT((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
        }
    }
}

TEST(FrameRotation, MapsReferenceOntoPoint) {
    Rng rng(5);
    for (int k = 0; k < 500; ++k) {
        const SphericalPoint s = oracle::random_point(rng);
        const Vec3 mapped = frame_rotation(s) * Vec3(1, 0, 0);
        EXPECT_LT((mapped - to_vec3(s)).norm(), 1e-12);
    }
}

TEST(Distances, Examples) {
    EXPECT_NEAR(chordal_distance(SphericalPoint{0, 0}, SphericalPoint{pi, 0}), 2.0, 1e-15);
    EXPECT_EQ(chordal_distance(SphericalPoint{0.3, 0.2}, SphericalPoint{0.3, 0.2}), 0.0);
    EXPECT_NEAR(chordal_distance(SphericalPoint{0, 0}, SphericalPoint{half_pi, 0}), std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(great_arc_distance(SphericalPoint{0, 0}, SphericalPoint{pi, 0}), pi, 1e-7);
    EXPECT_NEAR(great_arc_distance(SphericalPoint{0, 0}, SphericalPoint{half_pi, 0}), half_pi, 1e-15);
}

TEST(Distances, ChordArcIdentity) {
    Rng rng(11);
    for (int k = 0; k < 100; ++k) {
        const auto a = oracle::random_point(rng);
        const auto b = oracle::random_point(rng);
        const double r = chordal_distance(a, b);
        const double theta = great_arc_distance(a, b);
        EXPECT_NEAR(r, 2.0 * std::sin(theta / 2.0), 1e-12);
        // independent arc via the dot product
        const double dot = std::clamp(to_vec3(a).dot(to_vec3(b)), -1.0, 1.0);
        EXPECT_NEAR(theta, std::atan2(to_vec3(a).cross(to_vec3(b)).norm(), dot), 1e-10);
    }
}

TEST(Distances, MetricProperty) {
    Rng rng(13);
    for (int k = 0; k < 1000; ++k) {
        const auto a = oracle::random_point(rng);
        const auto b = oracle::random_point(rng);
        const auto c = oracle::random_point(rng);
        EXPECT_EQ(chordal_distance(a, b), chordal_distance(b, a));
        EXPECT_LE(chordal_distance(a, c), chordal_distance(a, b) + chordal_distance(b, c) + 1e-12);
    }
}

}  // namespace
}  // namespace sphgp
