// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "nerg/core.hpp"
#include "nerg/error.hpp"

namespace nerg {
namespace {

TEST(Spherical, PolarAxes) {
  const Vec3 z = dir_from_spherical(0.0, 1.23);
  EXPECT_NEAR(z.z, 1.0, 1e-15);
  const Vec3 x = dir_from_spherical(kPi / 2, 0.0);
  EXPECT_NEAR(x.x, 1.0, 1e-15);
  EXPECT_NEAR(x.z, 0.0, 1e-15);
  const Vec3 y = dir_from_spherical(kPi / 2, kPi / 2);
  EXPECT_NEAR(y.y, 1.0, 1e-15);
}

TEST(Spherical, RoundTripProperty) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> th(1e-6, kPi - 1e-6), ph(-kPi, kPi);
  for (int i = 0; i < 10000; ++i) {
    const double t = th(rng), p = ph(rng);
    const Spherical s = spherical_from_dir(dir_from_spherical(t, p));
    EXPECT_NEAR(s.theta, t, 1e-12);
    EXPECT_NEAR(s.phi, p, 1e-9);
  }
}

TEST(Spherical, PoleHasZeroPhi) {
  EXPECT_EQ(spherical_from_dir({0, 0, -1}).phi, 0.0);
  EXPECT_NEAR(spherical_from_dir({0, 0, -1}).theta, kPi, 1e-15);
}

TEST(UnitDir, RejectsNonUnit) {
  EXPECT_THROW(UnitDir::from_unit({1, 1, 0}), DomainError);
  EXPECT_THROW(spherical_from_dir({2, 0, 0}), DomainError);
  EXPECT_NO_THROW(UnitDir::from_unit({1 + 1e-7, 0, 0}));
}

TEST(Aabb, IntersectAgreesWithSlabs) {
  const Aabb b{{-1, -2, -3}, {1, 2, 3}};
  const Ray r{{-5, 0, 0}, UnitDir::normalize({1, 0, 0})};
  const auto iv = b.intersect(r);
  ASSERT_TRUE(iv);
  EXPECT_NEAR(iv->first, 4.0, 1e-12);
  EXPECT_NEAR(iv->second, 6.0, 1e-12);
  EXPECT_FALSE(b.intersect({{-5, 5, 0}, UnitDir::normalize({1, 0, 0})}));
}

TEST(Camera, CenterRayLooksForward) {
  const Camera cam = Camera::look_at({0, 0, 0}, {0, 5, 0}, {0, 0, 1}, kPi / 3, 3, 3);
  const Ray r = camera_ray(cam, 1, 1);
  EXPECT_NEAR(r.dir.vec().y, 1.0, 1e-12);
  // top-left pixel leans left and up
  const Ray tl = camera_ray(cam, 0, 0);
  EXPECT_LT(tl.dir.vec().x, 0.0);
  EXPECT_GT(tl.dir.vec().z, 0.0);
}

TEST(Camera, EdgeRayMatchesFov) {
  const double fov = kPi / 2;
  const int h = 1000;
  const Camera cam = Camera::look_at({0, 0, 0}, {1, 0, 0}, {0, 0, 1}, fov, 1, h);
  const Ray top = camera_ray(cam, 0, 0);
  const double elev = std::atan2(top.dir.vec().z, top.dir.vec().x);
  const double expected = std::atan((1.0 - 1.0 / h) * std::tan(fov / 2));
  EXPECT_NEAR(elev, expected, 1e-12);
}

TEST(Camera, RejectsBadInputs) {
  EXPECT_THROW(Camera::look_at({0, 0, 0}, {0, 0, 1}, {0, 0, 1}, 1.0, 4, 4), ConfigError);
  EXPECT_THROW(Camera::look_at({0, 0, 0}, {0, 1, 0}, {0, 0, 1}, 0.0, 4, 4), ConfigError);
  EXPECT_THROW(Camera::look_at({0, 0, 0}, {0, 1, 0}, {0, 0, 1}, 1.0, 0, 4), ConfigError);
  const Camera cam = Camera::look_at({0, 0, 0}, {0, 1, 0}, {0, 0, 1}, 1.0, 4, 4);
  EXPECT_THROW(camera_ray(cam, 4, 0), DomainError);
}

TEST(WorldTransform, InverseRoundTrip) {
  const auto t = WorldTransform::similarity(2.5, {1, 2, 3}, 0.7, {4, -1, 2});
  const auto inv = t.inverse();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p{u(rng), u(rng), u(rng)};
    const Vec3 q = inv.transform_point(t.transform_point(p));
    EXPECT_NEAR(distance(p, q), 0.0, 1e-12);
  }
  EXPECT_NEAR(t.scale(), 2.5, 1e-12);
}

TEST(WorldTransform, DirectionsStayUnitAndRotate) {
  const auto t = WorldTransform::similarity(3.0, {0, 0, 1}, kPi / 2, {1, 1, 1});
  const UnitDir d = t.transform_dir(UnitDir::normalize({1, 0, 0}));
  EXPECT_NEAR(d.vec().y, 1.0, 1e-12);
  EXPECT_NEAR(norm(d.vec()), 1.0, 1e-15);
}

TEST(WorldTransform, RejectsNonSimilarity) {
  std::array<double, 16> m{1, 0, 0, 0, 0, 2, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  EXPECT_THROW(WorldTransform::from_row_major(m), ConfigError);
}

}  // namespace
}  // namespace nerg
