#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "cmlens/geometry.hpp"
#include "oracles.hpp"

using namespace cmlens;
using cmlens::testing::RandomPoints;
using cmlens::testing::fd_jacobian;

TEST_CASE("lens radii: forced values", "[geometry]") {
  const LensRadii L = lens_radii(2.0, 1.0, 2.0);
  REQUIRE(L.r1 == Catch::Approx(std::sqrt(2.0)).epsilon(1e-14));
  REQUIRE(L.r2 == Catch::Approx(2.0).epsilon(1e-14));
  REQUIRE(L.r3 == Catch::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-14));
  REQUIRE(L.beta == Catch::Approx(2.0).epsilon(1e-14));
  REQUIRE(std::abs(L.alpha * L.beta - L.alpha - L.beta) < 1e-14);

  const LensRadii M = lens_radii(3.0, 0.5, 3.0);
  REQUIRE(M.beta == Catch::Approx(1.5).epsilon(1e-14));
  REQUIRE(M.r1 == Catch::Approx(std::pow(3.0, 2.0 / 3.0) * 0.5).epsilon(1e-14));
  REQUIRE(M.r2 == Catch::Approx(1.5).epsilon(1e-14));
  REQUIRE(M.r3 == Catch::Approx(std::pow(3.0, 5.0 / 3.0) * 0.5).epsilon(1e-14));
}

TEST_CASE("lens radii: r3 approaches m r0 as alpha -> 1+", "[geometry]") {
  const LensRadii L = lens_radii(2.0, 1.0, 1.01);
  REQUIRE(std::abs(L.r3 - 2.0) / 2.0 < 0.02);
}

TEST_CASE("lens radii: domain errors", "[geometry]") {
  REQUIRE_THROWS_AS(lens_radii(1.0, 1.0, 2.0), std::domain_error);
  REQUIRE_THROWS_AS(lens_radii(2.0, 0.0, 2.0), std::domain_error);
  REQUIRE_THROWS_AS(lens_radii(2.0, 1.0, 1.0), std::domain_error);
}

TEST_CASE("radial map evaluation", "[geometry]") {
  const RadialMap F(2.0, 2.0);
  REQUIRE((F(Vec3(1, 0, 0)) - Vec3(4, 0, 0)).norm() < 1e-14);
  REQUIRE((F(Vec3(2, 0, 0)) - Vec3(2, 0, 0)).norm() < 1e-14);
  const LensRadii L = lens_radii(2.0, 1.0, 2.0);
  const RadialMap G = lens_map_G(L);
  RandomPoints rp(11);
  for (int i = 0; i < 20; ++i) {
    const Vec3 x = L.r3 * rp.direction();
    REQUIRE((G(x) - x).norm() < 1e-12 * L.r3);
  }
  REQUIRE_THROWS_AS(F(Vec3::Zero()), std::domain_error);
}

TEST_CASE("radial map Jacobian: analytic vs finite differences", "[geometry]") {
  const RadialMap F(2.0, 2.0);
  const Mat3 J = F.jacobian(Vec3(1, 0, 0));
  Mat3 expect;
  expect << -4, 0, 0, 0, 4, 0, 0, 0, 4;
  REQUIRE((J - expect).norm() < 1e-13);
  REQUIRE(J.determinant() == Catch::Approx(-64.0).epsilon(1e-12));
  REQUIRE(F.jacobian_det(Vec3(1, 0, 0)) == Catch::Approx(-64.0).epsilon(1e-12));

  RandomPoints rp(12);
  for (const double expo : {1.5, 2.0, 3.0}) {
    const RadialMap M(expo, 1.7);
    for (int i = 0; i < 25; ++i) {
      const Vec3 x = rp.in_annulus(0.5, 3.0);
      const Mat3 fd = fd_jacobian(M, x);
      REQUIRE((M.jacobian(x) - fd).norm() < 1e-6 * std::max(1.0, fd.norm()));
    }
  }
}

TEST_CASE("radial map Jacobian: tangential entries on the fixed sphere", "[geometry]") {
  RandomPoints rp(13);
  const RadialMap F(2.5, 1.3);
  for (int i = 0; i < 10; ++i) {
    const Vec3 d = rp.direction();
    const Vec3 x = 1.3 * d;
    const Mat3 J = F.jacobian(x);
    // any tangent vector is preserved
    Vec3 t = d.cross(rp.direction());
    if (t.norm() < 1e-8) t = d.cross(Vec3(0.3, -0.5, 0.8));
    t.normalize();
    REQUIRE((J * t - t).norm() < 1e-12);
  }
}

TEST_CASE("det jacobian is negative everywhere off the puncture", "[geometry]") {
  const LensRadii L = lens_radii(2.0, 1.0, 2.0);
  const RadialMap F = lens_map_F(L);
  RandomPoints rp(14);
  for (int i = 0; i < 100; ++i) {
    const Vec3 x = rp.in_annulus(L.r1, L.r2);
    REQUIRE(F.jacobian(x).determinant() < 0.0);
    REQUIRE(F.jacobian_det(x) < 0.0);
  }
}

TEST_CASE("inverse map: exponent algebra and round trips", "[geometry]") {
  REQUIRE(RadialMap(2.0, 2.0).inverse().exponent() == Catch::Approx(2.0));
  REQUIRE(RadialMap(3.0, 2.0).inverse().exponent() == Catch::Approx(1.5));
  RandomPoints rp(15);
  for (const double expo : {1.3, 2.0, 2.8}) {
    const RadialMap M(expo, 0.9);
    const RadialMap Mi = M.inverse();
    for (int i = 0; i < 100; ++i) {
      const Vec3 x = rp.in_annulus(0.2, 4.0);
      REQUIRE((Mi(M(x)) - x).norm() < 1e-12 * x.norm());
      REQUIRE((M.inverse_eval(M(x)) - x).norm() < 1e-12 * x.norm());
    }
  }
}

TEST_CASE("radial conjugation law |K(x)| |x|^(a-1) = rho^a", "[geometry]") {
  RandomPoints rp(16);
  for (const double expo : {1.5, 2.0, 3.0}) {
    const RadialMap M(expo, 1.1);
    for (int i = 0; i < 50; ++i) {
      const Vec3 x = rp.in_annulus(0.3, 2.5);
      const double lhs = M(x).norm() * std::pow(x.norm(), expo - 1.0);
      const double rhs = std::pow(1.1, expo);
      REQUIRE(std::abs(lhs - rhs) < 1e-13 * rhs);
    }
  }
}

TEST_CASE("G o F restricted to the object ball is the dilation by m", "[geometry]") {
  const LensRadii L = lens_radii(2.0, 1.0, 2.0);
  const RadialMap F = lens_map_F(L), G = lens_map_G(L);
  const auto GF = compose(G, F);
  RandomPoints rp(17);
  for (int i = 0; i < 50; ++i) {
    const Vec3 x = rp.in_annulus(0.05, L.r0);
    REQUIRE((GF(x) - 2.0 * x).norm() < 1e-12 * std::max(1.0, x.norm()));
  }
  REQUIRE(compose_object_map(F, G, L) == Catch::Approx(2.0).epsilon(1e-12));

  // boundary of the matched shell maps onto the outer sphere
  for (int i = 0; i < 10; ++i) {
    const Vec3 x = L.r1 * rp.direction();
    REQUIRE(F(x).norm() == Catch::Approx(L.r3).epsilon(1e-13));
  }

  const LensRadii L5 = lens_radii(5.0, 1.0, 2.0);
  REQUIRE(compose_object_map(lens_map_F(L5), lens_map_G(L5), L5) ==
          Catch::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("composition consistency error is raised for mismatched exponents", "[geometry]") {
  const LensRadii L = lens_radii(2.0, 1.0, 2.0);
  const RadialMap F = lens_map_F(L);
  // (alpha - 1)(beta' - 1) != 1, so G o F is no longer a pure dilation
  const RadialMap G_bad(1.8, L.r3);
  REQUIRE_THROWS_AS(compose_object_map(F, G_bad, L), std::runtime_error);
}
