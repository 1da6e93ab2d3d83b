#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qlm/hyperboloid.hpp"

using namespace qlm;

namespace {

Eigen::VectorXd unit(int n, int axis) { return Eigen::VectorXd::Unit(n, axis); }

Eigen::VectorXd random_unit(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  if (v.norm() < 1e-8) v = Eigen::VectorXd::Unit(n, 0);
  return v.normalized();
}

// Random point with a random unit tangent, a valid normal-flow seed.
NormalFramePoint random_frame_point(int n, double k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ur(0.05, 2.0);
  PolarCoords pc{ur(rng), random_unit(n, rng), k};
  HyperboloidPoint p = from_polar(pc);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n + 1);
  for (int i = 0; i <= n; ++i) v(i) = g(rng);
  MinkowskiVector V(v);
  // Project onto the tangent space at X: V + k^2 <V,X> X.
  MinkowskiVector T(V.c + k * k * lorentz_dot(V, p.X) * p.X.c);
  const double tn = std::sqrt(lorentz_dot(T, T));
  return {p.X, MinkowskiVector(T.c / tn), k};
}

}  // namespace

TEST_CASE("lorentz_dot signature and errors") {
  MinkowskiVector e0 = MinkowskiVector::zero(3);
  e0.t() = 1.0;
  MinkowskiVector e1 = MinkowskiVector::zero(3);
  e1.c(0) = 1.0;
  CHECK(lorentz_dot(e0, e0) == -1.0);
  CHECK(lorentz_dot(e1, e1) == 1.0);
  CHECK(lorentz_dot(e1, e0) == 0.0);
  MinkowskiVector bad = MinkowskiVector::zero(4);
  CHECK_THROWS_AS(lorentz_dot(e0, bad), InvalidInput);
}

TEST_CASE("from_polar hits the frozen sphere point") {
  // r=1, Y=e1, k=1 -> (sinh 1, 0, 0, cosh 1).
  HyperboloidPoint p = from_polar({1.0, unit(3, 0), 1.0});
  CHECK(p.X.c(0) == Catch::Approx(1.1752011936438014).epsilon(1e-15));
  CHECK(p.X.c(1) == 0.0);
  CHECK(p.X.c(2) == 0.0);
  CHECK(p.X.t() == Catch::Approx(1.5430806348152437).epsilon(1e-15));
  CHECK(hyperboloid_residual(p) < 1e-14);

  HyperboloidPoint o = from_polar({0.0, unit(3, 1), 2.0});
  CHECK(o.X.spatial().norm() == 0.0);
  CHECK(o.X.t() == Catch::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("polar round trip and validation") {
  std::mt19937_64 rng(91);
  for (int trial = 0; trial < 200; ++trial) {
    const double k = (trial % 3 == 0) ? 0.5 : (trial % 3 == 1 ? 1.0 : 2.0);
    std::uniform_real_distribution<double> ur(1e-6, 5.0);
    PolarCoords pc{ur(rng), random_unit(4, rng), k};
    PolarCoords back = to_polar(from_polar(pc));
    CHECK(std::abs(back.r - pc.r) < 1e-12 * (1.0 + pc.r));
    CHECK((back.Y - pc.Y).norm() < 1e-10);
  }
  CHECK_THROWS_AS(from_polar({-0.1, unit(3, 0), 1.0}), InvalidInput);
  CHECK_THROWS_AS(from_polar({1.0, 2.0 * unit(3, 0), 1.0}), InvalidInput);
  CHECK_THROWS_AS(from_polar({1.0, unit(3, 0), 0.0}), InvalidInput);
}

TEST_CASE("ball chart frozen values and inverse") {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  SECTION("origin maps to the base point") {
    HyperboloidPoint p = ball_to_hyperboloid({x, 1.0});
    CHECK((p.X.c - base_point(3, 1.0).X.c).norm() == 0.0);
  }
  SECTION("x=(1/2,0,0), k=1 -> (4/3,0,0,5/3)") {
    x(0) = 0.5;
    HyperboloidPoint p = ball_to_hyperboloid({x, 1.0});
    CHECK(p.X.c(0) == Catch::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(p.X.t() == Catch::Approx(5.0 / 3.0).epsilon(1e-15));
  }
  SECTION("round trip within 1e-12 up to |x| = 0.999") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ur(0.0, 0.999);
    for (int trial = 0; trial < 300; ++trial) {
      const double k = (trial % 2 == 0) ? 1.0 : 0.7;
      Eigen::VectorXd y = ur(rng) * random_unit(3, rng);
      BallPoint back = hyperboloid_to_ball(ball_to_hyperboloid({y, k}));
      CHECK((back.x - y).norm() < 1e-12);
    }
  }
  SECTION("boundary rejected") {
    x(0) = 1.0;
    CHECK_THROWS_AS(ball_to_hyperboloid({x, 1.0}), InvalidInput);
  }
}

TEST_CASE("radial ball distance matches the log closed form") {
  // Independent oracle: d(0, x) = ln((1+|x|)/(1-|x|)) / k.
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ur(0.01, 0.95);
  for (double k : {0.5, 1.0, 2.0}) {
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd x = ur(rng) * random_unit(3, rng);
      const double d = geodesic_distance(ball_to_hyperboloid({x, k}), base_point(3, k));
      const double oracle = std::log((1.0 + x.norm()) / (1.0 - x.norm())) / k;
      CHECK(d == Catch::Approx(oracle).epsilon(1e-12));
    }
  }
}

TEST_CASE("geodesic distance properties") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> ur(0.0, 3.0);
  const double k = 1.3;
  SECTION("radial differences and coincidence") {
    Eigen::VectorXd Y = random_unit(3, rng);
    const double r1 = ur(rng), r2 = ur(rng);
    HyperboloidPoint a = from_polar({r1, Y, k});
    HyperboloidPoint b = from_polar({r2, Y, k});
    // acosh near 1 is half-order conditioned: cancellation of size
    // eps*cosh(k r1)cosh(k r2) in the pairing surfaces as sqrt in d.
    CHECK(geodesic_distance(a, b) == Catch::Approx(std::abs(r1 - r2)).margin(1e-5));
    CHECK(geodesic_distance(a, a) < 1e-5);
  }
  SECTION("triangle inequality on random triples") {
    for (int trial = 0; trial < 100; ++trial) {
      HyperboloidPoint a = from_polar({ur(rng), random_unit(3, rng), k});
      HyperboloidPoint b = from_polar({ur(rng), random_unit(3, rng), k});
      HyperboloidPoint c = from_polar({ur(rng), random_unit(3, rng), k});
      const double ab = geodesic_distance(a, b);
      const double bc = geodesic_distance(b, c);
      const double ac = geodesic_distance(a, c);
      CHECK(ac <= ab + bc + 1e-10);
    }
  }
  SECTION("curvature scales must match") {
    HyperboloidPoint a = base_point(3, 1.0);
    HyperboloidPoint b = base_point(3, 2.0);
    CHECK_THROWS_AS(geodesic_distance(a, b), InvalidInput);
  }
}

TEST_CASE("normal flow identities") {
  std::mt19937_64 rng(55);
  SECTION("rho = 0 is the identity") {
    NormalFramePoint fp = random_frame_point(3, 1.0, rng);
    NormalFramePoint out = normal_flow(fp, 0.0);
    CHECK((out.X.c - fp.X.c).norm() == 0.0);
    CHECK((out.N.c - fp.N.c).norm() == 0.0);
  }
  SECTION("radial flow from a geodesic sphere advances the radius") {
    for (double k : {0.5, 1.0, 2.0}) {
      const double r0 = 0.8, rho = 0.6;
      Eigen::VectorXd Y = random_unit(4, rng);
      HyperboloidPoint p = from_polar({r0, Y, k});
      MinkowskiVector N = MinkowskiVector::zero(4);
      N.spatial() = std::cosh(k * r0) * Y;
      N.t() = std::sinh(k * r0);
      NormalFramePoint out = normal_flow({p.X, N, k}, rho);
      HyperboloidPoint expect = from_polar({r0 + rho, Y, k});
      CHECK((out.X.c - expect.X.c).norm() < 1e-13 * expect.X.c.norm());
    }
  }
  SECTION("frame invariants are preserved") {
    for (int trial = 0; trial < 100; ++trial) {
      const double k = (trial % 2 == 0) ? 1.0 : 0.5;
      NormalFramePoint fp = random_frame_point(4, k, rng);
      NormalFramePoint out = normal_flow(fp, 1.7);
      CHECK(std::abs(k * k * lorentz_dot(out.X, out.X) + 1.0) < 1e-12);
      CHECK(std::abs(lorentz_dot(out.N, out.N) - 1.0) < 1e-12);
      CHECK(std::abs(lorentz_dot(out.X, out.N)) < 1e-12);
    }
  }
  SECTION("one-parameter group property") {
    NormalFramePoint fp = random_frame_point(3, 1.0, rng);
    NormalFramePoint once = normal_flow(normal_flow(fp, 0.9), 0.4);
    NormalFramePoint direct = normal_flow(fp, 1.3);
    CHECK((once.X.c - direct.X.c).norm() < 1e-13 * direct.X.c.norm());
    CHECK((once.N.c - direct.N.c).norm() < 1e-13 * direct.N.c.norm());
  }
  SECTION("invalid normals rejected") {
    NormalFramePoint fp = random_frame_point(3, 1.0, rng);
    NormalFramePoint bad = fp;
    bad.N = MinkowskiVector(2.0 * fp.N.c);
    CHECK_THROWS_AS(normal_flow(bad, 0.5), InvalidInput);
    bad.N = fp.X;
    CHECK_THROWS_AS(normal_flow(bad, 0.5), InvalidInput);
  }
}
