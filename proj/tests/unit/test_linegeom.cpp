#include <doctest.h>

#include "tubelab/config.hpp"
#include "tubelab/error.hpp"
#include "tubelab/linegeom.hpp"
#include "tubelab/random.hpp"

#include <cmath>
#include <numbers>

using namespace tubelab;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

Line random_line(Rng& rng, int n) {
  Direction u(rng.unit_vector(n));
  Vec x(n);
  for (int i = 0; i < n; ++i) x[i] = rng.uniform(-1.0, 1.0);
  return Line(u, x);
}

}  // namespace

TEST_CASE("direction is unit and canonically signed") {
  Direction a(v3(0.0, -3.0, 4.0));
  CHECK(std::abs(a.vec().norm() - 1.0) < Tolerances::unit_norm);
  CHECK(a[1] > 0.0);
  Direction b(-v3(0.0, -3.0, 4.0));
  CHECK(a == b);
  CHECK_THROWS_AS(Direction(Vec::Zero(3)), DomainError);

  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    Vec u = rng.unit_vector(4);
    CHECK(Direction(u) == Direction(-u));
  }
}

TEST_CASE("line foot point is orthogonal to the direction") {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    Line l = random_line(rng, 3);
    CHECK(std::abs(l.foot().dot(l.direction().vec())) < Tolerances::foot_orthogonal);
  }
}

TEST_CASE("line_metric examples") {
  Line x_axis(Direction(v2(1, 0)), v2(0, 0));
  Line y_axis(Direction(v2(0, 1)), v2(0, 0));
  Line shifted(Direction(v2(1, 0)), v2(0, 0.3));
  CHECK(line_metric(x_axis, x_axis) == 0.0);
  CHECK(line_metric(x_axis, y_axis) == doctest::Approx(1.0).epsilon(1e-15));
  // direct formula: |(0,0) - (0,0.3)| + |e1 ^ e1|
  CHECK(line_metric(x_axis, shifted) == doctest::Approx(0.3).epsilon(1e-15));
  Line l3(Direction(v3(1, 0, 0)), v3(0, 0, 0));
  CHECK_THROWS_AS(line_metric(x_axis, l3), DomainError);
}

TEST_CASE("line_metric is symmetric, vanishes on coincident lines and obeys the triangle inequality") {
  for (int n : {2, 3, 4}) {
    Rng rng(100 + n);
    for (int i = 0; i < 10000; ++i) {
      Line a = random_line(rng, n), b = random_line(rng, n), c = random_line(rng, n);
      CHECK(line_metric(a, b) == doctest::Approx(line_metric(b, a)).epsilon(1e-14));
      CHECK(line_metric(a, c) <= line_metric(a, b) + line_metric(b, c) + 1e-12);
    }
    Line a = random_line(rng, n);
    Line same(Direction(-a.direction().vec()), a.foot() + 2.5 * a.direction().vec());
    CHECK(line_metric(a, same) < 1e-12);
  }
}

TEST_CASE("wedge_volume examples") {
  const Vec e1 = basis_vector(3, 0), e2 = basis_vector(3, 1), e3 = basis_vector(3, 2);
  std::vector<Vec> ortho{e1, e2, e3};
  CHECK(wedge_volume(ortho) == doctest::Approx(1.0));
  std::vector<Vec> degenerate{e1, e1};
  CHECK(wedge_volume(degenerate) == 0.0);
  std::vector<Vec> planar{v2(1, 0), v2(1, 1) / std::sqrt(2.0)};
  CHECK(wedge_volume(planar) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));

  std::vector<Vec> too_many{v2(1, 0), v2(0, 1), v2(1, 0)};
  CHECK_THROWS_AS(wedge_volume(too_many), DomainError);
  std::vector<Vec> non_unit{v2(2, 0), v2(0, 1)};
  CHECK_THROWS_AS(wedge_volume(non_unit), DomainError);
}

TEST_CASE("wedge_volume is symmetric, sign invariant and monotone under removal") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(3));
    const int k = 2 + static_cast<int>(rng.below(n - 1));
    std::vector<Vec> vs;
    for (int i = 0; i < k; ++i) vs.push_back(rng.unit_vector(n));
    const double w = wedge_volume(vs);
    CHECK(w >= 0.0);
    CHECK(w <= 1.0);
    std::vector<Vec> flipped = vs;
    flipped[0] = -flipped[0];
    std::swap(flipped[0], flipped[k - 1]);
    CHECK(wedge_volume(flipped) == doctest::Approx(w).epsilon(1e-10));
    for (int drop = 0; drop < k; ++drop) {
      std::vector<Vec> fewer;
      for (int i = 0; i < k; ++i)
        if (i != drop) fewer.push_back(vs[i]);
      CHECK(w <= wedge_volume(fewer) + 1e-12);
    }
  }
}

TEST_CASE("subspace_wedge examples and basis independence") {
  const Vec e1 = basis_vector(3, 0), e2 = basis_vector(3, 1), e3 = basis_vector(3, 2);
  std::vector<Vec> h1{e1};
  CHECK(subspace_wedge(Subspace::span(h1), e1) == doctest::Approx(0.0));
  CHECK(subspace_wedge(Subspace::span(h1), e2) == doctest::Approx(1.0));
  std::vector<Vec> h2{e1, e2};
  const Vec u = (e2 + e3) / std::sqrt(2.0);
  // Gram of (e1, e2, u) has determinant 1/2
  CHECK(subspace_wedge(Subspace::span(h2), u) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  std::vector<Vec> full{basis_vector(2, 0)};
  CHECK_NOTHROW(subspace_wedge(Subspace::span(full), basis_vector(2, 1)));
  std::vector<Vec> dependent{e1, 2.0 * e1};
  CHECK_THROWS_AS(Subspace::span(dependent), DomainError);
  std::vector<Vec> too_big{e1, e2, e3};
  CHECK_THROWS_AS(Subspace::span(too_big), DomainError);

  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(2));
    const int k = 1 + static_cast<int>(rng.below(n - 1));
    std::vector<Vec> basis;
    for (int i = 0; i < k; ++i) basis.push_back(rng.gaussian_vector(n));
    Subspace h = Subspace::span(basis);
    // a second basis of the same subspace: random invertible mixing
    Eigen::MatrixXd mix = Eigen::MatrixXd::Random(k, k) + 3.0 * Eigen::MatrixXd::Identity(k, k);
    std::vector<Vec> other;
    for (int i = 0; i < k; ++i) {
      Vec w = Vec::Zero(n);
      for (int j = 0; j < k; ++j) w += mix(i, j) * h.basis()[j];
      other.push_back(w);
    }
    Subspace h2b = Subspace::span(other);
    for (const auto& b : h2b.basis()) CHECK(std::abs(b.norm() - 1.0) < Tolerances::orthonormal);
    const Vec v = rng.unit_vector(n);
    CHECK(std::abs(subspace_wedge(h, v) - subspace_wedge(h2b, v)) < Tolerances::basis_independence);
    // agrees with the Gram-determinant definition
    std::vector<Vec> all = h.basis();
    all.push_back(v);
    CHECK(subspace_wedge(h, v) == doctest::Approx(wedge_volume(all)).epsilon(1e-9));
  }
}

TEST_CASE("cap cover: coverage and bounded overlap") {
  SUBCASE("circle, diameter pi/2 cut at rho = 1") {
    CapCover c = build_cap_cover(2, 1.0);
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
      const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const Vec v = v2(std::cos(t), std::sin(t));
      const auto caps = c.caps_containing(v);
      CHECK(!caps.empty());
      CHECK(caps.size() <= 100);
      double best = 10.0;
      for (const auto& ctr : c.centers) best = std::min(best, unoriented_angle(ctr.vec(), v));
      CHECK(best <= c.cap_radius());
    }
  }
  SUBCASE("sphere at rho = 0.25") {
    CapCover c = build_cap_cover(3, 0.25);
    CHECK(static_cast<double>(c.centers.size()) <= 64.0 * 16.0);
    Rng rng(2);
    for (int i = 0; i < 100000; ++i) {
      const Vec v = rng.unit_vector(3);
      const auto caps = c.caps_containing(v);
      REQUIRE(!caps.empty());
      CHECK(caps.size() <= 1000);
    }
  }
  SUBCASE("centers lie in their own caps") {
    CapCover c = build_cap_cover(4, 0.5);
    for (std::size_t i = 0; i < c.centers.size(); ++i) CHECK(c.contains(i, c.centers[i].vec()));
  }
  CHECK_THROWS_AS(build_cap_cover(3, 0.0), DomainError);
  CHECK_THROWS_AS(build_cap_cover(3, 1.5), DomainError);
  CHECK_THROWS_AS(build_cap_cover(1, 0.5), DomainError);
}

TEST_CASE("point_in_tube uses the capped segment") {
  Tube t(v3(0, 0, 0), Direction(v3(1, 0, 0)), 0.1);
  CHECK(point_in_tube(t, v3(0, 0, 0)));
  CHECK_FALSE(point_in_tube(t, v3(0, 0.2, 0)));
  CHECK(point_in_tube(t, v3(0.55, 0, 0)));
  CHECK_FALSE(point_in_tube(t, v3(0.61, 0, 0)));
  CHECK(distance_to_core(t, v3(0.55, 0, 0)) == doctest::Approx(0.05));
  CHECK_THROWS_AS(Tube(v3(0, 0, 0), Direction(v3(1, 0, 0)), 0.0), DomainError);
}

TEST_CASE("line_of_tube") {
  Line a = line_of_tube(Tube(v2(0, 0), Direction(v2(1, 0)), 0.1));
  CHECK(a.foot().norm() == 0.0);
  Line b = line_of_tube(Tube(v2(0, 0.5), Direction(v2(1, 0)), 0.1));
  CHECK((b.foot() - v2(0, 0.5)).norm() < 1e-15);
  const Vec u = v2(1, 1) / std::sqrt(2.0);
  Line c = line_of_tube(Tube(0.37 * u, Direction(u), 0.1));
  CHECK(c.foot().norm() < 1e-15);
}
