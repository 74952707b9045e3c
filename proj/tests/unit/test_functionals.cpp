#include <doctest.h>

#include "tubelab/config.hpp"
#include "tubelab/error.hpp"
#include "tubelab/functionals.hpp"
#include "tubelab/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace tubelab;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

TubeFamily family(int n, double delta, std::vector<Tube> tubes, int d = 1, double beta = 1.0) {
  return TubeFamily(n, delta, {d, beta}, std::move(tubes));
}

std::vector<Tube> random_tubes(Rng& rng, int n, int count, double delta) {
  std::vector<Tube> out;
  for (int i = 0; i < count; ++i) {
    Vec c(n);
    do {
      for (int j = 0; j < n; ++j) c[j] = rng.uniform(-0.6, 0.6);
    } while (c.norm() > 0.6);
    out.emplace_back(c, Direction(rng.unit_vector(n)), delta);
  }
  return out;
}

std::vector<Tube> bush2(double delta) {
  const int count = static_cast<int>(std::lround(1.0 / delta));
  std::vector<Tube> out;
  for (int i = 0; i < count; ++i) {
    const double t = std::numbers::pi * i / count;
    out.emplace_back(v2(0, 0), Direction(v2(std::cos(t), std::sin(t))), delta);
  }
  return out;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace

TEST_CASE("parameters") {
  const ProblemParams a{1, 1.0}, b{2, 0.5}, zero{2, 0.0};
  CHECK(a.exponent() == doctest::Approx(2.0));
  CHECK(b.exponent() == doctest::Approx(2.5 / 1.5));
  CHECK_THROWS_AS(zero.exponent(), DomainError);
  CHECK(unit_ball_volume(2) == doctest::Approx(std::numbers::pi));
  CHECK(unit_ball_volume(3) == doctest::Approx(4.0 * std::numbers::pi / 3.0));
  CHECK(tube_volume(Tube(v2(0, 0), Direction(v2(1, 0)), 0.1)) == doctest::Approx(0.2 + std::numbers::pi * 0.01));
}

TEST_CASE("family validation") {
  CHECK_THROWS_AS(family(2, 0.6, {}), DomainError);
  CHECK_THROWS_AS(family(2, 0.1, {Tube(v2(0, 0), Direction(v2(1, 0)), 0.2)}), DomainError);
  CHECK_THROWS_AS(family(2, 0.1, {Tube(v2(2, 0), Direction(v2(1, 0)), 0.1)}), DomainError);
  CHECK_THROWS_AS(family(2, 0.1, {}, 2), DomainError);
  CHECK_THROWS_AS(family(2, 0.1, {}, 1, 1.5), DomainError);
}

TEST_CASE("lp_norm_tube_sum examples") {
  const double delta = 1.0 / 16;
  SUBCASE("single tube volume") {
    for (int n : {2, 3}) {
      Vec c = Vec::Zero(n);
      auto f = family(n, delta, {Tube(c, Direction(basis_vector(n, 0)), delta)});
      Grid g = default_grid(f);
      CHECK(rel(lp_norm_tube_sum(f, 1.0, g), tube_volume(f.tubes()[0])) < 0.05);
    }
  }
  SUBCASE("disjoint copies add in L^p") {
    Tube a(v2(0, -0.4), Direction(v2(1, 0)), delta);
    Tube b(v2(0, 0.4), Direction(v2(1, 0)), delta);
    for (double p : {1.0, 1.5, 3.0}) {
      auto one = family(2, delta, {a});
      auto two = family(2, delta, {a, b});
      Grid g = default_grid(two);
      CHECK(lp_norm_tube_sum(two, p, g) == doctest::Approx(std::pow(2.0, 1.0 / p) * lp_norm_tube_sum(one, p, g)).epsilon(1e-12));
    }
  }
  SUBCASE("coincident copies scale the norm") {
    Tube a(v2(0.1, 0.2), Direction(v2(1, 2)), delta);
    auto one = family(2, delta, {a});
    auto two = family(2, delta, {a, a});
    Grid g = default_grid(two);
    CHECK(lp_norm_tube_sum(two, 2.0, g) == doctest::Approx(2.0 * lp_norm_tube_sum(one, 2.0, g)).epsilon(1e-12));
  }
  SUBCASE("resolution and exponent checks") {
    auto f = family(2, delta, {Tube(v2(0, 0), Direction(v2(1, 0)), delta)});
    Grid coarse = Grid::box(2, 1.1, 0.75 * delta);
    CHECK_THROWS_AS(lp_norm_tube_sum(f, 2.0, coarse), ResolutionError);
    CHECK_THROWS_AS(lp_norm_tube_sum(f, 0.5, default_grid(f)), DomainError);
  }
}

TEST_CASE("multilinear Kakeya functional") {
  const double delta = 1.0 / 16;
  auto f1 = family(2, delta, {Tube(v2(0, 0), Direction(v2(1, 0)), delta)});
  auto f2 = family(2, delta, {Tube(v2(0, 0), Direction(v2(0, 1)), delta)});
  std::vector<TubeFamily> fams{f1, f2};
  Grid g = Grid::box(2, 1.0 + delta, delta / 8);
  CHECK(multilinear_kakeya_lhs(fams, g) == doctest::Approx(2.0 * delta).epsilon(0.05));

  std::vector<TubeFamily> with_empty{f1, family(2, delta, {})};
  CHECK(multilinear_kakeya_lhs(with_empty, g) == 0.0);
  std::vector<TubeFamily> parallel{f1, family(2, delta, {Tube(v2(0, 0.01), Direction(v2(1, 0)), delta)})};
  CHECK(multilinear_kakeya_lhs(parallel, g) == 0.0);

  // n = k = 2: no prefactor
  CHECK(multilinear_kakeya_rhs(fams) == doctest::Approx(tube_volume(f1.tubes()[0])));
  auto g3 = family(3, 1.0 / 8, {Tube(v3(0, 0, 0), Direction(v3(1, 0, 0)), 1.0 / 8)});
  std::vector<TubeFamily> pair3{g3, g3};
  CHECK(multilinear_kakeya_rhs(pair3) == doctest::Approx(std::sqrt(8.0) * tube_volume(g3.tubes()[0])));
  std::vector<Tube> many(5, g3.tubes()[0]);
  auto g3n = family(3, 1.0 / 8, many);
  std::vector<TubeFamily> triple{g3n, g3n, g3n};
  CHECK(multilinear_kakeya_rhs(triple) == doctest::Approx(5.0 * tube_volume(g3.tubes()[0])));
}

TEST_CASE("Loomis-Whitney configuration has ratio close to 1") {
  const double delta = 1.0 / 32;
  std::vector<Tube> a, b;
  for (int i = 0; i < 8; ++i) {
    const double s = -0.35 + 0.1 * i;
    a.emplace_back(v2(0, s), Direction(v2(1, 0)), delta);
    b.emplace_back(v2(s, 0), Direction(v2(0, 1)), delta);
  }
  std::vector<TubeFamily> fams{family(2, delta, a), family(2, delta, b)};
  Grid g = Grid::covering(fams[0].tubes(), delta, delta / 8);
  const double ratio = multilinear_kakeya_lhs(fams, g) / multilinear_kakeya_rhs(fams);
  CHECK(ratio == doctest::Approx(1.0 / (1.0 + std::numbers::pi * delta / 2.0)).epsilon(0.02));
  CHECK(std::abs(ratio - 1.0) <= 0.1);
}

TEST_CASE("single-family multilinear sums") {
  const double delta = 1.0 / 16;
  // two crossing tubes: M = 2 |e1 ^ e2| on the overlap square
  auto f = family(2, delta, {Tube(v2(0, 0), Direction(v2(1, 0)), delta), Tube(v2(0, 0), Direction(v2(0, 1)), delta)});
  Grid g = Grid::box(2, 1.0 + delta, delta / 8);
  const double e[] = {1.0, 0.5};
  auto s = multilinear_power_sums(f, 2, e, g);
  CHECK(s[0] == doctest::Approx(2.0 * 4.0 * delta * delta).epsilon(0.05));
  CHECK(s[1] == doctest::Approx(std::sqrt(2.0) * 4.0 * delta * delta).epsilon(0.05));
}

TEST_CASE("decompose_lp") {
  const double delta = 1.0 / 16;
  SUBCASE("one cap carries everything") {
    std::vector<Tube> ts;
    for (int i = 0; i < 6; ++i) ts.emplace_back(v2(0, -0.3 + 0.1 * i), Direction(v2(1, 0)), delta);
    auto f = family(2, delta, ts);
    auto r = decompose_lp(f, 0.25, 2, 2.0, default_grid(f));
    CHECK(r.term_multilinear == 0.0);
    CHECK(r.term_caps >= r.lhs * (1 - 1e-12));
  }
  SUBCASE("single tube") {
    auto f = family(3, delta, {Tube(v3(0.1, 0, 0), Direction(v3(1, 2, 3)), delta)});
    const double p = 1.5, rho = 0.5;
    auto r = decompose_lp(f, rho, 3, p, default_grid(f));
    CHECK(r.term_caps >= std::pow(rho, (2.0 - 3) * (p - 1) / p) * r.lhs * (1 - 1e-12));
  }
  SUBCASE("40 spread tubes in the plane") {
    Rng rng(40);
    auto f = family(2, delta, random_tubes(rng, 2, 40, delta));
    auto r = decompose_lp(f, 0.25, 2, 2.0, default_grid(f));
    CHECK(r.term_multilinear > 0.0);
    CHECK(r.term_caps > 0.0);
    CHECK(r.ratio <= 4.0);
  }
  auto f = family(2, delta, {Tube(v2(0, 0), Direction(v2(1, 0)), delta)});
  CHECK_THROWS_AS(decompose_lp(f, delta / 2, 2, 2.0, default_grid(f)), DomainError);
}

TEST_CASE("rho-tube coarsening") {
  const double delta = 1.0 / 32;
  SUBCASE("single tube") {
    auto f = family(2, delta, {Tube(v2(0, 0), Direction(v2(1, 0)), delta)});
    auto c = coarsen_to_rho_tubes(f, 8 * delta);
    CHECK(c.assignment[0].size() >= 1);
    CHECK(static_cast<double>(c.max_overlap()) <= coarsening_overlap_bound(2));
    for (auto i : c.assignment[0]) CHECK(tube_contains(c.coarse_tubes[i], f.tubes()[0]));
  }
  SUBCASE("duplicates get identical assignments") {
    Tube t(v2(0.2, -0.1), Direction(v2(3, 1)), delta);
    auto f = family(2, delta, {t, t});
    auto c = coarsen_to_rho_tubes(f, 0.25);
    CHECK(c.assignment[0] == c.assignment[1]);
  }
  SUBCASE("random tubes in space satisfy the overlap bound and localization") {
    Rng rng(100);
    const double d = 1.0 / 16;
    auto f = family(3, d, random_tubes(rng, 3, 100, d));
    auto c = coarsen_to_rho_tubes(f, 0.25);
    CHECK(static_cast<double>(c.max_overlap()) <= coarsening_overlap_bound(3));
    for (std::size_t i = 0; i < f.size(); ++i) {
      REQUIRE(!c.assignment[i].empty());
      for (auto j : c.assignment[i]) CHECK(tube_contains(c.coarse_tubes[j], f.tubes()[i]));
    }
    auto check = localization_check(f, 0.25, 1.5, default_grid(f));
    CHECK(check.ratio > 0.0);
    CHECK(check.ratio <= 1.0 + 1e-9);  // each tube counted in >= 1 coarse tube per cap
  }
  auto f = family(2, 0.125, {Tube(v2(0, 0), Direction(v2(1, 0)), 0.125)});
  CHECK_THROWS_AS(coarsen_to_rho_tubes(f, 0.25), DomainError);
}

TEST_CASE("rescaling into the unit ball") {
  const double delta = 1.0 / 64, rho = 0.125;
  const Tube coarse(v2(0.1, 0.2), Direction(v2(1, 0)), rho);
  SUBCASE("the coarse tube itself") {
    auto fine = family(2, delta, {Tube(coarse.center, coarse.direction, delta)});
    auto r = rescale_into_ball(fine, coarse);
    const Tube& img = r.family.tubes()[0];
    CHECK(img.center.norm() < 1e-12);
    CHECK(std::abs(img.direction[0] - 1.0) < 1e-12);
    CHECK(img.radius == doctest::Approx(delta / rho));
    CHECK(r.comparability <= Limits::rescale_comparability);
  }
  SUBCASE("tilted tube in the plane") {
    const double theta = rho / 2;
    const Tube t(coarse.center, Direction(v2(std::cos(theta), std::sin(theta))), delta);
    auto r = rescale_into_ball(family(2, delta, {t}), coarse);
    const Tube& img = r.family.tubes()[0];
    // (cos, sin) -> (cos, sin / rho): angle atan(tan(theta) / rho)
    const double expect = std::atan(std::tan(theta) / rho);
    CHECK(std::atan2(std::abs(img.direction[1]), img.direction[0]) == doctest::Approx(expect).epsilon(1e-12));
    // the transverse slope is halved relative to the axis: tan = tan(rho/2) / rho ~ 1/2
    CHECK(std::tan(expect) == doctest::Approx(0.5).epsilon(0.01));
    CHECK(img.radius <= 2 * delta / rho);
    // round trip
    const Tube back = unrescale_tube(r.map, img);
    CHECK((back.endpoint_lo() - t.endpoint_lo()).norm() + (back.endpoint_hi() - t.endpoint_hi()).norm() < 1e-12);
    CHECK(back.radius == doctest::Approx(delta));
  }
  SUBCASE("round trip within 2 delta for random contained tubes in 3d") {
    Rng rng(9);
    const Tube c3(v3(0, 0.1, 0), Direction(v3(1, 1, 0)), rho);
    std::vector<Tube> ts;
    while (ts.size() < 20) {
      Vec u = c3.direction.vec() + 0.05 * rng.gaussian_vector(3);
      Vec x = c3.center + 0.04 * rng.gaussian_vector(3);
      Tube t(x, Direction(u), delta);
      if (tube_contains(c3, t, 2 * delta)) ts.push_back(t);
    }
    auto fine = family(3, delta, ts);
    auto r = rescale_into_ball(fine, c3);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const Tube back = unrescale_tube(r.map, r.family.tubes()[i]);
      const double h = std::max((back.endpoint_lo() - ts[i].endpoint_lo()).norm(), (back.endpoint_hi() - ts[i].endpoint_hi()).norm());
      CHECK(h <= 2 * delta);
      CHECK(r.family.tubes()[i].center.norm() <= Limits::rescale_comparability);
    }
  }
  SUBCASE("outside tubes are rejected") {
    const Tube far(v2(0.1, 0.6), Direction(v2(1, 0)), delta);
    CHECK_THROWS_WITH_AS(rescale_into_ball(family(2, delta, {far}), coarse), doctest::Contains("tube 0"), DomainError);
  }
}

TEST_CASE("calculation chain") {
  SUBCASE("single tube") {
    const double delta = 1.0 / 16;
    auto f = family(2, delta, {Tube(v2(0, 0), Direction(v2(1, 0)), delta)});
    auto c = calculation_chain(f, default_grid(f));
    CHECK(c.lines[0] == 0.0);
    for (int i = 1; i < 6; ++i) CHECK(c.lines[i] >= 0.0);
  }
  SUBCASE("16 tubes at delta 1/16 in the plane") {
    const double delta = 1.0 / 16;
    Rng rng(16);
    auto f = family(2, delta, random_tubes(rng, 2, 16, delta));
    auto c = calculation_chain(f, default_grid(f));
    const double s = f.total_volume();
    CHECK(s == doctest::Approx(16 * (2 * delta + std::numbers::pi * delta * delta)));
    CHECK(c.p == doctest::Approx(2.0));
    CHECK(c.lines[5] == doctest::Approx(s));
    CHECK(c.cardinality_ratio >= 1.0);
    CHECK(c.cardinality_ratio == doctest::Approx(s));
    CHECK(c.cardinality_ratio <= c.cardinality_bound * (1 + 1e-12));
    CHECK(c.pointwise_slack >= 0.0);
    CHECK(c.regroup_error < 1e-12);
    CHECK(c.simplify_error < 1e-12);
  }
  SUBCASE("regrouping identities for random parameters") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 3;
      const int d = 1 + static_cast<int>(rng.below(2));
      const double beta = rng.uniform(0.2, 1.0);
      const double delta = 1.0 / 8;
      const int max = static_cast<int>(std::floor(std::pow(delta, 2.0 * (1 - d) - beta)));
      auto f = family(n, delta, random_tubes(rng, n, std::min(max, 6), delta), d, beta);
      auto c = calculation_chain(f, default_grid(f, 0.5));
      CHECK(c.regroup_error < 1e-10);
      CHECK(c.simplify_error < 1e-10);
      CHECK(c.pointwise_slack >= -1e-12 * c.lines[1]);
    }
  }
  const double delta = 1.0 / 8;
  std::vector<Tube> ts(9, Tube(v2(0, 0), Direction(v2(1, 0)), delta));
  CHECK_THROWS_AS(calculation_chain(family(2, delta, ts), Grid::box(2, 1.2, delta / 4)), DomainError);
}

TEST_CASE("induction step terms") {
  SUBCASE("single tube") {
    const double delta = 1.0 / 16;
    auto f = family(2, delta, {Tube(v2(0, 0), Direction(v2(1, 0)), delta)});
    auto t = induction_step_terms(f, 0.25, default_grid(f));
    CHECK(t.term1 > 0.0);
    CHECK(t.ratio < 1.0);
  }
  SUBCASE("all tubes inside one rho-tube") {
    const double delta = 1.0 / 64, rho = 0.25;
    std::vector<Tube> ts;
    for (int i = 0; i < 4; ++i) ts.emplace_back(v2(0.01 * i, 0.02 * i), Direction(v2(1, 0)), delta);
    auto f = family(2, delta, ts);
    Grid g = default_grid(f);
    auto t = induction_step_terms(f, rho, g);
    CHECK(t.term2 >= t.lhs);
  }
  SUBCASE("bush constant is stable across scales") {
    double lo = INFINITY, hi = 0.0;
    for (int e : {4, 5, 6}) {
      const double delta = std::ldexp(1.0, -e);
      auto f = family(2, delta, bush2(delta));
      auto t = induction_step_terms(f, 0.25, default_grid(f));
      lo = std::min(lo, t.ratio);
      hi = std::max(hi, t.ratio);
    }
    CHECK(hi <= 2.0 * lo);
  }
}

TEST_CASE("grid convergence between h = delta/4 and delta/8") {
  const double delta = 1.0 / 16;
  Rng rng(12);
  auto f = family(2, delta, random_tubes(rng, 2, 16, delta));
  Grid g4 = default_grid(f, 0.25), g8 = default_grid(f, 0.125);
  CHECK(rel(lp_norm_tube_sum(f, 2.0, g4), lp_norm_tube_sum(f, 2.0, g8)) < 0.05);
  const double e[] = {1.0};
  CHECK(rel(multilinear_power_sums(f, 2, e, g4)[0], multilinear_power_sums(f, 2, e, g8)[0]) < 0.05);
  auto f3 = family(3, delta, random_tubes(rng, 3, 12, delta));
  CHECK(rel(lp_norm_tube_sum(f3, 1.5, default_grid(f3, 0.25)), lp_norm_tube_sum(f3, 1.5, default_grid(f3, 0.125))) < 0.05);
}
