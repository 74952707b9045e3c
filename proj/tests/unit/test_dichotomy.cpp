#include <doctest.h>

#include "tubelab/dichotomy.hpp"
#include "tubelab/random.hpp"

#include <algorithm>
#include <cmath>

using namespace tubelab;

namespace {

DirectionMultiset copies(int n, const Vec& v, int count) {
  return DirectionMultiset(n, std::vector<Direction>(count, Direction(v)));
}

DirectionMultiset random_multiset(Rng& rng, int n, int count) {
  std::vector<Direction> items;
  for (int i = 0; i < count; ++i) items.emplace_back(rng.unit_vector(n));
  return DirectionMultiset(n, std::move(items));
}

// Independent brute-force count using wedge_volume on explicit tuples.
std::uint64_t brute_spread(const DirectionMultiset& u, int k, double rho) {
  const std::size_t n = u.size();
  std::vector<std::size_t> idx(k, 0);
  std::uint64_t count = 0;
  std::size_t total = 1;
  for (int i = 0; i < k; ++i) total *= n;
  for (std::size_t t = 0; t < total; ++t) {
    std::size_t r = t;
    std::vector<Vec> vs;
    for (int i = 0; i < k; ++i) {
      vs.push_back(u[r % n]);
      r /= n;
    }
    if (wedge_volume(vs) >= std::pow(rho, k - 1)) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("count_spread_tuples examples") {
  CHECK(count_spread_tuples(copies(2, basis_vector(2, 0), 5), 2, 0.5) == 0);
  DirectionMultiset e12(2, {Direction(basis_vector(2, 0)), Direction(basis_vector(2, 1))});
  CHECK(count_spread_tuples(e12, 2, 0.5) == 2);
  DirectionMultiset e123(3, {Direction(basis_vector(3, 0)), Direction(basis_vector(3, 1)), Direction(basis_vector(3, 2))});
  CHECK(count_spread_tuples(e123, 3, 0.9) == 6);
  CHECK_THROWS_AS(count_spread_tuples(e12, 3, 0.5), DomainError);
  CHECK_THROWS_AS(count_spread_tuples(e12, 2, 1.5), DomainError);
  Rng rng(3);
  CHECK_THROWS_AS(count_spread_tuples(random_multiset(rng, 3, 200), 3, 0.1), BudgetExceeded);
}

TEST_CASE("count_spread_tuples matches brute force, is order invariant and monotone in rho") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(2));
    const int k = 2 + static_cast<int>(rng.below(n - 1));
    auto u = random_multiset(rng, n, 3 + static_cast<int>(rng.below(8)));
    const double rho = rng.uniform(0.0, 1.0);
    const auto c = count_spread_tuples(u, k, rho);
    CHECK(c == brute_spread(u, k, rho));
    std::vector<Direction> rev(u.items().rbegin(), u.items().rend());
    CHECK(count_spread_tuples(DirectionMultiset(n, rev), k, rho) == c);
    CHECK(count_spread_tuples(u, k, std::min(1.0, rho + 0.1)) <= c);
  }
}

TEST_CASE("estimate_spread_tuples brackets the exact count") {
  Rng rng(21);
  auto u = random_multiset(rng, 3, 30);
  const double exact = static_cast<double>(count_spread_tuples(u, 3, 0.3));
  const auto est = estimate_spread_tuples(u, 3, 0.3, 100000, 9);
  CHECK(est.ci_low <= exact);
  CHECK(exact <= est.ci_high);
  CHECK(std::abs(est.estimate - exact) / exact < 0.05);
}

TEST_CASE("decide_dichotomy examples") {
  SUBCASE("fully degenerate") {
    auto u = copies(2, basis_vector(2, 0), 7);
    auto r = decide_dichotomy(u, 2, 0.1);
    REQUIRE_FALSE(r.is_a());
    CHECK(r.b().captured_count == 7);
    CHECK(r.b().j == 2);
    CHECK(subspace_wedge(r.b().witness, basis_vector(2, 0)) < 1e-12);
  }
  SUBCASE("two orthogonal directions, boundary of the 1/2 threshold") {
    const int count = 4;
    std::vector<Direction> items(count, Direction(basis_vector(2, 0)));
    items.insert(items.end(), count, Direction(basis_vector(2, 1)));
    DirectionMultiset u(2, items);
    auto r = decide_dichotomy(u, 2, 0.1);
    REQUIRE(r.is_a());
    CHECK(r.a().good_tuple_count == 2 * count * count);
    CHECK(2 * r.a().good_tuple_count == (2 * count) * (2 * count));
  }
  SUBCASE("20 random directions on the sphere") {
    Rng rng(20);
    auto u = random_multiset(rng, 3, 20);
    auto r = decide_dichotomy(u, 3, 0.05);
    REQUIRE(r.is_a());
    CHECK(r.a().good_tuple_count == brute_spread(u, 3, 0.05));
  }
}

TEST_CASE("decide_dichotomy is total and certified") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(2));
    const int k = 2 + static_cast<int>(rng.below(n - 1));
    const int count = 1 + static_cast<int>(rng.below(12));
    const double rhos[] = {0.05, 0.1, 0.3, 1.0};
    const double rho = rhos[rng.below(4)];
    // mix of clustered and spread inputs
    std::vector<Direction> items;
    const Vec anchor = rng.unit_vector(n);
    for (int i = 0; i < count; ++i) {
      if (rng.bernoulli(0.5)) items.emplace_back(anchor + 0.05 * rng.gaussian_vector(n));
      else items.emplace_back(rng.unit_vector(n));
    }
    DirectionMultiset u(n, items);
    auto r = decide_dichotomy(u, k, rho, rng.below(1000));
    if (r.is_a()) {
      CHECK(verify_option_a(u, k, rho, r.a().good_tuple_count));
      CHECK(2 * r.a().good_tuple_count >= static_cast<std::uint64_t>(std::pow(count, k)));
    } else {
      CHECK(verify_option_b(u, k, rho, r.b().witness));
      CHECK(r.b().witness.dim() == k - 1);
      CHECK(r.b().captured_count * (1ull << (2 * k)) >= static_cast<std::uint64_t>(count));
    }
  }
}

TEST_CASE("verify oracles") {
  const Vec e1 = basis_vector(3, 0);
  std::vector<Vec> h{basis_vector(3, 1), basis_vector(3, 2)};
  auto u = copies(3, e1, 40);
  CHECK_FALSE(verify_option_b(u, 3, 0.01, Subspace::span(h)));
  std::vector<Vec> h1{e1};
  auto u2 = copies(3, e1, 9);
  CHECK(verify_option_b(u2, 2, 0.0, Subspace::span(h1)));
  DirectionMultiset e12(2, {Direction(basis_vector(2, 0)), Direction(basis_vector(2, 1))});
  CHECK(verify_option_a(e12, 2, 0.5, 2));
  CHECK_FALSE(verify_option_a(e12, 2, 0.5, 3));
}

TEST_CASE("control_card_ratio") {
  auto degenerate = copies(3, basis_vector(3, 1), 10);
  for (int k : {2, 3}) CHECK(control_card_ratio(degenerate, k, 0.3).ratio <= 1.0);

  DirectionMultiset ortho(3, {Direction(basis_vector(3, 0)), Direction(basis_vector(3, 1)), Direction(basis_vector(3, 2))});
  auto b = control_card_ratio(ortho, 3, 0.1);
  // 6 permutations of wedge 1: 0.1^{-2/3} 6^{1/3}
  CHECK(b.multilinear_term == doctest::Approx(std::pow(0.1, -2.0 / 3.0) * std::cbrt(6.0)));
  CHECK(b.ratio <= 4.0);

  Rng rng(50);
  auto u = random_multiset(rng, 3, 50);
  auto c = control_card_ratio(u, 2, 0.2);
  CHECK(std::isfinite(c.ratio));
  CHECK(c.ratio <= 8.0);
}

TEST_CASE("cap partition counts") {
  CapCover cover = build_cap_cover(3, 0.3);
  DirectionMultiset one(3, {Direction(basis_vector(3, 2))});
  std::uint64_t total = 0;
  for (auto [cap, count] : cap_partition_counts(one, cover)) total += count;
  CHECK(total >= 1);
  CHECK(total <= 1000);

  DirectionMultiset centers(3, cover.centers);
  auto counts = cap_partition_counts(centers, cover);
  CHECK(counts.size() == cover.centers.size());

  Rng rng(8);
  auto u = random_multiset(rng, 3, 100);
  total = 0;
  for (auto [cap, count] : cap_partition_counts(u, cover)) total += count;
  CHECK(total >= 100);
  CHECK(total <= 100000);
}

TEST_CASE("cap-localized Lp bound has a stable constant") {
  // The constant is the worst ratio over a batch; two independent batches of
  // 100 instances must agree within a factor 2.
  const CapCover cover = build_cap_cover(3, 0.3);
  auto batch_constant = [&](std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      auto u = random_multiset(rng, 3, 4 + static_cast<int>(rng.below(9)));
      worst = std::max(worst, cap_lp_bound(u, 2, 2.0, cover).ratio);
    }
    return worst;
  };
  const double a = batch_constant(1), b = batch_constant(2);
  CHECK(a > 0.0);
  CHECK(std::max(a, b) <= 2.0 * std::min(a, b));
}
