#include "tubelab/dichotomy.hpp"

#include "tubelab/config.hpp"
#include "tubelab/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace tubelab {

namespace {

void check_k(const DirectionMultiset& u, int k) {
  if (k < 2 || k > u.n()) throw DomainError(fmt::format("dichotomy: k = {} outside [2, {}]", k, u.n()));
}

void check_rho(double rho, bool allow_zero) {
  const bool ok = allow_zero ? (rho >= 0.0 && rho <= 1.0) : (rho > 0.0 && rho <= 1.0);
  if (!ok) throw DomainError(fmt::format("dichotomy: rho = {} out of range", rho));
}

std::uint64_t ipow(std::uint64_t base, int e) {
  std::uint64_t r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

bool within_budget(std::size_t n, int k) {
  double t = 1.0;
  for (int i = 0; i < k; ++i) t *= static_cast<double>(n);
  return t <= static_cast<double>(Limits::exhaustive_tuple_budget);
}

void require_budget(std::size_t n, int k) {
  if (!within_budget(n, k))
    throw BudgetExceeded(fmt::format("{}^{} tuples exceed the exhaustive budget of {}; use estimate_spread_tuples",
                                     n, k, Limits::exhaustive_tuple_budget));
}

// Visits every ordered j-tuple of indices in lexicographic order. The visitor
// returns false to stop early.
template <class Fn>
void for_each_tuple(std::size_t n, int j, Fn&& fn) {
  std::vector<std::size_t> idx(j, 0);
  while (true) {
    if (!fn(idx)) return;
    int d = j - 1;
    while (d >= 0 && ++idx[d] == n) idx[d--] = 0;
    if (d < 0) return;
  }
}

double tuple_wedge(const DirectionMultiset& u, const std::vector<std::size_t>& idx, std::vector<Vec>& scratch) {
  scratch.clear();
  for (auto i : idx) scratch.push_back(u[i]);
  return wedge_volume(scratch);
}

// #{ordered j-tuples with wedge < threshold}.
std::uint64_t count_degenerate(const DirectionMultiset& u, int j, double threshold) {
  std::uint64_t count = 0;
  std::vector<Vec> scratch;
  for_each_tuple(u.size(), j, [&](const std::vector<std::size_t>& idx) {
    if (tuple_wedge(u, idx, scratch) < threshold) ++count;
    return true;
  });
  return count;
}

Subspace extend_to_dim(const std::vector<Vec>& spanning, int target_dim, int n, Rng& rng) {
  std::vector<Vec> vs = spanning;
  while (static_cast<int>(vs.size()) < target_dim) {
    Vec g = rng.gaussian_vector(n);
    // retry on the (measure-zero) event of a dependent draw
    std::vector<Vec> trial = vs;
    trial.push_back(g);
    try {
      (void)Subspace::span(trial);
      vs = std::move(trial);
    } catch (const DomainError&) {
    }
  }
  return Subspace::span(vs);
}

Subspace random_subspace(int dim, int n, Rng& rng) { return extend_to_dim({}, dim, n, rng); }

}  // namespace

DirectionMultiset::DirectionMultiset(int n, std::vector<Direction> items) : n_(n), items_(std::move(items)) {
  if (items_.empty()) throw DomainError("DirectionMultiset: empty");
  for (const auto& d : items_)
    if (d.dim() != n_) throw DomainError("DirectionMultiset: direction of wrong dimension");
}

std::uint64_t count_spread_tuples(const DirectionMultiset& u, int k, double rho) {
  check_k(u, k);
  check_rho(rho, true);
  require_budget(u.size(), k);
  const double threshold = std::pow(rho, k - 1);
  std::uint64_t count = 0;
  std::vector<Vec> scratch;
  for_each_tuple(u.size(), k, [&](const std::vector<std::size_t>& idx) {
    if (tuple_wedge(u, idx, scratch) >= threshold) ++count;
    return true;
  });
  return count;
}

TupleEstimate estimate_spread_tuples(const DirectionMultiset& u, int k, double rho, std::size_t samples,
                                     std::uint64_t seed) {
  check_k(u, k);
  check_rho(rho, true);
  if (samples == 0) throw DomainError("estimate_spread_tuples: zero samples");
  const double threshold = std::pow(rho, k - 1);
  Rng rng(seed);
  std::vector<std::size_t> idx(k);
  std::vector<Vec> scratch;
  std::size_t hits = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (auto& i : idx) i = rng.below(u.size());
    if (tuple_wedge(u, idx, scratch) >= threshold) ++hits;
  }
  const double total = std::pow(static_cast<double>(u.size()), k);
  const double m = static_cast<double>(samples);
  const double phat = hits / m;
  const double z = 1.959963984540054;
  const double denom = 1.0 + z * z / m;
  const double centre = (phat + z * z / (2.0 * m)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / m + z * z / (4.0 * m * m)) / denom;
  return {phat * total, std::max(0.0, centre - half) * total, std::min(1.0, centre + half) * total, samples};
}

std::uint64_t capture_count(const DirectionMultiset& u, const Subspace& h, double rho) {
  if (h.ambient_dim() != u.n()) throw DomainError("capture_count: dimension mismatch");
  std::uint64_t c = 0;
  for (const auto& d : u.items())
    if (subspace_wedge(h, d.vec()) <= rho) ++c;
  return c;
}

bool verify_option_a(const DirectionMultiset& u, int k, double rho, std::uint64_t claimed_count) {
  if (!within_budget(u.size(), k)) return false;
  const std::uint64_t actual = count_spread_tuples(u, k, rho);
  // actual >= (1/2) N^k, and the claim must be an exact recount
  return actual == claimed_count && 2 * actual >= ipow(u.size(), k);
}

bool verify_option_b(const DirectionMultiset& u, int k, double rho, const Subspace& h) {
  if (h.dim() != k - 1 || h.ambient_dim() != u.n()) return false;
  // captured >= 2^{-2k} N
  return capture_count(u, h, rho) * ipow(2, 2 * k) >= u.size();
}

DichotomyResult decide_dichotomy(const DirectionMultiset& u, int k, double rho, std::uint64_t seed) {
  check_k(u, k);
  check_rho(rho, false);
  require_budget(u.size(), k);
  const std::uint64_t n_items = u.size();

  const std::uint64_t good = count_spread_tuples(u, k, rho);
  if (2 * good >= ipow(n_items, k)) {
    if (!verify_option_a(u, k, rho, good))
      throw DichotomyFailure("decide_dichotomy: option A recount disagrees", good, 0);
    return {OptionA{good, std::pow(rho, k - 1)}};
  }

  // smallest j in [2, k] with #{j-tuples: wedge < rho^{j-1}} >= 2^{2j-2k-1} N^j
  int j = 0;
  for (int cand = 2; cand <= k; ++cand) {
    const std::uint64_t degenerate = count_degenerate(u, cand, std::pow(rho, cand - 1));
    if (degenerate * ipow(2, 2 * k - 2 * cand + 1) >= ipow(n_items, cand)) {
      j = cand;
      break;
    }
  }
  if (j == 0) throw DichotomyFailure("decide_dichotomy: no degenerate index j found", good, 0);

  // first (j-1)-tuple, lexicographically, with |u_1 ^ ... ^ u_{j-1}| >= rho^{j-2}
  // and #{u : |u_1 ^ ... ^ u_{j-1} ^ u| < rho^{j-1}} >= 2^{2j-2k-2} N.
  // For j = 2 the tuple is a single direction and the wedge test is vacuous.
  const double outer = std::pow(rho, j - 1);
  const double inner = std::pow(rho, j - 2);
  const std::uint64_t scale = ipow(2, 2 * k - 2 * j + 2);
  std::optional<std::vector<std::size_t>> chosen;
  std::uint64_t best_capture = 0;
  std::vector<Vec> scratch;
  for_each_tuple(n_items, j - 1, [&](const std::vector<std::size_t>& idx) {
    if (j > 2 && tuple_wedge(u, idx, scratch) < inner) return true;
    std::uint64_t c = 0;
    std::vector<std::size_t> ext = idx;
    ext.push_back(0);
    for (std::size_t m = 0; m < n_items; ++m) {
      ext.back() = m;
      if (tuple_wedge(u, ext, scratch) < outer) ++c;
    }
    best_capture = std::max(best_capture, c);
    if (c * scale >= n_items) {
      chosen = idx;
      return false;
    }
    return true;
  });
  if (!chosen) throw DichotomyFailure("decide_dichotomy: no witness tuple found", good, best_capture);

  std::vector<Vec> w;
  for (auto i : *chosen) w.push_back(u[i]);
  Rng rng(seed);
  Subspace h = extend_to_dim(w, k - 1, u.n(), rng);
  const std::uint64_t captured = capture_count(u, h, rho);
  if (!verify_option_b(u, k, rho, h))
    throw DichotomyFailure("decide_dichotomy: option B witness failed verification", good, captured);
  return {OptionB{std::move(h), captured, j}};
}

double wedge_tuple_sum(const DirectionMultiset& u, int k) {
  check_k(u, k);
  require_budget(u.size(), k);
  double sum = 0.0;
  std::vector<Vec> scratch;
  for_each_tuple(u.size(), k, [&](const std::vector<std::size_t>& idx) {
    sum += tuple_wedge(u, idx, scratch);
    return true;
  });
  return sum;
}

CardinalityBound control_card_ratio(const DirectionMultiset& u, int k, double rho, std::uint64_t seed) {
  check_k(u, k);
  check_rho(rho, false);
  CardinalityBound out;
  out.lhs = static_cast<double>(u.size());
  out.multilinear_term = std::pow(rho, (1.0 - k) / k) * std::pow(wedge_tuple_sum(u, k), 1.0 / k);

  std::uint64_t sup = 0;
  const auto result = decide_dichotomy(u, k, rho, seed);
  if (!result.is_a()) sup = result.b().captured_count;
  Rng rng(mix_seed(seed));
  for (std::size_t i = 0; i < Limits::random_subspaces; ++i)
    sup = std::max(sup, capture_count(u, random_subspace(k - 1, u.n(), rng), rho));
  out.sup_capture = static_cast<double>(sup);
  out.ratio = out.lhs / (out.multilinear_term + out.sup_capture);
  return out;
}

std::vector<std::pair<std::size_t, std::uint64_t>> cap_partition_counts(const DirectionMultiset& u,
                                                                        const CapCover& cover) {
  if (cover.n != u.n()) throw DomainError("cap_partition_counts: cover dimension mismatch");
  std::map<std::size_t, std::uint64_t> counts;
  for (const auto& d : u.items())
    for (auto cap : cover.caps_containing(d.vec())) ++counts[cap];
  return {counts.begin(), counts.end()};
}

CapLpBound cap_lp_bound(const DirectionMultiset& u, int k, double p, const CapCover& cover) {
  check_k(u, k);
  if (!(p >= 1.0)) throw DomainError("cap_lp_bound: p must be >= 1");
  const double rho = cover.rho;
  CapLpBound out;
  out.lhs = std::pow(static_cast<double>(u.size()), p);
  out.multilinear_term = std::pow(rho, (1.0 - k) * p / k) * std::pow(wedge_tuple_sum(u, k), p / k);
  double caps = 0.0;
  for (const auto& [cap, count] : cap_partition_counts(u, cover)) caps += std::pow(static_cast<double>(count), p);
  out.cap_term = std::pow(rho, (2.0 - k) * (p - 1.0)) * caps;
  out.ratio = out.lhs / (out.multilinear_term + out.cap_term);
  return out;
}

}  // namespace tubelab
