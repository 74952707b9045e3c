#pragma once

#include "tubelab/error.hpp"
#include "tubelab/linegeom.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace tubelab {

/// Finite multiset of directions in R^n (duplicates allowed).
class DirectionMultiset {
 public:
  DirectionMultiset(int n, std::vector<Direction> items);

  int n() const { return n_; }
  std::size_t size() const { return items_.size(); }
  const std::vector<Direction>& items() const { return items_; }
  const Vec& operator[](std::size_t i) const { return items_[i].vec(); }

 private:
  int n_;
  std::vector<Direction> items_;
};

/// Option A: at least half of all ordered k-tuples are rho^{k-1}-transverse.
struct OptionA {
  std::uint64_t good_tuple_count = 0;
  double threshold_used = 0.0;  // rho^{k-1}
};

/// Option B: a (k-1)-dimensional subspace captures >= 2^{-2k} of U.
struct OptionB {
  Subspace witness;
  std::uint64_t captured_count = 0;
  int j = 0;  // smallest index with many degenerate j-tuples
};

struct DichotomyResult {
  std::variant<OptionA, OptionB> outcome;

  bool is_a() const { return std::holds_alternative<OptionA>(outcome); }
  const OptionA& a() const { return std::get<OptionA>(outcome); }
  const OptionB& b() const { return std::get<OptionB>(outcome); }
};

/// Neither branch could be certified; only reachable through rounding.
class DichotomyFailure : public Error {
 public:
  DichotomyFailure(const std::string& what, std::uint64_t good_tuples, std::uint64_t best_capture)
      : Error(what), good_tuples(good_tuples), best_capture(best_capture) {}
  std::uint64_t good_tuples;
  std::uint64_t best_capture;
};

/// Exact number of ordered k-tuples of U (positions may repeat) with
/// |u_1 ^ ... ^ u_k| >= rho^{k-1}. Throws BudgetExceeded when (#U)^k is
/// above the exhaustive budget; use estimate_spread_tuples instead.
std::uint64_t count_spread_tuples(const DirectionMultiset& u, int k, double rho);

struct TupleEstimate {
  double estimate = 0.0;
  double ci_low = 0.0;   // 95% Wilson interval, in tuples
  double ci_high = 0.0;
  std::size_t samples = 0;
};

/// Sampling estimator for count_spread_tuples on large multisets.
TupleEstimate estimate_spread_tuples(const DirectionMultiset& u, int k, double rho, std::size_t samples,
                                     std::uint64_t seed);

/// Runs the constructive dichotomy and certifies the result with the
/// matching verify oracle before returning it.
DichotomyResult decide_dichotomy(const DirectionMultiset& u, int k, double rho, std::uint64_t seed = 0x5eed);

bool verify_option_a(const DirectionMultiset& u, int k, double rho, std::uint64_t claimed_count);
bool verify_option_b(const DirectionMultiset& u, int k, double rho, const Subspace& h);

/// #{u in U : |H ^ u| <= rho}.
std::uint64_t capture_count(const DirectionMultiset& u, const Subspace& h, double rho);

/// Sum of |u_1 ^ ... ^ u_k| over all ordered k-tuples of U.
double wedge_tuple_sum(const DirectionMultiset& u, int k);

/// Both sides of #U <~ rho^{(1-k)/k} (sum wedge)^{1/k} + sup_H #{|H ^ u| <= rho}.
struct CardinalityBound {
  double lhs = 0.0;
  double multilinear_term = 0.0;
  double sup_capture = 0.0;
  double ratio = 0.0;  // lhs / (multilinear_term + sup_capture)
};

/// The supremum is approximated by the dichotomy witness (if any) and a fixed
/// number of seeded random (k-1)-subspaces.
CardinalityBound control_card_ratio(const DirectionMultiset& u, int k, double rho, std::uint64_t seed = 0x5eed);

/// Number of elements of U in each cap (only caps with a nonzero count).
std::vector<std::pair<std::size_t, std::uint64_t>> cap_partition_counts(const DirectionMultiset& u,
                                                                        const CapCover& cover);

/// (#U)^p against rho^{(1-k)p/k} (sum wedge)^{p/k} + rho^{(2-k)(p-1)} sum_tau #(U cap tau)^p.
struct CapLpBound {
  double lhs = 0.0;
  double multilinear_term = 0.0;
  double cap_term = 0.0;
  double ratio = 0.0;
};

CapLpBound cap_lp_bound(const DirectionMultiset& u, int k, double p, const CapCover& cover);

}  // namespace tubelab
