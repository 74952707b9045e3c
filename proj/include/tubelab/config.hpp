#pragma once

#include <cstddef>
#include <cstdint>

namespace tubelab {

/// Numerical tolerances and fixed constants used across the library.
///
/// Everything that acts as a threshold lives here so tests and the CLI agree
/// on the same numbers.
struct Tolerances {
  static constexpr double unit_norm = 1e-12;      // |u| = 1 after construction
  static constexpr double sign_cutoff = 1e-9;     // canonical sign pivot
  static constexpr double foot_orthogonal = 1e-10; // x . u = 0
  static constexpr double orthonormal = 1e-10;    // Gram(basis) = I
  static constexpr double unit_input = 1e-9;      // accepted |u| - 1 on input
  static constexpr double basis_independence = 1e-9;
  static constexpr double weight_sum = 1e-9;
};

struct Limits {
  /// Exhaustive tuple enumeration is allowed while (#U)^k stays below this.
  static constexpr std::uint64_t exhaustive_tuple_budget = 1'000'000;
  /// Tuples drawn by the sampling estimator when the budget is exceeded.
  static constexpr std::size_t sampled_tuples = 100'000;
  /// Random (k-1)-subspaces tried when approximating sup_H in the |U| bound.
  static constexpr std::size_t random_subspaces = 64;
  /// Comparability constant for rescaled tubes.
  static constexpr double rescale_comparability = 4.0;
  /// Retry budget of the random thinning sampler.
  static constexpr int thinning_attempts = 32;
  /// Candidate draws per target tube before rejection sampling gives up.
  static constexpr int stall_factor = 50;
  /// Default tube-count cap of the generators.
  static constexpr std::size_t generator_size_cap = 40'000;
  /// Largest ambient dimension supported by grid functionals.
  static constexpr int max_grid_dim = 4;
  /// Log-power allowed in the pigeonholing bookkeeping.
  static constexpr double max_log_power = 10.0;
};

/// Bounded-overlap constant for rho-tube coarsening: 4 * 10^n.
constexpr double coarsening_overlap_bound(int n) {
  double v = 4.0;
  for (int i = 0; i < n; ++i) v *= 10.0;
  return v;
}

/// Cap covers may overlap at most 10^n times.
constexpr double cap_overlap_bound(int n) {
  double v = 1.0;
  for (int i = 0; i < n; ++i) v *= 10.0;
  return v;
}

}  // namespace tubelab
