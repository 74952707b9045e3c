#pragma once

#include "tubelab/grid.hpp"
#include "tubelab/linegeom.hpp"

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

namespace tubelab {

/// Problem parameters (d, beta); the dual exponent is p' = d + beta.
struct ProblemParams {
  int d = 1;
  double beta = 1.0;

  double dual_exponent() const { return d + beta; }
  /// p = p' / (p' - 1). Throws DomainError when beta = 0 (p would be infinite).
  double exponent() const;
  /// 2(d-1) + beta.
  double concentration_exponent() const { return 2.0 * (d - 1) + beta; }
};

/// Finite family of tubes sharing one radius delta.
class TubeFamily {
 public:
  /// Validates: every radius equals delta, centers lie in B(0, ball_radius),
  /// 0 < delta <= 1/2, 1 <= d < n, beta in [0, 1].
  TubeFamily(int n, double delta, ProblemParams params, std::vector<Tube> tubes, double ball_radius = 1.0);

  int n() const { return n_; }
  double delta() const { return delta_; }
  const ProblemParams& params() const { return params_; }
  const std::vector<Tube>& tubes() const { return tubes_; }
  std::size_t size() const { return tubes_.size(); }
  bool empty() const { return tubes_.empty(); }

  /// Sum of analytic tube volumes.
  double total_volume() const;

  /// Same parameters, a subset of the tubes.
  TubeFamily subset(std::span<const std::size_t> indices) const;

 private:
  int n_;
  double delta_;
  ProblemParams params_;
  std::vector<Tube> tubes_;
  double ball_radius_;
};

/// Volume of the closed r-neighborhood of a segment of length L in R^n:
/// omega_{n-1} r^{n-1} L + omega_n r^n.
double tube_volume(const Tube& t);

/// Volume of the unit ball in R^m.
double unit_ball_volume(int m);

/// Default grid for a family: spacing delta/4 over the covering box.
Grid default_grid(const TubeFamily& f, double h_over_delta = 0.25);

/// Throws ResolutionError unless grid.h <= delta / 2.
void require_resolved(const Grid& grid, double delta);

/// Midpoint-rule value of integral (sum_T chi_T)^p.
double lp_power_sum(std::span<const Tube> tubes, double p, const Grid& grid);

/// (integral (sum_T chi_T)^p)^{1/p}.
double lp_norm_tube_sum(const TubeFamily& f, double p, const Grid& grid);

/// L^{k/(k-1)} norm of (sum_{T_1..T_k} chi_{T_1}...chi_{T_k} |u_1 ^ ... ^ u_k|)^{1/k}
/// with T_i ranging over families[i].
double multilinear_kakeya_lhs(std::span<const TubeFamily> families, const Grid& grid);

/// (1/delta)^{n/k - 1} prod_i (sum_{T in families[i]} |T|)^{1/k}.
double multilinear_kakeya_rhs(std::span<const TubeFamily> families);

/// integral M^{e} for each requested exponent e, where
/// M(x) = sum over ordered k-tuples of tubes of f containing x of |u_1 ^ ... ^ u_k|.
std::vector<double> multilinear_power_sums(const TubeFamily& f, int k, std::span<const double> exponents,
                                           const Grid& grid);

struct LpDecomposition {
  double lhs = 0.0;              // ||sum chi_T||_p
  double term_multilinear = 0.0; // rho^{(1-k)/k} ||(k-linear sum)^{1/k}||_p
  double term_caps = 0.0;        // rho^{(2-k)/p'} (sum_tau ||sum_{dir in tau} chi_T||_p^p)^{1/p}
  double ratio = 0.0;            // lhs / (term_multilinear + term_caps)
  std::size_t caps = 0;
};

/// Splits ||sum chi_T||_p into the k-linear part and the cap-localized part.
/// p' here is the conjugate of p. Requires delta <= rho <= 1.
LpDecomposition decompose_lp(const TubeFamily& f, double rho, int k, double p, const Grid& grid);

/// Coarse rho-tubes covering B(0,1) in each cap direction, with the
/// assignment of every fine tube to all coarse tubes that contain it.
struct RhoCoarsening {
  double rho = 0.0;
  std::vector<Tube> coarse_tubes;
  std::vector<std::size_t> coarse_cap;  // cap index of each coarse tube
  std::vector<std::vector<std::size_t>> assignment;  // fine -> coarse

  std::size_t max_overlap() const;
  /// coarse -> fine (inverse of assignment, increasing order).
  std::vector<std::vector<std::size_t>> members() const;
};

/// Requires delta < rho / 2.
RhoCoarsening coarsen_to_rho_tubes(const TubeFamily& f, double rho);

/// True iff the capsule `inner` lies inside the capsule `outer` enlarged by `slack`.
bool tube_contains(const Tube& outer, const Tube& inner, double slack = 0.0);

/// Both sides of sum_tau ||.||_p^p <~ sum_{T_rho} ||sum_{T in T_rho} chi_T||_p^p.
struct LocalizationCheck {
  double cap_side = 0.0;
  double coarse_side = 0.0;
  double ratio = 0.0;  // cap_side / coarse_side
  std::size_t max_overlap = 0;
};

LocalizationCheck localization_check(const TubeFamily& f, double rho, double p, const Grid& grid);

/// x -> diag(1, 1/rho, ..., 1/rho) R (x - origin), where R maps the coarse
/// tube's axis to e_1.
struct AffineRescale {
  Vec origin;
  Eigen::MatrixXd rotation;  // rows: axis, then an orthonormal frame of its complement
  double rho = 1.0;

  Vec apply(const Vec& x) const;
  Vec inverse(const Vec& y) const;
};

struct RescaledFamily {
  TubeFamily family;  // scale delta / rho, centers in B(0, C_comp)
  AffineRescale map;
  double comparability = 0.0;  // max over images of max(length, |endpoint|, radius * rho / delta)
};

/// Maps tubes contained in `coarse` (up to 2 delta) to the unit scale. Each
/// image keeps its core segment (the image of the fine core) and gets radius
/// delta / rho, which contains the image of the fine tube.
RescaledFamily rescale_into_ball(const TubeFamily& fine_subset, const Tube& coarse);

/// Undo a rescale: segment through A^{-1}, radius rho * image radius.
Tube unrescale_tube(const AffineRescale& map, const Tube& image);

/// The six displayed quantities of the (d+1)-linear calculation chain.
struct ChainReport {
  std::array<double, 6> lines{};
  std::array<double, 5> step_ratios{};  // lines[i] / lines[i+1]
  double pointwise_slack = 0.0;   // lines[1] - lines[0], must be >= 0
  double multilinear_constant = 0.0;  // lines[1] / lines[2]
  double regroup_error = 0.0;     // |lines[2] - lines[3]| / lines[3]
  double simplify_error = 0.0;    // |lines[4] - lines[5]| / lines[5]
  double cardinality_ratio = 0.0; // lines[3] / lines[4]
  double cardinality_bound = 0.0; // (|T| / delta^{n-1})^{p-1}
  double p = 0.0;
};

/// Requires #F <= delta^{2(1-d)-beta} and beta > 0.
ChainReport calculation_chain(const TubeFamily& f, const Grid& grid);

struct InductionTerms {
  double lhs = 0.0;    // ||sum chi_T||_p
  double term1 = 0.0;  // rho^{-d/(d+1)} delta^{(1-d)/p'} (sum |T|)^{1/p}
  double term2 = 0.0;  // rho^{(1-d)/p'} (sum_{T_rho} ||sum_{T in T_rho} chi_T||_p^p)^{1/p}
  double ratio = 0.0;  // lhs / (term1 + term2)
};

/// Requires #F <= delta^{2(1-d)-beta}, delta <= rho / 2, beta > 0.
InductionTerms induction_step_terms(const TubeFamily& f, double rho, const Grid& grid);

}  // namespace tubelab
