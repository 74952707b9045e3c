#pragma once

#include "tubelab/config.hpp"
#include "tubelab/error.hpp"
#include "tubelab/functionals.hpp"
#include "tubelab/linegeom.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

namespace tubelab {

namespace detail {
class ProductScaleCache;
}

/// Finite probability measure on line space.
struct WeightedLineSet {
  /// Weights must be nonnegative and sum to 1 (within 1e-9).
  WeightedLineSet(std::vector<Line> lines, std::vector<double> weights, double s0, double eps);

  /// Uniform weights.
  static WeightedLineSet uniform(std::vector<Line> lines, double s0, double eps);

  std::vector<Line> lines;
  std::vector<double> weights;
  double s0;    // 2(d-1) + beta
  double eps;
  double C0 = std::numeric_limits<double>::quiet_NaN();  // set by frostman_constant

  double exponent() const { return s0 - eps; }
};

/// Family of metric balls in line space, one scale per dyadic radius
/// delta, 2 delta, ..., 1.
///
/// Product nets have centers (x, c): c runs over a cap cover of angular
/// diameter r/2, x over the (r/2)-lattice of c-perp (in a fixed frame of c)
/// inside B(0, 1 + r). They are enumerated lazily around the input lines.
///
/// Enclosing nets use the input lines themselves as centers with radius 2r.
/// Any r-ball is contained in the 2r-ball about each of its members, so a
/// bound verified on the enclosing net holds for every r-ball.
class BallNet {
 public:
  enum class Kind { product, enclosing };

  static BallNet product(int n, double delta);
  static BallNet enclosing(int n, double delta);

  Kind kind() const { return kind_; }
  int n() const { return n_; }
  double delta() const { return delta_; }
  const std::vector<double>& radii() const { return radii_; }
  /// Ball radius used at nominal radius r (r or 2r).
  double ball_radius(std::size_t i) const { return kind_ == Kind::enclosing ? 2.0 * radii_[i] : radii_[i]; }
  /// Upper bound on the number of product-net balls containing one line.
  std::size_t overlap_bound() const { return overlap_bound_; }

  /// Distance from `l` to the nearest product-net center at radius index i
  /// (lines meeting B(0,1) are always within the radius).
  double covering_distance(const Line& l, std::size_t i) const;

  /// Lazily built per-radius tables shared by copies of the net.
  const detail::ProductScaleCache& scales() const { return *scales_; }

 private:
  BallNet(Kind kind, int n, double delta);
  Kind kind_;
  int n_;
  double delta_;
  std::vector<double> radii_;
  std::size_t overlap_bound_ = 0;
  std::shared_ptr<detail::ProductScaleCache> scales_;
};

/// Largest ball mass at every radius of the net.
struct BallMasses {
  std::vector<double> radii;
  std::vector<double> worst;             // max over balls of the total weight inside
  std::vector<std::size_t> worst_line;   // an input line attaining it (inside the ball)
};

/// With empty `weights` every line has weight 1 (counts).
BallMasses ball_masses(std::span<const Line> lines, std::span<const double> weights, const BallNet& net);

struct BallCondition {
  double worst_ratio = 0.0;  // max_r count(B) / (r/delta)^s
  double radius = 0.0;
  double count = 0.0;
  std::size_t line = 0;
};

/// Worst ratio of #{l in B} to (r/delta)^s over the net; <= 1 certifies the
/// non-concentration condition over the net.
BallCondition ball_condition(std::span<const Line> lines, double delta, double s, const BallNet& net);

/// ball_condition over the coaxial lines, s = 2(d-1) + beta.
double ball_condition_worst_ratio(const TubeFamily& f, const BallNet& net);

/// Smallest C with P(B) <= C r^s on every net ball; stored into w.C0.
double frostman_constant(WeightedLineSet& w, double s, const BallNet& net);

/// Greedy selection in input order; accepted lines are pairwise >= sep apart
/// and every rejected line is within sep of an accepted one.
std::vector<std::size_t> separated_subset(std::span<const Line> lines, double sep);

struct PigeonholeResult {
  std::vector<std::size_t> selected;  // indices into the weighted set
  double A = 0.0;
  int bucket = 0;                     // j with A = 2^{-j}
  std::vector<double> masses;         // P(B(l, delta)) of the selected lines
  std::size_t separated = 0;          // size of the 2 delta-separated support
  double captured_mass = 0.0;         // sum of P(B(l, delta)) over the separated support
  double log_power = 0.0;             // C_log
  bool frostman_lower_bound = false;  // A >= C0^{-1} delta^eps (when C0 is set)
};

/// 2 delta-separates the support and selects the dyadic band of
/// P(B(l, delta)) / delta^{s0} with the largest count x level; ties go to the
/// larger A. Each selected line satisfies A^{-1} delta^{s0} <= P(B(l, delta)) < 2 A^{-1} delta^{s0}.
PigeonholeResult dyadic_pigeonhole(const WeightedLineSet& w, double delta);

struct ThinResult {
  std::vector<std::size_t> kept;  // indices into the input
  double probability = 0.0;
  int attempts = 0;
  double worst_ratio = 0.0;  // ball condition of the kept set over the net
};

class ThinningFailure : public Error {
 public:
  ThinningFailure(const std::string& what, BallCondition worst, std::size_t best_size)
      : Error(what), worst(worst), best_size(best_size) {}
  BallCondition worst;
  std::size_t best_size;
};

/// Keeps each line independently with probability q = C0^{-1} delta^{2 eps} A^{-1}
/// and accepts the sample when #kept >= q #L3 / 2 and #(kept in B) <= (r/delta)^{s0}
/// on every net ball. Retries with derived seeds up to max_attempts times.
ThinResult random_thin(std::span<const Line> l3, double A, double C0, double eps, double delta, double s0,
                       std::uint64_t seed, const BallNet& net, int max_attempts = Limits::thinning_attempts);

}  // namespace tubelab
