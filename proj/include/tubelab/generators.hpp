#pragma once

#include "tubelab/concentration.hpp"
#include "tubelab/config.hpp"
#include "tubelab/functionals.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tubelab {

struct GeneratorSpec {
  enum class Kind { planes, random_nonconcentrated, bush, axes };

  Kind kind = Kind::planes;
  int n = 2;
  int d = 1;
  double beta = 1.0;
  double delta = 1.0 / 16;
  std::uint64_t seed = 0;
  std::size_t size_cap = Limits::generator_size_cap;
  int count = 0;  // bush: number of tubes; axes: tubes per family
  int k = 2;      // axes: number of families

  /// Throws DomainError unless 1 <= d < n <= 4, beta in (0, 1], delta in (0, 1/2].
  void validate() const;
  ProblemParams params() const { return {d, beta}; }
};

std::string to_string(GeneratorSpec::Kind kind);
/// Accepts "planes", "random-nonconcentrated", "bush", "axes".
GeneratorSpec::Kind parse_generator_kind(const std::string& name);

/// Centers of the final intervals of a two-branch middle-interval Cantor
/// construction on [-1/2, 1/2] with ratio 2^{-1/beta}, run for
/// round(beta log2(1/delta)) levels; there are about delta^{-beta} of them.
std::vector<double> cantor_offsets(double beta, double delta);

/// Lines in parallel d-planes span(e_1..e_d) + t e_{d+1}, t over the Cantor
/// offsets, with a delta-net of directions and foot points inside each plane.
/// Throws BudgetExceeded when the family would exceed size_cap.
TubeFamily gen_lines_in_planes(int n, int d, double beta, double delta, std::uint64_t seed,
                               std::size_t size_cap = Limits::generator_size_cap);

/// Incremental acceptance under the ball condition #{l in B} <= (r/delta)^s,
/// verified on the enclosing net (balls of radius 2r about accepted lines).
class NonConcentratedSampler {
 public:
  NonConcentratedSampler(int n, double delta, double s);

  /// Adds l iff every enclosing-net count stays within budget afterwards.
  bool try_add(const Line& l);

  const std::vector<Line>& lines() const { return lines_; }
  std::size_t size() const { return lines_.size(); }

 private:
  int n_;
  double delta_;
  std::vector<double> radii_;
  std::vector<double> budget_;              // floor((r/delta)^s) per radius
  std::vector<Line> lines_;
  std::vector<std::vector<int>> counts_;    // per line, per radius
};

struct GeneratedFamily {
  TubeFamily family;
  bool stalled = false;
  std::size_t target = 0;
  std::size_t candidates = 0;
};

/// Rejection sampling of uniform random lines meeting B(0,1) until
/// delta^{2(1-d)-beta} lines are accepted or 50x that many candidates are drawn.
GeneratedFamily gen_random_nonconcentrated(int n, int d, double beta, double delta, std::uint64_t seed,
                                           std::size_t size_cap = Limits::generator_size_cap);

/// `count` tubes centered at the origin with well separated directions.
TubeFamily gen_bush(int n, double delta, int count, ProblemParams params = {1, 1.0});

/// k families, family i parallel to e_i with feet on a lattice of e_i-perp.
std::vector<TubeFamily> gen_axes(int n, int k, double delta, int per_family_count, ProblemParams params = {1, 1.0});

/// Single-family output of any generator; axes families are concatenated.
TubeFamily generate(const GeneratorSpec& spec);

}  // namespace tubelab
