#pragma once

#include "tubelab/functionals.hpp"
#include "tubelab/generators.hpp"
#include "tubelab/grid.hpp"

#include <span>
#include <vector>

namespace tubelab {

/// Least-squares power law value ~ C scale^slope, fitted in log-log.
struct ExponentFit {
  std::vector<double> scales;
  std::vector<double> values;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of the log-log residuals
};

/// Needs >= 3 points with positive coordinates and at least two distinct scales.
ExponentFit fit_power_law(std::span<const double> scales, std::span<const double> values);

/// The union of the family's tubes; every tube lies inside it.
Region build_E_delta(const TubeFamily& f, const Grid& grid);

/// Scales top, top/2, ... down to min_scale (inclusive when it is hit exactly).
std::vector<double> dyadic_scales(double min_scale, double top = 1.0);

/// Widest side of the bounding box of the occupied cells.
double region_extent(const Region& r);

/// Number of scale-s boxes meeting the cell centers of r; the box lattice is
/// anchored at the lower corner of the occupied cells.
std::size_t covering_count(const Region& r, double s);

/// Box-counting dimension: the slope of log N(s) against log(1/s). The
/// returned fit stores the covering counts as values and the negated slope of
/// log N against log s. Scales must lie in [h, max(1, extent)] (at least three).
/// Scales taken relative to region_extent avoid the overhang bias of a set
/// slightly wider than a dyadic box.
ExponentFit box_counting_dim(const Region& r, std::span<const double> scales);

/// Box counting of a finite point set on the real line.
ExponentFit box_counting_dim(std::span<const double> points, std::span<const double> scales);

struct HolderComparison {
  double tube_mass = 0.0;       // sum_T |T cap E|
  double e_volume = 0.0;        // |E|
  double norm = 0.0;            // || sum chi_T ||_p
  double holder_rhs = 0.0;      // |E|^{1/p'} || sum chi_T ||_p
  bool chain_holds = false;     // tube_mass <= holder_rhs
  double lower_bound_value = 0.0;  // delta^{n-2d+1-beta} delta^{-(n - dim)/p'}
  double upper_bound_value = 0.0;  // delta^{(1-d)/p' + (n+1-2d-beta)/p}
  ExponentFit dimension;        // box counting of E at extent 2^{-j} >= 4h
  double exponent_deficit = 0.0;   // dim - (d + beta)
};

/// Hoelder comparison with p = (d+beta)/(d+beta-1); throws DomainError when p
/// differs from that value.
HolderComparison holder_comparison(const TubeFamily& f, const Grid& grid, double p);

/// Fits the exponent of ||sum chi_T||_p / (sum |T|)^{1/p} against delta, one
/// regenerated family per scale.
ExponentFit exponent_fit_norms(const GeneratorSpec& spec, std::span<const double> deltas, double p,
                               double h_over_delta = 0.25);

}  // namespace tubelab
