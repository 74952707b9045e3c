#include "tubelab/dimension.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace tubelab {

namespace {

constexpr int kAxisBits = 16;
constexpr std::int64_t kAxisOffset = std::int64_t{1} << (kAxisBits - 1);

void check_scales(std::span<const double> scales, double finest, double coarsest) {
  if (scales.size() < 3) throw DomainError("box counting needs at least three scales");
  for (double s : scales)
    if (!(s >= finest * (1 - 1e-9)) || s > coarsest * (1 + 1e-12))
      throw DomainError(fmt::format("scale {} outside [{}, {}]", s, finest, coarsest));
}

std::uint64_t pack(std::span<const std::int64_t> box) {
  std::uint64_t key = 0;
  for (auto b : box) {
    const std::int64_t shifted = b + kAxisOffset;
    if (shifted < 0 || shifted >= 2 * kAxisOffset) throw DomainError("box index out of range");
    key = (key << kAxisBits) | static_cast<std::uint64_t>(shifted);
  }
  return key;
}

ExponentFit box_fit(std::span<const double> scales, const std::vector<double>& counts) {
  ExponentFit f = fit_power_law(scales, counts);
  f.slope = -f.slope;
  return f;
}

}  // namespace

ExponentFit fit_power_law(std::span<const double> scales, std::span<const double> values) {
  if (scales.size() != values.size()) throw DomainError("scales and values differ in length");
  if (scales.size() < 3) throw DomainError("a fit needs at least three points");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0) || !(values[i] > 0.0)) throw DomainError("log-log fit needs positive data");
    x.push_back(std::log(scales[i]));
    y.push_back(std::log(values[i]));
  }
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) throw DomainError("a fit needs two distinct scales");
  ExponentFit f;
  f.scales.assign(scales.begin(), scales.end());
  f.values.assign(values.begin(), values.end());
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    ss += e * e;
  }
  f.residual = std::sqrt(ss / m);
  return f;
}

Region build_E_delta(const TubeFamily& f, const Grid& grid) {
  require_resolved(grid, f.delta());
  return rasterize_union(f.tubes(), grid);
}

std::vector<double> dyadic_scales(double min_scale, double top) {
  if (!(min_scale > 0.0) || min_scale > top) throw DomainError(fmt::format("minimum scale must lie in (0, {}]", top));
  std::vector<double> out;
  for (double s = top; s >= min_scale * (1 - 1e-12); s /= 2) out.push_back(s);
  return out;
}

double region_extent(const Region& r) {
  if (r.runs.empty()) throw DomainError("extent of an empty region");
  const int n = r.grid.n;
  std::vector<std::int64_t> lo(n, std::numeric_limits<std::int64_t>::max()), hi(n, std::numeric_limits<std::int64_t>::min());
  std::vector<std::int64_t> idx;
  for (const auto& run : r.runs) {
    r.run_origin(run, idx);
    idx[n - 1] += run.length - 1;
    for (int a = 0; a < n; ++a) {
      lo[a] = std::min(lo[a], idx[a] - (a == n - 1 ? run.length - 1 : 0));
      hi[a] = std::max(hi[a], idx[a]);
    }
  }
  std::int64_t widest = 0;
  for (int a = 0; a < n; ++a) widest = std::max(widest, hi[a] - lo[a] + 1);
  return static_cast<double>(widest) * r.grid.h;
}

std::size_t covering_count(const Region& r, double s) {
  const int n = r.grid.n;
  std::vector<std::int64_t> idx;
  // anchor the boxes at the lower corner of the occupied cells
  std::vector<std::int64_t> low(n, std::numeric_limits<std::int64_t>::max());
  for (const auto& run : r.runs) {
    r.run_origin(run, idx);
    for (int a = 0; a < n; ++a) low[a] = std::min(low[a], idx[a]);
  }
  std::vector<double> anchor(n);
  for (int a = 0; a < n; ++a) anchor[a] = r.grid.lo[a] + static_cast<double>(low[a]) * r.grid.h;
  auto box_of = [&](int a, std::int64_t i) { return static_cast<std::int64_t>(std::floor((r.grid.center(a, i) - anchor[a]) / s)); };

  std::unordered_set<std::uint64_t> boxes;
  std::vector<std::int64_t> box(n);
  for (const auto& run : r.runs) {
    r.run_origin(run, idx);
    for (int a = 0; a < n - 1; ++a) box[a] = box_of(a, idx[a]);
    const auto first = box_of(n - 1, run.start);
    const auto last = box_of(n - 1, run.start + run.length - 1);
    for (std::int64_t b = first; b <= last; ++b) {
      box[n - 1] = b;
      boxes.insert(pack(box));
    }
  }
  return boxes.size();
}

ExponentFit box_counting_dim(const Region& r, std::span<const double> scales) {
  if (r.runs.empty()) throw DomainError("box counting of an empty region");
  check_scales(scales, r.grid.h, std::max(1.0, region_extent(r)));
  std::vector<double> counts;
  for (double s : scales) counts.push_back(static_cast<double>(covering_count(r, s)));
  return box_fit(scales, counts);
}

ExponentFit box_counting_dim(std::span<const double> points, std::span<const double> scales) {
  if (points.empty()) throw DomainError("box counting of an empty point set");
  check_scales(scales, 0.0, 1.0);
  const double lo = *std::min_element(points.begin(), points.end());
  std::vector<double> counts;
  for (double s : scales) {
    std::unordered_set<std::int64_t> boxes;
    for (double x : points) boxes.insert(static_cast<std::int64_t>(std::floor((x - lo) / s)));
    counts.push_back(static_cast<double>(boxes.size()));
  }
  return box_fit(scales, counts);
}

HolderComparison holder_comparison(const TubeFamily& f, const Grid& grid, double p) {
  const ProblemParams& pp = f.params();
  const double expected = pp.exponent();
  if (std::abs(p - expected) > 1e-9 * expected)
    throw DomainError(fmt::format("holder_comparison needs p = {} for d = {}, beta = {}; got {}", expected, pp.d,
                                  pp.beta, p));
  const double pd = pp.dual_exponent();
  const int n = f.n();
  const double delta = f.delta();

  HolderComparison out;
  const Region e = build_E_delta(f, grid);
  out.e_volume = e.volume();
  out.tube_mass = lp_power_sum(f.tubes(), 1.0, grid);
  out.norm = std::pow(lp_power_sum(f.tubes(), p, grid), 1.0 / p);
  out.holder_rhs = std::pow(out.e_volume, 1.0 / pd) * out.norm;
  out.chain_holds = out.tube_mass <= out.holder_rhs * (1 + 1e-12);

  const auto scales = dyadic_scales(4.0 * grid.h, region_extent(e));
  out.dimension = box_counting_dim(e, scales);
  const double dim = out.dimension.slope;
  out.exponent_deficit = dim - (pp.d + pp.beta);
  out.lower_bound_value = std::pow(delta, n - 2.0 * pp.d + 1.0 - pp.beta) * std::pow(delta, -(n - dim) / pd);
  out.upper_bound_value = std::pow(delta, (1.0 - pp.d) / pd + (n + 1.0 - 2.0 * pp.d - pp.beta) / p);
  return out;
}

ExponentFit exponent_fit_norms(const GeneratorSpec& spec, std::span<const double> deltas, double p,
                               double h_over_delta) {
  if (deltas.size() < 3) throw DomainError("exponent fit needs at least three scales");
  std::vector<double> values;
  for (double delta : deltas) {
    GeneratorSpec s = spec;
    s.delta = delta;
    const TubeFamily f = generate(s);
    const Grid g = default_grid(f, h_over_delta);
    values.push_back(lp_norm_tube_sum(f, p, g) / std::pow(f.total_volume(), 1.0 / p));
  }
  return fit_power_law(deltas, values);
}

}  // namespace tubelab
