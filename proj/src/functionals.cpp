#include "tubelab/functionals.hpp"

#include "raster.hpp"
#include "tubelab/config.hpp"
#include "tubelab/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <unordered_map>

namespace tubelab {

namespace {

struct Sums {
  std::vector<double> v;
  Sums& operator+=(const Sums& o) {
    if (v.size() < o.v.size()) v.resize(o.v.size(), 0.0);
    for (std::size_t i = 0; i < o.v.size(); ++i) v[i] += o.v[i];
    return *this;
  }
};

// Caches c^p for integer c.
class PowTable {
 public:
  explicit PowTable(double p) : p_(p) {}
  double operator()(std::size_t c) {
    while (cache_.size() <= c) cache_.push_back(std::pow(static_cast<double>(cache_.size()), p_));
    return cache_[c];
  }

 private:
  double p_;
  std::vector<double> cache_;
};

// integral (#active)^{p_i} for several exponents at once.
struct CountPowers {
  using Result = Sums;
  std::vector<PowTable> tables;
  Sums acc;

  explicit CountPowers(std::span<const double> ps) {
    for (double p : ps) tables.emplace_back(p);
    acc.v.assign(ps.size(), 0.0);
  }
  void on_run(const CellRun& run, std::span<const std::uint32_t> active) {
    for (std::size_t i = 0; i < tables.size(); ++i) acc.v[i] += run.length * tables[i](active.size());
  }
  Result take() {
    Sums out = acc;
    std::fill(acc.v.begin(), acc.v.end(), 0.0);
    return out;
  }
};

// sum_g integral (#active tubes in group g)^p, with groups given per tube.
struct GroupPowers {
  using Result = Sums;
  const std::vector<std::vector<std::uint32_t>>* groups;
  PowTable table;
  std::vector<std::uint32_t> scratch;
  double acc = 0.0;

  GroupPowers(const std::vector<std::vector<std::uint32_t>>& g, double p) : groups(&g), table(p) {}
  void on_run(const CellRun& run, std::span<const std::uint32_t> active) {
    scratch.clear();
    for (auto id : active) scratch.insert(scratch.end(), (*groups)[id].begin(), (*groups)[id].end());
    std::sort(scratch.begin(), scratch.end());
    double s = 0.0;
    for (std::size_t i = 0; i < scratch.size();) {
      std::size_t j = i;
      while (j < scratch.size() && scratch[j] == scratch[i]) ++j;
      s += table(j - i);
      i = j;
    }
    acc += run.length * s;
  }
  Result take() { return {{std::exchange(acc, 0.0)}}; }
};

// Wedge volumes of small tuples of unit vectors stored row-wise.
class WedgeKernel {
 public:
  WedgeKernel(std::span<const Tube> tubes, int n) : n_(n) {
    dirs_.reserve(tubes.size() * n);
    for (const auto& t : tubes)
      for (int i = 0; i < n; ++i) dirs_.push_back(t.direction[i]);
  }

  double operator()(const std::uint32_t* ids, int k) const {
    if (k > n_) return 0.0;
    if (k == 1) return 1.0;
    if (k == 2) {
      const double* a = row(ids[0]);
      const double* b = row(ids[1]);
      double s = 0.0;
      for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j) {
          const double m = a[i] * b[j] - a[j] * b[i];
          s += m * m;
        }
      return std::min(1.0, std::sqrt(s));
    }
    Eigen::Matrix4d g;
    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j) {
        const double* a = row(ids[i]);
        const double* b = row(ids[j]);
        double s = 0.0;
        for (int c = 0; c < n_; ++c) s += a[c] * b[c];
        g(i, j) = g(j, i) = s;
      }
    const double det = g.topLeftCorner(k, k).determinant();
    return det > 0.0 ? std::min(1.0, std::sqrt(det)) : 0.0;
  }

 private:
  const double* row(std::uint32_t id) const { return dirs_.data() + static_cast<std::size_t>(id) * n_; }
  int n_;
  std::vector<double> dirs_;
};

struct VecHash {
  std::size_t operator()(const std::vector<std::uint32_t>& v) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto x : v) h = (h ^ x) * 0x100000001b3ULL;
    return static_cast<std::size_t>(h);
  }
};

constexpr std::size_t kMemoLimit = 1 << 20;

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// Sum over ordered k-tuples of the active tubes of |u_1 ^ ... ^ u_k|. Tuples
// with a repeated tube vanish, so this is k! times the sum over increasing
// index tuples.
double single_family_wedge_sum(const WedgeKernel& wedge, std::span<const std::uint32_t> active, int k) {
  const std::size_t m = active.size();
  if (m < static_cast<std::size_t>(k)) return 0.0;
  std::array<std::uint32_t, detail::kMaxDim> ids{};
  std::array<std::size_t, detail::kMaxDim> pos{};
  double sum = 0.0;
  // iterative enumeration of increasing positions
  for (int i = 0; i < k; ++i) pos[i] = i;
  while (true) {
    for (int i = 0; i < k; ++i) ids[i] = active[pos[i]];
    sum += wedge(ids.data(), k);
    int i = k - 1;
    while (i >= 0 && pos[i] == m - k + i) --i;
    if (i < 0) break;
    ++pos[i];
    for (int j = i + 1; j < k; ++j) pos[j] = pos[j - 1] + 1;
  }
  return factorial(k) * sum;
}

// integral M^{e_i}, M = single-family k-linear wedge sum.
struct SingleFamilyPowers {
  using Result = Sums;
  const WedgeKernel* wedge;
  int k;
  std::vector<double> exps;
  std::unordered_map<std::vector<std::uint32_t>, double, VecHash> memo;
  std::vector<std::uint32_t> key;
  Sums acc;

  void on_run(const CellRun& run, std::span<const std::uint32_t> active) {
    if (active.size() < static_cast<std::size_t>(k)) return;
    key.assign(active.begin(), active.end());
    double m;
    if (auto it = memo.find(key); it != memo.end()) {
      m = it->second;
    } else {
      m = single_family_wedge_sum(*wedge, active, k);
      if (memo.size() > kMemoLimit) memo.clear();
      memo.emplace(key, m);
    }
    if (m <= 0.0) return;
    for (std::size_t i = 0; i < exps.size(); ++i) acc.v[i] += run.length * std::pow(m, exps[i]);
  }
  Result take() {
    Sums out = acc;
    std::fill(acc.v.begin(), acc.v.end(), 0.0);
    return out;
  }
};

// integral M^{1/(k-1)}, M = sum over T_1 in F_1, ..., T_k in F_k of the wedge.
struct MultiFamilyPower {
  using Result = Sums;
  const WedgeKernel* wedge;
  const std::vector<std::uint32_t>* family_of;
  int k;
  double exponent;
  std::unordered_map<std::vector<std::uint32_t>, double, VecHash> memo;
  std::vector<std::uint32_t> key;
  std::array<std::vector<std::uint32_t>, detail::kMaxDim> split;
  double acc = 0.0;

  double evaluate(std::span<const std::uint32_t> active) {
    for (int i = 0; i < k; ++i) split[i].clear();
    for (auto id : active) split[(*family_of)[id]].push_back(id);
    for (int i = 0; i < k; ++i)
      if (split[i].empty()) return 0.0;
    std::array<std::size_t, detail::kMaxDim> pos{};
    std::array<std::uint32_t, detail::kMaxDim> ids{};
    double sum = 0.0;
    while (true) {
      for (int i = 0; i < k; ++i) ids[i] = split[i][pos[i]];
      sum += (*wedge)(ids.data(), k);
      int i = k - 1;
      while (i >= 0 && ++pos[i] == split[i].size()) pos[i--] = 0;
      if (i < 0) break;
    }
    return sum;
  }

  void on_run(const CellRun& run, std::span<const std::uint32_t> active) {
    if (active.size() < static_cast<std::size_t>(k)) return;
    key.assign(active.begin(), active.end());
    double m;
    if (auto it = memo.find(key); it != memo.end()) {
      m = it->second;
    } else {
      m = evaluate(active);
      if (memo.size() > kMemoLimit) memo.clear();
      memo.emplace(key, m);
    }
    if (m > 0.0) acc += run.length * std::pow(m, exponent);
  }
  Result take() { return {{std::exchange(acc, 0.0)}}; }
};

double value_or_zero(const Sums& s, std::size_t i) { return i < s.v.size() ? s.v[i] : 0.0; }

double safe_ratio(double a, double b) { return b > 0.0 ? a / b : (a > 0.0 ? INFINITY : 0.0); }

void require_p(double p, const char* what) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError(fmt::format("{}: p = {} must be finite and >= 1", what, p));
}

void require_cardinality(const TubeFamily& f, const char* what) {
  const auto& pp = f.params();
  const double cap = std::pow(f.delta(), 2.0 * (1 - pp.d) - pp.beta);
  if (static_cast<double>(f.size()) > cap * (1.0 + 1e-9))
    throw DomainError(fmt::format("{}: #tubes = {} exceeds delta^(2(1-d)-beta) = {:.6g}", what, f.size(), cap));
}

// Orthonormal rows: u first, then a basis of its complement.
Eigen::MatrixXd frame_for(const Vec& u) {
  const int n = static_cast<int>(u.size());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(u);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r(n, n);
  r.row(0) = u.transpose();
  for (int i = 1; i < n; ++i) r.row(i) = q.col(i).transpose();
  return r;
}

}  // namespace

double ProblemParams::exponent() const {
  if (!(beta > 0.0)) throw DomainError("ProblemParams: beta = 0 gives p = infinity; replace d by d - 1 and beta by 1");
  const double pd = dual_exponent();
  return pd / (pd - 1.0);
}

TubeFamily::TubeFamily(int n, double delta, ProblemParams params, std::vector<Tube> tubes, double ball_radius)
    : n_(n), delta_(delta), params_(params), tubes_(std::move(tubes)), ball_radius_(ball_radius) {
  if (n < 2 || n > Limits::max_grid_dim) throw DomainError(fmt::format("TubeFamily: dimension {} unsupported", n));
  if (!(delta > 0.0 && delta <= 0.5)) throw DomainError(fmt::format("TubeFamily: delta = {} outside (0, 1/2]", delta));
  if (params.d < 1 || params.d >= n) throw DomainError(fmt::format("TubeFamily: d = {} outside [1, {})", params.d, n));
  if (!(params.beta >= 0.0 && params.beta <= 1.0))
    throw DomainError(fmt::format("TubeFamily: beta = {} outside [0, 1]", params.beta));
  for (std::size_t i = 0; i < tubes_.size(); ++i) {
    const auto& t = tubes_[i];
    if (t.dim() != n) throw DomainError(fmt::format("TubeFamily: tube {} has dimension {}", i, t.dim()));
    if (std::abs(t.radius - delta) > 1e-12 * delta)
      throw DomainError(fmt::format("TubeFamily: tube {} radius {} differs from delta {}", i, t.radius, delta));
    if (t.center.norm() > ball_radius + 1e-9)
      throw DomainError(fmt::format("TubeFamily: tube {} center outside B(0, {})", i, ball_radius));
  }
}

double TubeFamily::total_volume() const {
  double s = 0.0;
  for (const auto& t : tubes_) s += tube_volume(t);
  return s;
}

TubeFamily TubeFamily::subset(std::span<const std::size_t> indices) const {
  std::vector<Tube> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    if (i >= tubes_.size()) throw DomainError("TubeFamily::subset: index out of range");
    out.push_back(tubes_[i]);
  }
  return TubeFamily(n_, delta_, params_, std::move(out), ball_radius_);
}

double unit_ball_volume(int m) {
  return std::pow(std::numbers::pi, 0.5 * m) / std::tgamma(0.5 * m + 1.0);
}

double tube_volume(const Tube& t) {
  const int n = t.dim();
  return unit_ball_volume(n - 1) * std::pow(t.radius, n - 1) * t.length + unit_ball_volume(n) * std::pow(t.radius, n);
}

Grid default_grid(const TubeFamily& f, double h_over_delta) {
  if (f.empty()) throw DomainError("default_grid: empty family");
  return Grid::covering(f.tubes(), f.delta(), h_over_delta * f.delta());
}

void require_resolved(const Grid& grid, double delta) {
  if (grid.h > 0.5 * delta * (1.0 + 1e-12))
    throw ResolutionError(fmt::format("grid spacing {} does not resolve delta = {} (need h <= delta/2)", grid.h, delta));
}

double lp_power_sum(std::span<const Tube> tubes, double p, const Grid& grid) {
  require_p(p, "lp_power_sum");
  if (tubes.empty()) return 0.0;
  for (const auto& t : tubes) require_resolved(grid, t.radius);
  detail::Raster raster(grid, tubes);
  const double ps[] = {p};
  return value_or_zero(detail::sweep(raster, CountPowers(ps)), 0) * grid.cell_volume();
}

double lp_norm_tube_sum(const TubeFamily& f, double p, const Grid& grid) {
  require_resolved(grid, f.delta());
  return std::pow(lp_power_sum(f.tubes(), p, grid), 1.0 / p);
}

double multilinear_kakeya_lhs(std::span<const TubeFamily> families, const Grid& grid) {
  const int k = static_cast<int>(families.size());
  if (k < 2) throw DomainError("multilinear_kakeya_lhs: need at least two families");
  const int n = families.front().n();
  if (k > n) throw DomainError(fmt::format("multilinear_kakeya_lhs: k = {} exceeds n = {}", k, n));
  const double delta = families.front().delta();
  std::vector<Tube> all;
  std::vector<std::uint32_t> family_of;
  for (int i = 0; i < k; ++i) {
    const auto& f = families[i];
    if (f.n() != n) throw DomainError("multilinear_kakeya_lhs: dimension mismatch between families");
    if (std::abs(f.delta() - delta) > 1e-12 * delta)
      throw DomainError("multilinear_kakeya_lhs: families must share delta");
    if (f.empty()) return 0.0;
    for (const auto& t : f.tubes()) {
      all.push_back(t);
      family_of.push_back(static_cast<std::uint32_t>(i));
    }
  }
  require_resolved(grid, delta);
  WedgeKernel wedge(all, n);
  detail::Raster raster(grid, all);
  MultiFamilyPower visitor{&wedge, &family_of, k, 1.0 / (k - 1), {}, {}, {}, 0.0};
  const double integral = value_or_zero(detail::sweep(raster, visitor), 0) * grid.cell_volume();
  return std::pow(integral, (k - 1.0) / k);
}

double multilinear_kakeya_rhs(std::span<const TubeFamily> families) {
  const int k = static_cast<int>(families.size());
  if (k < 1) throw DomainError("multilinear_kakeya_rhs: no families");
  const int n = families.front().n();
  const double delta = families.front().delta();
  double prod = 1.0;
  for (const auto& f : families) prod *= std::pow(f.total_volume(), 1.0 / k);
  return std::pow(1.0 / delta, static_cast<double>(n) / k - 1.0) * prod;
}

std::vector<double> multilinear_power_sums(const TubeFamily& f, int k, std::span<const double> exponents,
                                           const Grid& grid) {
  if (k < 1 || k > f.n()) throw DomainError(fmt::format("multilinear_power_sums: k = {} outside [1, {}]", k, f.n()));
  require_resolved(grid, f.delta());
  std::vector<double> out(exponents.size(), 0.0);
  if (f.empty()) return out;
  WedgeKernel wedge(f.tubes(), f.n());
  detail::Raster raster(grid, f.tubes());
  SingleFamilyPowers visitor{&wedge, k, {exponents.begin(), exponents.end()}, {}, {}, {}};
  visitor.acc.v.assign(exponents.size(), 0.0);
  const Sums s = detail::sweep(raster, visitor);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = value_or_zero(s, i) * grid.cell_volume();
  return out;
}

namespace {

double grouped_power_sum(const TubeFamily& f, const std::vector<std::vector<std::uint32_t>>& groups, double p,
                         const Grid& grid) {
  if (f.empty()) return 0.0;
  detail::Raster raster(grid, f.tubes());
  return value_or_zero(detail::sweep(raster, GroupPowers(groups, p)), 0) * grid.cell_volume();
}

std::vector<std::vector<std::uint32_t>> cap_groups(const TubeFamily& f, const CapCover& cover) {
  std::vector<std::vector<std::uint32_t>> groups(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    for (auto c : cover.caps_containing(f.tubes()[i].direction.vec())) groups[i].push_back(static_cast<std::uint32_t>(c));
  return groups;
}

}  // namespace

LpDecomposition decompose_lp(const TubeFamily& f, double rho, int k, double p, const Grid& grid) {
  if (!(rho >= f.delta() && rho <= 1.0))
    throw DomainError(fmt::format("decompose_lp: rho = {} outside [delta, 1]", rho));
  if (k < 2 || k > f.n()) throw DomainError(fmt::format("decompose_lp: k = {} outside [2, {}]", k, f.n()));
  require_p(p, "decompose_lp");
  require_resolved(grid, f.delta());
  LpDecomposition out;
  out.lhs = lp_norm_tube_sum(f, p, grid);
  const double e[] = {p / k};
  const double ml = multilinear_power_sums(f, k, e, grid)[0];
  out.term_multilinear = std::pow(rho, (1.0 - k) / k) * std::pow(ml, 1.0 / p);

  const CapCover cover = build_cap_cover(f.n(), rho);
  out.caps = cover.centers.size();
  const double caps_sum = grouped_power_sum(f, cap_groups(f, cover), p, grid);
  const double inv_dual = p > 1.0 ? (p - 1.0) / p : 0.0;  // 1/p'
  out.term_caps = std::pow(rho, (2.0 - k) * inv_dual) * std::pow(caps_sum, 1.0 / p);
  out.ratio = safe_ratio(out.lhs, out.term_multilinear + out.term_caps);
  return out;
}

std::size_t RhoCoarsening::max_overlap() const {
  std::size_t m = 0;
  for (const auto& a : assignment) m = std::max(m, a.size());
  return m;
}

std::vector<std::vector<std::size_t>> RhoCoarsening::members() const {
  std::vector<std::vector<std::size_t>> out(coarse_tubes.size());
  for (std::size_t i = 0; i < assignment.size(); ++i)
    for (auto c : assignment[i]) out[c].push_back(i);
  return out;
}

bool tube_contains(const Tube& outer, const Tube& inner, double slack) {
  // capsules are convex hulls of balls along the core, so containment of the
  // two end balls suffices
  const double reach = outer.radius + slack - inner.radius;
  if (reach < 0.0) return false;
  return distance_to_core(outer, inner.endpoint_lo()) <= reach + 1e-12 &&
         distance_to_core(outer, inner.endpoint_hi()) <= reach + 1e-12;
}

RhoCoarsening coarsen_to_rho_tubes(const TubeFamily& f, double rho) {
  const double delta = f.delta();
  if (!(delta < 0.5 * rho)) throw DomainError(fmt::format("coarsen_to_rho_tubes: need delta < rho/2 (delta = {}, rho = {})", delta, rho));
  if (!(rho <= 1.0)) throw DomainError("coarsen_to_rho_tubes: rho must be <= 1");
  const int n = f.n();
  const CapCover cover = build_cap_cover(n, rho);

  // Lattice of rho-tubes per cap: axial spacing 0.4 rho, transverse cube
  // lattice whose half-diagonal is 0.2 rho. Every unit segment whose direction
  // lies in the cap then has both endpoints within 0.49 rho < rho - delta of
  // the nearest lattice core.
  const double axial = 0.4 * rho;
  const double transverse = 0.4 * rho / std::sqrt(static_cast<double>(n - 1));

  std::vector<Eigen::MatrixXd> frames;
  frames.reserve(cover.centers.size());
  for (const auto& c : cover.centers) frames.push_back(frame_for(c.vec()));

  RhoCoarsening out;
  out.rho = rho;
  out.assignment.resize(f.size());
  std::map<std::vector<std::int64_t>, std::size_t> index;
  const double reach = rho - delta;

  for (std::size_t ti = 0; ti < f.size(); ++ti) {
    const Tube& t = f.tubes()[ti];
    for (auto cap : cover.caps_containing(t.direction.vec())) {
      const Eigen::MatrixXd& r = frames[cap];
      const Vec a = r * t.endpoint_lo();
      const Vec b = r * t.endpoint_hi();
      // coarse core [s - 1/2, s + 1/2] x {y}: candidates with both endpoints
      // within reach
      std::vector<std::int64_t> lo(n), hi(n);
      lo[0] = static_cast<std::int64_t>(std::ceil((std::max(a[0], b[0]) - 0.5 - reach) / axial));
      hi[0] = static_cast<std::int64_t>(std::floor((std::min(a[0], b[0]) + 0.5 + reach) / axial));
      for (int i = 1; i < n; ++i) {
        lo[i] = static_cast<std::int64_t>(std::ceil((std::max(a[i], b[i]) - reach) / transverse));
        hi[i] = static_cast<std::int64_t>(std::floor((std::min(a[i], b[i]) + reach) / transverse));
      }
      bool empty = false;
      for (int i = 0; i < n; ++i) empty |= lo[i] > hi[i];
      if (empty) continue;
      std::vector<std::int64_t> cur = lo;
      while (true) {
        Vec local(n);
        local[0] = cur[0] * axial;
        for (int i = 1; i < n; ++i) local[i] = cur[i] * transverse;
        const Tube coarse(r.transpose() * local, cover.centers[cap], rho);
        if (tube_contains(coarse, t)) {
          std::vector<std::int64_t> key{static_cast<std::int64_t>(cap)};
          key.insert(key.end(), cur.begin(), cur.end());
          auto [it, inserted] = index.try_emplace(std::move(key), out.coarse_tubes.size());
          if (inserted) {
            out.coarse_tubes.push_back(coarse);
            out.coarse_cap.push_back(cap);
          }
          out.assignment[ti].push_back(it->second);
        }
        int i = n - 1;
        while (i >= 0 && cur[i] == hi[i]) cur[i] = lo[i], --i;
        if (i < 0) break;
        ++cur[i];
      }
    }
    if (out.assignment[ti].empty())
      throw DomainError(fmt::format("coarsen_to_rho_tubes: tube {} not contained in any rho-tube", ti));
    std::sort(out.assignment[ti].begin(), out.assignment[ti].end());
  }
  return out;
}

LocalizationCheck localization_check(const TubeFamily& f, double rho, double p, const Grid& grid) {
  require_p(p, "localization_check");
  require_resolved(grid, f.delta());
  LocalizationCheck out;
  const CapCover cover = build_cap_cover(f.n(), rho);
  out.cap_side = grouped_power_sum(f, cap_groups(f, cover), p, grid);
  const RhoCoarsening coarse = coarsen_to_rho_tubes(f, rho);
  std::vector<std::vector<std::uint32_t>> groups(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    for (auto c : coarse.assignment[i]) groups[i].push_back(static_cast<std::uint32_t>(c));
  out.coarse_side = grouped_power_sum(f, groups, p, grid);
  out.ratio = safe_ratio(out.cap_side, out.coarse_side);
  out.max_overlap = coarse.max_overlap();
  return out;
}

Vec AffineRescale::apply(const Vec& x) const {
  Vec y = rotation * (x - origin);
  y.tail(y.size() - 1) /= rho;
  return y;
}

Vec AffineRescale::inverse(const Vec& y) const {
  Vec z = y;
  z.tail(z.size() - 1) *= rho;
  return origin + rotation.transpose() * z;
}

namespace {

Tube segment_tube(const Vec& a, const Vec& b, double radius) {
  const Vec d = b - a;
  const double len = d.norm();
  if (!(len > 0.0)) throw DomainError("segment_tube: degenerate segment");
  return Tube(0.5 * (a + b), Direction(d), radius, len);
}

}  // namespace

RescaledFamily rescale_into_ball(const TubeFamily& fine_subset, const Tube& coarse) {
  const int n = fine_subset.n();
  const double delta = fine_subset.delta();
  const double rho = coarse.radius;
  if (coarse.dim() != n) throw DomainError("rescale_into_ball: dimension mismatch");
  if (!(delta < 0.5 * rho)) throw DomainError("rescale_into_ball: need delta < rho/2");

  AffineRescale map{coarse.center, frame_for(coarse.direction.vec()), rho};
  std::vector<Tube> images;
  images.reserve(fine_subset.size());
  double comparability = 0.0;
  for (std::size_t i = 0; i < fine_subset.size(); ++i) {
    const Tube& t = fine_subset.tubes()[i];
    if (!tube_contains(coarse, t, 2.0 * delta))
      throw DomainError(fmt::format("rescale_into_ball: tube {} is not contained in the rho-tube", i));
    const Vec a = map.apply(t.endpoint_lo());
    const Vec b = map.apply(t.endpoint_hi());
    Tube img = segment_tube(a, b, delta / rho);
    comparability = std::max({comparability, img.length, a.norm() + delta / rho, b.norm() + delta / rho});
    images.push_back(std::move(img));
  }
  if (comparability > Limits::rescale_comparability)
    throw DomainError(fmt::format("rescale_into_ball: comparability {} exceeds {}", comparability,
                                  Limits::rescale_comparability));
  TubeFamily fam(n, delta / rho, fine_subset.params(), std::move(images), Limits::rescale_comparability);
  return {std::move(fam), std::move(map), comparability};
}

Tube unrescale_tube(const AffineRescale& map, const Tube& image) {
  return segment_tube(map.inverse(image.endpoint_lo()), map.inverse(image.endpoint_hi()), map.rho * image.radius);
}

ChainReport calculation_chain(const TubeFamily& f, const Grid& grid) {
  require_cardinality(f, "calculation_chain");
  require_resolved(grid, f.delta());
  const int n = f.n();
  const int d = f.params().d;
  const double beta = f.params().beta;
  const double pd = f.params().dual_exponent();
  const double p = f.params().exponent();
  const double delta = f.delta();
  const double count = static_cast<double>(f.size());
  const double s = f.total_volume();

  const double exps[] = {p / (d + 1), 1.0 / d};
  const auto integrals = multilinear_power_sums(f, d + 1, exps, grid);
  const double lead = p - (d + 1.0) / d;

  ChainReport r;
  r.p = p;
  auto& l = r.lines;
  l[0] = integrals[0];
  l[1] = std::pow(count, lead) * integrals[1];
  l[2] = std::pow(std::pow(delta, 1.0 - n) * s, lead) * std::pow(delta, (d + 1.0 - n) / d) * std::pow(s, (d + 1.0) / d);
  l[3] = std::pow(delta, 1.0 + (1.0 - n) * (p - 1.0)) * std::pow(s, p - 1.0) * s;
  l[4] = std::pow(delta, 1.0 + (1.0 - n) * (p - 1.0)) *
         std::pow(std::pow(delta, n - 1.0) * std::pow(delta, 2.0 * (1 - d) - beta), p - 1.0) * s;
  l[5] = std::pow(delta, p * (1.0 - d) / pd) * s;
  for (int i = 0; i < 5; ++i) r.step_ratios[i] = safe_ratio(l[i], l[i + 1]);
  r.pointwise_slack = l[1] - l[0];
  r.multilinear_constant = safe_ratio(l[1], l[2]);
  r.regroup_error = std::abs(l[2] - l[3]) / l[3];
  r.simplify_error = std::abs(l[4] - l[5]) / l[5];
  r.cardinality_ratio = safe_ratio(l[3], l[4]);
  r.cardinality_bound = std::pow(s / (count * std::pow(delta, n - 1.0)), p - 1.0);
  return r;
}

InductionTerms induction_step_terms(const TubeFamily& f, double rho, const Grid& grid) {
  require_cardinality(f, "induction_step_terms");
  require_resolved(grid, f.delta());
  if (!(f.delta() <= 0.5 * rho)) throw DomainError("induction_step_terms: need delta <= rho/2");
  const int d = f.params().d;
  const double pd = f.params().dual_exponent();
  const double p = f.params().exponent();
  InductionTerms out;
  out.lhs = lp_norm_tube_sum(f, p, grid);
  out.term1 = std::pow(rho, -static_cast<double>(d) / (d + 1)) * std::pow(f.delta(), (1.0 - d) / pd) *
              std::pow(f.total_volume(), 1.0 / p);
  const RhoCoarsening coarse = coarsen_to_rho_tubes(f, rho);
  std::vector<std::vector<std::uint32_t>> groups(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    for (auto c : coarse.assignment[i]) groups[i].push_back(static_cast<std::uint32_t>(c));
  out.term2 = std::pow(rho, (1.0 - d) / pd) * std::pow(grouped_power_sum(f, groups, p, grid), 1.0 / p);
  out.ratio = safe_ratio(out.lhs, out.term1 + out.term2);
  return out;
}

}  // namespace tubelab
