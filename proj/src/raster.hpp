#pragma once

// Internal: analytic rasterization of capsules onto a Grid and a run sweep
// that visits every maximal run of cells with a constant set of covering
// tubes.

#include "tubelab/grid.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

namespace tubelab::detail {

constexpr int kMaxDim = 4;

struct TubeGeom {
  std::array<double, kMaxDim> a{};  // core segment endpoints
  std::array<double, kMaxDim> b{};
  double r = 0.0;
};

/// Interval of t such that (q_0, ..., q_{dim-2}, t) is within r of the
/// segment [a, b] projected to the first `dim` coordinates. Projection of a
/// capsule is the capsule of the projected segment, so the hit set is convex.
inline bool capsule_line_interval(const TubeGeom& g, int dim, const double* q, double& t0, double& t1) {
  const int m = dim - 1;  // varying axis
  double lo = INFINITY, hi = -INFINITY;
  const double r2 = g.r * g.r;

  auto ball = [&](const std::array<double, kMaxDim>& p) {
    double off2 = 0.0;
    for (int i = 0; i < m; ++i) off2 += (q[i] - p[i]) * (q[i] - p[i]);
    if (off2 > r2) return;
    const double s = std::sqrt(r2 - off2);
    lo = std::min(lo, p[m] - s);
    hi = std::max(hi, p[m] + s);
  };
  ball(g.a);
  ball(g.b);

  // cylinder part: s(t) in [0, 1] and radial distance <= r
  std::array<double, kMaxDim> d{};
  double len2 = 0.0;
  for (int i = 0; i < dim; ++i) {
    d[i] = g.b[i] - g.a[i];
    len2 += d[i] * d[i];
  }
  if (len2 > 1e-24) {
    // w(t) = w0 + t e_m with w0 = (q, 0) - a
    std::array<double, kMaxDim> w0{};
    for (int i = 0; i < m; ++i) w0[i] = q[i] - g.a[i];
    w0[m] = -g.a[m];
    double wd = 0.0, ww = 0.0;
    for (int i = 0; i < dim; ++i) {
      wd += w0[i] * d[i];
      ww += w0[i] * w0[i];
    }
    const double dm = d[m];
    const double qa = 1.0 - dm * dm / len2;
    const double qb = 2.0 * (w0[m] - wd * dm / len2);
    const double qc = ww - wd * wd / len2 - r2;

    double c0 = -INFINITY, c1 = INFINITY;
    bool ok = true;
    if (qa > 1e-13) {
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc < 0.0) {
        ok = false;
      } else {
        const double sq = std::sqrt(disc);
        const double qq = -0.5 * (qb + std::copysign(sq, qb));
        double x0 = qq / qa;
        double x1 = (qq != 0.0) ? qc / qq : x0;
        if (x0 > x1) std::swap(x0, x1);
        c0 = x0;
        c1 = x1;
      }
    } else if (std::abs(qb) > 1e-13) {
      const double root = -qc / qb;
      if (qb > 0.0) c1 = root;
      else c0 = root;
    } else if (qc > 0.0) {
      ok = false;
    }
    if (ok) {
      // slab 0 <= (wd + t dm) / len2 <= 1
      if (std::abs(dm) > 1e-15) {
        double s0 = -wd / dm, s1 = (len2 - wd) / dm;
        if (s0 > s1) std::swap(s0, s1);
        c0 = std::max(c0, s0);
        c1 = std::min(c1, s1);
      } else if (wd < 0.0 || wd > len2) {
        ok = false;
      }
      if (ok && c0 <= c1 && std::isfinite(c0) && std::isfinite(c1)) {
        lo = std::min(lo, c0);
        hi = std::max(hi, c1);
      }
    }
  }
  if (!(lo <= hi)) return false;
  t0 = lo;
  t1 = hi;
  return true;
}

/// Cell indices along `axis` whose centers lie in [t0, t1], clipped to the grid.
inline bool cell_range(const Grid& grid, int axis, double t0, double t1, std::int64_t& i0, std::int64_t& i1) {
  i0 = static_cast<std::int64_t>(std::ceil((t0 - grid.lo[axis]) / grid.h - 0.5));
  i1 = static_cast<std::int64_t>(std::floor((t1 - grid.lo[axis]) / grid.h - 0.5));
  i0 = std::max<std::int64_t>(i0, 0);
  i1 = std::min<std::int64_t>(i1, grid.cells[axis] - 1);
  return i0 <= i1;
}

struct Interval {
  std::int64_t row;
  std::int64_t lo;
  std::int64_t hi;  // inclusive
  std::uint32_t id;
};

inline std::vector<TubeGeom> make_geoms(std::span<const Tube> tubes, int n) {
  std::vector<TubeGeom> out;
  out.reserve(tubes.size());
  for (const auto& t : tubes) {
    TubeGeom g;
    const Vec a = t.endpoint_lo(), b = t.endpoint_hi();
    for (int i = 0; i < n; ++i) {
      g.a[i] = a[i];
      g.b[i] = b[i];
    }
    g.r = t.radius;
    out.push_back(g);
  }
  return out;
}

/// Tubes prepared for sweeping on one grid, bucketed by slice along axis 0.
class Raster {
 public:
  Raster(const Grid& grid, std::span<const Tube> tubes) : Raster(grid, make_geoms(tubes, grid.n)) {}

  Raster(const Grid& grid, std::vector<TubeGeom> geoms) : grid_(grid), geoms_(std::move(geoms)) {
    const std::int64_t slices = grid_.n == 1 ? 1 : grid_.cells[0];
    buckets_.resize(static_cast<std::size_t>(slices));
    for (std::uint32_t id = 0; id < geoms_.size(); ++id) {
      if (grid_.n == 1) {
        buckets_[0].push_back(id);
        continue;
      }
      const auto& g = geoms_[id];
      std::int64_t i0, i1;
      if (cell_range(grid_, 0, std::min(g.a[0], g.b[0]) - g.r, std::max(g.a[0], g.b[0]) + g.r, i0, i1))
        for (auto s = i0; s <= i1; ++s) buckets_[s].push_back(id);
    }
    row_strides_.assign(std::max(0, grid_.n - 2), 1);
    for (int a = grid_.n - 4; a >= 0; --a) row_strides_[a] = row_strides_[a + 1] * grid_.cells[a + 2];
  }

  const Grid& grid() const { return grid_; }
  std::size_t tube_count() const { return geoms_.size(); }
  std::size_t slice_count() const { return buckets_.size(); }
  const std::vector<std::int64_t>& row_strides() const { return row_strides_; }

  /// Appends the intervals of every tube in slice s.
  void slice_intervals(std::int64_t s, std::vector<Interval>& out) const {
    out.clear();
    std::array<double, kMaxDim> q{};
    if (grid_.n == 1) {
      for (auto id : buckets_[0]) {
        const auto& g = geoms_[id];
        double t0, t1;
        std::int64_t i0, i1;
        if (capsule_line_interval(g, 1, q.data(), t0, t1) && cell_range(grid_, 0, t0, t1, i0, i1))
          out.push_back({0, i0, i1, id});
      }
      return;
    }
    q[0] = grid_.center(0, s);
    for (auto id : buckets_[s]) recurse(geoms_[id], id, 1, 0, q, out);
  }

 private:
  void recurse(const TubeGeom& g, std::uint32_t id, int axis, std::int64_t row, std::array<double, kMaxDim>& q,
               std::vector<Interval>& out) const {
    double t0, t1;
    if (!capsule_line_interval(g, axis + 1, q.data(), t0, t1)) return;
    std::int64_t i0, i1;
    if (!cell_range(grid_, axis, t0, t1, i0, i1)) return;
    if (axis == grid_.n - 1) {
      out.push_back({row, i0, i1, id});
      return;
    }
    const std::int64_t stride = row_strides_[axis - 1];
    for (auto i = i0; i <= i1; ++i) {
      q[axis] = grid_.center(axis, i);
      recurse(g, id, axis + 1, row + i * stride, q, out);
    }
  }

  Grid grid_;
  std::vector<TubeGeom> geoms_;
  std::vector<std::vector<std::uint32_t>> buckets_;
  std::vector<std::int64_t> row_strides_;
};

/// Runs `visit.on_run(run, active)` for every maximal run of cells covered by
/// at least one tube; `active` lists the covering tube ids in increasing
/// order. Per-slice results are combined in slice order, so the total does
/// not depend on the number of threads.
///
/// Visitor requirements: copyable; `using Result = ...` default-constructible
/// with `operator+=`; `Result take()` returns and resets the slice result.
template <class Visitor>
typename Visitor::Result sweep(const Raster& raster, const Visitor& proto) {
  using Result = typename Visitor::Result;
  const std::size_t slices = raster.slice_count();
  std::vector<Result> per_slice(slices);
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    Visitor visit = proto;
    std::vector<Interval> intervals;
    std::vector<std::pair<std::int64_t, std::int64_t>> events;  // (position, +/-(id+1))
    std::vector<std::uint32_t> active;
    for (std::size_t s; (s = next.fetch_add(1)) < slices;) {
      raster.slice_intervals(static_cast<std::int64_t>(s), intervals);
      if (intervals.empty()) continue;
      std::sort(intervals.begin(), intervals.end(), [](const Interval& x, const Interval& y) {
        return x.row != y.row ? x.row < y.row : (x.lo != y.lo ? x.lo < y.lo : x.id < y.id);
      });
      for (std::size_t begin = 0; begin < intervals.size();) {
        std::size_t end = begin;
        const std::int64_t row = intervals[begin].row;
        events.clear();
        while (end < intervals.size() && intervals[end].row == row) {
          const auto& iv = intervals[end];
          events.emplace_back(iv.lo, static_cast<std::int64_t>(iv.id) + 1);
          events.emplace_back(iv.hi + 1, -(static_cast<std::int64_t>(iv.id) + 1));
          ++end;
        }
        std::sort(events.begin(), events.end());
        active.clear();
        for (std::size_t e = 0; e < events.size();) {
          const std::int64_t pos = events[e].first;
          for (; e < events.size() && events[e].first == pos; ++e) {
            const std::int64_t code = events[e].second;
            const auto id = static_cast<std::uint32_t>(std::abs(code) - 1);
            auto it = std::lower_bound(active.begin(), active.end(), id);
            if (code > 0) active.insert(it, id);
            else active.erase(it);
          }
          if (e < events.size() && !active.empty()) {
            CellRun run{static_cast<std::int64_t>(s), row, pos, events[e].first - pos};
            visit.on_run(run, std::span<const std::uint32_t>(active));
          }
        }
        begin = end;
      }
      per_slice[s] = visit.take();
    }
  };

  const int threads = std::min<int>(sweep_threads(), static_cast<int>(std::max<std::size_t>(1, slices)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  Result total{};
  for (auto& r : per_slice) total += r;
  return total;
}

}  // namespace tubelab::detail
