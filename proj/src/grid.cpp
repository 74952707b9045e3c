#include "tubelab/grid.hpp"

#include "raster.hpp"
#include "tubelab/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

namespace tubelab {

namespace {

struct RunList {
  std::vector<CellRun> runs;
  RunList& operator+=(const RunList& other) {
    runs.insert(runs.end(), other.runs.begin(), other.runs.end());
    return *this;
  }
};

struct RunCollector {
  using Result = RunList;
  std::vector<CellRun> runs;

  void on_run(const CellRun& run, std::span<const std::uint32_t>) {
    if (!runs.empty()) {
      auto& last = runs.back();
      if (last.slice == run.slice && last.row == run.row && last.start + last.length == run.start) {
        last.length += run.length;
        return;
      }
    }
    runs.push_back(run);
  }
  Result take() { return {std::exchange(runs, {})}; }
};

}  // namespace

double Grid::cell_volume() const { return std::pow(h, n); }

std::int64_t Grid::total_cells() const {
  std::int64_t t = 1;
  for (auto c : cells) t *= c;
  return t;
}

Grid Grid::box(int n, double half_width, double h) {
  if (n < 1 || n > detail::kMaxDim) throw DomainError(fmt::format("Grid: dimension {} unsupported", n));
  if (!(h > 0.0) || !(half_width > 0.0)) throw DomainError("Grid: non-positive spacing or extent");
  Grid g;
  g.n = n;
  g.h = h;
  const auto count = static_cast<std::int64_t>(std::ceil(2.0 * half_width / h - 1e-9));
  g.lo.assign(n, -half_width);
  g.cells.assign(n, count);
  return g;
}

Grid Grid::covering(std::span<const Tube> tubes, double delta, double h) {
  if (tubes.empty()) throw DomainError("Grid::covering: no tubes");
  const int n = tubes.front().dim();
  Grid g = box(n, 1.0 + delta, h);
  for (int axis = 0; axis < n; ++axis) {
    double lo = g.lo[axis], hi = g.lo[axis] + g.cells[axis] * h;
    double need_lo = lo, need_hi = hi;
    for (const auto& t : tubes) {
      const double a = t.endpoint_lo()[axis], b = t.endpoint_hi()[axis];
      need_lo = std::min(need_lo, std::min(a, b) - t.radius);
      need_hi = std::max(need_hi, std::max(a, b) + t.radius);
    }
    const auto grow_lo = static_cast<std::int64_t>(std::ceil((lo - need_lo) / h - 1e-9));
    const auto grow_hi = static_cast<std::int64_t>(std::ceil((need_hi - hi) / h - 1e-9));
    g.lo[axis] -= grow_lo * h;
    g.cells[axis] += grow_lo + grow_hi;
  }
  return g;
}

std::int64_t Region::cell_count() const {
  std::int64_t c = 0;
  for (const auto& r : runs) c += r.length;
  return c;
}

void Region::run_origin(const CellRun& run, std::vector<std::int64_t>& idx) const {
  const int n = grid.n;
  idx.assign(n, 0);
  if (n == 1) {
    idx[0] = run.start;
    return;
  }
  idx[0] = run.slice;
  idx[n - 1] = run.start;
  std::int64_t row = run.row;
  for (int axis = n - 2; axis >= 1; --axis) {
    idx[axis] = row % grid.cells[axis];
    row /= grid.cells[axis];
  }
}

Region rasterize_union(std::span<const Tube> tubes, const Grid& grid) {
  detail::Raster raster(grid, tubes);
  return {grid, detail::sweep(raster, RunCollector{}).runs};
}

Region rasterize_ball(const Grid& grid, double radius) {
  detail::TubeGeom g;
  g.r = radius;
  detail::Raster raster(grid, std::vector<detail::TubeGeom>{g});
  return {grid, detail::sweep(raster, RunCollector{}).runs};
}

Region rasterize_intervals(const Grid& grid, std::span<const std::pair<double, double>> intervals) {
  if (grid.n != 1) throw DomainError("rasterize_intervals: grid must be one-dimensional");
  std::vector<std::pair<std::int64_t, std::int64_t>> ranges;
  for (const auto& [a, b] : intervals) {
    std::int64_t i0, i1;
    if (detail::cell_range(grid, 0, std::min(a, b), std::max(a, b), i0, i1)) ranges.emplace_back(i0, i1);
  }
  std::sort(ranges.begin(), ranges.end());
  Region region{grid, {}};
  for (const auto& [i0, i1] : ranges) {
    if (!region.runs.empty()) {
      auto& last = region.runs.back();
      if (i0 <= last.start + last.length) {
        last.length = std::max(last.length, i1 + 1 - last.start);
        continue;
      }
    }
    region.runs.push_back({0, 0, i0, i1 - i0 + 1});
  }
  return region;
}

int sweep_threads() {
  if (const char* env = std::getenv("TUBELAB_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace tubelab
