#pragma once

#include "tubelab/linegeom.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace tubelab {

/// Uniform grid of cubical cells of side h; integrals are midpoint sums over
/// cell centers.
struct Grid {
  int n = 0;
  double h = 0.0;
  std::vector<double> lo;      // lower corner per axis
  std::vector<std::int64_t> cells;  // cell count per axis

  double center(int axis, std::int64_t i) const { return lo[axis] + (static_cast<double>(i) + 0.5) * h; }
  double cell_volume() const;
  std::int64_t total_cells() const;

  /// The box [-half_width, half_width]^n with spacing h.
  static Grid box(int n, double half_width, double h);

  /// The box [-(1 + delta), 1 + delta]^n, grown in whole cells until it
  /// contains every tube. Growing by whole cells keeps cell centers aligned
  /// with the unextended box.
  static Grid covering(std::span<const Tube> tubes, double delta, double h);
};

/// One maximal run of consecutive cells along the last axis.
struct CellRun {
  std::int64_t slice = 0;  // index along axis 0
  std::int64_t row = 0;    // flattened index over axes 1..n-2
  std::int64_t start = 0;  // first index along the last axis
  std::int64_t length = 0;
};

/// Set of grid cells stored as sorted runs; used for E_delta.
struct Region {
  Grid grid;
  std::vector<CellRun> runs;

  std::int64_t cell_count() const;
  double volume() const { return static_cast<double>(cell_count()) * grid.cell_volume(); }

  /// Multi-index of the cells of a run: fills `idx` with (slice, row axes..., start).
  void run_origin(const CellRun& run, std::vector<std::int64_t>& idx) const;
};

/// Rasterized union of tubes.
Region rasterize_union(std::span<const Tube> tubes, const Grid& grid);

/// Cells whose centers lie in the closed ball B(0, radius).
Region rasterize_ball(const Grid& grid, double radius);

/// Cells whose centers lie in one of the closed intervals (n = 1 only).
Region rasterize_intervals(const Grid& grid, std::span<const std::pair<double, double>> intervals);

/// Number of worker threads used by grid sweeps (TUBELAB_THREADS overrides).
int sweep_threads();

}  // namespace tubelab
