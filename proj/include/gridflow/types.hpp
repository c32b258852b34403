#pragma once

// Core grid types and coordinate conventions.
//
// Conventions used throughout the library:
//   - row = y (downward), col = x (rightward).
//   - vector channels (velocity, flow) are stored in (x, y) order.
//   - the grid center in world coordinates maps to the continuous cell
//     coordinate ((height-1)/2, (width-1)/2).
//   - free space is implicit: p_free = 1 - (p_static + p_dynamic + p_unknown).
//   - flow values are backward displacements normalized by the grid side,
//     so fx = 1.0 spans width_cells and fy = 1.0 spans height_cells.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "gridflow/errors.hpp"

namespace gridflow {

// Dense 2D plane of doubles, row-major.
struct Plane {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return v.size(); }
  bool same_shape(const Plane& o) const { return rows == o.rows && cols == o.cols; }

  double sum() const {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
};

struct Pose2D {
  double x_m = 0.0;
  double y_m = 0.0;
  double heading_rad = 0.0;
};

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a, two_pi);
  if (a <= -M_PI) a += two_pi;
  if (a > M_PI) a -= two_pi;
  return a;
}

struct GridGeometry {
  int width_cells = 240;
  int height_cells = 240;
  double cell_size_m = 0.25;
  // World position of the grid center.
  double origin_x_m = 0.0;
  double origin_y_m = 0.0;

  double extent_x_m() const { return width_cells * cell_size_m; }
  double extent_y_m() const { return height_cells * cell_size_m; }

  void validate() const {
    if (width_cells <= 0 || height_cells <= 0) throw ConfigError("grid dimensions must be positive");
    if (!(cell_size_m > 0.0)) throw ConfigError("cell_size_m must be positive");
  }

  bool operator==(const GridGeometry& o) const {
    return width_cells == o.width_cells && height_cells == o.height_cells &&
           cell_size_m == o.cell_size_m && origin_x_m == o.origin_x_m && origin_y_m == o.origin_y_m;
  }
};

// Continuous cell coordinate (row, col).
struct CellCoord {
  double row = 0.0;
  double col = 0.0;
};

inline CellCoord world_to_cell(double x_m, double y_m, const GridGeometry& g) {
  CellCoord c;
  c.col = (g.width_cells - 1) * 0.5 + (x_m - g.origin_x_m) / g.cell_size_m;
  c.row = (g.height_cells - 1) * 0.5 + (y_m - g.origin_y_m) / g.cell_size_m;
  return c;
}

inline std::pair<double, double> cell_to_world(double row, double col, const GridGeometry& g) {
  const double x = g.origin_x_m + (col - (g.width_cells - 1) * 0.5) * g.cell_size_m;
  const double y = g.origin_y_m + (row - (g.height_cells - 1) * 0.5) * g.cell_size_m;
  return {x, y};
}

// Per-cell probabilities of {static-occupied, dynamic-occupied, unknown}.
struct OccupancyStateGrid {
  Plane p_static;
  Plane p_dynamic;
  Plane p_unknown;

  OccupancyStateGrid() = default;
  OccupancyStateGrid(int rows, int cols)
      : p_static(rows, cols), p_dynamic(rows, cols), p_unknown(rows, cols) {}

  int rows() const { return p_static.rows; }
  int cols() const { return p_static.cols; }
};

// Per-cell motion in m/s along grid x (cols) and y (rows).
struct VelocityGrid {
  Plane vx;
  Plane vy;

  VelocityGrid() = default;
  VelocityGrid(int rows, int cols) : vx(rows, cols), vy(rows, cols) {}
};

// Per-cell vehicle occupancy probability.
struct SemanticGrid {
  Plane p_vehicle;

  SemanticGrid() = default;
  SemanticGrid(int rows, int cols) : p_vehicle(rows, cols) {}
};

// Backward displacements, normalized by grid side lengths.
struct FlowGrid {
  Plane fx;
  Plane fy;

  FlowGrid() = default;
  FlowGrid(int rows, int cols) : fx(rows, cols), fy(rows, cols) {}
};

// Oriented-box annotation of one vehicle in grid coordinates.
struct VehicleInstance {
  int id = 0;
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  // Corner order: front-left, front-right, rear-right, rear-left.
  std::array<std::array<double, 2>, 4> corners{};  // each {row, col}
  bool dynamic = false;
};

// An instance stays in a frame's annotation list while its footprint bounding
// box still touches the grid.
inline bool instance_in_grid(const VehicleInstance& inst, const GridGeometry& g) {
  double rmin = inst.corners[0][0], rmax = rmin, cmin = inst.corners[0][1], cmax = cmin;
  for (const auto& corner : inst.corners) {
    rmin = std::min(rmin, corner[0]);
    rmax = std::max(rmax, corner[0]);
    cmin = std::min(cmin, corner[1]);
    cmax = std::max(cmax, corner[1]);
  }
  return rmax >= 0.0 && rmin <= g.height_cells - 1 && cmax >= 0.0 && cmin <= g.width_cells - 1;
}

struct Frame {
  double timestamp_s = 0.0;
  OccupancyStateGrid state;
  VelocityGrid velocity;
  SemanticGrid semantic;
  std::optional<FlowGrid> flow;
  Pose2D ego;
};

// Time-indexed stack of grids with ego poses and instance annotations.
struct FrameSequence {
  GridGeometry geometry;
  double dt_s = 0.5;
  std::vector<Frame> frames;
  // instances[i] lists the vehicles visible in frame i.
  std::vector<std::vector<VehicleInstance>> instances;

  int frame_count() const { return static_cast<int>(frames.size()); }

  void validate() const {
    geometry.validate();
    if (frames.size() != instances.size())
      throw ConfigError("frame/instance list length mismatch");
    for (size_t i = 0; i + 1 < frames.size(); ++i) {
      const double step = frames[i + 1].timestamp_s - frames[i].timestamp_s;
      if (!(step > 0.0) || std::abs(step - dt_s) > 1e-9)
        throw ConfigError("timestamps must increase by dt_s");
    }
    for (const Frame& f : frames) {
      if (f.state.rows() != geometry.height_cells || f.state.cols() != geometry.width_cells)
        throw ConfigError("grid shape does not match geometry");
    }
  }
};

}  // namespace gridflow
