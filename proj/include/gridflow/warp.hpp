#pragma once

// Backward-flow warping of semantic grids and its recursive multi-step
// composition. Flow values are backward displacements normalized by the grid
// side: the output cell (r,c) gathers from (r + fy*rows, c + fx*cols).

#include <vector>

#include "gridflow/kernels.hpp"
#include "gridflow/types.hpp"

namespace gridflow {

struct WarpConfig {
  kernels::Interp interpolation = kernels::Interp::Bilinear;
  double out_of_bounds_fill = 0.0;
  bool clamp_output = true;

  void validate() const {
    if (clamp_output && (out_of_bounds_fill < 0.0 || out_of_bounds_fill > 1.0))
      throw ConfigError("fill must be in [0,1] when clamping is enabled");
  }
};

SemanticGrid warp(const SemanticGrid& w, const FlowGrid& f, const WarpConfig& cfg = {});

// W_{k} = warp(W_{k-1}, flows[k-1]), starting from w0. Returns all P steps.
std::vector<SemanticGrid> warp_rollout(const SemanticGrid& w0,
                                       const std::vector<FlowGrid>& flows,
                                       const WarpConfig& cfg = {});

}  // namespace gridflow
