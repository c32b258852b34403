#pragma once

// SE(2) reprojection between ego-centric and allo-centric frames.
//
// Each frame's grids live in that frame's ego grid: the ego sits at the grid
// center and the grid axes follow the ego axes (col along ego x, row along
// ego y). Reprojection gathers every plane through the composed transform
// anchor-cell -> world -> source-ego -> source-cell, fills out-of-view cells
// with the unknown state (occupancy) or zero (semantic, velocity, flow), and
// rotates vector channels into the anchor axes.

#include "gridflow/kernels.hpp"
#include "gridflow/types.hpp"

namespace gridflow {

Frame reproject_frame(const Frame& src, const GridGeometry& g, const Pose2D& anchor,
                      kernels::Interp interp = kernels::Interp::Bilinear);

std::vector<VehicleInstance> reproject_instances(const std::vector<VehicleInstance>& src,
                                                 const GridGeometry& g, const Pose2D& src_pose,
                                                 const Pose2D& anchor);

// Reprojects every frame (grids and instance annotations) into the anchor
// pose's grid. Instances whose footprint leaves the grid are dropped.
FrameSequence to_allocentric(const FrameSequence& seq, const Pose2D& anchor,
                             kernels::Interp interp = kernels::Interp::Bilinear);

}  // namespace gridflow
