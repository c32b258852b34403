#include "gridflow/warp.hpp"

namespace gridflow {

SemanticGrid warp(const SemanticGrid& w, const FlowGrid& f, const WarpConfig& cfg) {
  cfg.validate();
  if (!w.p_vehicle.same_shape(f.fx) || !w.p_vehicle.same_shape(f.fy))
    throw ConfigError("warp: semantic and flow grids must share geometry");
  SemanticGrid out;
  out.p_vehicle = kernels::warp_gather(w.p_vehicle, f.fx, f.fy, cfg.interpolation,
                                       cfg.out_of_bounds_fill, cfg.clamp_output);
  return out;
}

std::vector<SemanticGrid> warp_rollout(const SemanticGrid& w0,
                                       const std::vector<FlowGrid>& flows,
                                       const WarpConfig& cfg) {
  std::vector<SemanticGrid> out;
  out.reserve(flows.size());
  const SemanticGrid* prev = &w0;
  for (const FlowGrid& f : flows) {
    out.push_back(warp(*prev, f, cfg));
    prev = &out.back();
  }
  return out;
}

}  // namespace gridflow
