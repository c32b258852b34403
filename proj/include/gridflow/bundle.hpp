#pragma once

// Prediction outputs and training targets shared by the predictor, the loss
// stack and the evaluation suite.

#include <vector>

#include "gridflow/types.hpp"

namespace gridflow {

// Diagonal Gaussian over the latent code, parameterized as (mu, log sigma^2).
struct LatentDistribution {
  std::vector<double> mu;
  std::vector<double> log_var;

  int dim() const { return static_cast<int>(mu.size()); }
};

struct PredictionBundle {
  SemanticGrid y_now;                    // current-step vehicle grid
  std::vector<SemanticGrid> y_future;   // decoded future vehicle grids, length P
  std::vector<FlowGrid> f_future;       // predicted backward flows, length P
  std::vector<SemanticGrid> w_future;   // flow-warped grids from y_now, length P
  LatentDistribution dist_present;
  LatentDistribution dist_future;       // filled in training mode only
  bool has_future_dist = false;
};

struct TargetBundle {
  Plane y_now;                       // binary vehicle grid at the current step
  std::vector<Plane> y_future;       // binary vehicle grids, length P
  std::vector<FlowGrid> flow_future; // backward flows, length P
  // Vehicle footprint masks at each flow's own timestep; the flow loss only
  // counts masked cells.
  std::vector<Plane> mask_future;
};

}  // namespace gridflow
