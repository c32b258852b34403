#pragma once

// Composite training objective: weighted binary cross-entropy over the
// current, future and warped vehicle grids, vehicle-masked L1 flow loss and
// the KL alignment between the future and present latent distributions.

#include <vector>

#include "gridflow/bundle.hpp"

namespace gridflow {

struct LossWeights {
  double lambda_d = 1.0;   // current-step BCE
  double lambda_b = 1.0;   // future BCE
  double lambda_w = 1.0;   // warped BCE (self-supervision for the flow head)
  double lambda_f = 0.05;  // masked flow L1
  double lambda_k = 0.005; // KL alignment
  double bce_pos_weight = 5.0;
  // KL(future || present) by default; flips the argument order when false.
  bool kl_future_to_present = true;

  void validate() const {
    if (lambda_d < 0 || lambda_b < 0 || lambda_w < 0 || lambda_f < 0 || lambda_k < 0)
      throw ConfigError("loss weights must be non-negative");
    if (!(bce_pos_weight > 0)) throw ConfigError("bce_pos_weight must be positive");
  }
};

// Predictions are epsilon-clamped inside the logs.
constexpr double kBceEps = 1e-7;

// Mean over cells of -[w*y*ln(p) + (1-y)*ln(1-p)].
double bce(const Plane& pred, const Plane& target, double pos_weight);
// Accumulates d(bce)/d(pred) scaled by upstream into d_pred.
void bce_backward(const Plane& pred, const Plane& target, double pos_weight, double upstream,
                  Plane& d_pred);

// Sum of masked |dfx| + |dfy| over max(1, #masked cells); 0 for empty masks.
double flow_l1(const FlowGrid& pred, const FlowGrid& target, const Plane& vehicle_mask);
void flow_l1_backward(const FlowGrid& pred, const FlowGrid& target, const Plane& vehicle_mask,
                      double upstream, FlowGrid& d_pred);

// KL(q || p) for diagonal Gaussians.
double kl_diag_gaussian(const LatentDistribution& q, const LatentDistribution& p);
void kl_diag_gaussian_backward(const LatentDistribution& q, const LatentDistribution& p,
                               double upstream, std::vector<double>& d_mu_q,
                               std::vector<double>& d_lv_q, std::vector<double>& d_mu_p,
                               std::vector<double>& d_lv_p);

// Raw per-term values; total carries the lambda weighting.
struct LossBreakdown {
  double bce_now = 0.0;
  double bce_future = 0.0;
  double bce_warped = 0.0;
  double flow = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

// lambda_d * bce(y_now) + lambda_b * mean_k bce(y_future) +
// lambda_w * mean_k bce(w_future); the warped term is what trains the flow
// head through the warp recursion.
double bce_sum(const PredictionBundle& bundle, const TargetBundle& targets,
               const LossWeights& w);

LossBreakdown total_loss(const PredictionBundle& bundle, const TargetBundle& targets,
                         const LossWeights& w);

// Gradients of the weighted total with respect to every bundle output.
struct BundleGrads {
  Plane d_y_now;
  std::vector<Plane> d_y_future;
  std::vector<FlowGrid> d_f_future;
  std::vector<Plane> d_w_future;
  std::vector<double> d_mu_q, d_lv_q, d_mu_p, d_lv_p;
};

LossBreakdown total_loss_with_grad(const PredictionBundle& bundle, const TargetBundle& targets,
                                   const LossWeights& w, BundleGrads& grads);

}  // namespace gridflow
