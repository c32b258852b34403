#include "gridflow/losses.hpp"

#include <cmath>
#include <string>

namespace gridflow {

namespace {

void check_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite loss term: ") + term);
}

inline double clamp_p(double p) {
  return p < kBceEps ? kBceEps : (p > 1.0 - kBceEps ? 1.0 - kBceEps : p);
}

}  // namespace

double bce(const Plane& pred, const Plane& target, double pos_weight) {
  if (!pred.same_shape(target)) throw ConfigError("bce: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const double p = clamp_p(pred.v[i]);
    const double y = target.v[i];
    acc -= pos_weight * y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  const double out = acc / static_cast<double>(pred.v.size());
  check_finite(out, "bce");
  return out;
}

void bce_backward(const Plane& pred, const Plane& target, double pos_weight, double upstream,
                  Plane& d_pred) {
  const double inv_n = 1.0 / static_cast<double>(pred.v.size());
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const double p = pred.v[i];
    if (p < kBceEps || p > 1.0 - kBceEps) continue;  // clamped region: flat
    const double y = target.v[i];
    d_pred.v[i] += upstream * inv_n * (-pos_weight * y / p + (1.0 - y) / (1.0 - p));
  }
}

double flow_l1(const FlowGrid& pred, const FlowGrid& target, const Plane& vehicle_mask) {
  if (!pred.fx.same_shape(target.fx) || !pred.fx.same_shape(vehicle_mask))
    throw ConfigError("flow_l1: shape mismatch");
  double acc = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < vehicle_mask.v.size(); ++i) {
    if (vehicle_mask.v[i] <= 0.5) continue;
    acc += std::abs(pred.fx.v[i] - target.fx.v[i]) + std::abs(pred.fy.v[i] - target.fy.v[i]);
    ++count;
  }
  return acc / static_cast<double>(std::max<size_t>(1, count));
}

void flow_l1_backward(const FlowGrid& pred, const FlowGrid& target, const Plane& vehicle_mask,
                      double upstream, FlowGrid& d_pred) {
  size_t count = 0;
  for (double m : vehicle_mask.v)
    if (m > 0.5) ++count;
  const double scale = upstream / static_cast<double>(std::max<size_t>(1, count));
  for (size_t i = 0; i < vehicle_mask.v.size(); ++i) {
    if (vehicle_mask.v[i] <= 0.5) continue;
    const double dx = pred.fx.v[i] - target.fx.v[i];
    const double dy = pred.fy.v[i] - target.fy.v[i];
    d_pred.fx.v[i] += scale * (dx > 0.0 ? 1.0 : (dx < 0.0 ? -1.0 : 0.0));
    d_pred.fy.v[i] += scale * (dy > 0.0 ? 1.0 : (dy < 0.0 ? -1.0 : 0.0));
  }
}

double kl_diag_gaussian(const LatentDistribution& q, const LatentDistribution& p) {
  if (q.dim() != p.dim()) throw ConfigError("kl: dimension mismatch");
  double acc = 0.0;
  for (int i = 0; i < q.dim(); ++i) {
    const double dm = q.mu[i] - p.mu[i];
    acc += 0.5 * (p.log_var[i] - q.log_var[i] +
                  (std::exp(q.log_var[i]) + dm * dm) * std::exp(-p.log_var[i]) - 1.0);
  }
  return acc;
}

void kl_diag_gaussian_backward(const LatentDistribution& q, const LatentDistribution& p,
                               double upstream, std::vector<double>& d_mu_q,
                               std::vector<double>& d_lv_q, std::vector<double>& d_mu_p,
                               std::vector<double>& d_lv_p) {
  for (int i = 0; i < q.dim(); ++i) {
    const double inv_vp = std::exp(-p.log_var[i]);
    const double vq = std::exp(q.log_var[i]);
    const double dm = q.mu[i] - p.mu[i];
    d_mu_q[i] += upstream * dm * inv_vp;
    d_mu_p[i] -= upstream * dm * inv_vp;
    d_lv_q[i] += upstream * 0.5 * (vq * inv_vp - 1.0);
    d_lv_p[i] += upstream * 0.5 * (1.0 - (vq + dm * dm) * inv_vp);
  }
}

namespace {

LossBreakdown loss_terms(const PredictionBundle& bundle, const TargetBundle& targets,
                         const LossWeights& w) {
  w.validate();
  const size_t P = bundle.y_future.size();
  if (targets.y_future.size() != P || bundle.w_future.size() != P ||
      bundle.f_future.size() != P || targets.flow_future.size() != P ||
      targets.mask_future.size() != P)
    throw ConfigError("loss: horizon length mismatch");

  LossBreakdown b;
  b.bce_now = bce(bundle.y_now.p_vehicle, targets.y_now, w.bce_pos_weight);
  for (size_t k = 0; k < P; ++k) {
    b.bce_future += bce(bundle.y_future[k].p_vehicle, targets.y_future[k], w.bce_pos_weight);
    b.bce_warped += bce(bundle.w_future[k].p_vehicle, targets.y_future[k], w.bce_pos_weight);
    b.flow += flow_l1(bundle.f_future[k], targets.flow_future[k], targets.mask_future[k]);
  }
  if (P > 0) {
    b.bce_future /= static_cast<double>(P);
    b.bce_warped /= static_cast<double>(P);
    b.flow /= static_cast<double>(P);
  }
  if (bundle.has_future_dist)
    b.kl = w.kl_future_to_present ? kl_diag_gaussian(bundle.dist_future, bundle.dist_present)
                                  : kl_diag_gaussian(bundle.dist_present, bundle.dist_future);
  b.total = w.lambda_d * b.bce_now + w.lambda_b * b.bce_future + w.lambda_w * b.bce_warped +
            w.lambda_f * b.flow + w.lambda_k * b.kl;
  check_finite(b.kl, "kl");
  check_finite(b.flow, "flow_l1");
  check_finite(b.total, "total");
  return b;
}

}  // namespace

double bce_sum(const PredictionBundle& bundle, const TargetBundle& targets,
               const LossWeights& w) {
  const LossBreakdown b = loss_terms(bundle, targets, w);
  return w.lambda_d * b.bce_now + w.lambda_b * b.bce_future + w.lambda_w * b.bce_warped;
}

LossBreakdown total_loss(const PredictionBundle& bundle, const TargetBundle& targets,
                         const LossWeights& w) {
  return loss_terms(bundle, targets, w);
}

LossBreakdown total_loss_with_grad(const PredictionBundle& bundle, const TargetBundle& targets,
                                   const LossWeights& w, BundleGrads& g) {
  const LossBreakdown b = loss_terms(bundle, targets, w);
  const size_t P = bundle.y_future.size();
  const int rows = bundle.y_now.p_vehicle.rows, cols = bundle.y_now.p_vehicle.cols;

  g.d_y_now = Plane(rows, cols);
  g.d_y_future.assign(P, Plane(rows, cols));
  g.d_w_future.assign(P, Plane(rows, cols));
  g.d_f_future.assign(P, FlowGrid(rows, cols));
  const int L = bundle.dist_present.dim();
  g.d_mu_q.assign(L, 0.0);
  g.d_lv_q.assign(L, 0.0);
  g.d_mu_p.assign(L, 0.0);
  g.d_lv_p.assign(L, 0.0);

  bce_backward(bundle.y_now.p_vehicle, targets.y_now, w.bce_pos_weight, w.lambda_d, g.d_y_now);
  const double step_scale = P > 0 ? 1.0 / static_cast<double>(P) : 0.0;
  for (size_t k = 0; k < P; ++k) {
    bce_backward(bundle.y_future[k].p_vehicle, targets.y_future[k], w.bce_pos_weight,
                 w.lambda_b * step_scale, g.d_y_future[k]);
    bce_backward(bundle.w_future[k].p_vehicle, targets.y_future[k], w.bce_pos_weight,
                 w.lambda_w * step_scale, g.d_w_future[k]);
    flow_l1_backward(bundle.f_future[k], targets.flow_future[k], targets.mask_future[k],
                     w.lambda_f * step_scale, g.d_f_future[k]);
  }
  // d_mu_q/d_lv_q always refer to the future distribution, d_mu_p/d_lv_p to
  // the present one, regardless of the configured KL direction.
  if (bundle.has_future_dist) {
    if (w.kl_future_to_present)
      kl_diag_gaussian_backward(bundle.dist_future, bundle.dist_present, w.lambda_k, g.d_mu_q,
                                g.d_lv_q, g.d_mu_p, g.d_lv_p);
    else
      kl_diag_gaussian_backward(bundle.dist_present, bundle.dist_future, w.lambda_k, g.d_mu_p,
                                g.d_lv_p, g.d_mu_q, g.d_lv_q);
  }
  return b;
}

}  // namespace gridflow
