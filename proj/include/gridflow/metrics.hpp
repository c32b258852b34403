#pragma once

// Evaluation suite: IoU at a fixed threshold, area under the precision-recall
// curve over linearly spaced thresholds, and the per-vehicle retention
// statistic.

#include <optional>
#include <string>
#include <vector>

#include "gridflow/types.hpp"

namespace gridflow {

// |pred>=tau AND target| / |pred>=tau OR target|; 1 when both sets are empty,
// 0 when exactly one is.
double iou(const Plane& pred, const Plane& target, double threshold = 0.5);

// Precision/recall at n thresholds linearly spaced on [0,1), trapezoidal area
// with a (recall=0, precision at the highest threshold) anchor. Precision at
// zero-prediction points is 1. Returns nullopt when the target has no
// positive cell (undefined, reported as skipped).
std::optional<double> pr_auc(const Plane& pred, const Plane& target, int n_thresholds = 100);

struct RetentionConfig {
  int min_cells = 10;            // qualifying cells needed inside the footprint
  double prob_threshold = 0.3;   // cell qualifies when pred > threshold
  // Strict mode requires the overlap at every horizon step; otherwise only
  // the final step is checked.
  bool require_every_step = true;
};

struct RetentionCounts {
  int dynamic_retained = 0;
  int dynamic_total = 0;
  int static_retained = 0;
  int static_total = 0;

  double dynamic_rate() const {
    return dynamic_total > 0 ? static_cast<double>(dynamic_retained) / dynamic_total : 1.0;
  }
  double static_rate() const {
    return static_total > 0 ? static_cast<double>(static_retained) / static_total : 1.0;
  }
};

// Tracks the vehicles annotated at frame t_index across the next
// pred_steps.size() frames. A vehicle is retained when its GT footprint holds
// at least min_cells cells with pred > prob_threshold at the checked steps.
// Vehicles that leave the grid during the horizon are excluded.
void retention(const std::vector<Plane>& pred_steps, const FrameSequence& gt, int t_index,
               const RetentionConfig& cfg, RetentionCounts& counts);

struct EvalReport {
  int horizon = 0;
  int n_sequences = 0;
  std::vector<double> iou_y_per_step, auc_y_per_step;
  std::vector<double> iou_w_per_step, auc_w_per_step;
  double iou_y_mean = 0.0, auc_y_mean = 0.0;
  double iou_w_mean = 0.0, auc_w_mean = 0.0;
  RetentionCounts retention;

  std::string to_json() const;
  std::string per_step_csv() const;
};

// One evaluated window: predictions for steps t+1..t+P against gt.
struct SequenceEval {
  std::vector<Plane> y_pred;  // decoded semantic predictions (may be empty)
  std::vector<Plane> w_pred;  // warped predictions (may be empty)
  const FrameSequence* gt = nullptr;
  int t_index = 0;
};

// Mean over steps then over sequences; retention counts accumulate over all
// sequences. AUC entries with all-negative targets are skipped from the mean.
EvalReport evaluate(const std::vector<SequenceEval>& seqs, const RetentionConfig& rc = {},
                    double iou_threshold = 0.5, int n_thresholds = 100);

}  // namespace gridflow
