#include "gridflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "gridflow/sim.hpp"

namespace gridflow {

double iou(const Plane& pred, const Plane& target, double threshold) {
  if (!pred.same_shape(target)) throw ConfigError("iou: shape mismatch");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const bool a = pred.v[i] >= threshold;
    const bool b = target.v[i] > 0.5;
    inter += a && b;
    uni += a || b;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<double> pr_auc(const Plane& pred, const Plane& target, int n_thresholds) {
  if (!pred.same_shape(target)) throw ConfigError("pr_auc: shape mismatch");
  if (n_thresholds < 2) throw ConfigError("pr_auc: need at least 2 thresholds");

  size_t total_pos = 0;
  for (double y : target.v) total_pos += y > 0.5;
  if (total_pos == 0) return std::nullopt;

  // Sorted sweep: cells ordered by descending prediction, cumulative counts
  // advanced once per threshold.
  std::vector<std::pair<double, bool>> cells(pred.v.size());
  for (size_t i = 0; i < pred.v.size(); ++i) cells[i] = {pred.v[i], target.v[i] > 0.5};
  std::sort(cells.begin(), cells.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  // Points ordered by descending threshold, i.e. non-decreasing recall,
  // starting from the (recall 0, precision at highest threshold) anchor.
  std::vector<std::pair<double, double>> points;  // (recall, precision)
  points.reserve(n_thresholds + 1);
  size_t idx = 0, tp = 0, pp = 0;
  for (int i = n_thresholds - 1; i >= 0; --i) {
    const double tau = static_cast<double>(i) / n_thresholds;
    while (idx < cells.size() && cells[idx].first >= tau) {
      ++pp;
      tp += cells[idx].second;
      ++idx;
    }
    const double precision = pp > 0 ? static_cast<double>(tp) / pp : 1.0;
    const double recall = static_cast<double>(tp) / total_pos;
    if (points.empty()) points.emplace_back(0.0, precision);
    points.emplace_back(recall, precision);
  }

  double area = 0.0;
  for (size_t j = 0; j + 1 < points.size(); ++j)
    area += (points[j + 1].first - points[j].first) * 0.5 *
            (points[j].second + points[j + 1].second);
  return area;
}

void retention(const std::vector<Plane>& pred_steps, const FrameSequence& gt, int t_index,
               const RetentionConfig& cfg, RetentionCounts& counts) {
  const int P = static_cast<int>(pred_steps.size());
  if (t_index < 0 || t_index + P >= gt.frame_count() + 1)
    throw ConfigError("retention: horizon exceeds sequence");
  const int H = gt.geometry.height_cells, W = gt.geometry.width_cells;

  for (const VehicleInstance& v : gt.instances[t_index]) {
    bool present_everywhere = true;
    bool retained = true;
    for (int k = 1; k <= P; ++k) {
      const auto& insts = gt.instances[t_index + k];
      const auto it = std::find_if(insts.begin(), insts.end(),
                                   [&](const VehicleInstance& o) { return o.id == v.id; });
      if (it == insts.end()) {
        present_everywhere = false;
        break;
      }
      if (!cfg.require_every_step && k != P) continue;
      int qualifying = 0;
      for_each_cell_in_quad(it->corners, H, W, [&](int r, int c) {
        if (pred_steps[k - 1].at(r, c) > cfg.prob_threshold) ++qualifying;
      });
      if (qualifying < cfg.min_cells) retained = false;
    }
    if (!present_everywhere) continue;  // left the grid: out of the denominator
    if (v.dynamic) {
      ++counts.dynamic_total;
      counts.dynamic_retained += retained;
    } else {
      ++counts.static_total;
      counts.static_retained += retained;
    }
  }
}

namespace {

Plane binarize(const Plane& p) {
  Plane out(p.rows, p.cols);
  for (size_t i = 0; i < p.v.size(); ++i) out.v[i] = p.v[i] > 0.5 ? 1.0 : 0.0;
  return out;
}

}  // namespace

EvalReport evaluate(const std::vector<SequenceEval>& seqs, const RetentionConfig& rc,
                    double iou_threshold, int n_thresholds) {
  EvalReport rep;
  if (seqs.empty()) throw ConfigError("evaluate: empty dataset");
  const int P = static_cast<int>(std::max(seqs[0].y_pred.size(), seqs[0].w_pred.size()));
  rep.horizon = P;
  rep.n_sequences = static_cast<int>(seqs.size());
  rep.iou_y_per_step.assign(P, 0.0);
  rep.auc_y_per_step.assign(P, 0.0);
  rep.iou_w_per_step.assign(P, 0.0);
  rep.auc_w_per_step.assign(P, 0.0);
  std::vector<int> ny(P, 0), nay(P, 0), nw(P, 0), naw(P, 0);

  for (const SequenceEval& s : seqs) {
    if (!s.gt) throw ConfigError("evaluate: missing ground truth");
    for (int k = 1; k <= P; ++k) {
      const Plane target = binarize(s.gt->frames[s.t_index + k].semantic.p_vehicle);
      if (static_cast<int>(s.y_pred.size()) >= k) {
        rep.iou_y_per_step[k - 1] += iou(s.y_pred[k - 1], target, iou_threshold);
        ++ny[k - 1];
        if (const auto a = pr_auc(s.y_pred[k - 1], target, n_thresholds)) {
          rep.auc_y_per_step[k - 1] += *a;
          ++nay[k - 1];
        }
      }
      if (static_cast<int>(s.w_pred.size()) >= k) {
        rep.iou_w_per_step[k - 1] += iou(s.w_pred[k - 1], target, iou_threshold);
        ++nw[k - 1];
        if (const auto a = pr_auc(s.w_pred[k - 1], target, n_thresholds)) {
          rep.auc_w_per_step[k - 1] += *a;
          ++naw[k - 1];
        }
      }
    }
    if (!s.w_pred.empty()) {
      retention(s.w_pred, *s.gt, s.t_index, rc, rep.retention);
    } else if (!s.y_pred.empty()) {
      retention(s.y_pred, *s.gt, s.t_index, rc, rep.retention);
    }
  }

  const auto finish = [](std::vector<double>& acc, const std::vector<int>& n, double& mean) {
    double total = 0.0;
    int steps = 0;
    for (size_t k = 0; k < acc.size(); ++k) {
      if (n[k] > 0) {
        acc[k] /= n[k];
        total += acc[k];
        ++steps;
      }
    }
    mean = steps > 0 ? total / steps : 0.0;
  };
  finish(rep.iou_y_per_step, ny, rep.iou_y_mean);
  finish(rep.auc_y_per_step, nay, rep.auc_y_mean);
  finish(rep.iou_w_per_step, nw, rep.iou_w_mean);
  finish(rep.auc_w_per_step, naw, rep.auc_w_mean);
  return rep;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["horizon"] = horizon;
  j["n_sequences"] = n_sequences;
  j["y"] = {{"iou_per_step", iou_y_per_step},
            {"auc_per_step", auc_y_per_step},
            {"iou_mean", iou_y_mean},
            {"auc_mean", auc_y_mean}};
  j["w"] = {{"iou_per_step", iou_w_per_step},
            {"auc_per_step", auc_w_per_step},
            {"iou_mean", iou_w_mean},
            {"auc_mean", auc_w_mean}};
  j["retention"] = {{"dynamic",
                     {{"retained", retention.dynamic_retained},
                      {"total", retention.dynamic_total},
                      {"rate", retention.dynamic_rate()}}},
                    {"static",
                     {{"retained", retention.static_retained},
                      {"total", retention.static_total},
                      {"rate", retention.static_rate()}}}};
  return j.dump(1);
}

std::string EvalReport::per_step_csv() const {
  std::string out = "step,iou_y,auc_y,iou_w,auc_w\n";
  for (int k = 0; k < horizon; ++k) {
    out += std::to_string(k + 1) + "," + std::to_string(iou_y_per_step[k]) + "," +
           std::to_string(auc_y_per_step[k]) + "," + std::to_string(iou_w_per_step[k]) + "," +
           std::to_string(auc_w_per_step[k]) + "\n";
  }
  return out;
}

}  // namespace gridflow
