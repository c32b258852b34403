#include "gridflow/nn/adam.hpp"

#include <cmath>

#include "gridflow/rng.hpp"

namespace gridflow::nn {

void adam_step(ParamTable& params, const ParamTable& grads, const AdamConfig& cfg,
               AdamState& st) {
  if (!st.initialized()) st.init(params);
  ++st.step_count;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step_count));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step_count));
  for (size_t i = 0; i < params.values.size(); ++i) {
    Vec& p = params.values[i];
    const Vec& g = grads.values[i];
    Vec& m = st.m.values[i];
    Vec& v = st.v.values[i];
    for (size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * p[j]);
    }
  }
}

TrainResult train(ParamTable& params, const NetConfig& net, const std::vector<TrainSample>& data,
                  const AdamConfig& optim, const LossWeights& weights, const TrainConfig& tc,
                  AdamState* state, int start_epoch, const TrainHooks& hooks) {
  if (data.empty()) throw ConfigError("train: empty dataset");
  if (tc.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  AdamState local;
  if (!state) state = &local;
  if (!state->initialized()) state->init(params);

  TrainResult result;
  std::vector<size_t> order(data.size());
  for (int epoch = start_epoch; epoch < tc.epochs; ++epoch) {
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    RandomStream shuffle_rng(mix_seed(tc.seed, 0xe60cULL + epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += tc.batch_size) {
      std::vector<BatchItem> batch;
      for (size_t i = start; i < std::min(order.size(), start + tc.batch_size); ++i)
        batch.push_back({&data[order[i]], mix_seed(tc.seed, order[i])});
      ParamTable grads = params.zeros_like();
      const LossBreakdown bd =
          batch_backward(params, net, batch, weights, Reduction::Mean, grads);
      if (!std::isfinite(bd.total)) throw NumericError("train: loss diverged");
      adam_step(params, grads, optim, *state);
      epoch_loss += bd.total * static_cast<double>(batch.size());
      ++result.steps;
      if (hooks.on_step) hooks.on_step(result.steps, bd);
    }
    result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, result.epoch_mean_loss.back());
  }
  return result;
}

}  // namespace gridflow::nn
