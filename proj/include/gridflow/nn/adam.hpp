#pragma once

// Adam with decoupled weight decay, plus the deterministic training loop.

#include <functional>

#include "gridflow/nn/predictor.hpp"

namespace gridflow::nn {

struct AdamConfig {
  double lr = 3e-4;
  double weight_decay = 1e-7;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamTable m, v;
  long step_count = 0;

  void init(const ParamTable& params) {
    m = params.zeros_like();
    v = params.zeros_like();
    step_count = 0;
  }
  bool initialized() const { return !m.values.empty(); }
};

void adam_step(ParamTable& params, const ParamTable& grads, const AdamConfig& cfg,
               AdamState& st);

struct TrainConfig {
  int epochs = 20;
  int batch_size = 8;
  uint64_t seed = 1;
};

struct TrainHooks {
  std::function<void(long step, const LossBreakdown&)> on_step;
  std::function<void(int epoch, double mean_loss)> on_epoch_end;
};

struct TrainResult {
  std::vector<double> epoch_mean_loss;
  long steps = 0;
};

// Deterministic for a fixed seed: the shuffle stream and every sample's
// latent draw derive from (seed, epoch, position), never from global state.
// Aborts with NumericError when the loss goes non-finite.
TrainResult train(ParamTable& params, const NetConfig& net, const std::vector<TrainSample>& data,
                  const AdamConfig& optim, const LossWeights& weights, const TrainConfig& tc,
                  AdamState* state = nullptr, int start_epoch = 0, const TrainHooks& hooks = {});

}  // namespace gridflow::nn
