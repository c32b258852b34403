#pragma once

// Multi-task grid predictor: per-frame spatial encoder, convolutional-LSTM
// temporal core, present/future diagonal-Gaussian latents, a spatial-GRU
// future decoder with two heads (current-step semantic grid; per-step
// semantic + flow), and the warp rollout that turns predicted flows into
// warped future grids. Reverse-mode gradients are hand-written through every
// stage, warp included.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gridflow/bundle.hpp"
#include "gridflow/losses.hpp"
#include "gridflow/nn/layers.hpp"
#include "gridflow/warp.hpp"

namespace gridflow::nn {

struct NetConfig {
  int in_channels = 6;
  int base_features = 16;      // paper-scale: 128
  int n_convlstm_layers = 2;   // paper-scale: 4
  int latent_dim = 8;          // paper-scale: 32
  int n_gru_units_per_step = 3;
  int horizon = 4;             // P
  int input_len = 3;           // N+1
  int downsample = 4;          // power of two
  double velocity_norm_mps = 5.0;  // input velocity channels divide by this

  void validate() const;
  int down_stages() const;  // log2(downsample)
};

// Flat named collection of all learnable weights; iteration order is the
// architecture's creation order and is what checkpoints and the optimizer
// follow.
struct ParamTable {
  std::vector<std::string> names;
  std::vector<std::vector<int>> shapes;
  std::vector<Vec> values;

  int add(const std::string& name, std::vector<int> shape);
  int index_of(const std::string& name) const;
  Vec& get(const std::string& name) { return values[index_of(name)]; }
  const Vec& get(const std::string& name) const { return values[index_of(name)]; }
  size_t count() const { return values.size(); }
  size_t total_size() const;
  ParamTable zeros_like() const;
  void check_finite(const std::string& what) const;

 private:
  std::unordered_map<std::string, int> index_;
};

ParamTable init_params(const NetConfig& cfg, uint64_t seed);

enum class ForwardMode { Train, Sample, Mean };

// Everything the backward pass needs; only tests and backward() look inside.
struct ForwardTrace;

PredictionBundle forward(const ParamTable& params, const NetConfig& cfg,
                         const std::vector<Tensor>& inputs, ForwardMode mode, uint64_t seed,
                         const TargetBundle* targets = nullptr);

// Full reverse-mode pass for one sample: runs the training-mode forward,
// evaluates the composite loss and accumulates d(loss)/d(param) into grads.
LossBreakdown backward(const ParamTable& params, const NetConfig& cfg,
                       const std::vector<Tensor>& inputs, const TargetBundle& targets,
                       const LossWeights& weights, uint64_t seed, ParamTable& grads);

enum class Reduction { Mean, Sum };

// Batch elements run in parallel; per-element gradients are combined in
// element order so results do not depend on the thread count. Each element
// carries its own latent-draw seed (the training loop derives it from the
// sample's dataset index, keeping losses comparable across epochs).
struct TrainSample {
  std::vector<Tensor> inputs;
  TargetBundle targets;
};
struct BatchItem {
  const TrainSample* sample = nullptr;
  uint64_t seed = 0;
};
LossBreakdown batch_backward(const ParamTable& params, const NetConfig& cfg,
                             const std::vector<BatchItem>& batch, const LossWeights& weights,
                             Reduction reduction, ParamTable& grads);

// Packs one frame into the 6-channel input tensor
// [p_static, p_dynamic, p_unknown, vx/vnorm, vy/vnorm, semantic].
Tensor pack_input_frame(const Frame& frame, double velocity_norm_mps);

// Non-learned baseline: keeps the latest semantic grid and advects it with
// per-step backward flows derived from the DOGM velocity grid. The velocity
// and occupancy are pushed forward each step; destination cells receive flow
// -v*dt (normalized), so the warp gather pulls from the right source.
PredictionBundle baseline_constant_velocity(const FrameSequence& window, int t_index,
                                            int horizon, const WarpConfig& wcfg = {});

}  // namespace gridflow::nn
