#include "gridflow/nn/predictor.hpp"

#include <cmath>
#include <stdexcept>

#include "gridflow/kernels.hpp"
#include "gridflow/rng.hpp"

namespace gridflow::nn {

void NetConfig::validate() const {
  if (in_channels <= 0 || base_features <= 0 || n_convlstm_layers <= 0 || latent_dim <= 0 ||
      n_gru_units_per_step <= 0 || horizon < 1 || input_len < 1)
    throw ConfigError("net config values must be positive");
  int d = downsample;
  if (d < 1) throw ConfigError("downsample must be >= 1");
  while (d > 1) {
    if (d % 2 != 0) throw ConfigError("downsample must be a power of two");
    d /= 2;
  }
  if (!(velocity_norm_mps > 0.0)) throw ConfigError("velocity_norm_mps must be positive");
}

int NetConfig::down_stages() const {
  int d = downsample, n = 0;
  while (d > 1) {
    d /= 2;
    ++n;
  }
  return n;
}

int ParamTable::add(const std::string& name, std::vector<int> shape) {
  size_t n = 1;
  for (int s : shape) n *= static_cast<size_t>(s);
  const int idx = static_cast<int>(values.size());
  names.push_back(name);
  shapes.push_back(std::move(shape));
  values.emplace_back(n, 0.0);
  index_[name] = idx;
  return idx;
}

int ParamTable::index_of(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

size_t ParamTable::total_size() const {
  size_t n = 0;
  for (const Vec& v : values) n += v.size();
  return n;
}

ParamTable ParamTable::zeros_like() const {
  ParamTable t;
  for (size_t i = 0; i < names.size(); ++i) t.add(names[i], shapes[i]);
  return t;
}

void ParamTable::check_finite(const std::string& what) const {
  for (size_t i = 0; i < values.size(); ++i)
    for (double x : values[i])
      if (!std::isfinite(x)) throw NumericError("non-finite value in " + what + ": " + names[i]);
}

namespace {

constexpr int kK = 3;  // every convolution is 3x3

void add_conv(ParamTable& t, const std::string& prefix, int oc, int ic) {
  t.add(prefix + ".w", {oc, ic, kK, kK});
  t.add(prefix + ".b", {oc});
}

void init_uniform(Vec& v, int fan_in, RandomStream& rng) {
  const double a = std::sqrt(1.0 / fan_in);
  for (double& x : v) x = rng.uniform(-a, a);
}

}  // namespace

ParamTable init_params(const NetConfig& cfg, uint64_t seed) {
  cfg.validate();
  const int F = cfg.base_features, L = cfg.latent_dim, D = cfg.down_stages();
  ParamTable t;
  add_conv(t, "enc.in", F, cfg.in_channels);
  for (int d = 0; d < D; ++d) add_conv(t, "enc.down" + std::to_string(d), F, F);
  for (int l = 0; l < cfg.n_convlstm_layers; ++l)
    add_conv(t, "lstm" + std::to_string(l), 4 * F, 2 * F);
  t.add("dist_present.w", {2 * L, F});
  t.add("dist_present.b", {2 * L});
  add_conv(t, "fenc.in", F, 3);
  for (int d = 0; d < D; ++d) add_conv(t, "fenc.down" + std::to_string(d), F, F);
  t.add("dist_future.w", {2 * L, 2 * F});
  t.add("dist_future.b", {2 * L});
  for (int u = 0; u < cfg.n_gru_units_per_step; ++u) {
    const int in_ch = u == 0 ? L : F;
    add_conv(t, "gru" + std::to_string(u) + ".zr", 2 * F, in_ch + F);
    add_conv(t, "gru" + std::to_string(u) + ".cand", F, in_ch + F);
  }
  for (int d = 0; d < D; ++d) add_conv(t, "head_now.up" + std::to_string(d), F, F);
  add_conv(t, "head_now.out", 1, F);
  for (int d = 0; d < D; ++d) add_conv(t, "head_future.up" + std::to_string(d), F, F);
  add_conv(t, "head_future.out", 3, F);

  RandomStream rng(mix_seed(seed, 0x1417ULL));
  for (size_t i = 0; i < t.names.size(); ++i) {
    const auto& shape = t.shapes[i];
    if (shape.size() == 4) {
      init_uniform(t.values[i], shape[1] * shape[2] * shape[3], rng);
    } else if (shape.size() == 2) {
      init_uniform(t.values[i], shape[1], rng);
    }
    // biases stay zero
  }
  // Recurrent forget gates open at the start.
  for (int l = 0; l < cfg.n_convlstm_layers; ++l) {
    Vec& b = t.get("lstm" + std::to_string(l) + ".b");
    for (int ci = F; ci < 2 * F; ++ci) b[ci] = 1.0;
  }
  return t;
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

namespace {

struct EncTrace {
  Tensor input;
  Tensor pre0;
  std::vector<Tensor> pre_down;
  std::vector<Tensor> act;  // act[0] after input conv, then one per stage
};

EncTrace encoder_forward(const Tensor& input, const std::string& prefix, const ParamTable& p,
                         int F, int D) {
  EncTrace t;
  t.input = input;
  t.pre0 = conv2d(input, p.get(prefix + ".in.w"), p.get(prefix + ".in.b"), F, kK, 1, 1);
  t.act.reserve(D + 1);
  t.pre_down.reserve(D);
  t.act.push_back(relu(t.pre0));
  for (int d = 0; d < D; ++d) {
    const std::string name = prefix + ".down" + std::to_string(d);
    t.pre_down.push_back(conv2d(t.act.back(), p.get(name + ".w"), p.get(name + ".b"), F, kK, 2, 1));
    t.act.push_back(relu(t.pre_down.back()));
  }
  return t;
}

void encoder_backward(const EncTrace& t, const std::string& prefix, const ParamTable& p,
                      ParamTable& g, int F, int D, const Tensor& d_out) {
  Tensor d_act = d_out;
  for (int d = D - 1; d >= 0; --d) {
    const std::string name = prefix + ".down" + std::to_string(d);
    Tensor d_pre = Tensor::zeros_like(t.pre_down[d]);
    relu_backward(t.pre_down[d], d_act, d_pre);
    Tensor d_prev = Tensor::zeros_like(t.act[d]);
    conv2d_backward(t.act[d], p.get(name + ".w"), F, kK, 2, 1, d_pre, &d_prev,
                    &g.get(name + ".w"), &g.get(name + ".b"));
    d_act = std::move(d_prev);
  }
  Tensor d_pre0 = Tensor::zeros_like(t.pre0);
  relu_backward(t.pre0, d_act, d_pre0);
  conv2d_backward(t.input, p.get(prefix + ".in.w"), F, kK, 1, 1, d_pre0, nullptr,
                  &g.get(prefix + ".in.w"), &g.get(prefix + ".in.b"));
}

struct HeadTrace {
  Tensor input;
  std::vector<Tensor> up, pre, act;
  Tensor out_pre;
};

HeadTrace head_forward(const Tensor& input, const std::string& prefix, const ParamTable& p,
                       int F, int D, int out_ch) {
  HeadTrace t;
  t.input = input;
  t.up.reserve(D);
  t.pre.reserve(D);
  t.act.reserve(D);
  for (int d = 0; d < D; ++d) {
    const std::string name = prefix + ".up" + std::to_string(d);
    const Tensor& cur = d == 0 ? t.input : t.act[d - 1];
    t.up.push_back(upsample2_nearest(cur));
    t.pre.push_back(conv2d(t.up.back(), p.get(name + ".w"), p.get(name + ".b"), F, kK, 1, 1));
    t.act.push_back(relu(t.pre.back()));
  }
  const Tensor& last = D > 0 ? t.act.back() : t.input;
  t.out_pre = conv2d(last, p.get(prefix + ".out.w"), p.get(prefix + ".out.b"), out_ch, kK, 1, 1);
  return t;
}

Tensor head_backward(const HeadTrace& t, const std::string& prefix, const ParamTable& p,
                     ParamTable& g, int F, int D, int out_ch, const Tensor& d_out_pre) {
  const Tensor& last = D > 0 ? t.act.back() : t.input;
  Tensor d_last = Tensor::zeros_like(last);
  conv2d_backward(last, p.get(prefix + ".out.w"), out_ch, kK, 1, 1, d_out_pre, &d_last,
                  &g.get(prefix + ".out.w"), &g.get(prefix + ".out.b"));
  for (int d = D - 1; d >= 0; --d) {
    const std::string name = prefix + ".up" + std::to_string(d);
    Tensor d_pre = Tensor::zeros_like(t.pre[d]);
    relu_backward(t.pre[d], d_last, d_pre);
    Tensor d_up = Tensor::zeros_like(t.up[d]);
    conv2d_backward(t.up[d], p.get(name + ".w"), F, kK, 1, 1, d_pre, &d_up, &g.get(name + ".w"),
                    &g.get(name + ".b"));
    const Tensor& stage_in = d > 0 ? t.act[d - 1] : t.input;
    Tensor d_in = Tensor::zeros_like(stage_in);
    upsample2_nearest_backward(d_up, d_in);
    d_last = std::move(d_in);
  }
  return d_last;
}

Tensor future_target_tensor(const TargetBundle& targets, int k) {
  const Plane& sem = targets.y_future[k];
  Tensor t(3, sem.rows, sem.cols);
  plane_into_tensor_channel(sem, t, 0);
  plane_into_tensor_channel(targets.flow_future[k].fx, t, 1);
  plane_into_tensor_channel(targets.flow_future[k].fy, t, 2);
  return t;
}

}  // namespace

struct ForwardTrace {
  int H = 0, W = 0, hs = 0, ws = 0;
  std::vector<EncTrace> enc;
  std::vector<std::vector<ConvLstmCache>> lstm;  // [time][layer]
  Tensor h_top;
  Vec pooled_present;
  std::vector<EncTrace> fenc;
  std::vector<Vec> fenc_pooled;
  Vec pooled_future, concat_pf;
  Vec eps, z;
  Tensor z_map;
  std::vector<std::vector<ConvGruCache>> gru;  // [step][unit]
  std::vector<Tensor> gru_out;
  HeadTrace head_now;
  std::vector<HeadTrace> head_future;
  PredictionBundle bundle;
};

namespace {

void forward_impl(const ParamTable& p, const NetConfig& cfg, const std::vector<Tensor>& inputs,
                  ForwardMode mode, uint64_t seed, const TargetBundle* targets,
                  ForwardTrace& t) {
  cfg.validate();
  const int F = cfg.base_features, L = cfg.latent_dim, D = cfg.down_stages();
  if (static_cast<int>(inputs.size()) != cfg.input_len)
    throw ConfigError("forward: expected input_len frames");
  for (const Tensor& in : inputs)
    if (in.c != cfg.in_channels || !in.same_shape(inputs[0]))
      throw ConfigError("forward: input shape mismatch");
  t.H = inputs[0].h;
  t.W = inputs[0].w;
  if (t.H % cfg.downsample != 0 || t.W % cfg.downsample != 0)
    throw ConfigError("forward: grid size must be divisible by downsample");
  t.hs = t.H / cfg.downsample;
  t.ws = t.W / cfg.downsample;
  if (mode == ForwardMode::Train) {
    if (!targets) throw ConfigError("forward: train mode requires ground-truth targets");
    if (static_cast<int>(targets->y_future.size()) != cfg.horizon ||
        static_cast<int>(targets->flow_future.size()) != cfg.horizon)
      throw ConfigError("forward: target horizon mismatch");
  }

  // Spatial encoder per frame, then the recurrent core in time order.
  t.enc.reserve(inputs.size());
  for (const Tensor& in : inputs) t.enc.push_back(encoder_forward(in, "enc", p, F, D));

  std::vector<Tensor> h(cfg.n_convlstm_layers, Tensor(F, t.hs, t.ws));
  std::vector<Tensor> c(cfg.n_convlstm_layers, Tensor(F, t.hs, t.ws));
  t.lstm.resize(inputs.size());
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    t.lstm[ti].resize(cfg.n_convlstm_layers);
    const Tensor* x = &t.enc[ti].act.back();
    for (int l = 0; l < cfg.n_convlstm_layers; ++l) {
      const std::string name = "lstm" + std::to_string(l);
      Tensor h_new, c_new;
      convlstm_forward(*x, h[l], c[l], p.get(name + ".w"), p.get(name + ".b"), F, t.lstm[ti][l],
                       h_new, c_new);
      h[l] = std::move(h_new);
      c[l] = std::move(c_new);
      x = &h[l];
    }
  }
  t.h_top = h.back();

  // Latent distributions.
  t.pooled_present = global_avg_pool(t.h_top);
  const Vec dp = dense(t.pooled_present, p.get("dist_present.w"), p.get("dist_present.b"), 2 * L);
  LatentDistribution present;
  present.mu.assign(dp.begin(), dp.begin() + L);
  present.log_var.assign(dp.begin() + L, dp.end());

  LatentDistribution future;
  if (mode == ForwardMode::Train) {
    t.fenc.reserve(cfg.horizon);
    t.fenc_pooled.reserve(cfg.horizon);
    t.pooled_future.assign(F, 0.0);
    for (int k = 0; k < cfg.horizon; ++k) {
      t.fenc.push_back(encoder_forward(future_target_tensor(*targets, k), "fenc", p, F, D));
      t.fenc_pooled.push_back(global_avg_pool(t.fenc.back().act.back()));
      for (int i = 0; i < F; ++i) t.pooled_future[i] += t.fenc_pooled.back()[i];
    }
    for (int i = 0; i < F; ++i) t.pooled_future[i] /= cfg.horizon;
    t.concat_pf = t.pooled_present;
    t.concat_pf.insert(t.concat_pf.end(), t.pooled_future.begin(), t.pooled_future.end());
    const Vec df = dense(t.concat_pf, p.get("dist_future.w"), p.get("dist_future.b"), 2 * L);
    future.mu.assign(df.begin(), df.begin() + L);
    future.log_var.assign(df.begin() + L, df.end());
  }

  // Latent sample: training draws from the future distribution, sampling from
  // the present, mean mode takes the present mean.
  t.z.assign(L, 0.0);
  if (mode == ForwardMode::Mean) {
    t.z = present.mu;
  } else {
    RandomStream rng(mix_seed(seed, 0x7a7eULL));
    t.eps.assign(L, 0.0);
    for (int i = 0; i < L; ++i) t.eps[i] = rng.normal();
    const LatentDistribution& src = mode == ForwardMode::Train ? future : present;
    for (int i = 0; i < L; ++i)
      t.z[i] = src.mu[i] + std::exp(0.5 * src.log_var[i]) * t.eps[i];
  }
  t.z_map = broadcast_latent(t.z, t.hs, t.ws);

  // Spatial-GRU future decoder; every unit's state starts from the temporal
  // core's final hidden state.
  std::vector<Tensor> gh(cfg.n_gru_units_per_step, t.h_top);
  t.gru.resize(cfg.horizon);
  t.gru_out.reserve(cfg.horizon);
  for (int k = 0; k < cfg.horizon; ++k) {
    t.gru[k].resize(cfg.n_gru_units_per_step);
    const Tensor* x = &t.z_map;
    for (int u = 0; u < cfg.n_gru_units_per_step; ++u) {
      const std::string name = "gru" + std::to_string(u);
      Tensor h_new;
      convgru_forward(*x, gh[u], p.get(name + ".zr.w"), p.get(name + ".zr.b"),
                      p.get(name + ".cand.w"), p.get(name + ".cand.b"), F, t.gru[k][u], h_new);
      gh[u] = std::move(h_new);
      x = &gh[u];
    }
    t.gru_out.push_back(gh.back());
  }

  // Heads.
  t.head_now = head_forward(t.h_top, "head_now", p, F, D, 1);
  const Tensor y_now_act = sigmoid(t.head_now.out_pre);

  PredictionBundle& b = t.bundle;
  b.y_now.p_vehicle = tensor_channel_to_plane(y_now_act, 0);
  b.y_future.clear();
  b.f_future.clear();
  t.head_future.clear();
  t.head_future.reserve(cfg.horizon);
  for (int k = 0; k < cfg.horizon; ++k) {
    t.head_future.push_back(head_forward(t.gru_out[k], "head_future", p, F, D, 3));
    const Tensor& pre = t.head_future.back().out_pre;
    SemanticGrid sem(t.H, t.W);
    FlowGrid flow(t.H, t.W);
    for (int j = 0; j < t.H * t.W; ++j) {
      sem.p_vehicle.v[j] = 1.0 / (1.0 + std::exp(-pre.ch(0)[j]));
      flow.fx.v[j] = std::tanh(pre.ch(1)[j]);
      flow.fy.v[j] = std::tanh(pre.ch(2)[j]);
    }
    b.y_future.push_back(std::move(sem));
    b.f_future.push_back(std::move(flow));
  }
  b.w_future = warp_rollout(b.y_now, b.f_future, WarpConfig{});
  b.dist_present = std::move(present);
  if (mode == ForwardMode::Train) {
    b.dist_future = std::move(future);
    b.has_future_dist = true;
  } else {
    b.dist_future = {};
    b.has_future_dist = false;
  }
}

}  // namespace

PredictionBundle forward(const ParamTable& params, const NetConfig& cfg,
                         const std::vector<Tensor>& inputs, ForwardMode mode, uint64_t seed,
                         const TargetBundle* targets) {
  ForwardTrace t;
  forward_impl(params, cfg, inputs, mode, seed, targets, t);
  return std::move(t.bundle);
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

LossBreakdown backward(const ParamTable& p, const NetConfig& cfg,
                       const std::vector<Tensor>& inputs, const TargetBundle& targets,
                       const LossWeights& weights, uint64_t seed, ParamTable& g) {
  ForwardTrace t;
  forward_impl(p, cfg, inputs, ForwardMode::Train, seed, &targets, t);
  const int F = cfg.base_features, L = cfg.latent_dim, D = cfg.down_stages();
  const int P = cfg.horizon, U = cfg.n_gru_units_per_step;

  BundleGrads bg;
  const LossBreakdown breakdown = total_loss_with_grad(t.bundle, targets, weights, bg);

  // Warp rollout chain: pull the warped-grid gradients back onto y_now and
  // the predicted flows.
  std::vector<Plane> d_w = std::move(bg.d_w_future);
  Plane d_y_now = std::move(bg.d_y_now);
  for (int k = P - 1; k >= 0; --k) {
    const Plane& src =
        k == 0 ? t.bundle.y_now.p_vehicle : t.bundle.w_future[k - 1].p_vehicle;
    Plane& d_src = k == 0 ? d_y_now : d_w[k - 1];
    kernels::warp_gather_backward(src, t.bundle.f_future[k].fx, t.bundle.f_future[k].fy, 0.0,
                                  true, d_w[k], d_src, bg.d_f_future[k].fx,
                                  bg.d_f_future[k].fy);
  }

  // Current head: sigmoid then the upsampling stack.
  Tensor d_now_pre(1, t.H, t.W);
  for (int j = 0; j < t.H * t.W; ++j) {
    const double y = t.bundle.y_now.p_vehicle.v[j];
    d_now_pre.ch(0)[j] = d_y_now.v[j] * y * (1.0 - y);
  }
  Tensor d_h_top = head_backward(t.head_now, "head_now", p, g, F, D, 1, d_now_pre);

  // Future head per step (shared weights).
  std::vector<Tensor> d_gru_out(P);
  for (int k = 0; k < P; ++k) {
    Tensor d_pre(3, t.H, t.W);
    for (int j = 0; j < t.H * t.W; ++j) {
      const double y = t.bundle.y_future[k].p_vehicle.v[j];
      d_pre.ch(0)[j] = bg.d_y_future[k].v[j] * y * (1.0 - y);
      const double fx = t.bundle.f_future[k].fx.v[j];
      const double fy = t.bundle.f_future[k].fy.v[j];
      d_pre.ch(1)[j] = bg.d_f_future[k].fx.v[j] * (1.0 - fx * fx);
      d_pre.ch(2)[j] = bg.d_f_future[k].fy.v[j] * (1.0 - fy * fy);
    }
    d_gru_out[k] = head_backward(t.head_future[k], "head_future", p, g, F, D, 3, d_pre);
  }

  // GRU decoder, backward through time. d_h[u] carries the recurrent
  // gradient; unit u's input gradient feeds unit u-1's output at the same
  // step, and unit 0's input gradient lands on the latent map.
  std::vector<Tensor> d_h(U, Tensor(F, t.hs, t.ws));
  Tensor d_z_map(L, t.hs, t.ws);
  for (int k = P - 1; k >= 0; --k) {
    for (size_t j = 0; j < d_h[U - 1].v.size(); ++j) d_h[U - 1].v[j] += d_gru_out[k].v[j];
    for (int u = U - 1; u >= 0; --u) {
      const std::string name = "gru" + std::to_string(u);
      Tensor d_x = u == 0 ? Tensor(L, t.hs, t.ws) : Tensor(F, t.hs, t.ws);
      Tensor d_h_prev(F, t.hs, t.ws);
      convgru_backward(t.gru[k][u], p.get(name + ".zr.w"), p.get(name + ".cand.w"), F, d_h[u],
                       d_x, d_h_prev, g.get(name + ".zr.w"), g.get(name + ".zr.b"),
                       g.get(name + ".cand.w"), g.get(name + ".cand.b"));
      d_h[u] = std::move(d_h_prev);
      if (u == 0) {
        for (size_t j = 0; j < d_z_map.v.size(); ++j) d_z_map.v[j] += d_x.v[j];
      } else {
        for (size_t j = 0; j < d_h[u - 1].v.size(); ++j) d_h[u - 1].v[j] += d_x.v[j];
      }
    }
  }
  // Initial unit states were all h_top.
  for (int u = 0; u < U; ++u)
    for (size_t j = 0; j < d_h_top.v.size(); ++j) d_h_top.v[j] += d_h[u].v[j];

  // Latent sample -> distribution heads. Training samples from the future
  // distribution, so the reparameterization gradient lands there; the KL term
  // contributes to both.
  Vec d_z(L, 0.0);
  broadcast_latent_backward(d_z_map, d_z);
  Vec d_mu_f = std::move(bg.d_mu_q), d_lv_f = std::move(bg.d_lv_q);
  Vec d_mu_p = std::move(bg.d_mu_p), d_lv_p = std::move(bg.d_lv_p);
  for (int i = 0; i < L; ++i) {
    const double sigma = std::exp(0.5 * t.bundle.dist_future.log_var[i]);
    d_mu_f[i] += d_z[i];
    d_lv_f[i] += d_z[i] * t.eps[i] * 0.5 * sigma;
  }

  // Future distribution head.
  Vec d_df(2 * L, 0.0);
  for (int i = 0; i < L; ++i) {
    d_df[i] = d_mu_f[i];
    d_df[L + i] = d_lv_f[i];
  }
  Vec d_concat(t.concat_pf.size(), 0.0);
  dense_backward(t.concat_pf, p.get("dist_future.w"), 2 * L, d_df, &d_concat,
                 &g.get("dist_future.w"), &g.get("dist_future.b"));
  Vec d_pooled_present(F, 0.0), d_pooled_future(F, 0.0);
  for (int i = 0; i < F; ++i) {
    d_pooled_present[i] = d_concat[i];
    d_pooled_future[i] = d_concat[F + i];
  }
  // Future encoder (inputs are ground truth; only weights receive gradient).
  for (int k = 0; k < P; ++k) {
    Vec d_pool_k(F, 0.0);
    for (int i = 0; i < F; ++i) d_pool_k[i] = d_pooled_future[i] / P;
    Tensor d_fenc_out = Tensor::zeros_like(t.fenc[k].act.back());
    global_avg_pool_backward(d_pool_k, d_fenc_out);
    encoder_backward(t.fenc[k], "fenc", p, g, F, D, d_fenc_out);
  }

  // Present distribution head.
  Vec d_dp(2 * L, 0.0);
  for (int i = 0; i < L; ++i) {
    d_dp[i] = d_mu_p[i];
    d_dp[L + i] = d_lv_p[i];
  }
  dense_backward(t.pooled_present, p.get("dist_present.w"), 2 * L, d_dp, &d_pooled_present,
                 &g.get("dist_present.w"), &g.get("dist_present.b"));
  global_avg_pool_backward(d_pooled_present, d_h_top);

  // Temporal core, backward through time; the layer-l input gradient feeds
  // layer l-1's hidden at the same time step.
  const int T = cfg.input_len, NL = cfg.n_convlstm_layers;
  std::vector<Tensor> dl_h(NL, Tensor(F, t.hs, t.ws));
  std::vector<Tensor> dl_c(NL, Tensor(F, t.hs, t.ws));
  for (size_t j = 0; j < d_h_top.v.size(); ++j) dl_h[NL - 1].v[j] += d_h_top.v[j];
  std::vector<Tensor> d_enc_out(T, Tensor(F, t.hs, t.ws));
  for (int ti = T - 1; ti >= 0; --ti) {
    for (int l = NL - 1; l >= 0; --l) {
      const std::string name = "lstm" + std::to_string(l);
      Tensor d_x(F, t.hs, t.ws);
      Tensor d_h_prev(F, t.hs, t.ws), d_c_prev(F, t.hs, t.ws);
      convlstm_backward(t.lstm[ti][l], p.get(name + ".w"), F, dl_h[l], dl_c[l], d_x, d_h_prev,
                        d_c_prev, g.get(name + ".w"), g.get(name + ".b"));
      dl_h[l] = std::move(d_h_prev);
      dl_c[l] = std::move(d_c_prev);
      if (l == 0) {
        d_enc_out[ti] = std::move(d_x);
      } else {
        for (size_t j = 0; j < dl_h[l - 1].v.size(); ++j) dl_h[l - 1].v[j] += d_x.v[j];
      }
    }
  }
  for (int ti = 0; ti < T; ++ti)
    encoder_backward(t.enc[ti], "enc", p, g, F, D, d_enc_out[ti]);

  return breakdown;
}

LossBreakdown batch_backward(const ParamTable& params, const NetConfig& cfg,
                             const std::vector<BatchItem>& batch, const LossWeights& weights,
                             Reduction reduction, ParamTable& grads) {
  const int B = static_cast<int>(batch.size());
  if (B == 0) throw ConfigError("batch_backward: empty batch");
  std::vector<ParamTable> local(B);
  std::vector<LossBreakdown> parts(B);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < B; ++i) {
    try {
      local[i] = params.zeros_like();
      parts[i] = backward(params, cfg, batch[i].sample->inputs, batch[i].sample->targets,
                          weights, batch[i].seed, local[i]);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  const double scale = reduction == Reduction::Mean ? 1.0 / B : 1.0;
  LossBreakdown sum;
  for (int i = 0; i < B; ++i) {
    for (size_t k = 0; k < grads.values.size(); ++k) {
      Vec& dst = grads.values[k];
      const Vec& src = local[i].values[k];
      for (size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
    }
    sum.bce_now += scale * parts[i].bce_now;
    sum.bce_future += scale * parts[i].bce_future;
    sum.bce_warped += scale * parts[i].bce_warped;
    sum.flow += scale * parts[i].flow;
    sum.kl += scale * parts[i].kl;
    sum.total += scale * parts[i].total;
  }
  return sum;
}

Tensor pack_input_frame(const Frame& frame, double velocity_norm_mps) {
  const int h = frame.state.rows(), w = frame.state.cols();
  Tensor t(6, h, w);
  plane_into_tensor_channel(frame.state.p_static, t, 0);
  plane_into_tensor_channel(frame.state.p_dynamic, t, 1);
  plane_into_tensor_channel(frame.state.p_unknown, t, 2);
  const double inv = 1.0 / velocity_norm_mps;
  for (int j = 0; j < h * w; ++j) {
    t.ch(3)[j] = frame.velocity.vx.v[j] * inv;
    t.ch(4)[j] = frame.velocity.vy.v[j] * inv;
  }
  plane_into_tensor_channel(frame.semantic.p_vehicle, t, 5);
  return t;
}

PredictionBundle baseline_constant_velocity(const FrameSequence& window, int t_index,
                                            int horizon, const WarpConfig& wcfg) {
  if (t_index < 0 || t_index >= window.frame_count())
    throw ConfigError("baseline: t_index out of range");
  const Frame& latest = window.frames[t_index];
  const int H = window.geometry.height_cells, W = window.geometry.width_cells;
  const double cells_per_mps = window.dt_s / window.geometry.cell_size_m;

  PredictionBundle b;
  b.y_now.p_vehicle = latest.semantic.p_vehicle;
  Plane vx = latest.velocity.vx, vy = latest.velocity.vy;
  const Plane* w_prev = &b.y_now.p_vehicle;
  for (int k = 0; k < horizon; ++k) {
    // One-step backward flow at each destination of the advected velocity
    // field: the cell content moves by v*dt, and the flow points back.
    FlowGrid flow(H, W);
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        const double dx = vx.at(r, c) * cells_per_mps;
        const double dy = vy.at(r, c) * cells_per_mps;
        if (std::abs(dx) < 1e-12 && std::abs(dy) < 1e-12) continue;
        const int dr = static_cast<int>(std::floor(r + dy + 0.5));
        const int dc = static_cast<int>(std::floor(c + dx + 0.5));
        if (dr < 0 || dr >= H || dc < 0 || dc >= W) continue;
        flow.fx.at(dr, dc) = -dx / W;
        flow.fy.at(dr, dc) = -dy / H;
      }
    }
    SemanticGrid warped;
    warped.p_vehicle =
        kernels::warp_gather(*w_prev, flow.fx, flow.fy, wcfg.interpolation,
                             wcfg.out_of_bounds_fill, wcfg.clamp_output);
    vx = kernels::warp_gather(vx, flow.fx, flow.fy, wcfg.interpolation, 0.0, false);
    vy = kernels::warp_gather(vy, flow.fx, flow.fy, wcfg.interpolation, 0.0, false);
    b.f_future.push_back(std::move(flow));
    b.w_future.push_back(std::move(warped));
    w_prev = &b.w_future.back().p_vehicle;
  }
  b.y_future = b.w_future;
  b.dist_present.mu.assign(8, 0.0);
  b.dist_present.log_var.assign(8, 0.0);
  b.has_future_dist = false;
  return b;
}

}  // namespace gridflow::nn
