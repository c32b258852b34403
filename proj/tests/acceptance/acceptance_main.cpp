// Acceptance suite. Each criterion prints one [PASS]/[FAIL] line; the binary
// exits non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "gridflow/dataset.hpp"
#include "gridflow/gseq.hpp"
#include "gridflow/metrics.hpp"
#include "gridflow/nn/adam.hpp"
#include "gridflow/nn/checkpoint.hpp"
#include "gridflow/pipeline.hpp"
#include "gridflow/rng.hpp"
#include "gridflow/sim.hpp"
#include "gridflow/warp.hpp"

using namespace gridflow;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

using Errors = std::vector<std::string>;

void criterion(const std::string& name, double budget_s,
               const std::function<void(Errors&)>& fn) {
  Errors errs;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    fn(errs);
  } catch (const std::exception& e) {
    errs.push_back(std::string("exception: ") + e.what());
  }
  const double dt =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0.0 && dt > budget_s) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "time budget exceeded: %.1fs > %.0fs", dt, budget_s);
    errs.push_back(buf);
  }
  if (errs.empty()) {
    std::printf("[PASS] %-24s (%.1fs)\n", name.c_str(), dt);
  } else {
    ++g_failures;
    std::printf("[FAIL] %-24s (%.1fs)\n", name.c_str(), dt);
    for (const std::string& e : errs) std::printf("       - %s\n", e.c_str());
  }
  std::fflush(stdout);
}

void expect(Errors& errs, bool ok, const std::string& msg) {
  if (!ok) errs.push_back(msg);
}

// --- independent bilinear oracle, deliberately written long-hand -----------

double oracle_sample(const Plane& p, double r, double c, double fill) {
  if (r < 0.0 || c < 0.0 || r > p.rows - 1 || c > p.cols - 1) return fill;
  const int r0 = static_cast<int>(std::floor(r));
  const int c0 = static_cast<int>(std::floor(c));
  double acc = 0.0;
  for (int dr = 0; dr <= 1; ++dr)
    for (int dc = 0; dc <= 1; ++dc) {
      const int rr = std::min(r0 + dr, p.rows - 1);
      const int cc = std::min(c0 + dc, p.cols - 1);
      const double wr = dr == 0 ? 1.0 - (r - r0) : r - r0;
      const double wc = dc == 0 ? 1.0 - (c - c0) : c - c0;
      acc += wr * wc * p.at(rr, cc);
    }
  return acc;
}

Plane random_plane(int n, RandomStream& rng, double lo = 0.0, double hi = 1.0) {
  Plane p(n, n);
  for (double& v : p.v) v = rng.uniform(lo, hi);
  return p;
}

// --- criterion 1: warp vs brute-force oracle --------------------------------

void check_warp_oracle(Errors& errs) {
  RandomStream rng(2024);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const Plane src = random_plane(32, rng);
    const Plane fx = random_plane(32, rng, -0.4, 0.4);
    const Plane fy = random_plane(32, rng, -0.4, 0.4);
    const Plane got = kernels::warp_gather(src, fx, fy, kernels::Interp::Bilinear, 0.0, true);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c) {
        double want = oracle_sample(src, r + fy.at(r, c) * 32, c + fx.at(r, c) * 32, 0.0);
        want = std::min(1.0, std::max(0.0, want));
        worst = std::max(worst, std::abs(got.at(r, c) - want));
      }
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max abs diff vs oracle = %.3g > 1e-6", worst);
  expect(errs, worst <= 1e-6, buf);
}

// --- criterion 2: Eq.-1 identities ------------------------------------------

void check_eq1_identities(Errors& errs) {
  RandomStream rng(7);
  SemanticGrid w;
  w.p_vehicle = random_plane(24, rng);

  const SemanticGrid zero_out = warp(w, FlowGrid(24, 24), {});
  expect(errs, zero_out.p_vehicle.v == w.p_vehicle.v, "zero flow is not an exact fixed point");

  FlowGrid shift(24, 24);
  for (double& v : shift.fx.v) v = 2.0 / 24;
  for (double& v : shift.fy.v) v = -1.0 / 24;
  const SemanticGrid shifted = warp(w, shift, {});
  bool exact = true;
  for (int r = 1; r < 24; ++r)
    for (int c = 0; c < 22; ++c)
      exact = exact && shifted.p_vehicle.at(r, c) == w.p_vehicle.at(r - 1, c + 2);
  expect(errs, exact, "integer-cell uniform flow is not an exact shift");

  FlowGrid one(24, 24);
  for (double& v : one.fx.v) v = 1.0 / 24;
  const auto rolled = warp_rollout(w, {one, one}, {});
  FlowGrid two(24, 24);
  for (double& v : two.fx.v) v = 2.0 / 24;
  const SemanticGrid direct = warp(w, two, {});
  double worst = 0.0;
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c < 21; ++c)
      worst = std::max(worst,
                       std::abs(rolled[1].p_vehicle.at(r, c) - direct.p_vehicle.at(r, c)));
  char buf[96];
  std::snprintf(buf, sizeof(buf), "2-step rollout vs summed shift: %.3g > 1e-6", worst);
  expect(errs, worst <= 1e-6, buf);
}

// --- criterion 3: GT-flow consistency ---------------------------------------

void check_gt_flow_consistency(Errors& errs) {
  RandomStream rng(11);
  int vehicles_checked = 0;
  for (int scene = 0; scene < 25; ++scene) {
    ScenarioConfig cfg;
    cfg.seed = 900 + scene;
    cfg.n_frames = 5;
    cfg.geometry = GridGeometry{32, 32, 0.25};
    cfg.dt_s = 0.5;
    VehicleSpec v;
    v.id = 1;
    v.length_m = 2.0;
    v.width_m = 1.0;
    v.x_m = rng.uniform(-2.0, 2.0);
    v.y_m = rng.uniform(-2.0, 2.0);
    v.heading_rad = rng.uniform(-M_PI, M_PI);
    v.motion = {MotionType::ConstantVelocity, rng.uniform(0.5, 1.5), 0.0};
    cfg.vehicles.push_back(v);
    FrameSequence seq = simulate(cfg);
    ground_truth_flow(seq);
    const int H = seq.geometry.height_cells, W = seq.geometry.width_cells;
    for (int t = 0; t + 1 < seq.frame_count(); ++t) {
      if (seq.instances[t + 1].empty()) continue;  // vehicle left the grid
      const SemanticGrid warped = warp(seq.frames[t].semantic, *seq.frames[t + 1].flow, {});
      // Per-vehicle: restricted to the vehicle's GT footprint at t+1 (cells
      // the vehicle vacated keep their old value by construction of the
      // footprint-supported flow).
      for (const VehicleInstance& inst : seq.instances[t + 1]) {
        Plane pred(H, W), gt(H, W);
        for_each_cell_in_quad(inst.corners, H, W, [&](int r, int c) {
          gt.at(r, c) = 1.0;
          pred.at(r, c) = warped.p_vehicle.at(r, c);
        });
        const double vehicle_iou = iou(pred, gt);
        ++vehicles_checked;
        if (vehicle_iou < 0.8) {
          char buf[96];
          std::snprintf(buf, sizeof(buf), "scene %d step %d: per-vehicle IoU %.3f < 0.8", scene,
                        t, vehicle_iou);
          errs.push_back(buf);
          return;
        }
      }
    }
  }
  expect(errs, vehicles_checked >= 50, "too few vehicle steps checked");
}

// --- criterion 4: gradient suite --------------------------------------------

struct GradProbe {
  std::vector<double>* x;
  const std::vector<double>* analytic;
  std::string label;
};

// Central differences at eps = 1e-3 over 50 random parameters per layer.
void fd_check(Errors& errs, const std::string& label, std::vector<double>& x,
              const std::vector<double>& analytic, const std::function<double()>& loss,
              uint64_t pick_seed, int n_checks = 50) {
  RandomStream pick(pick_seed);
  const double eps = 1e-3;
  for (int t = 0; t < n_checks; ++t) {
    const size_t i = pick.uniform_index(x.size());
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = loss();
    x[i] = keep - eps;
    const double down = loss();
    x[i] = keep;
    const double fd = (up - down) / (2 * eps);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-8});
    if (std::abs(fd - analytic[i]) / denom > 1e-3) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s[%zu]: analytic %.6g vs fd %.6g", label.c_str(), i,
                    analytic[i], fd);
      errs.push_back(buf);
      return;
    }
  }
}

void check_gradient_suite(Errors& errs) {
  using namespace gridflow::nn;
  RandomStream rng(31);
  const auto rt = [&](int c, int h, int w, double a = 0.5) {
    Tensor t(c, h, w);
    for (double& v : t.v) v = rng.uniform(-a, a);
    return t;
  };
  const auto dot = [](const Tensor& a, const Tensor& b) {
    double s = 0;
    for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s;
  };

  // conv2d, stride 1 and 2
  for (int stride : {1, 2}) {
    Tensor in = rt(3, 8, 8);
    Vec wt(static_cast<size_t>(4) * 3 * 9), b(4);
    for (double& v : wt) v = rng.uniform(-0.4, 0.4);
    for (double& v : b) v = rng.uniform(-0.4, 0.4);
    const Tensor probe = rt(4, (8 + 2 - 3) / stride + 1, (8 + 2 - 3) / stride + 1, 1.0);
    const auto loss = [&] { return dot(conv2d(in, wt, b, 4, 3, stride, 1), probe); };
    Tensor d_in = Tensor::zeros_like(in);
    Vec d_w(wt.size(), 0.0), d_b(4, 0.0);
    conv2d_backward(in, wt, 4, 3, stride, 1, probe, &d_in, &d_w, &d_b);
    fd_check(errs, "conv.w s" + std::to_string(stride), wt, d_w, loss, 100 + stride);
    fd_check(errs, "conv.in s" + std::to_string(stride), in.v, d_in.v, loss, 110 + stride);
    if (!errs.empty()) return;
  }
  {  // relu (inputs kept away from the kink)
    Tensor in = rt(2, 6, 6, 1.0);
    for (double& v : in.v)
      if (std::abs(v) < 0.05) v = 0.2;
    const Tensor probe = rt(2, 6, 6, 1.0);
    const auto loss = [&] { return dot(relu(in), probe); };
    Tensor d_in = Tensor::zeros_like(in);
    relu_backward(in, probe, d_in);
    fd_check(errs, "relu.in", in.v, d_in.v, loss, 120);
    if (!errs.empty()) return;
  }
  {  // dense
    Vec x(9), wt(static_cast<size_t>(5) * 9), b(5), probe(5);
    for (double& v : x) v = rng.uniform(-1, 1);
    for (double& v : wt) v = rng.uniform(-1, 1);
    for (double& v : b) v = rng.uniform(-1, 1);
    for (double& v : probe) v = rng.uniform(-1, 1);
    const auto loss = [&] {
      const Vec out = dense(x, wt, b, 5);
      double s = 0;
      for (int i = 0; i < 5; ++i) s += out[i] * probe[i];
      return s;
    };
    Vec d_x(9, 0.0), d_w(wt.size(), 0.0), d_b(5, 0.0);
    dense_backward(x, wt, 5, probe, &d_x, &d_w, &d_b);
    fd_check(errs, "dense.w", wt, d_w, loss, 130);
    fd_check(errs, "dense.x", x, d_x, loss, 131, 9);
    if (!errs.empty()) return;
  }
  {  // pooling and upsample and latent broadcast
    Tensor in = rt(4, 6, 6);
    Vec probe(4);
    for (double& v : probe) v = rng.uniform(-1, 1);
    const auto loss = [&] {
      const Vec p = global_avg_pool(in);
      double s = 0;
      for (int i = 0; i < 4; ++i) s += p[i] * probe[i];
      return s;
    };
    Tensor d_in = Tensor::zeros_like(in);
    global_avg_pool_backward(probe, d_in);
    fd_check(errs, "pool.in", in.v, d_in.v, loss, 140);

    Tensor u_in = rt(3, 4, 4);
    const Tensor u_probe = rt(3, 8, 8, 1.0);
    const auto u_loss = [&] { return dot(upsample2_nearest(u_in), u_probe); };
    Tensor d_u = Tensor::zeros_like(u_in);
    upsample2_nearest_backward(u_probe, d_u);
    fd_check(errs, "upsample.in", u_in.v, d_u.v, u_loss, 141);

    Vec z(6);
    for (double& v : z) v = rng.uniform(-1, 1);
    const Tensor z_probe = rt(6, 5, 5, 1.0);
    const auto z_loss = [&] { return dot(broadcast_latent(z, 5, 5), z_probe); };
    Vec d_z(6, 0.0);
    broadcast_latent_backward(z_probe, d_z);
    fd_check(errs, "broadcast.z", z, d_z, z_loss, 142, 6);
    if (!errs.empty()) return;
  }
  {  // convlstm cell
    const int F = 4;
    Tensor x = rt(3, 5, 5), h0(F, 5, 5), c0(F, 5, 5);
    Vec wt(static_cast<size_t>(4 * F) * (3 + F) * 9), b(4 * F);
    for (double& v : wt) v = rng.uniform(-0.3, 0.3);
    for (double& v : b) v = rng.uniform(-0.3, 0.3);
    const Tensor probe = rt(F, 5, 5, 1.0);
    const auto loss = [&] {
      ConvLstmCache cache;
      Tensor h, c;
      convlstm_forward(x, h0, c0, wt, b, F, cache, h, c);
      return dot(h, probe);
    };
    ConvLstmCache cache;
    Tensor h, c;
    convlstm_forward(x, h0, c0, wt, b, F, cache, h, c);
    Vec d_w(wt.size(), 0.0), d_b(b.size(), 0.0);
    Tensor d_x(3, 5, 5), d_h(F, 5, 5), d_c(F, 5, 5);
    convlstm_backward(cache, wt, F, probe, Tensor(F, 5, 5), d_x, d_h, d_c, d_w, d_b);
    fd_check(errs, "convlstm.w", wt, d_w, loss, 150);
    fd_check(errs, "convlstm.x", x.v, d_x.v, loss, 151);
    if (!errs.empty()) return;
  }
  {  // convgru cell
    const int F = 4;
    Tensor x = rt(3, 5, 5), h0 = rt(F, 5, 5);
    Vec wzr(static_cast<size_t>(2 * F) * (3 + F) * 9), bzr(2 * F);
    Vec wh(static_cast<size_t>(F) * (3 + F) * 9), bh(F);
    for (double& v : wzr) v = rng.uniform(-0.3, 0.3);
    for (double& v : bzr) v = rng.uniform(-0.3, 0.3);
    for (double& v : wh) v = rng.uniform(-0.3, 0.3);
    for (double& v : bh) v = rng.uniform(-0.3, 0.3);
    const Tensor probe = rt(F, 5, 5, 1.0);
    const auto loss = [&] {
      ConvGruCache cache;
      Tensor h;
      convgru_forward(x, h0, wzr, bzr, wh, bh, F, cache, h);
      return dot(h, probe);
    };
    ConvGruCache cache;
    Tensor h;
    convgru_forward(x, h0, wzr, bzr, wh, bh, F, cache, h);
    Tensor d_x(3, 5, 5), d_h(F, 5, 5);
    Vec d_wzr(wzr.size(), 0.0), d_bzr(bzr.size(), 0.0), d_wh(wh.size(), 0.0), d_bh(bh.size(), 0.0);
    convgru_backward(cache, wzr, wh, F, probe, d_x, d_h, d_wzr, d_bzr, d_wh, d_bh);
    fd_check(errs, "convgru.wzr", wzr, d_wzr, loss, 160);
    fd_check(errs, "convgru.wh", wh, d_wh, loss, 161);
    fd_check(errs, "convgru.h", h0.v, d_h.v, loss, 162);
    if (!errs.empty()) return;
  }
  {  // warp with respect to both the grid and the flow
    Plane src = random_plane(9, rng, 0.1, 0.9);
    Plane fx = random_plane(9, rng, -0.1, 0.1);
    Plane fy = random_plane(9, rng, -0.1, 0.1);
    Plane probe = random_plane(9, rng, -1.0, 1.0);
    const auto loss = [&] {
      const Plane out = kernels::warp_gather(src, fx, fy, kernels::Interp::Bilinear, 0.0, true);
      double s = 0;
      for (size_t i = 0; i < out.v.size(); ++i) s += out.v[i] * probe.v[i];
      return s;
    };
    Plane d_src(9, 9), d_fx(9, 9), d_fy(9, 9);
    kernels::warp_gather_backward(src, fx, fy, 0.0, true, probe, d_src, d_fx, d_fy);
    fd_check(errs, "warp.src", src.v, d_src.v, loss, 170);
    fd_check(errs, "warp.fx", fx.v, d_fx.v, loss, 171);
    fd_check(errs, "warp.fy", fy.v, d_fy.v, loss, 172);
    if (!errs.empty()) return;
  }
  {  // loss terms: bce, masked L1, kl (through their backward functions)
    Plane pred = random_plane(6, rng, 0.05, 0.95);
    Plane target(6, 6);
    for (double& v : target.v) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    const auto bce_loss = [&] { return bce(pred, target, 5.0); };
    Plane d_pred(6, 6);
    bce_backward(pred, target, 5.0, 1.0, d_pred);
    fd_check(errs, "bce.pred", pred.v, d_pred.v, bce_loss, 180);

    FlowGrid fp(6, 6), ft(6, 6);
    fp.fx = random_plane(6, rng, -0.5, 0.5);
    fp.fy = random_plane(6, rng, -0.5, 0.5);
    ft.fx = random_plane(6, rng, -0.5, 0.5);
    ft.fy = random_plane(6, rng, -0.5, 0.5);
    Plane mask(6, 6);
    for (double& v : mask.v) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    const auto l1_loss = [&] { return flow_l1(fp, ft, mask); };
    FlowGrid d_fp(6, 6);
    flow_l1_backward(fp, ft, mask, 1.0, d_fp);
    fd_check(errs, "flow_l1.fx", fp.fx.v, d_fp.fx.v, l1_loss, 181, 20);

    LatentDistribution q, p;
    for (int i = 0; i < 6; ++i) {
      q.mu.push_back(rng.uniform(-1, 1));
      q.log_var.push_back(rng.uniform(-1, 1));
      p.mu.push_back(rng.uniform(-1, 1));
      p.log_var.push_back(rng.uniform(-1, 1));
    }
    const auto kl_loss = [&] { return kl_diag_gaussian(q, p); };
    std::vector<double> dmq(6, 0), dlq(6, 0), dmp(6, 0), dlp(6, 0);
    kl_diag_gaussian_backward(q, p, 1.0, dmq, dlq, dmp, dlp);
    fd_check(errs, "kl.mu_q", q.mu, dmq, kl_loss, 182, 6);
    fd_check(errs, "kl.lv_p", p.log_var, dlp, kl_loss, 183, 6);
    if (!errs.empty()) return;
  }

  // Full composite loss through warp_rollout on a 12x12 configuration,
  // including the reparameterized latent sample.
  NetConfig cfg;
  cfg.base_features = 6;
  cfg.n_convlstm_layers = 2;
  cfg.latent_dim = 4;
  cfg.horizon = 2;
  cfg.input_len = 2;
  cfg.downsample = 4;
  ParamTable params = init_params(cfg, 55);
  std::vector<Tensor> inputs;
  for (int i = 0; i < cfg.input_len; ++i) {
    Tensor t(6, 12, 12);
    for (double& v : t.v) v = rng.uniform(0.0, 1.0);
    inputs.push_back(std::move(t));
  }
  TargetBundle targets;
  targets.y_now = Plane(12, 12);
  for (double& v : targets.y_now.v) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
  for (int k = 0; k < cfg.horizon; ++k) {
    Plane y(12, 12);
    for (double& v : y.v) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
    if (y.sum() == 0.0) y.at(6, 6) = 1.0;
    targets.y_future.push_back(y);
    FlowGrid f(12, 12);
    for (double& v : f.fx.v) v = rng.uniform(-0.1, 0.1);
    for (double& v : f.fy.v) v = rng.uniform(-0.1, 0.1);
    targets.flow_future.push_back(std::move(f));
    targets.mask_future.push_back(targets.y_future.back());
  }
  const LossWeights weights;
  const uint64_t seed = 99;
  ParamTable grads = params.zeros_like();
  backward(params, cfg, inputs, targets, weights, seed, grads);

  const auto full_loss = [&] {
    const PredictionBundle b =
        forward(params, cfg, inputs, ForwardMode::Train, seed, &targets);
    return total_loss(b, targets, weights).total;
  };
  RandomStream pick(190);
  const double eps = 1e-3;
  for (int t = 0; t < 50; ++t) {
    const size_t pi = pick.uniform_index(params.count());
    const size_t j = pick.uniform_index(params.values[pi].size());
    double& slot = params.values[pi][j];
    const double keep = slot;
    slot = keep + eps;
    const double up = full_loss();
    slot = keep - eps;
    const double down = full_loss();
    slot = keep;
    const double fd = (up - down) / (2 * eps);
    const double analytic = grads.values[pi][j];
    const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-8});
    if (std::abs(fd - analytic) / denom > 1e-3) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "composite %s[%zu]: analytic %.6g vs fd %.6g",
                    params.names[pi].c_str(), j, analytic, fd);
      errs.push_back(buf);
      return;
    }
  }
}

// --- criterion 5: loss closed forms -----------------------------------------

void check_loss_closed_forms(Errors& errs) {
  Plane p1(1, 1, 0.5), y1(1, 1, 1.0), y0(1, 1, 0.0);
  expect(errs, std::abs(bce(p1, y1, 5.0) - 5.0 * std::log(2.0)) <= 1e-9,
         "bce(y=1, p=0.5, w=5) != 5 ln 2");
  expect(errs, std::abs(bce(p1, y0, 5.0) - std::log(2.0)) <= 1e-9,
         "bce(y=0, p=0.5) != ln 2");

  LatentDistribution q, p;
  q.mu = {1.0};
  q.log_var = {0.0};
  p.mu = {0.0};
  p.log_var = {0.0};
  expect(errs, std::abs(kl_diag_gaussian(q, p) - 0.5) <= 1e-9,
         "KL(N(1,1) || N(0,1)) != 0.5");

  FlowGrid fp(2, 1), ft(2, 1);
  Plane mask(2, 1, 1.0);
  fp.fx.v = {0.1, 0.0};
  fp.fy.v = {0.0, 0.3};
  expect(errs, std::abs(flow_l1(fp, ft, mask) - 0.2) <= 1e-12, "masked L1 hand case != 0.2");
}

// --- criterion 6: metric oracles --------------------------------------------

double brute_force_pr_auc(const Plane& pred, const Plane& target) {
  size_t total_pos = 0;
  for (double y : target.v) total_pos += y > 0.5;
  std::vector<std::pair<double, double>> pts;
  for (int i = 99; i >= 0; --i) {
    const double tau = i / 100.0;
    size_t tp = 0, pp = 0;
    for (size_t j = 0; j < pred.v.size(); ++j)
      if (pred.v[j] >= tau) {
        ++pp;
        tp += target.v[j] > 0.5;
      }
    const double precision = pp > 0 ? static_cast<double>(tp) / pp : 1.0;
    const double recall = static_cast<double>(tp) / total_pos;
    if (pts.empty()) pts.emplace_back(0.0, precision);
    pts.emplace_back(recall, precision);
  }
  double area = 0.0;
  for (size_t j = 0; j + 1 < pts.size(); ++j)
    area += (pts[j + 1].first - pts[j].first) * 0.5 * (pts[j].second + pts[j + 1].second);
  return area;
}

void check_metric_oracles(Errors& errs) {
  RandomStream rng(41);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    Plane pred = random_plane(8, rng);
    Plane target(8, 8);
    for (double& v : target.v) v = rng.uniform() < 0.35 ? 1.0 : 0.0;
    if (target.sum() == 0.0) target.v[static_cast<size_t>(rng.uniform_index(64))] = 1.0;
    const auto got = pr_auc(pred, target, 100);
    if (!got) {
      errs.push_back("pr_auc unexpectedly skipped");
      return;
    }
    worst = std::max(worst, std::abs(*got - brute_force_pr_auc(pred, target)));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "pr_auc vs brute force: max diff %.3g > 1e-9", worst);
  expect(errs, worst <= 1e-9, buf);

  Plane a(3, 3), b(3, 3);
  a.v = {1, 1, 1, 1, 0, 0, 0, 0, 0};
  b.v = {0, 0, 1, 1, 1, 1, 0, 0, 0};
  expect(errs, iou(a, a) == 1.0, "iou(x,x) != 1");
  expect(errs, std::abs(iou(a, b) - 2.0 / 6.0) <= 1e-15, "iou hand case != 1/3");
  expect(errs, iou(Plane(3, 3), b) == 0.0, "iou(empty, x) != 0");
  expect(errs, iou(Plane(3, 3), Plane(3, 3)) == 1.0, "iou(empty, empty) != 1");

  // Retention boundary: 9 qualifying cells lose the vehicle, 10 keep it.
  ScenarioConfig cfg;
  cfg.seed = 1;
  cfg.n_frames = 3;
  cfg.geometry = GridGeometry{24, 24, 0.25};
  cfg.ego.y_m = -2.0;
  VehicleSpec v;
  v.id = 1;
  v.length_m = 2.0;
  v.width_m = 1.0;
  v.motion = {MotionType::Parked, 0.0, 0.0};
  cfg.vehicles.push_back(v);
  const FrameSequence seq = simulate(cfg);
  std::vector<std::pair<int, int>> cells;
  for_each_cell_in_quad(seq.instances[1][0].corners, 24, 24,
                        [&](int r, int c) { cells.emplace_back(r, c); });
  const auto run_with = [&](int qualifying) {
    std::vector<Plane> preds(2, Plane(24, 24));
    for (Plane& pr : preds)
      for (int i = 0; i < qualifying; ++i) pr.at(cells[i].first, cells[i].second) = 0.9;
    RetentionCounts counts;
    retention(preds, seq, 0, {}, counts);
    return counts.static_retained;
  };
  expect(errs, run_with(9) == 0, "9 qualifying cells should lose the vehicle");
  expect(errs, run_with(10) == 1, "10 qualifying cells should retain the vehicle");
}

// --- criteria 7/8/9: desk-scale corpus, baseline, determinism ---------------

BatchSpec desk_spec(uint64_t seed) {
  BatchSpec spec;
  spec.seed = seed;
  spec.n_frames = 7;  // exactly one 3+4 window per scene
  spec.geometry = GridGeometry{24, 24, 0.25};
  spec.dt_s = 0.5;
  spec.v_max_mps = 5.0;
  spec.vehicles_min = 1;
  spec.vehicles_max = 4;
  spec.speed_min_mps = 0.5;
  spec.speed_max_mps = 1.5;
  spec.turn_fraction = 0.3;
  spec.parked_fraction = 0.25;
  spec.max_yaw_rate_rps = 0.3;
  spec.obstacles_max = 1;
  spec.vehicle_length_m = 2.0;
  spec.vehicle_width_m = 1.0;
  spec.noise.state_flip_prob = 0.02;
  spec.noise.velocity_sigma_mps = 0.05;
  return spec;
}

std::vector<Window> desk_windows(const BatchSpec& spec, int count) {
  const WindowSpec ws{3, 4, 1, 5.0, kernels::Interp::Bilinear};
  std::vector<Window> out;
  for (int i = 0; i < count; ++i) {
    const FrameSequence seq = simulate(random_scenario(spec, i));
    auto ws_i = make_windows(seq, ws);
    for (Window& w : ws_i) out.push_back(std::move(w));
  }
  return out;
}

bool window_has_dynamic(const Window& w) {
  for (const VehicleInstance& inst : w.gt.instances[w.t_index])
    if (inst.dynamic) return true;
  return false;
}

// Mean IoU of the persistence predictor (current GT grid held constant).
double persistence_mean_iou(const std::vector<const Window*>& windows) {
  double acc = 0.0;
  int n = 0;
  for (const Window* w : windows) {
    const Plane& current = w->gt.frames[w->t_index].semantic.p_vehicle;
    for (int k = 1; k <= 4; ++k) {
      acc += iou(current, w->gt.frames[w->t_index + k].semantic.p_vehicle);
      ++n;
    }
  }
  return acc / n;
}

void check_desk_scale_learning(Errors& errs) {
  using namespace gridflow::nn;
  const auto train_windows = desk_windows(desk_spec(101), 200);
  const auto val_windows = desk_windows(desk_spec(202), 50);
  char buf[200];

  std::vector<TrainSample> train_set;
  for (const Window& w : train_windows) train_set.push_back(w.sample);

  const NetConfig net;       // toy defaults
  const AdamConfig optim;    // lr 3e-4, weight decay 1e-7
  const LossWeights weights; // paper lambdas
  ParamTable params = init_params(net, 404);
  const TrainResult result = train(params, net, train_set, optim, weights, {30, 8, 404});

  const double first = result.epoch_mean_loss.front();
  const double last = result.epoch_mean_loss.back();
  std::snprintf(buf, sizeof(buf), "training loss reduced only %.1f%% (%.4f -> %.4f)",
                100.0 * (1.0 - last / first), first, last);
  expect(errs, last <= 0.5 * first, buf);

  // Validation with the mean-mode model on dynamic scenes.
  std::vector<const Window*> dynamic_windows;
  for (const Window& w : val_windows)
    if (window_has_dynamic(w)) dynamic_windows.push_back(&w);
  if (dynamic_windows.size() < 10) {
    errs.push_back("too few dynamic validation windows");
    return;
  }

  double model_iou = 0.0;
  int n_iou = 0;
  RetentionCounts model_ret, persist_ret;
  for (const Window* w : dynamic_windows) {
    const PredictionBundle b = forward(params, net, w->sample.inputs, ForwardMode::Mean, 0);
    std::vector<Plane> w_pred;
    for (int k = 1; k <= 4; ++k) {
      model_iou += iou(b.w_future[k - 1].p_vehicle,
                       w->gt.frames[w->t_index + k].semantic.p_vehicle);
      ++n_iou;
      w_pred.push_back(b.w_future[k - 1].p_vehicle);
    }
    retention(w_pred, w->gt, w->t_index, {}, model_ret);
    const std::vector<Plane> persist(4, w->gt.frames[w->t_index].semantic.p_vehicle);
    retention(persist, w->gt, w->t_index, {}, persist_ret);
  }
  model_iou /= n_iou;
  const double persist_iou = persistence_mean_iou(dynamic_windows);
  std::snprintf(buf, sizeof(buf), "warped IoU %.4f does not beat persistence %.4f", model_iou,
                persist_iou);
  expect(errs, model_iou > persist_iou, buf);

  std::snprintf(buf, sizeof(buf), "dynamic retention %d/%d below persistence %d/%d",
                model_ret.dynamic_retained, model_ret.dynamic_total,
                persist_ret.dynamic_retained, persist_ret.dynamic_total);
  expect(errs, model_ret.dynamic_rate() >= persist_ret.dynamic_rate(), buf);
}

void check_baseline_sanity(Errors& errs) {
  RandomStream rng(61);
  for (int scene = 0; scene < 10; ++scene) {
    ScenarioConfig cfg;
    cfg.seed = 700 + scene;
    cfg.n_frames = 7;
    cfg.geometry = GridGeometry{32, 32, 0.25};
    cfg.dt_s = 0.5;
    VehicleSpec v;
    v.id = 1;
    v.length_m = 2.0;
    v.width_m = 1.0;
    v.x_m = rng.uniform(-1.5, 0.0);
    v.y_m = rng.uniform(-1.5, 1.5);
    v.heading_rad = rng.uniform(-0.4, 0.4);
    v.motion = {MotionType::ConstantVelocity, rng.uniform(0.5, 1.2), 0.0};
    cfg.vehicles.push_back(v);
    const FrameSequence seq = simulate(cfg);
    const int t = 2;
    const auto b = nn::baseline_constant_velocity(seq, t, 4);
    for (int k = 1; k <= 4; ++k) {
      if (seq.instances[t + k].empty()) continue;
      const double step_iou =
          iou(b.w_future[k - 1].p_vehicle, seq.frames[t + k].semantic.p_vehicle);
      if (step_iou < 0.8) {
        char buf[120];
        std::snprintf(buf, sizeof(buf), "scene %d step %d: baseline IoU %.3f < 0.8", scene, k,
                      step_iou);
        errs.push_back(buf);
        return;
      }
    }
  }
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

// Small run config for the determinism criterion.
void write_run_config(const fs::path& dir) {
  const std::string cfg = R"({
    "data": {"train": [")" + (dir / "data" / "train").string() + R"("],
             "val": [")" + (dir / "data" / "val").string() + R"("]},
    "net": {"base_features": 8, "n_convlstm_layers": 1, "latent_dim": 4,
            "horizon": 4, "input_len": 3, "downsample": 4},
    "optim": {"lr": 0.0003, "weight_decay": 1e-7},
    "train": {"epochs": 3, "batch_size": 4, "seed": 12}
  })";
  std::ofstream(dir / "run.json") << cfg;
}

void check_determinism(Errors& errs) {
  const fs::path root = fs::temp_directory_path() / "gridflow_acceptance_det";
  fs::remove_all(root);
  fs::create_directories(root);

  const std::string batch_cfg = R"({"batch": {
    "count": 10, "seed": 8,
    "n_frames": 7,
    "geometry": {"width_cells": 24, "height_cells": 24, "cell_size_m": 0.25},
    "vehicles_min": 1, "vehicles_max": 2,
    "vehicle_length_m": 2.0, "vehicle_width_m": 1.0,
    "speed_min_mps": 0.5, "speed_max_mps": 1.2,
    "noise": {"state_flip_prob": 0.01, "velocity_sigma_mps": 0.05},
    "train_fraction": 0.8
  }})";

  const auto run_pipeline = [&](const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream(dir / "batch.json") << batch_cfg;
    GenOptions gopt;
    gopt.config_path = (dir / "batch.json").string();
    gopt.out_path = (dir / "data").string();
    cmd_gen(gopt);

    write_run_config(dir);
    TrainOptions topt;
    topt.config_path = (dir / "run.json").string();
    topt.out_dir = (dir / "run").string();
    cmd_train(topt);

    EvalOptions eopt;
    eopt.checkpoint = (dir / "run" / "checkpoint.ckpt").string();
    eopt.data = {(dir / "data" / "val").string()};
    eopt.report_path = (dir / "eval_report.json").string();
    cmd_eval(eopt);
  };

  run_pipeline(root / "a");
  run_pipeline(root / "b");

  for (const char* f :
       {"run/report.json", "run/loss.csv", "run/train_summary.json", "eval_report.json"}) {
    const std::string a = slurp(root / "a" / f);
    const std::string b = slurp(root / "b" / f);
    if (a.empty() || a != b) {
      errs.push_back(std::string("pipeline artifact differs between runs: ") + f);
      return;
    }
  }
}

}  // namespace

int main() {
  kernels::configure_threads_from_env();
  criterion("warp-oracle", 10.0, check_warp_oracle);
  criterion("eq1-identities", 0.0, check_eq1_identities);
  criterion("gt-flow-consistency", 30.0, check_gt_flow_consistency);
  criterion("gradient-suite", 120.0, check_gradient_suite);
  criterion("loss-closed-forms", 0.0, check_loss_closed_forms);
  criterion("metric-oracles", 0.0, check_metric_oracles);
  criterion("desk-scale-learning", 900.0, check_desk_scale_learning);
  criterion("baseline-sanity", 0.0, check_baseline_sanity);
  criterion("determinism", 0.0, check_determinism);
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
