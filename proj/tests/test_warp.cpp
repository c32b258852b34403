#include <doctest.h>

#include "gridflow/warp.hpp"
#include "test_util.hpp"

using namespace gridflow;
using testutil::random_plane;

namespace {

SemanticGrid make_sem(const Plane& p) {
  SemanticGrid g;
  g.p_vehicle = p;
  return g;
}

FlowGrid uniform_flow(int rows, int cols, double cells_x, double cells_y) {
  FlowGrid f(rows, cols);
  for (double& v : f.fx.v) v = cells_x / cols;
  for (double& v : f.fy.v) v = cells_y / rows;
  return f;
}

}  // namespace

TEST_CASE("zero flow is an exact fixed point") {
  RandomStream rng(1);
  const SemanticGrid w = make_sem(random_plane(20, 20, rng));
  const FlowGrid f(20, 20);
  const SemanticGrid out = warp(w, f, {});
  CHECK(testutil::bit_equal(out.p_vehicle, w.p_vehicle));
}

TEST_CASE("uniform one-cell flow pulls the spike left") {
  Plane p(12, 12);
  p.at(5, 5) = 1.0;
  const SemanticGrid out = warp(make_sem(p), uniform_flow(12, 12, 1.0, 0.0), {});
  CHECK(out.p_vehicle.at(5, 4) == 1.0);
  CHECK(out.p_vehicle.at(5, 5) == 0.0);
}

TEST_CASE("flow pointing fully off-grid yields the fill value") {
  RandomStream rng(2);
  const SemanticGrid w = make_sem(random_plane(10, 10, rng));
  WarpConfig cfg;
  cfg.out_of_bounds_fill = 0.75;
  const SemanticGrid out = warp(w, uniform_flow(10, 10, 50.0, 0.0), cfg);
  for (double v : out.p_vehicle.v) CHECK(v == 0.75);
}

TEST_CASE("integer-cell uniform flows shift exactly") {
  RandomStream rng(3);
  const Plane src = random_plane(16, 16, rng);
  const SemanticGrid out = warp(make_sem(src), uniform_flow(16, 16, 3.0, -2.0), {});
  for (int r = 2; r < 16; ++r)
    for (int c = 0; c < 13; ++c) CHECK(out.p_vehicle.at(r, c) == src.at(r - 2, c + 3));
}

TEST_CASE("geometry mismatch throws") {
  const SemanticGrid w = make_sem(Plane(8, 8));
  const FlowGrid f(9, 8);
  CHECK_THROWS_AS(warp(w, f, {}), ConfigError);
}

TEST_CASE("two-step rollout of uniform flows equals the summed shift inside") {
  RandomStream rng(4);
  const SemanticGrid w0 = make_sem(random_plane(24, 24, rng));
  const FlowGrid step = uniform_flow(24, 24, 1.0, 0.0);
  const auto rolled = warp_rollout(w0, {step, step}, {});
  const SemanticGrid direct = warp(w0, uniform_flow(24, 24, 2.0, 0.0), {});
  // Interior cells: the two routes may differ where fill enters from the edge.
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c < 21; ++c)
      CHECK(std::abs(rolled[1].p_vehicle.at(r, c) - direct.p_vehicle.at(r, c)) <= 1e-6);
}

TEST_CASE("all-zero flows keep every rollout step at w0") {
  RandomStream rng(5);
  const SemanticGrid w0 = make_sem(random_plane(14, 14, rng));
  const std::vector<FlowGrid> flows(4, FlowGrid(14, 14));
  const auto rolled = warp_rollout(w0, flows, {});
  REQUIRE(rolled.size() == 4);
  for (const SemanticGrid& g : rolled) CHECK(testutil::bit_equal(g.p_vehicle, w0.p_vehicle));
}

TEST_CASE("empty flow list yields empty rollout") {
  const SemanticGrid w0 = make_sem(Plane(6, 6));
  CHECK(warp_rollout(w0, {}, {}).empty());
}

TEST_CASE("rollout equals the step-by-step manual loop") {
  RandomStream rng(6);
  const SemanticGrid w0 = make_sem(random_plane(18, 18, rng));
  std::vector<FlowGrid> flows;
  for (int k = 0; k < 4; ++k) {
    FlowGrid f(18, 18);
    for (double& v : f.fx.v) v = rng.uniform(-0.08, 0.08);
    for (double& v : f.fy.v) v = rng.uniform(-0.08, 0.08);
    flows.push_back(std::move(f));
  }
  const auto rolled = warp_rollout(w0, flows, {});
  SemanticGrid cur = w0;
  for (int k = 0; k < 4; ++k) {
    cur = warp(cur, flows[k], {});
    CHECK(testutil::bit_equal(rolled[k].p_vehicle, cur.p_vehicle));
  }
}

TEST_CASE("clamped outputs stay in [0,1] for wild flows") {
  RandomStream rng(7);
  const SemanticGrid w0 = make_sem(random_plane(15, 15, rng));
  FlowGrid f(15, 15);
  for (double& v : f.fx.v) v = rng.uniform(-1.0, 1.0);
  for (double& v : f.fy.v) v = rng.uniform(-1.0, 1.0);
  const SemanticGrid out = warp(w0, f, {});
  for (double v : out.p_vehicle.v) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("mass is preserved for in-bounds uniform flows and bounded otherwise") {
  RandomStream rng(8);
  Plane p(20, 20);
  // Interior blob only, so a small uniform shift keeps everything in view.
  for (int r = 7; r < 13; ++r)
    for (int c = 7; c < 13; ++c) p.at(r, c) = rng.uniform(0.2, 1.0);
  const double mass0 = p.sum();
  const SemanticGrid shifted = warp(make_sem(p), uniform_flow(20, 20, 1.5, -0.75), {});
  CHECK(std::abs(shifted.p_vehicle.sum() - mass0) <= 1e-5);

  WarpConfig cfg;
  cfg.out_of_bounds_fill = 0.5;
  const SemanticGrid far = warp(make_sem(p), uniform_flow(20, 20, 18.0, 0.0), cfg);
  CHECK(far.p_vehicle.sum() <= mass0 + 0.5 * 400 + 1e-9);
}

TEST_CASE("warp matches the brute-force oracle on random pairs") {
  RandomStream rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    const Plane src = random_plane(32, 32, rng);
    Plane fx(32, 32), fy(32, 32);
    for (double& v : fx.v) v = rng.uniform(-0.3, 0.3);
    for (double& v : fy.v) v = rng.uniform(-0.3, 0.3);
    FlowGrid f;
    f.fx = fx;
    f.fy = fy;
    const SemanticGrid out = warp(make_sem(src), f, {});
    const Plane want = testutil::oracle_warp(src, fx, fy, 0.0, true);
    CHECK(testutil::max_abs_diff(out.p_vehicle, want) <= 1e-6);
  }
}

TEST_CASE("warp backward matches central finite differences") {
  RandomStream rng(10);
  const int n = 9;
  const Plane src = random_plane(n, n, rng, 0.05, 0.95);
  Plane fx(n, n), fy(n, n);
  for (double& v : fx.v) v = rng.uniform(-0.12, 0.12);
  for (double& v : fy.v) v = rng.uniform(-0.12, 0.12);
  Plane upstream = random_plane(n, n, rng, -1.0, 1.0);

  const auto loss = [&](const Plane& s, const Plane& gx, const Plane& gy) {
    const Plane out = kernels::warp_gather(s, gx, gy, kernels::Interp::Bilinear, 0.0, true);
    double acc = 0.0;
    for (size_t i = 0; i < out.v.size(); ++i) acc += out.v[i] * upstream.v[i];
    return acc;
  };

  Plane d_src(n, n), d_fx(n, n), d_fy(n, n);
  kernels::warp_gather_backward(src, fx, fy, 0.0, true, upstream, d_src, d_fx, d_fy);

  const double eps = 1e-6;
  RandomStream pick(11);
  for (int trial = 0; trial < 40; ++trial) {
    const size_t idx = pick.uniform_index(src.v.size());
    Plane s2 = src;
    s2.v[idx] += eps;
    Plane s3 = src;
    s3.v[idx] -= eps;
    const double fd = (loss(s2, fx, fy) - loss(s3, fx, fy)) / (2 * eps);
    CHECK(d_src.v[idx] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));

    Plane fx2 = fx, fx3 = fx;
    fx2.v[idx] += eps;
    fx3.v[idx] -= eps;
    const double fdx = (loss(src, fx2, fy) - loss(src, fx3, fy)) / (2 * eps);
    CHECK(d_fx.v[idx] == doctest::Approx(fdx).epsilon(1e-4).scale(1.0));

    Plane fy2 = fy, fy3 = fy;
    fy2.v[idx] += eps;
    fy3.v[idx] -= eps;
    const double fdy = (loss(src, fx, fy2) - loss(src, fx, fy3)) / (2 * eps);
    CHECK(d_fy.v[idx] == doctest::Approx(fdy).epsilon(1e-4).scale(1.0));
  }
}
