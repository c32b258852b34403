// Times the OpenMP kernels against their serial references on representative
// grid sizes and prints the speedup table.

#include <chrono>
#include <cstdio>
#include <functional>

#include "gridflow/kernels.hpp"
#include "gridflow/rng.hpp"

using namespace gridflow;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

Plane random_plane(int rows, int cols, RandomStream& rng, double lo = 0.0, double hi = 1.0) {
  Plane p(rows, cols);
  for (double& v : p.v) v = rng.uniform(lo, hi);
  return p;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-22s serial %8.3f ms   omp %8.3f ms   speedup %.2fx\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
  kernels::configure_threads_from_env();
  std::printf("threads: %d\n", kernels::active_max_threads());
  RandomStream rng(7);

  {
    const int n = 240;
    const Plane src = random_plane(n, n, rng);
    Plane rows(n, n), cols(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        rows.at(r, c) = r + rng.uniform(-3.0, 3.0);
        cols.at(r, c) = c + rng.uniform(-3.0, 3.0);
      }
    report("resample_bilinear 240", time_ms([&] { kernels::serial::resample_bilinear(src, rows, cols, 0.0); }, 50),
           time_ms([&] { kernels::resample_bilinear(src, rows, cols, 0.0); }, 50));
  }
  {
    const int n = 240;
    const Plane src = random_plane(n, n, rng);
    const Plane fx = random_plane(n, n, rng, -0.05, 0.05);
    const Plane fy = random_plane(n, n, rng, -0.05, 0.05);
    report("warp_gather 240", time_ms([&] { kernels::serial::warp_gather(src, fx, fy, kernels::Interp::Bilinear, 0.0, true); }, 50),
           time_ms([&] { kernels::warp_gather(src, fx, fy, kernels::Interp::Bilinear, 0.0, true); }, 50));
  }
  {
    const int ic = 32, oc = 32, n = 60, k = 3;
    std::vector<double> in(static_cast<size_t>(ic) * n * n), w(static_cast<size_t>(oc) * ic * k * k), b(oc);
    for (double& x : in) x = rng.uniform(-1, 1);
    for (double& x : w) x = rng.uniform(-0.2, 0.2);
    std::vector<double> out(static_cast<size_t>(oc) * n * n);
    report("conv2d_fwd 32x60x60", time_ms([&] { kernels::serial::conv2d_fwd(in.data(), ic, n, n, w.data(), b.data(), oc, k, 1, 1, out.data(), n, n); }, 10),
           time_ms([&] { kernels::conv2d_fwd(in.data(), ic, n, n, w.data(), b.data(), oc, k, 1, 1, out.data(), n, n); }, 10));

    std::vector<double> d_in(in.size()), d_w(w.size()), d_b(b.size());
    report("conv2d_bwd_input", time_ms([&] { std::fill(d_in.begin(), d_in.end(), 0.0); kernels::serial::conv2d_bwd_input(out.data(), oc, n, n, w.data(), ic, n, n, k, 1, 1, d_in.data()); }, 10),
           time_ms([&] { std::fill(d_in.begin(), d_in.end(), 0.0); kernels::conv2d_bwd_input(out.data(), oc, n, n, w.data(), ic, n, n, k, 1, 1, d_in.data()); }, 10));
    report("conv2d_bwd_weights", time_ms([&] { std::fill(d_w.begin(), d_w.end(), 0.0); kernels::serial::conv2d_bwd_weights(in.data(), ic, n, n, out.data(), oc, n, n, k, 1, 1, d_w.data(), d_b.data()); }, 10),
           time_ms([&] { std::fill(d_w.begin(), d_w.end(), 0.0); kernels::conv2d_bwd_weights(in.data(), ic, n, n, out.data(), oc, n, n, k, 1, 1, d_w.data(), d_b.data()); }, 10));
  }
  {
    const Plane p = random_plane(1000, 1000, rng);
    report("fixed_order_sum 1000", time_ms([&] { kernels::serial::fixed_order_sum(p); }, 100),
           time_ms([&] { kernels::fixed_order_sum(p); }, 100));
  }
  return 0;
}
