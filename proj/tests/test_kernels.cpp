#include <doctest.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gridflow/kernels.hpp"
#include "test_util.hpp"

using namespace gridflow;
using testutil::random_plane;

namespace {

void identity_coords(int rows, int cols, Plane& rc, Plane& cc) {
  rc = Plane(rows, cols);
  cc = Plane(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      rc.at(r, c) = r;
      cc.at(r, c) = c;
    }
}

}  // namespace

TEST_CASE("resample with identity coords returns the input exactly") {
  RandomStream rng(1);
  const Plane src = random_plane(16, 13, rng);
  Plane rc, cc;
  identity_coords(16, 13, rc, cc);
  const Plane out = kernels::resample_bilinear(src, rc, cc, 0.0);
  CHECK(testutil::bit_equal(out, src));
}

TEST_CASE("resample one-cell shift moves a spike") {
  Plane src(12, 12);
  src.at(5, 5) = 1.0;
  Plane rc, cc;
  identity_coords(12, 12, rc, cc);
  for (double& v : cc.v) v += 1.0;  // sample one cell to the right
  const Plane out = kernels::resample_bilinear(src, rc, cc, 0.0);
  CHECK(out.at(5, 4) == 1.0);
  CHECK(out.sum() == doctest::Approx(1.0));
}

TEST_CASE("all out-of-bounds coords return fill") {
  RandomStream rng(2);
  const Plane src = random_plane(8, 8, rng);
  Plane rc(8, 8, 100.0), cc(8, 8, 100.0);
  const Plane out = kernels::resample_bilinear(src, rc, cc, 0.25);
  for (double v : out.v) CHECK(v == 0.25);
}

TEST_CASE("resample matches the independent brute-force sampler") {
  RandomStream rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Plane src = random_plane(17, 11, rng);
    Plane rc(9, 14), cc(9, 14);
    for (double& v : rc.v) v = rng.uniform(-3.0, 19.0);
    for (double& v : cc.v) v = rng.uniform(-3.0, 13.0);
    const Plane out = kernels::resample_bilinear(src, rc, cc, 0.5);
    for (int r = 0; r < 9; ++r)
      for (int c = 0; c < 14; ++c) {
        const double want = testutil::oracle_bilinear_sample(src, rc.at(r, c), cc.at(r, c), 0.5);
        CHECK(std::abs(out.at(r, c) - want) <= 1e-12);
      }
  }
}

TEST_CASE("parallel and serial kernels agree bitwise") {
#ifdef _OPENMP
  omp_set_num_threads(2);
#endif
  RandomStream rng(4);
  const Plane src = random_plane(33, 29, rng);
  Plane rc(33, 29), cc(33, 29);
  for (double& v : rc.v) v = rng.uniform(-2.0, 34.0);
  for (double& v : cc.v) v = rng.uniform(-2.0, 30.0);
  CHECK(testutil::bit_equal(kernels::resample_bilinear(src, rc, cc, 0.125),
                            kernels::serial::resample_bilinear(src, rc, cc, 0.125)));
  CHECK(testutil::bit_equal(kernels::resample_nearest(src, rc, cc, 0.125),
                            kernels::serial::resample_nearest(src, rc, cc, 0.125)));

  const Plane fx = random_plane(33, 29, rng, -0.2, 0.2);
  const Plane fy = random_plane(33, 29, rng, -0.2, 0.2);
  CHECK(testutil::bit_equal(
      kernels::warp_gather(src, fx, fy, kernels::Interp::Bilinear, 0.0, true),
      kernels::serial::warp_gather(src, fx, fy, kernels::Interp::Bilinear, 0.0, true)));

  // conv kernels
  const int ic = 5, oc = 7, h = 15, w = 13, k = 3;
  std::vector<double> in(static_cast<size_t>(ic) * h * w), wt(static_cast<size_t>(oc) * ic * k * k), b(oc);
  for (double& x : in) x = rng.uniform(-1, 1);
  for (double& x : wt) x = rng.uniform(-1, 1);
  for (double& x : b) x = rng.uniform(-1, 1);
  for (int stride : {1, 2}) {
    const int oh = (h + 2 - k) / stride + 1, ow = (w + 2 - k) / stride + 1;
    std::vector<double> o1(static_cast<size_t>(oc) * oh * ow), o2(o1.size());
    kernels::conv2d_fwd(in.data(), ic, h, w, wt.data(), b.data(), oc, k, stride, 1, o1.data(), oh, ow);
    kernels::serial::conv2d_fwd(in.data(), ic, h, w, wt.data(), b.data(), oc, k, stride, 1, o2.data(), oh, ow);
    CHECK(o1 == o2);

    std::vector<double> di1(in.size(), 0.0), di2(in.size(), 0.0);
    kernels::conv2d_bwd_input(o1.data(), oc, oh, ow, wt.data(), ic, h, w, k, stride, 1, di1.data());
    kernels::serial::conv2d_bwd_input(o1.data(), oc, oh, ow, wt.data(), ic, h, w, k, stride, 1, di2.data());
    CHECK(di1 == di2);

    std::vector<double> dw1(wt.size(), 0.0), dw2(wt.size(), 0.0), db1(oc, 0.0), db2(oc, 0.0);
    kernels::conv2d_bwd_weights(in.data(), ic, h, w, o1.data(), oc, oh, ow, k, stride, 1, dw1.data(), db1.data());
    kernels::serial::conv2d_bwd_weights(in.data(), ic, h, w, o1.data(), oc, oh, ow, k, stride, 1, dw2.data(), db2.data());
    CHECK(dw1 == dw2);
    CHECK(db1 == db2);
  }

  const Plane big = random_plane(101, 57, rng, -5, 5);
  CHECK(kernels::fixed_order_sum(big) == kernels::serial::fixed_order_sum(big));
}

TEST_CASE("fixed_order_sum is identical across thread counts") {
#ifdef _OPENMP
  RandomStream rng(5);
  const Plane p = random_plane(64, 64, rng, -1e6, 1e6);
  omp_set_num_threads(1);
  const double s1 = kernels::fixed_order_sum(p);
  omp_set_num_threads(2);
  const double s2 = kernels::fixed_order_sum(p);
  CHECK(s1 == s2);
#endif
}

TEST_CASE("conv2d matches a naive reference") {
  RandomStream rng(6);
  const int ic = 3, oc = 4, h = 9, w = 8, k = 3, pad = 1;
  std::vector<double> in(static_cast<size_t>(ic) * h * w), wt(static_cast<size_t>(oc) * ic * k * k), b(oc);
  for (double& x : in) x = rng.uniform(-1, 1);
  for (double& x : wt) x = rng.uniform(-1, 1);
  for (double& x : b) x = rng.uniform(-1, 1);
  for (int stride : {1, 2}) {
    const int oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
    std::vector<double> out(static_cast<size_t>(oc) * oh * ow);
    kernels::conv2d_fwd(in.data(), ic, h, w, wt.data(), b.data(), oc, k, stride, pad, out.data(), oh, ow);
    for (int o = 0; o < oc; ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double want = b[o];
          for (int i = 0; i < ic; ++i)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                want += wt[((static_cast<size_t>(o) * ic + i) * k + ky) * k + kx] *
                        in[(static_cast<size_t>(i) * h + iy) * w + ix];
              }
          const double got = out[(static_cast<size_t>(o) * oh + oy) * ow + ox];
          CHECK(std::abs(got - want) <= 1e-12);
        }
  }
}
