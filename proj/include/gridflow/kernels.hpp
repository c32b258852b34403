#pragma once

// Data-parallel inner kernels. Every kernel exists twice: the OpenMP version
// in gridflow::kernels and a serial reference in gridflow::kernels::serial.
// Both variants share the same per-cell arithmetic, so results are bitwise
// identical regardless of thread count; tests and the benchmark target
// compare them.

#include <cmath>

#include "gridflow/types.hpp"

namespace gridflow::kernels {

enum class Interp { Bilinear, Nearest };

// Applies GRIDFLOW_THREADS to the OpenMP runtime. Call once at startup.
void configure_threads_from_env();
int active_max_threads();

// Samples one plane at a continuous (row, col); out-of-bounds returns fill.
// Exact at integer coordinates (interpolation weights degenerate to 1).
inline double sample_bilinear(const double* p, int rows, int cols, double r, double c,
                              double fill) {
  if (!(r >= 0.0) || !(c >= 0.0) || r > rows - 1 || c > cols - 1) return fill;
  const int r0 = static_cast<int>(r);
  const int c0 = static_cast<int>(c);
  const double wr = r - r0;
  const double wc = c - c0;
  const int r1 = (r0 + 1 <= rows - 1) ? r0 + 1 : r0;
  const int c1 = (c0 + 1 <= cols - 1) ? c0 + 1 : c0;
  const double v00 = p[r0 * cols + c0];
  const double v01 = p[r0 * cols + c1];
  const double v10 = p[r1 * cols + c0];
  const double v11 = p[r1 * cols + c1];
  return (1.0 - wr) * ((1.0 - wc) * v00 + wc * v01) + wr * ((1.0 - wc) * v10 + wc * v11);
}

inline double sample_nearest(const double* p, int rows, int cols, double r, double c,
                             double fill) {
  if (!(r >= 0.0) || !(c >= 0.0) || r > rows - 1 || c > cols - 1) return fill;
  const int ri = static_cast<int>(std::floor(r + 0.5));
  const int ci = static_cast<int>(std::floor(c + 0.5));
  const int rr = ri > rows - 1 ? rows - 1 : ri;
  const int cc = ci > cols - 1 ? cols - 1 : ci;
  return p[rr * cols + cc];
}

// output(r,c) = sample of src at (row_coords(r,c), col_coords(r,c)).
Plane resample_bilinear(const Plane& src, const Plane& row_coords, const Plane& col_coords,
                        double fill);
Plane resample_nearest(const Plane& src, const Plane& row_coords, const Plane& col_coords,
                       double fill);

// Backward-flow gather: out(r,c) = sample of src at
// (r + fy(r,c)*rows, c + fx(r,c)*cols). Optionally clamps output to [0,1].
Plane warp_gather(const Plane& src, const Plane& fx, const Plane& fy, Interp interp,
                  double fill, bool clamp01);

// Reverse-mode companion of bilinear warp_gather. Accumulates into d_src,
// d_fx, d_fy (all pre-sized, zero or partially accumulated). The flow
// gradient is cell-local and runs parallel; the src gradient scatters and
// runs serial so results never depend on the schedule.
void warp_gather_backward(const Plane& src, const Plane& fx, const Plane& fy, double fill,
                          bool clamp01, const Plane& d_out, Plane& d_src, Plane& d_fx,
                          Plane& d_fy);

// 2D convolution on channel-major tensors, zero padding.
// out[oc][oy][ox] = b[oc] + sum_{ic,ky,kx} w[oc][ic][ky][kx] *
//                   in[ic][oy*stride+ky-pad][ox*stride+kx-pad]
void conv2d_fwd(const double* in, int ic, int ih, int iw, const double* w, const double* b,
                int oc, int k, int stride, int pad, double* out, int oh, int ow);
// d_in gather form (race free): accumulates into d_in.
void conv2d_bwd_input(const double* d_out, int oc, int oh, int ow, const double* w, int ic,
                      int ih, int iw, int k, int stride, int pad, double* d_in);
// Accumulates into d_w / d_b.
void conv2d_bwd_weights(const double* in, int ic, int ih, int iw, const double* d_out, int oc,
                        int oh, int ow, int k, int stride, int pad, double* d_w, double* d_b);

// Fixed-order reduction: per-row partial sums combined in row order, so the
// result is identical for any thread count.
double fixed_order_sum(const Plane& p);

namespace serial {
Plane resample_bilinear(const Plane& src, const Plane& row_coords, const Plane& col_coords,
                        double fill);
Plane resample_nearest(const Plane& src, const Plane& row_coords, const Plane& col_coords,
                       double fill);
Plane warp_gather(const Plane& src, const Plane& fx, const Plane& fy, Interp interp,
                  double fill, bool clamp01);
void conv2d_fwd(const double* in, int ic, int ih, int iw, const double* w, const double* b,
                int oc, int k, int stride, int pad, double* out, int oh, int ow);
void conv2d_bwd_input(const double* d_out, int oc, int oh, int ow, const double* w, int ic,
                      int ih, int iw, int k, int stride, int pad, double* d_in);
void conv2d_bwd_weights(const double* in, int ic, int ih, int iw, const double* d_out, int oc,
                        int oh, int ow, int k, int stride, int pad, double* d_w, double* d_b);
double fixed_order_sum(const Plane& p);
}  // namespace serial

}  // namespace gridflow::kernels
