#include "gridflow/kernels.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gridflow::kernels {

void configure_threads_from_env() {
#ifdef _OPENMP
  if (const char* s = std::getenv("GRIDFLOW_THREADS")) {
    const int n = std::atoi(s);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

int active_max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

template <bool Parallel>
Plane resample_impl(const Plane& src, const Plane& rows, const Plane& cols, double fill,
                    Interp interp) {
  if (!rows.same_shape(cols)) throw ConfigError("coordinate planes must share shape");
  Plane out(rows.rows, rows.cols);
  const int n = rows.rows;
#pragma omp parallel for schedule(static) if (Parallel)
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < rows.cols; ++c) {
      const double sr = rows.at(r, c);
      const double sc = cols.at(r, c);
      out.at(r, c) = interp == Interp::Bilinear
                         ? sample_bilinear(src.v.data(), src.rows, src.cols, sr, sc, fill)
                         : sample_nearest(src.v.data(), src.rows, src.cols, sr, sc, fill);
    }
  }
  return out;
}

template <bool Parallel>
Plane warp_impl(const Plane& src, const Plane& fx, const Plane& fy, Interp interp, double fill,
                bool clamp) {
  if (!src.same_shape(fx) || !src.same_shape(fy)) throw ConfigError("warp: shape mismatch");
  Plane out(src.rows, src.cols);
  const int n = src.rows;
#pragma omp parallel for schedule(static) if (Parallel)
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < src.cols; ++c) {
      const double sr = r + fy.at(r, c) * src.rows;
      const double sc = c + fx.at(r, c) * src.cols;
      double v = interp == Interp::Bilinear
                     ? sample_bilinear(src.v.data(), src.rows, src.cols, sr, sc, fill)
                     : sample_nearest(src.v.data(), src.rows, src.cols, sr, sc, fill);
      if (clamp) v = clamp01(v);
      out.at(r, c) = v;
    }
  }
  return out;
}

template <bool Parallel>
void conv2d_fwd_impl(const double* in, int ic, int ih, int iw, const double* w, const double* b,
                     int oc, int k, int stride, int pad, double* out, int oh, int ow) {
#pragma omp parallel for schedule(static) if (Parallel)
  for (int o = 0; o < oc; ++o) {
    const double* wo = w + static_cast<size_t>(o) * ic * k * k;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = b ? b[o] : 0.0;
        for (int i = 0; i < ic; ++i) {
          const double* pin = in + static_cast<size_t>(i) * ih * iw;
          const double* wi = wo + static_cast<size_t>(i) * k * k;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= ih) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= iw) continue;
              acc += wi[ky * k + kx] * pin[iy * iw + ix];
            }
          }
        }
        out[(static_cast<size_t>(o) * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

template <bool Parallel>
void conv2d_bwd_input_impl(const double* d_out, int oc, int oh, int ow, const double* w, int ic,
                           int ih, int iw, int k, int stride, int pad, double* d_in) {
#pragma omp parallel for schedule(static) if (Parallel)
  for (int i = 0; i < ic; ++i) {
    double* di = d_in + static_cast<size_t>(i) * ih * iw;
    for (int iy = 0; iy < ih; ++iy) {
      for (int ix = 0; ix < iw; ++ix) {
        double acc = 0.0;
        for (int o = 0; o < oc; ++o) {
          const double* wo = w + (static_cast<size_t>(o) * ic + i) * k * k;
          const double* go = d_out + static_cast<size_t>(o) * oh * ow;
          for (int ky = 0; ky < k; ++ky) {
            const int ty = iy + pad - ky;
            if (ty < 0 || ty % stride != 0) continue;
            const int oy = ty / stride;
            if (oy >= oh) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int tx = ix + pad - kx;
              if (tx < 0 || tx % stride != 0) continue;
              const int ox = tx / stride;
              if (ox >= ow) continue;
              acc += wo[ky * k + kx] * go[oy * ow + ox];
            }
          }
        }
        di[iy * iw + ix] += acc;
      }
    }
  }
}

template <bool Parallel>
void conv2d_bwd_weights_impl(const double* in, int ic, int ih, int iw, const double* d_out,
                             int oc, int oh, int ow, int k, int stride, int pad, double* d_w,
                             double* d_b) {
#pragma omp parallel for schedule(static) if (Parallel)
  for (int o = 0; o < oc; ++o) {
    const double* go = d_out + static_cast<size_t>(o) * oh * ow;
    double bacc = 0.0;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) bacc += go[oy * ow + ox];
    if (d_b) d_b[o] += bacc;
    for (int i = 0; i < ic; ++i) {
      const double* pin = in + static_cast<size_t>(i) * ih * iw;
      double* dw = d_w + (static_cast<size_t>(o) * ic + i) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          double acc = 0.0;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= ih) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= iw) continue;
              acc += go[oy * ow + ox] * pin[iy * iw + ix];
            }
          }
          dw[ky * k + kx] += acc;
        }
      }
    }
  }
}

template <bool Parallel>
double fixed_order_sum_impl(const Plane& p) {
  std::vector<double> partial(p.rows, 0.0);
#pragma omp parallel for schedule(static) if (Parallel)
  for (int r = 0; r < p.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < p.cols; ++c) s += p.at(r, c);
    partial[r] = s;
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

}  // namespace

Plane resample_bilinear(const Plane& src, const Plane& rc, const Plane& cc, double fill) {
  return resample_impl<true>(src, rc, cc, fill, Interp::Bilinear);
}
Plane resample_nearest(const Plane& src, const Plane& rc, const Plane& cc, double fill) {
  return resample_impl<true>(src, rc, cc, fill, Interp::Nearest);
}
Plane warp_gather(const Plane& src, const Plane& fx, const Plane& fy, Interp interp, double fill,
                  bool clamp) {
  return warp_impl<true>(src, fx, fy, interp, fill, clamp);
}
void conv2d_fwd(const double* in, int ic, int ih, int iw, const double* w, const double* b,
                int oc, int k, int stride, int pad, double* out, int oh, int ow) {
  conv2d_fwd_impl<true>(in, ic, ih, iw, w, b, oc, k, stride, pad, out, oh, ow);
}
void conv2d_bwd_input(const double* d_out, int oc, int oh, int ow, const double* w, int ic,
                      int ih, int iw, int k, int stride, int pad, double* d_in) {
  conv2d_bwd_input_impl<true>(d_out, oc, oh, ow, w, ic, ih, iw, k, stride, pad, d_in);
}
void conv2d_bwd_weights(const double* in, int ic, int ih, int iw, const double* d_out, int oc,
                        int oh, int ow, int k, int stride, int pad, double* d_w, double* d_b) {
  conv2d_bwd_weights_impl<true>(in, ic, ih, iw, d_out, oc, oh, ow, k, stride, pad, d_w, d_b);
}
double fixed_order_sum(const Plane& p) { return fixed_order_sum_impl<true>(p); }

void warp_gather_backward(const Plane& src, const Plane& fx, const Plane& fy, double fill,
                          bool clamp, const Plane& d_out, Plane& d_src, Plane& d_fx,
                          Plane& d_fy) {
  (void)fill;
  const int rows = src.rows, cols = src.cols;
  const double* sp = src.v.data();

  // Flow gradients are cell-local.
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double sr = r + fy.at(r, c) * rows;
      const double sc = c + fx.at(r, c) * cols;
      if (!(sr >= 0.0) || !(sc >= 0.0) || sr > rows - 1 || sc > cols - 1) continue;
      const int r0 = static_cast<int>(sr);
      const int c0 = static_cast<int>(sc);
      const double wr = sr - r0;
      const double wc = sc - c0;
      const int r1 = (r0 + 1 <= rows - 1) ? r0 + 1 : r0;
      const int c1 = (c0 + 1 <= cols - 1) ? c0 + 1 : c0;
      const double v00 = sp[r0 * cols + c0];
      const double v01 = sp[r0 * cols + c1];
      const double v10 = sp[r1 * cols + c0];
      const double v11 = sp[r1 * cols + c1];
      double g = d_out.at(r, c);
      if (clamp) {
        const double v =
            (1.0 - wr) * ((1.0 - wc) * v00 + wc * v01) + wr * ((1.0 - wc) * v10 + wc * v11);
        if (v < 0.0 || v > 1.0) g = 0.0;
      }
      const double d_sc = (1.0 - wr) * (v01 - v00) + wr * (v11 - v10);
      const double d_sr = (1.0 - wc) * (v10 - v00) + wc * (v11 - v01);
      d_fx.at(r, c) += g * d_sc * cols;
      d_fy.at(r, c) += g * d_sr * rows;
    }
  }

  // Source gradients scatter; kept serial for schedule independence.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double sr = r + fy.at(r, c) * rows;
      const double sc = c + fx.at(r, c) * cols;
      if (!(sr >= 0.0) || !(sc >= 0.0) || sr > rows - 1 || sc > cols - 1) continue;
      const int r0 = static_cast<int>(sr);
      const int c0 = static_cast<int>(sc);
      const double wr = sr - r0;
      const double wc = sc - c0;
      const int r1 = (r0 + 1 <= rows - 1) ? r0 + 1 : r0;
      const int c1 = (c0 + 1 <= cols - 1) ? c0 + 1 : c0;
      double g = d_out.at(r, c);
      if (clamp) {
        const double v = (1.0 - wr) * ((1.0 - wc) * sp[r0 * cols + c0] + wc * sp[r0 * cols + c1]) +
                         wr * ((1.0 - wc) * sp[r1 * cols + c0] + wc * sp[r1 * cols + c1]);
        if (v < 0.0 || v > 1.0) g = 0.0;
      }
      d_src.at(r0, c0) += g * (1.0 - wr) * (1.0 - wc);
      d_src.at(r0, c1) += g * (1.0 - wr) * wc;
      d_src.at(r1, c0) += g * wr * (1.0 - wc);
      d_src.at(r1, c1) += g * wr * wc;
    }
  }
}

namespace serial {
Plane resample_bilinear(const Plane& src, const Plane& rc, const Plane& cc, double fill) {
  return resample_impl<false>(src, rc, cc, fill, Interp::Bilinear);
}
Plane resample_nearest(const Plane& src, const Plane& rc, const Plane& cc, double fill) {
  return resample_impl<false>(src, rc, cc, fill, Interp::Nearest);
}
Plane warp_gather(const Plane& src, const Plane& fx, const Plane& fy, Interp interp, double fill,
                  bool clamp) {
  return warp_impl<false>(src, fx, fy, interp, fill, clamp);
}
void conv2d_fwd(const double* in, int ic, int ih, int iw, const double* w, const double* b,
                int oc, int k, int stride, int pad, double* out, int oh, int ow) {
  conv2d_fwd_impl<false>(in, ic, ih, iw, w, b, oc, k, stride, pad, out, oh, ow);
}
void conv2d_bwd_input(const double* d_out, int oc, int oh, int ow, const double* w, int ic,
                      int ih, int iw, int k, int stride, int pad, double* d_in) {
  conv2d_bwd_input_impl<false>(d_out, oc, oh, ow, w, ic, ih, iw, k, stride, pad, d_in);
}
void conv2d_bwd_weights(const double* in, int ic, int ih, int iw, const double* d_out, int oc,
                        int oh, int ow, int k, int stride, int pad, double* d_w, double* d_b) {
  conv2d_bwd_weights_impl<false>(in, ic, ih, iw, d_out, oc, oh, ow, k, stride, pad, d_w, d_b);
}
double fixed_order_sum(const Plane& p) { return fixed_order_sum_impl<false>(p); }
}  // namespace serial

}  // namespace gridflow::kernels
