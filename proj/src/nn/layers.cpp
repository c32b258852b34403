#include "gridflow/nn/layers.hpp"

#include <cmath>

#include "gridflow/kernels.hpp"

namespace gridflow::nn {

namespace {

inline double sigmoid_s(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline int out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

Tensor conv2d(const Tensor& in, const Vec& w, const Vec& b, int oc, int k, int stride, int pad) {
  Tensor out(oc, out_extent(in.h, k, stride, pad), out_extent(in.w, k, stride, pad));
  kernels::conv2d_fwd(in.v.data(), in.c, in.h, in.w, w.data(), b.empty() ? nullptr : b.data(),
                      oc, k, stride, pad, out.v.data(), out.h, out.w);
  return out;
}

void conv2d_backward(const Tensor& in, const Vec& w, int oc, int k, int stride, int pad,
                     const Tensor& d_out, Tensor* d_in, Vec* d_w, Vec* d_b) {
  if (d_in)
    kernels::conv2d_bwd_input(d_out.v.data(), oc, d_out.h, d_out.w, w.data(), in.c, in.h, in.w,
                              k, stride, pad, d_in->v.data());
  if (d_w)
    kernels::conv2d_bwd_weights(in.v.data(), in.c, in.h, in.w, d_out.v.data(), oc, d_out.h,
                                d_out.w, k, stride, pad, d_w->data(),
                                d_b ? d_b->data() : nullptr);
}

Tensor relu(const Tensor& pre) {
  Tensor out = pre;
  for (double& x : out.v) x = x > 0.0 ? x : 0.0;
  return out;
}

void relu_backward(const Tensor& pre, const Tensor& d_out, Tensor& d_pre) {
  for (size_t i = 0; i < pre.v.size(); ++i)
    if (pre.v[i] > 0.0) d_pre.v[i] += d_out.v[i];
}

Tensor sigmoid(const Tensor& pre) {
  Tensor out = pre;
  for (double& x : out.v) x = sigmoid_s(x);
  return out;
}

Tensor tanh_t(const Tensor& pre) {
  Tensor out = pre;
  for (double& x : out.v) x = std::tanh(x);
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  Tensor out(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
  return out;
}

void split_channels_backward(const Tensor& d_cat, int c_a, Tensor& d_a, Tensor& d_b) {
  const size_t na = static_cast<size_t>(c_a) * d_cat.h * d_cat.w;
  for (size_t i = 0; i < na; ++i) d_a.v[i] += d_cat.v[i];
  for (size_t i = na; i < d_cat.v.size(); ++i) d_b.v[i - na] += d_cat.v[i];
}

Tensor upsample2_nearest(const Tensor& in) {
  Tensor out(in.c, in.h * 2, in.w * 2);
  for (int ci = 0; ci < in.c; ++ci)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) out.at(ci, y, x) = in.at(ci, y / 2, x / 2);
  return out;
}

void upsample2_nearest_backward(const Tensor& d_out, Tensor& d_in) {
  for (int ci = 0; ci < d_in.c; ++ci)
    for (int y = 0; y < d_out.h; ++y)
      for (int x = 0; x < d_out.w; ++x) d_in.at(ci, y / 2, x / 2) += d_out.at(ci, y, x);
}

Vec global_avg_pool(const Tensor& in) {
  Vec out(in.c, 0.0);
  const double inv = 1.0 / (static_cast<double>(in.h) * in.w);
  for (int ci = 0; ci < in.c; ++ci) {
    const double* p = in.ch(ci);
    double s = 0.0;
    for (int i = 0; i < in.h * in.w; ++i) s += p[i];
    out[ci] = s * inv;
  }
  return out;
}

void global_avg_pool_backward(const Vec& d_vec, Tensor& d_in) {
  const double inv = 1.0 / (static_cast<double>(d_in.h) * d_in.w);
  for (int ci = 0; ci < d_in.c; ++ci) {
    double* p = d_in.ch(ci);
    const double g = d_vec[ci] * inv;
    for (int i = 0; i < d_in.h * d_in.w; ++i) p[i] += g;
  }
}

Tensor broadcast_latent(const Vec& z, int h, int w) {
  Tensor out(static_cast<int>(z.size()), h, w);
  for (size_t i = 0; i < z.size(); ++i) {
    double* p = out.ch(static_cast<int>(i));
    for (int j = 0; j < h * w; ++j) p[j] = z[i];
  }
  return out;
}

void broadcast_latent_backward(const Tensor& d_out, Vec& d_z) {
  for (int ci = 0; ci < d_out.c; ++ci) {
    const double* p = d_out.ch(ci);
    double s = 0.0;
    for (int j = 0; j < d_out.h * d_out.w; ++j) s += p[j];
    d_z[ci] += s;
  }
}

Vec dense(const Vec& x, const Vec& w, const Vec& b, int out_dim) {
  const size_t in_dim = x.size();
  Vec out(out_dim, 0.0);
  for (int o = 0; o < out_dim; ++o) {
    double acc = b.empty() ? 0.0 : b[o];
    const double* wo = w.data() + static_cast<size_t>(o) * in_dim;
    for (size_t i = 0; i < in_dim; ++i) acc += wo[i] * x[i];
    out[o] = acc;
  }
  return out;
}

void dense_backward(const Vec& x, const Vec& w, int out_dim, const Vec& d_out, Vec* d_x,
                    Vec* d_w, Vec* d_b) {
  const size_t in_dim = x.size();
  for (int o = 0; o < out_dim; ++o) {
    const double g = d_out[o];
    const double* wo = w.data() + static_cast<size_t>(o) * in_dim;
    if (d_b) (*d_b)[o] += g;
    for (size_t i = 0; i < in_dim; ++i) {
      if (d_x) (*d_x)[i] += g * wo[i];
      if (d_w) (*d_w)[static_cast<size_t>(o) * in_dim + i] += g * x[i];
    }
  }
}

void convlstm_forward(const Tensor& x, const Tensor& h, const Tensor& c, const Vec& w,
                      const Vec& b, int feat, ConvLstmCache& cache, Tensor& h_out,
                      Tensor& c_out) {
  cache.xh = concat_channels(x, h);
  const Tensor gates = conv2d(cache.xh, w, b, 4 * feat, 3, 1, 1);
  const int plane = gates.h * gates.w;
  cache.i = Tensor(feat, gates.h, gates.w);
  cache.f = Tensor(feat, gates.h, gates.w);
  cache.g = Tensor(feat, gates.h, gates.w);
  cache.o = Tensor(feat, gates.h, gates.w);
  for (int ci = 0; ci < feat; ++ci) {
    for (int j = 0; j < plane; ++j) {
      cache.i.ch(ci)[j] = sigmoid_s(gates.ch(ci)[j]);
      cache.f.ch(ci)[j] = sigmoid_s(gates.ch(feat + ci)[j]);
      cache.g.ch(ci)[j] = std::tanh(gates.ch(2 * feat + ci)[j]);
      cache.o.ch(ci)[j] = sigmoid_s(gates.ch(3 * feat + ci)[j]);
    }
  }
  cache.c_prev = c;
  cache.c_new = Tensor(feat, gates.h, gates.w);
  cache.tanh_c = Tensor(feat, gates.h, gates.w);
  h_out = Tensor(feat, gates.h, gates.w);
  for (size_t j = 0; j < cache.c_new.v.size(); ++j) {
    cache.c_new.v[j] = cache.f.v[j] * c.v[j] + cache.i.v[j] * cache.g.v[j];
    cache.tanh_c.v[j] = std::tanh(cache.c_new.v[j]);
    h_out.v[j] = cache.o.v[j] * cache.tanh_c.v[j];
  }
  c_out = cache.c_new;
}

void convlstm_backward(const ConvLstmCache& cache, const Vec& w, int feat,
                       const Tensor& d_h_out, const Tensor& d_c_out, Tensor& d_x, Tensor& d_h,
                       Tensor& d_c, Vec& d_w, Vec& d_b) {
  const int hh = cache.c_new.h, ww = cache.c_new.w;
  Tensor d_gates(4 * feat, hh, ww);
  const int plane = hh * ww;
  for (int ci = 0; ci < feat; ++ci) {
    for (int j = 0; j < plane; ++j) {
      const double i_ = cache.i.ch(ci)[j];
      const double f_ = cache.f.ch(ci)[j];
      const double g_ = cache.g.ch(ci)[j];
      const double o_ = cache.o.ch(ci)[j];
      const double tc = cache.tanh_c.ch(ci)[j];
      const double dh = d_h_out.ch(ci)[j];
      const double dc_total = d_c_out.ch(ci)[j] + dh * o_ * (1.0 - tc * tc);
      d_gates.ch(ci)[j] = dc_total * g_ * i_ * (1.0 - i_);
      d_gates.ch(feat + ci)[j] = dc_total * cache.c_prev.ch(ci)[j] * f_ * (1.0 - f_);
      d_gates.ch(2 * feat + ci)[j] = dc_total * i_ * (1.0 - g_ * g_);
      d_gates.ch(3 * feat + ci)[j] = dh * tc * o_ * (1.0 - o_);
      d_c.ch(ci)[j] += dc_total * f_;
    }
  }
  Tensor d_xh = Tensor::zeros_like(cache.xh);
  conv2d_backward(cache.xh, w, 4 * feat, 3, 1, 1, d_gates, &d_xh, &d_w, &d_b);
  split_channels_backward(d_xh, cache.xh.c - feat, d_x, d_h);
}

void convgru_forward(const Tensor& x, const Tensor& h, const Vec& w_zr, const Vec& b_zr,
                     const Vec& w_h, const Vec& b_h, int feat, ConvGruCache& cache,
                     Tensor& h_out) {
  cache.h_prev = h;
  cache.xh = concat_channels(x, h);
  const Tensor zr = conv2d(cache.xh, w_zr, b_zr, 2 * feat, 3, 1, 1);
  cache.z = Tensor(feat, zr.h, zr.w);
  cache.r = Tensor(feat, zr.h, zr.w);
  const int plane = zr.h * zr.w;
  for (int ci = 0; ci < feat; ++ci) {
    for (int j = 0; j < plane; ++j) {
      cache.z.ch(ci)[j] = sigmoid_s(zr.ch(ci)[j]);
      cache.r.ch(ci)[j] = sigmoid_s(zr.ch(feat + ci)[j]);
    }
  }
  cache.rh = Tensor(feat, zr.h, zr.w);
  for (size_t j = 0; j < cache.rh.v.size(); ++j) cache.rh.v[j] = cache.r.v[j] * h.v[j];
  cache.xrh = concat_channels(x, cache.rh);
  cache.hcand = tanh_t(conv2d(cache.xrh, w_h, b_h, feat, 3, 1, 1));
  h_out = Tensor(feat, zr.h, zr.w);
  for (size_t j = 0; j < h_out.v.size(); ++j)
    h_out.v[j] = (1.0 - cache.z.v[j]) * h.v[j] + cache.z.v[j] * cache.hcand.v[j];
}

void convgru_backward(const ConvGruCache& cache, const Vec& w_zr, const Vec& w_h, int feat,
                      const Tensor& d_h_out, Tensor& d_x, Tensor& d_h, Vec& d_w_zr, Vec& d_b_zr,
                      Vec& d_w_h, Vec& d_b_h) {
  const int hh = cache.hcand.h, ww = cache.hcand.w;
  Tensor d_hcand_pre(feat, hh, ww);
  Tensor d_zr(2 * feat, hh, ww);
  const int plane = hh * ww;
  Tensor d_rh(feat, hh, ww);

  // First the h' assembly, then the candidate through tanh.
  for (int ci = 0; ci < feat; ++ci) {
    for (int j = 0; j < plane; ++j) {
      const double dh = d_h_out.ch(ci)[j];
      const double z_ = cache.z.ch(ci)[j];
      const double hc = cache.hcand.ch(ci)[j];
      const double hp = cache.h_prev.ch(ci)[j];
      d_h.ch(ci)[j] += dh * (1.0 - z_);
      d_zr.ch(ci)[j] = dh * (hc - hp) * z_ * (1.0 - z_);
      d_hcand_pre.ch(ci)[j] = dh * z_ * (1.0 - hc * hc);
    }
  }
  Tensor d_xrh = Tensor::zeros_like(cache.xrh);
  conv2d_backward(cache.xrh, w_h, feat, 3, 1, 1, d_hcand_pre, &d_xrh, &d_w_h, &d_b_h);
  split_channels_backward(d_xrh, cache.xrh.c - feat, d_x, d_rh);
  for (int ci = 0; ci < feat; ++ci) {
    for (int j = 0; j < plane; ++j) {
      const double r_ = cache.r.ch(ci)[j];
      d_h.ch(ci)[j] += d_rh.ch(ci)[j] * r_;
      d_zr.ch(feat + ci)[j] =
          d_rh.ch(ci)[j] * cache.h_prev.ch(ci)[j] * r_ * (1.0 - r_);
    }
  }
  Tensor d_xh = Tensor::zeros_like(cache.xh);
  conv2d_backward(cache.xh, w_zr, 2 * feat, 3, 1, 1, d_zr, &d_xh, &d_w_zr, &d_b_zr);
  split_channels_backward(d_xh, cache.xh.c - feat, d_x, d_h);
}

}  // namespace gridflow::nn
