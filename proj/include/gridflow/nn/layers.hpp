#pragma once

// Differentiable building blocks with explicit forward caches and hand-written
// backward passes. Weight layouts are flat: conv [oc][ic][k][k], dense
// [out][in]. All backward functions accumulate (+=) into their gradient
// arguments.

#include "gridflow/nn/tensor.hpp"

namespace gridflow::nn {

// ---- convolution (zero padding) ----
Tensor conv2d(const Tensor& in, const Vec& w, const Vec& b, int oc, int k, int stride, int pad);
void conv2d_backward(const Tensor& in, const Vec& w, int oc, int k, int stride, int pad,
                     const Tensor& d_out, Tensor* d_in, Vec* d_w, Vec* d_b);

// ---- elementwise activations ----
Tensor relu(const Tensor& pre);
void relu_backward(const Tensor& pre, const Tensor& d_out, Tensor& d_pre);
Tensor sigmoid(const Tensor& pre);
Tensor tanh_t(const Tensor& pre);

// ---- shape ops ----
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels_backward(const Tensor& d_cat, int c_a, Tensor& d_a, Tensor& d_b);
Tensor upsample2_nearest(const Tensor& in);
void upsample2_nearest_backward(const Tensor& d_out, Tensor& d_in);
Vec global_avg_pool(const Tensor& in);
void global_avg_pool_backward(const Vec& d_vec, Tensor& d_in);
// Broadcast a latent vector over space: out[i][y][x] = z[i].
Tensor broadcast_latent(const Vec& z, int h, int w);
void broadcast_latent_backward(const Tensor& d_out, Vec& d_z);

// ---- dense ----
Vec dense(const Vec& x, const Vec& w, const Vec& b, int out_dim);
void dense_backward(const Vec& x, const Vec& w, int out_dim, const Vec& d_out, Vec* d_x,
                    Vec* d_w, Vec* d_b);

// ---- convolutional LSTM cell ----
// Gates i,f,g,o from one convolution over [x; h]; c' = f*c + i*g,
// h' = o * tanh(c').
struct ConvLstmCache {
  Tensor xh;         // concatenated input
  Tensor i, f, g, o; // activated gates
  Tensor c_prev, c_new, tanh_c;
};
void convlstm_forward(const Tensor& x, const Tensor& h, const Tensor& c, const Vec& w,
                      const Vec& b, int feat, ConvLstmCache& cache, Tensor& h_out,
                      Tensor& c_out);
void convlstm_backward(const ConvLstmCache& cache, const Vec& w, int feat,
                       const Tensor& d_h_out, const Tensor& d_c_out, Tensor& d_x, Tensor& d_h,
                       Tensor& d_c, Vec& d_w, Vec& d_b);

// ---- convolutional GRU cell ----
// z,r from one convolution over [x; h]; candidate from [x; r*h];
// h' = (1-z)*h + z*hcand.
struct ConvGruCache {
  Tensor xh;   // [x; h]
  Tensor z, r; // activated gates
  Tensor rh;   // r * h
  Tensor xrh;  // [x; r*h]
  Tensor hcand;
  Tensor h_prev;
};
void convgru_forward(const Tensor& x, const Tensor& h, const Vec& w_zr, const Vec& b_zr,
                     const Vec& w_h, const Vec& b_h, int feat, ConvGruCache& cache,
                     Tensor& h_out);
void convgru_backward(const ConvGruCache& cache, const Vec& w_zr, const Vec& w_h, int feat,
                      const Tensor& d_h_out, Tensor& d_x, Tensor& d_h, Vec& d_w_zr, Vec& d_b_zr,
                      Vec& d_w_h, Vec& d_b_h);

}  // namespace gridflow::nn
