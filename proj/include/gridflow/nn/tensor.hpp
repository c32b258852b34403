#pragma once

// Channel-major (c, h, w) tensor of doubles used by the predictor. All
// computations run in 64-bit; file formats convert at the boundary.

#include <vector>

#include "gridflow/types.hpp"

namespace gridflow::nn {

using Vec = std::vector<double>;

struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.0) {}

  size_t size() const { return v.size(); }
  double* ch(int i) { return v.data() + static_cast<size_t>(i) * h * w; }
  const double* ch(int i) const { return v.data() + static_cast<size_t>(i) * h * w; }
  double& at(int ci, int y, int x) { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
  double at(int ci, int y, int x) const { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }

  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.c, t.h, t.w); }
};

inline Plane tensor_channel_to_plane(const Tensor& t, int ci) {
  Plane p(t.h, t.w);
  const double* src = t.ch(ci);
  std::copy(src, src + static_cast<size_t>(t.h) * t.w, p.v.begin());
  return p;
}

inline void plane_into_tensor_channel(const Plane& p, Tensor& t, int ci) {
  std::copy(p.v.begin(), p.v.end(), t.ch(ci));
}

}  // namespace gridflow::nn
