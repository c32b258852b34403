#pragma once

// Shared helpers for the test suites, including the independent brute-force
// bilinear sampler used as the warp oracle.

#include <cmath>

#include "gridflow/rng.hpp"
#include "gridflow/types.hpp"

namespace testutil {

inline gridflow::Plane random_plane(int rows, int cols, gridflow::RandomStream& rng,
                                    double lo = 0.0, double hi = 1.0) {
  gridflow::Plane p(rows, cols);
  for (double& v : p.v) v = rng.uniform(lo, hi);
  return p;
}

inline double max_abs_diff(const gridflow::Plane& a, const gridflow::Plane& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

inline bool bit_equal(const gridflow::Plane& a, const gridflow::Plane& b) {
  if (a.rows != b.rows || a.cols != b.cols) return false;
  for (size_t i = 0; i < a.v.size(); ++i)
    if (a.v[i] != b.v[i]) return false;
  return true;
}

// Deliberately naive reference: walks the four corners explicitly, written
// independently of the library kernel.
inline double oracle_bilinear_sample(const gridflow::Plane& p, double r, double c, double fill) {
  if (std::isnan(r) || std::isnan(c)) return fill;
  if (r < 0.0 || c < 0.0 || r > p.rows - 1 || c > p.cols - 1) return fill;
  const int r0 = static_cast<int>(std::floor(r));
  const int c0 = static_cast<int>(std::floor(c));
  double acc = 0.0;
  for (int dr = 0; dr <= 1; ++dr) {
    for (int dc = 0; dc <= 1; ++dc) {
      const int rr = std::min(r0 + dr, p.rows - 1);
      const int cc = std::min(c0 + dc, p.cols - 1);
      const double wr = dr == 0 ? 1.0 - (r - r0) : (r - r0);
      const double wc = dc == 0 ? 1.0 - (c - c0) : (c - c0);
      acc += wr * wc * p.at(rr, cc);
    }
  }
  return acc;
}

// Reference warp: per-cell brute-force gather along the normalized backward
// flow.
inline gridflow::Plane oracle_warp(const gridflow::Plane& src, const gridflow::Plane& fx,
                                   const gridflow::Plane& fy, double fill, bool clamp) {
  gridflow::Plane out(src.rows, src.cols);
  for (int r = 0; r < src.rows; ++r) {
    for (int c = 0; c < src.cols; ++c) {
      const double sr = r + fy.at(r, c) * src.rows;
      const double sc = c + fx.at(r, c) * src.cols;
      double v = oracle_bilinear_sample(src, sr, sc, fill);
      if (clamp) v = std::min(1.0, std::max(0.0, v));
      out.at(r, c) = v;
    }
  }
  return out;
}

}  // namespace testutil
