#include "gridflow/reproject.hpp"

namespace gridflow {

namespace {

struct Se2 {
  double c = 1.0, s = 0.0, tx = 0.0, ty = 0.0;

  std::pair<double, double> apply(double x, double y) const {
    return {c * x - s * y + tx, s * x + c * y + ty};
  }
};

// Maps from-local coordinates into to-local coordinates. Built from the
// heading difference directly, so identical poses give the exact identity
// (no trig round trip that could push border cells out of bounds).
Se2 relative_transform(const Pose2D& from, const Pose2D& to) {
  const double delta = from.heading_rad - to.heading_rad;
  const double ct = std::cos(to.heading_rad), st = std::sin(to.heading_rad);
  const double dx = from.x_m - to.x_m, dy = from.y_m - to.y_m;
  Se2 t;
  t.c = std::cos(delta);
  t.s = std::sin(delta);
  t.tx = ct * dx + st * dy;
  t.ty = -st * dx + ct * dy;
  if (delta == 0.0) {
    t.c = 1.0;
    t.s = 0.0;
  }
  if (dx == 0.0 && dy == 0.0) {
    t.tx = 0.0;
    t.ty = 0.0;
  }
  return t;
}

}  // namespace

Frame reproject_frame(const Frame& src, const GridGeometry& g, const Pose2D& anchor,
                      kernels::Interp interp) {
  const Se2 anchor_to_src = relative_transform(anchor, src.ego);
  const double cc = (g.width_cells - 1) * 0.5;
  const double rc = (g.height_cells - 1) * 0.5;
  const double s = g.cell_size_m;

  Plane rows(g.height_cells, g.width_cells);
  Plane cols(g.height_cells, g.width_cells);
  for (int r = 0; r < g.height_cells; ++r) {
    for (int c = 0; c < g.width_cells; ++c) {
      const auto [ux, uy] = anchor_to_src.apply((c - cc) * s, (r - rc) * s);
      rows.at(r, c) = rc + uy / s;
      cols.at(r, c) = cc + ux / s;
    }
  }

  const auto sample = [&](const Plane& p, double fill) {
    return interp == kernels::Interp::Bilinear ? kernels::resample_bilinear(p, rows, cols, fill)
                                               : kernels::resample_nearest(p, rows, cols, fill);
  };

  Frame out;
  out.timestamp_s = src.timestamp_s;
  out.ego = src.ego;
  out.state.p_static = sample(src.state.p_static, 0.0);
  out.state.p_dynamic = sample(src.state.p_dynamic, 0.0);
  out.state.p_unknown = sample(src.state.p_unknown, 1.0);  // unseen area is unknown
  out.semantic.p_vehicle = sample(src.semantic.p_vehicle, 0.0);
  out.velocity.vx = sample(src.velocity.vx, 0.0);
  out.velocity.vy = sample(src.velocity.vy, 0.0);
  if (src.flow) {
    FlowGrid f;
    f.fx = sample(src.flow->fx, 0.0);
    f.fy = sample(src.flow->fy, 0.0);
    out.flow = std::move(f);
  }

  // Vector channels were sampled as source-frame components; rotate them into
  // the anchor axes.
  const double delta = src.ego.heading_rad - anchor.heading_rad;
  const double cd = std::cos(delta), sd = std::sin(delta);
  if (cd != 1.0 || sd != 0.0) {
    const auto rotate = [&](Plane& px, Plane& py) {
      for (size_t i = 0; i < px.v.size(); ++i) {
        const double x = px.v[i], y = py.v[i];
        px.v[i] = cd * x - sd * y;
        py.v[i] = sd * x + cd * y;
      }
    };
    rotate(out.velocity.vx, out.velocity.vy);
    if (out.flow) rotate(out.flow->fx, out.flow->fy);
  }
  return out;
}

std::vector<VehicleInstance> reproject_instances(const std::vector<VehicleInstance>& src,
                                                 const GridGeometry& g, const Pose2D& src_pose,
                                                 const Pose2D& anchor) {
  const Se2 src_to_anchor = relative_transform(src_pose, anchor);
  const double cc = (g.width_cells - 1) * 0.5;
  const double rc = (g.height_cells - 1) * 0.5;
  const double s = g.cell_size_m;

  const auto map_cell = [&](double row, double col) -> std::pair<double, double> {
    const auto [ux, uy] = src_to_anchor.apply((col - cc) * s, (row - rc) * s);
    return {rc + uy / s, cc + ux / s};  // (row, col)
  };

  std::vector<VehicleInstance> out;
  for (const VehicleInstance& inst : src) {
    VehicleInstance m = inst;
    const auto [r, c] = map_cell(inst.centroid_row, inst.centroid_col);
    m.centroid_row = r;
    m.centroid_col = c;
    for (int k = 0; k < 4; ++k) {
      const auto [cr, ccol] = map_cell(inst.corners[k][0], inst.corners[k][1]);
      m.corners[k] = {cr, ccol};
    }
    if (instance_in_grid(m, g)) out.push_back(m);
  }
  return out;
}

FrameSequence to_allocentric(const FrameSequence& seq, const Pose2D& anchor,
                             kernels::Interp interp) {
  FrameSequence out;
  out.geometry = seq.geometry;
  out.dt_s = seq.dt_s;
  out.frames.reserve(seq.frames.size());
  out.instances.reserve(seq.instances.size());
  for (size_t i = 0; i < seq.frames.size(); ++i) {
    out.frames.push_back(reproject_frame(seq.frames[i], seq.geometry, anchor, interp));
    out.instances.push_back(
        reproject_instances(seq.instances[i], seq.geometry, seq.frames[i].ego, anchor));
  }
  return out;
}

}  // namespace gridflow
