#include "gridflow/sim.hpp"

#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "gridflow/rng.hpp"

namespace gridflow {

Pose2D VehicleSpec::pose_at(double t) const {
  Pose2D p{x_m, y_m, heading_rad};
  switch (motion.type) {
    case MotionType::Parked:
      break;
    case MotionType::ConstantVelocity:
      p.x_m += motion.speed_mps * t * std::cos(heading_rad);
      p.y_m += motion.speed_mps * t * std::sin(heading_rad);
      break;
    case MotionType::ConstantTurn: {
      const double w = motion.yaw_rate_rps;
      if (std::abs(w) < 1e-12) {
        p.x_m += motion.speed_mps * t * std::cos(heading_rad);
        p.y_m += motion.speed_mps * t * std::sin(heading_rad);
      } else {
        const double h = heading_rad + w * t;
        p.x_m += motion.speed_mps / w * (std::sin(h) - std::sin(heading_rad));
        p.y_m -= motion.speed_mps / w * (std::cos(h) - std::cos(heading_rad));
        p.heading_rad = wrap_angle(h);
      }
      break;
    }
  }
  return p;
}

std::pair<double, double> VehicleSpec::velocity_at(double t) const {
  if (motion.type == MotionType::Parked) return {0.0, 0.0};
  double h = heading_rad;
  if (motion.type == MotionType::ConstantTurn) h += motion.yaw_rate_rps * t;
  return {motion.speed_mps * std::cos(h), motion.speed_mps * std::sin(h)};
}

void ScenarioConfig::validate() const {
  geometry.validate();
  if (n_frames < 1) throw ConfigError("n_frames must be >= 1");
  if (!(dt_s > 0.0)) throw ConfigError("dt_s must be positive");
  std::unordered_set<int> ids;
  for (const VehicleSpec& v : vehicles) {
    if (v.length_m <= 0.0 || v.width_m <= 0.0) throw ConfigError("vehicle size must be positive");
    if (v.motion.speed_mps < 0.0 || v.motion.speed_mps > v_max_mps)
      throw ConfigError("vehicle speed outside [0, v_max]");
    if (v.motion.type == MotionType::Parked && v.motion.speed_mps != 0.0)
      throw ConfigError("parked vehicles must have zero speed");
    if (!ids.insert(v.id).second) throw ConfigError("duplicate vehicle id");
  }
}

void for_each_cell_in_quad(const std::array<std::array<double, 2>, 4>& corners, int rows,
                           int cols, const std::function<void(int, int)>& fn) {
  double rmin = corners[0][0], rmax = rmin, cmin = corners[0][1], cmax = cmin;
  for (const auto& c : corners) {
    rmin = std::min(rmin, c[0]);
    rmax = std::max(rmax, c[0]);
    cmin = std::min(cmin, c[1]);
    cmax = std::max(cmax, c[1]);
  }
  const int r0 = std::max(0, static_cast<int>(std::ceil(rmin)));
  const int r1 = std::min(rows - 1, static_cast<int>(std::floor(rmax)));
  const int c0 = std::max(0, static_cast<int>(std::ceil(cmin)));
  const int c1 = std::min(cols - 1, static_cast<int>(std::floor(cmax)));
  constexpr double kEps = 1e-9;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      bool all_pos = true, all_neg = true;
      for (int k = 0; k < 4; ++k) {
        const auto& a = corners[k];
        const auto& b = corners[(k + 1) % 4];
        const double cross =
            (b[0] - a[0]) * (c - a[1]) - (b[1] - a[1]) * (r - a[0]);
        if (cross < -kEps) all_pos = false;
        if (cross > kEps) all_neg = false;
      }
      if (all_pos || all_neg) fn(r, c);
    }
  }
}

namespace {

struct Se2 {
  double c, s, tx, ty;
  static Se2 from_pose(const Pose2D& p) {
    return {std::cos(p.heading_rad), std::sin(p.heading_rad), p.x_m, p.y_m};
  }
  std::pair<double, double> apply(double x, double y) const {
    return {c * x - s * y + tx, s * x + c * y + ty};
  }
  std::pair<double, double> apply_inv(double x, double y) const {
    const double dx = x - tx, dy = y - ty;
    return {c * dx + s * dy, -s * dx + c * dy};
  }
};

// Oriented box corners in grid coordinates, seen from a given ego pose.
std::array<std::array<double, 2>, 4> box_corners_in_grid(double cx, double cy, double heading,
                                                         double length, double width,
                                                         const Se2& ego, const GridGeometry& g) {
  const double hl = 0.5 * length, hw = 0.5 * width;
  const double ch = std::cos(heading), sh = std::sin(heading);
  const std::array<std::array<double, 2>, 4> local = {
      {{+hl, +hw}, {+hl, -hw}, {-hl, -hw}, {-hl, +hw}}};
  std::array<std::array<double, 2>, 4> out{};
  for (int k = 0; k < 4; ++k) {
    const double wx = cx + ch * local[k][0] - sh * local[k][1];
    const double wy = cy + sh * local[k][0] + ch * local[k][1];
    const auto [ex, ey] = ego.apply_inv(wx, wy);
    const CellCoord cc = world_to_cell(ex, ey, g);
    out[k] = {cc.row, cc.col};
  }
  return out;
}

}  // namespace

FrameSequence simulate(const ScenarioConfig& cfg) {
  cfg.validate();
  const GridGeometry& g = cfg.geometry;
  const int H = g.height_cells, W = g.width_cells;

  FrameSequence seq;
  seq.geometry = g;
  seq.dt_s = cfg.dt_s;
  seq.frames.reserve(cfg.n_frames);
  seq.instances.reserve(cfg.n_frames);

  for (int fi = 0; fi < cfg.n_frames; ++fi) {
    const double t = fi * cfg.dt_s;
    Frame frame;
    frame.timestamp_s = t;
    frame.ego = cfg.ego.pose_at(t);
    frame.state = OccupancyStateGrid(H, W);
    frame.velocity = VelocityGrid(H, W);
    frame.semantic = SemanticGrid(H, W);
    const Se2 ego = Se2::from_pose(frame.ego);

    std::vector<VehicleInstance> insts;
    std::vector<char> occupied(static_cast<size_t>(H) * W, 0);

    for (const ObstacleSpec& ob : cfg.static_obstacles) {
      const auto corners =
          box_corners_in_grid(ob.x_m, ob.y_m, ob.heading_rad, ob.length_m, ob.width_m, ego, g);
      for_each_cell_in_quad(corners, H, W, [&](int r, int c) {
        frame.state.p_static.at(r, c) = 1.0;
        frame.state.p_dynamic.at(r, c) = 0.0;
        occupied[static_cast<size_t>(r) * W + c] = 1;
      });
    }

    for (const VehicleSpec& v : cfg.vehicles) {
      const Pose2D p = v.pose_at(t);
      const auto corners = box_corners_in_grid(p.x_m, p.y_m, p.heading_rad, v.length_m,
                                               v.width_m, ego, g);
      const bool dyn = v.is_dynamic();
      // Velocity components expressed along the ego grid axes.
      const auto [wvx, wvy] = v.velocity_at(t);
      const auto [evx, evy] = Se2{ego.c, ego.s, 0.0, 0.0}.apply_inv(wvx, wvy);
      for_each_cell_in_quad(corners, H, W, [&](int r, int c) {
        if (dyn) {
          frame.state.p_dynamic.at(r, c) = 1.0;
          frame.state.p_static.at(r, c) = 0.0;
          frame.velocity.vx.at(r, c) = evx;
          frame.velocity.vy.at(r, c) = evy;
        } else {
          frame.state.p_static.at(r, c) = 1.0;
          frame.state.p_dynamic.at(r, c) = 0.0;
          frame.velocity.vx.at(r, c) = 0.0;
          frame.velocity.vy.at(r, c) = 0.0;
        }
        frame.semantic.p_vehicle.at(r, c) = 1.0;
        occupied[static_cast<size_t>(r) * W + c] = 1;
      });

      if (fi == 0) {
        VehicleInstance probe;
        probe.corners = corners;
        if (!instance_in_grid(probe, g))
          throw ConfigError("vehicle " + std::to_string(v.id) + " starts outside the grid");
      }
      VehicleInstance inst;
      inst.id = v.id;
      const auto [ex, ey] = ego.apply_inv(p.x_m, p.y_m);
      const CellCoord cc = world_to_cell(ex, ey, g);
      inst.centroid_row = cc.row;
      inst.centroid_col = cc.col;
      inst.corners = corners;
      inst.dynamic = dyn;
      if (instance_in_grid(inst, g)) insts.push_back(inst);
    }

    // Cells shadowed from the ego by occupied cells become unknown. Occupied
    // cells keep their state (the DOGM's filter retains object extent).
    const double er = (H - 1) * 0.5, ec = (W - 1) * 0.5;
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        if (occupied[static_cast<size_t>(r) * W + c]) continue;
        const double dr = r - er, dc = c - ec;
        const double dist = std::sqrt(dr * dr + dc * dc);
        const int steps = static_cast<int>(dist / 0.25);
        bool shadowed = false;
        for (int s = 1; s < steps; ++s) {
          const double f = s / (dist / 0.25);
          const int sr = static_cast<int>(std::floor(er + dr * f + 0.5));
          const int sc = static_cast<int>(std::floor(ec + dc * f + 0.5));
          if (sr == r && sc == c) break;
          if (sr < 0 || sr >= H || sc < 0 || sc >= W) continue;
          if (occupied[static_cast<size_t>(sr) * W + sc]) {
            shadowed = true;
            break;
          }
        }
        if (shadowed) frame.state.p_unknown.at(r, c) = 1.0;
      }
    }

    if (cfg.noise.state_flip_prob > 0.0 || cfg.noise.velocity_sigma_mps > 0.0) {
      RandomStream rng(mix_seed(cfg.seed, static_cast<uint64_t>(fi)));
      if (cfg.noise.state_flip_prob > 0.0) {
        for (int r = 0; r < H; ++r) {
          for (int c = 0; c < W; ++c) {
            if (rng.uniform() >= cfg.noise.state_flip_prob) continue;
            const uint64_t state = rng.uniform_index(4);  // free/static/dynamic/unknown
            frame.state.p_static.at(r, c) = state == 1 ? 1.0 : 0.0;
            frame.state.p_dynamic.at(r, c) = state == 2 ? 1.0 : 0.0;
            frame.state.p_unknown.at(r, c) = state == 3 ? 1.0 : 0.0;
          }
        }
      }
      if (cfg.noise.velocity_sigma_mps > 0.0) {
        for (int r = 0; r < H; ++r) {
          for (int c = 0; c < W; ++c) {
            double vx = frame.velocity.vx.at(r, c) + cfg.noise.velocity_sigma_mps * rng.normal();
            double vy = frame.velocity.vy.at(r, c) + cfg.noise.velocity_sigma_mps * rng.normal();
            frame.velocity.vx.at(r, c) = std::clamp(vx, -cfg.v_max_mps, cfg.v_max_mps);
            frame.velocity.vy.at(r, c) = std::clamp(vy, -cfg.v_max_mps, cfg.v_max_mps);
          }
        }
      }
    }

    seq.frames.push_back(std::move(frame));
    seq.instances.push_back(std::move(insts));
  }
  return seq;
}

void ground_truth_flow(FrameSequence& seq) {
  const int H = seq.geometry.height_cells, W = seq.geometry.width_cells;
  for (int fi = 1; fi < seq.frame_count(); ++fi) {
    FlowGrid flow(H, W);
    std::unordered_map<int, const VehicleInstance*> prev;
    for (const VehicleInstance& v : seq.instances[fi - 1]) prev[v.id] = &v;
    for (const VehicleInstance& v : seq.instances[fi]) {
      const auto it = prev.find(v.id);
      if (it == prev.end()) continue;  // appeared this frame: zero flow
      const double fx = (it->second->centroid_col - v.centroid_col) / W;
      const double fy = (it->second->centroid_row - v.centroid_row) / H;
      for_each_cell_in_quad(v.corners, H, W, [&](int r, int c) {
        flow.fx.at(r, c) = fx;
        flow.fy.at(r, c) = fy;
      });
    }
    seq.frames[fi].flow = std::move(flow);
  }
}

namespace {

MotionSpec motion_from_json(const nlohmann::json& j) {
  MotionSpec m;
  const std::string type = j.at("type").get<std::string>();
  if (type == "parked") {
    m.type = MotionType::Parked;
  } else if (type == "cv") {
    m.type = MotionType::ConstantVelocity;
    m.speed_mps = j.at("speed_mps").get<double>();
  } else if (type == "turn") {
    m.type = MotionType::ConstantTurn;
    m.speed_mps = j.at("speed_mps").get<double>();
    m.yaw_rate_rps = j.at("yaw_rate_rps").get<double>();
  } else {
    throw ConfigError("unknown motion type: " + type);
  }
  return m;
}

nlohmann::json motion_to_json(const MotionSpec& m) {
  switch (m.type) {
    case MotionType::Parked:
      return {{"type", "parked"}};
    case MotionType::ConstantVelocity:
      return {{"type", "cv"}, {"speed_mps", m.speed_mps}};
    case MotionType::ConstantTurn:
      return {{"type", "turn"}, {"speed_mps", m.speed_mps}, {"yaw_rate_rps", m.yaw_rate_rps}};
  }
  return {};
}

VehicleSpec vehicle_from_json(const nlohmann::json& j) {
  VehicleSpec v;
  v.id = j.value("id", 0);
  v.length_m = j.at("length_m").get<double>();
  v.width_m = j.at("width_m").get<double>();
  v.x_m = j.value("x_m", 0.0);
  v.y_m = j.value("y_m", 0.0);
  v.heading_rad = j.value("heading_rad", 0.0);
  v.motion = motion_from_json(j.at("motion"));
  return v;
}

nlohmann::json vehicle_to_json(const VehicleSpec& v) {
  return {{"id", v.id},           {"length_m", v.length_m},
          {"width_m", v.width_m}, {"x_m", v.x_m},
          {"y_m", v.y_m},         {"heading_rad", v.heading_rad},
          {"motion", motion_to_json(v.motion)}};
}

}  // namespace

ScenarioConfig scenario_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad scenario JSON: " + std::string(e.what()));
  }
  try {
    ScenarioConfig cfg;
    cfg.seed = j.value("seed", 0ULL);
    cfg.n_frames = j.value("n_frames", 8);
    if (j.contains("geometry")) {
      const auto& g = j["geometry"];
      cfg.geometry.width_cells = g.value("width_cells", 24);
      cfg.geometry.height_cells = g.value("height_cells", 24);
      cfg.geometry.cell_size_m = g.value("cell_size_m", 0.25);
    }
    cfg.dt_s = j.value("dt_s", 0.5);
    cfg.v_max_mps = j.value("v_max_mps", 20.0);
    if (j.contains("ego")) cfg.ego = vehicle_from_json(j["ego"]);
    for (const auto& jv : j.value("vehicles", nlohmann::json::array()))
      cfg.vehicles.push_back(vehicle_from_json(jv));
    for (const auto& jo : j.value("static_obstacles", nlohmann::json::array())) {
      ObstacleSpec ob;
      ob.x_m = jo.value("x_m", 0.0);
      ob.y_m = jo.value("y_m", 0.0);
      ob.length_m = jo.at("length_m").get<double>();
      ob.width_m = jo.at("width_m").get<double>();
      ob.heading_rad = jo.value("heading_rad", 0.0);
      cfg.static_obstacles.push_back(ob);
    }
    if (j.contains("noise")) {
      cfg.noise.state_flip_prob = j["noise"].value("state_flip_prob", 0.0);
      cfg.noise.velocity_sigma_mps = j["noise"].value("velocity_sigma_mps", 0.0);
    }
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad scenario JSON: " + std::string(e.what()));
  }
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["n_frames"] = cfg.n_frames;
  j["geometry"] = {{"width_cells", cfg.geometry.width_cells},
                   {"height_cells", cfg.geometry.height_cells},
                   {"cell_size_m", cfg.geometry.cell_size_m}};
  j["dt_s"] = cfg.dt_s;
  j["v_max_mps"] = cfg.v_max_mps;
  j["ego"] = vehicle_to_json(cfg.ego);
  j["vehicles"] = nlohmann::json::array();
  for (const VehicleSpec& v : cfg.vehicles) j["vehicles"].push_back(vehicle_to_json(v));
  j["static_obstacles"] = nlohmann::json::array();
  for (const ObstacleSpec& ob : cfg.static_obstacles)
    j["static_obstacles"].push_back({{"x_m", ob.x_m},
                                     {"y_m", ob.y_m},
                                     {"length_m", ob.length_m},
                                     {"width_m", ob.width_m},
                                     {"heading_rad", ob.heading_rad}});
  j["noise"] = {{"state_flip_prob", cfg.noise.state_flip_prob},
                {"velocity_sigma_mps", cfg.noise.velocity_sigma_mps}};
  return j.dump(1);
}

ScenarioConfig random_scenario(const BatchSpec& spec, int index) {
  RandomStream rng(mix_seed(spec.seed, static_cast<uint64_t>(index)));
  ScenarioConfig cfg;
  cfg.seed = mix_seed(spec.seed, 0x5cebeuLL + index);
  cfg.n_frames = spec.n_frames;
  cfg.geometry = spec.geometry;
  cfg.dt_s = spec.dt_s;
  cfg.v_max_mps = spec.v_max_mps;
  cfg.noise = spec.noise;
  cfg.ego.motion.type = MotionType::Parked;

  const double half_x = 0.5 * cfg.geometry.extent_x_m();
  const double half_y = 0.5 * cfg.geometry.extent_y_m();
  const int n_vehicles =
      spec.vehicles_min +
      static_cast<int>(rng.uniform_index(spec.vehicles_max - spec.vehicles_min + 1));
  for (int i = 0; i < n_vehicles; ++i) {
    VehicleSpec v;
    v.id = i + 1;
    v.length_m = spec.vehicle_length_m;
    v.width_m = spec.vehicle_width_m;
    // Spawn with margin so the footprint starts inside the grid.
    v.x_m = rng.uniform(-half_x + v.length_m, half_x - v.length_m);
    v.y_m = rng.uniform(-half_y + v.length_m, half_y - v.length_m);
    v.heading_rad = rng.uniform(-M_PI, M_PI);
    if (rng.uniform() < spec.parked_fraction) {
      v.motion.type = MotionType::Parked;
    } else {
      const double speed = rng.uniform(spec.speed_min_mps, spec.speed_max_mps);
      if (rng.uniform() < spec.turn_fraction) {
        v.motion.type = MotionType::ConstantTurn;
        v.motion.speed_mps = speed;
        v.motion.yaw_rate_rps = rng.uniform(-spec.max_yaw_rate_rps, spec.max_yaw_rate_rps);
      } else {
        v.motion.type = MotionType::ConstantVelocity;
        v.motion.speed_mps = speed;
      }
    }
    cfg.vehicles.push_back(v);
  }
  const int n_obstacles =
      spec.obstacles_max > 0 ? static_cast<int>(rng.uniform_index(spec.obstacles_max + 1)) : 0;
  for (int i = 0; i < n_obstacles; ++i) {
    ObstacleSpec ob;
    ob.length_m = rng.uniform(0.5, 1.5) * spec.vehicle_width_m;
    ob.width_m = rng.uniform(0.5, 1.5) * spec.vehicle_width_m;
    ob.x_m = rng.uniform(-half_x + ob.length_m, half_x - ob.length_m);
    ob.y_m = rng.uniform(-half_y + ob.length_m, half_y - ob.length_m);
    ob.heading_rad = rng.uniform(-M_PI, M_PI);
    cfg.static_obstacles.push_back(ob);
  }
  return cfg;
}

}  // namespace gridflow
