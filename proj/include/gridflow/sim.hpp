#pragma once

// Synthetic driving scenes: moving and parked vehicles, static obstacles and
// an ego vehicle, rendered per frame into DOGM-style occupancy state grids,
// velocity grids, vehicle semantic grids and instance annotations. Frames are
// ego-centric (ego at the grid center, grid axes following the ego axes).

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gridflow/types.hpp"

namespace gridflow {

enum class MotionType { ConstantVelocity, ConstantTurn, Parked };

struct MotionSpec {
  MotionType type = MotionType::Parked;
  double speed_mps = 0.0;
  double yaw_rate_rps = 0.0;  // constant-turn only
};

struct VehicleSpec {
  int id = 0;
  double length_m = 4.0;
  double width_m = 2.0;
  double x_m = 0.0;
  double y_m = 0.0;
  double heading_rad = 0.0;
  MotionSpec motion;

  Pose2D pose_at(double t) const;
  // World-frame velocity components at time t.
  std::pair<double, double> velocity_at(double t) const;
  bool is_dynamic() const {
    return motion.type != MotionType::Parked && motion.speed_mps > 0.0;
  }
};

struct ObstacleSpec {
  double x_m = 0.0;
  double y_m = 0.0;
  double length_m = 1.0;
  double width_m = 1.0;
  double heading_rad = 0.0;
};

struct SensorNoise {
  double state_flip_prob = 0.0;   // per-cell chance of a random pure state
  double velocity_sigma_mps = 0.0;
};

struct ScenarioConfig {
  uint64_t seed = 0;
  int n_frames = 8;
  GridGeometry geometry{24, 24, 0.25};
  double dt_s = 0.5;
  double v_max_mps = 20.0;
  VehicleSpec ego;  // footprint is not rendered; ego is the sensor origin
  std::vector<VehicleSpec> vehicles;
  std::vector<ObstacleSpec> static_obstacles;
  SensorNoise noise;

  void validate() const;
};

// Deterministic for a fixed config (including seed). Rejects configs whose
// vehicles start fully outside the grid.
FrameSequence simulate(const ScenarioConfig& cfg);

// Fills FlowGrid for frames 1..end from instance centroid displacements:
// every footprint cell of a vehicle present in consecutive frames receives
// the backward displacement centroid_prev - centroid_now, normalized by the
// grid side. Frame 0 keeps no flow.
void ground_truth_flow(FrameSequence& seq);

// Visits every cell whose center lies inside the convex quad (grid coords).
void for_each_cell_in_quad(const std::array<std::array<double, 2>, 4>& corners, int rows,
                           int cols, const std::function<void(int, int)>& fn);

// Scenario JSON (schema documented in the README).
ScenarioConfig scenario_from_json(const std::string& text);
std::string scenario_to_json(const ScenarioConfig& cfg);

// Randomized scenario family for corpus generation.
struct BatchSpec {
  int count = 100;
  uint64_t seed = 0;
  int n_frames = 8;
  GridGeometry geometry{24, 24, 0.25};
  double dt_s = 0.5;
  double v_max_mps = 5.0;
  int vehicles_min = 1;
  int vehicles_max = 4;
  double speed_min_mps = 0.5;
  double speed_max_mps = 1.5;
  double turn_fraction = 0.3;    // of moving vehicles
  double parked_fraction = 0.25; // of all vehicles
  double max_yaw_rate_rps = 0.35;
  int obstacles_max = 2;
  double vehicle_length_m = 2.0;
  double vehicle_width_m = 1.0;
  SensorNoise noise;
  double train_fraction = 0.8;
};

ScenarioConfig random_scenario(const BatchSpec& spec, int index);

}  // namespace gridflow
