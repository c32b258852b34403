#include <doctest.h>

#include "gridflow/rng.hpp"
#include "gridflow/types.hpp"

using namespace gridflow;

TEST_CASE("world_to_cell maps the grid center to the half-cell center") {
  GridGeometry g;  // 240x240 @ 0.25 m
  const CellCoord c = world_to_cell(0.0, 0.0, g);
  CHECK(c.row == 119.5);
  CHECK(c.col == 119.5);
}

TEST_CASE("one cell offset along +x") {
  GridGeometry g;
  const CellCoord c = world_to_cell(0.25, 0.0, g);
  CHECK(c.row == doctest::Approx(119.5));
  CHECK(c.col == doctest::Approx(120.5));
}

TEST_CASE("cell_to_world round trip on random points") {
  GridGeometry g{240, 240, 0.25, 1.5, -2.0};
  RandomStream rng(42);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-40.0, 40.0);
    const double y = rng.uniform(-40.0, 40.0);
    const CellCoord c = world_to_cell(x, y, g);
    const auto [bx, by] = cell_to_world(c.row, c.col, g);
    CHECK(std::abs(bx - x) <= 1e-9);
    CHECK(std::abs(by - y) <= 1e-9);
  }
}

TEST_CASE("out-of-bounds coordinates are returned, not clamped") {
  GridGeometry g{24, 24, 0.25};
  const CellCoord c = world_to_cell(100.0, -100.0, g);
  CHECK(c.col > 24.0);
  CHECK(c.row < 0.0);
}

TEST_CASE("wrap_angle lands in (-pi, pi]") {
  CHECK(wrap_angle(M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(3.0 * M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(0.5) == doctest::Approx(0.5));
  RandomStream rng(3);
  for (int i = 0; i < 50; ++i) {
    const double a = rng.uniform(-50.0, 50.0);
    const double w = wrap_angle(a);
    CHECK(w > -M_PI);
    CHECK(w <= M_PI);
    CHECK(std::abs(std::remainder(w - a, 2.0 * M_PI)) < 1e-9);
  }
}

TEST_CASE("geometry validation") {
  GridGeometry g{0, 24, 0.25};
  CHECK_THROWS_AS(g.validate(), ConfigError);
  GridGeometry g2{24, 24, -1.0};
  CHECK_THROWS_AS(g2.validate(), ConfigError);
}

TEST_CASE("frame sequence validation catches bad timestamps") {
  FrameSequence seq;
  seq.geometry = GridGeometry{4, 4, 0.25};
  seq.dt_s = 0.5;
  for (int i = 0; i < 3; ++i) {
    Frame f;
    f.timestamp_s = i * 0.5;
    f.state = OccupancyStateGrid(4, 4);
    f.velocity = VelocityGrid(4, 4);
    f.semantic = SemanticGrid(4, 4);
    seq.frames.push_back(std::move(f));
  }
  seq.instances.assign(3, {});
  CHECK_NOTHROW(seq.validate());
  seq.frames[2].timestamp_s = 0.9;
  CHECK_THROWS_AS(seq.validate(), ConfigError);
}
