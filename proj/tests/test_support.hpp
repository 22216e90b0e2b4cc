#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "aevac/geometry.hpp"

namespace aevac::testing {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string data_path(const std::string& rel) { return std::string(AEVAC_TEST_DATA) + "/" + rel; }

inline Box3 box(double x0, double y0, double x1, double y1, double z1 = 3.0) {
  return Box3::normalized({x0, y0, 0.0}, {x1, y1, z1});
}
inline Box3 vent(double x0, double y0, double x1, double y1) { return box(x0, y0, x1, y1, 2.0); }

/// Straight corridor [0, length] x [0, width] with an exit door spanning the east face.
inline FloorPlan straight_corridor(double length, double width) {
  FloorPlan p;
  p.floor_id = "F";
  p.corridors.push_back(box(0, 0, length, width));
  p.doors.push_back(vent(length, 0.2, length, width - 0.2));
  return p;
}

/// L-shaped corridor: COR0 [0,10]x[0,2] joined by a HOLE to COR1 [8,10]x[2,12],
/// exit door on the north face of COR1. Inner wall corner sits at (8.1, 1.9)
/// for 0.2 m walls.
inline FloorPlan l_corridor() {
  FloorPlan p;
  p.floor_id = "L";
  p.corridors.push_back(box(0, 0, 10, 2));
  p.corridors.push_back(box(8, 2, 10, 12));
  p.holes.push_back(vent(8, 2, 10, 2));
  p.doors.push_back(vent(8.3, 12, 9.7, 12));
  return p;
}

/// Grid of rooms with random column widths and row depths, doors between every
/// horizontally adjacent pair, one door per column boundary row, one exterior door.
inline FloorPlan random_grid_plan(std::mt19937_64& rng, int nx, int ny) {
  std::uniform_real_distribution<double> size(3.0, 7.0);
  std::vector<double> xs{0.0}, ys{0.0};
  for (int i = 0; i < nx; ++i) xs.push_back(xs.back() + std::round(size(rng) * 10) / 10);
  for (int j = 0; j < ny; ++j) ys.push_back(ys.back() + std::round(size(rng) * 10) / 10);
  FloorPlan p;
  p.floor_id = "G";
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) p.rooms.push_back(box(xs[i], ys[j], xs[i + 1], ys[j + 1]));
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 1; i < nx; ++i) {
      const double ym = 0.5 * (ys[j] + ys[j + 1]);
      p.doors.push_back(vent(xs[i], ym - 0.45, xs[i], ym + 0.45));
    }
  }
  for (int j = 1; j < ny; ++j) {
    const double xm = 0.5 * (xs[0] + xs[1]);
    p.doors.push_back(vent(xm - 0.45, ys[j], xm + 0.45, ys[j]));
  }
  const double xm = 0.5 * (xs[0] + xs[1]);
  p.doors.push_back(vent(xm - 0.5, 0.0, xm + 0.5, 0.0));
  return p;
}

}  // namespace aevac::testing
