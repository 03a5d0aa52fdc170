#pragma once

// Deterministic synthetic dataset generator: planar ground-truth trajectories
// with revisits, drifting dead-reckoned odometry, descriptor streams from the
// smooth descriptor field, and scalar channels for the baseline samplers.

#include <cstdint>
#include <set>
#include <utility>
#include <variant>
#include <vector>

#include "kfminset/descriptors.hpp"
#include "kfminset/errors.hpp"
#include "kfminset/geometry.hpp"
#include "kfminset/sampling.hpp"

namespace kfminset {

struct CircleTrajectory {
  double radius = 50.0;  // meters
  int laps = 2;
};

// Gerono lemniscate (a figure of eight crossing itself at the origin).
struct FigureEightTrajectory {
  double scale = 60.0;  // meters
};

// Random walk over a square street lattice; high revisit probability steers
// the walk back onto intersections it has already visited.
struct GridWalkTrajectory {
  int blocks = 40;            // number of block edges traversed
  double revisit_prob = 0.5;  // bias toward previously visited intersections
};

using Trajectory =
    std::variant<CircleTrajectory, FigureEightTrajectory, GridWalkTrajectory>;

// Street-block edge length for grid walks, meters.
inline constexpr double kGridBlockLength = 25.0;

struct WorldConfig {
  std::uint64_t seed = 1;
  Trajectory trajectory = CircleTrajectory{};
  double keyframe_spacing = 1.0;  // meters between consecutive keyframes
  double odom_sigma_t = 0.05;     // per-step dead-reckoning noise, meters
  double odom_sigma_r = 0.002;    // per-step dead-reckoning noise, radians
  DescriptorFieldParams field;
  double spaciousness_field_scale = 4.0;

  void validate() const;  // throws ConfigError
};

// Ground-truth loop pairs are precomputed with this radius and id gap;
// gt_loop_pairs() below recomputes them for other choices.
inline constexpr double kGtLoopRadius = 1.0;
inline constexpr std::int64_t kGtLoopGap = 50;

struct Dataset {
  std::vector<Pose> gt_poses;
  std::vector<Pose> odom_poses;  // odom_poses[0] == gt_poses[0]
  // keyframes[i].pose is the odometry pose (what a live system would see);
  // descriptors are evaluated at the ground-truth position (the place that
  // is actually being observed). Channels are populated for every keyframe.
  std::vector<Keyframe> keyframes;
  std::set<std::pair<std::int64_t, std::int64_t>> gt_loop_pairs;
};

// Deterministic for a given config. Throws ConfigError on invalid configs.
Dataset generate(const WorldConfig& cfg);

// Exact brute-force pair set: i < j, j - i >= exclusion_gap, and ground-truth
// translation distance strictly below radius.
std::set<std::pair<std::int64_t, std::int64_t>> gt_loop_pairs(
    const Dataset& dataset, double radius, std::int64_t exclusion_gap);

// Entropy (natural log) of the histogram of vector entries over `bins`
// equal-width bins spanning [min, max] of the entries; 0 for a constant
// vector. Used for the entropy_proxy channel.
double histogram_entropy(const Eigen::VectorXd& values, int bins);

// Smooth positive scalar field used for the spaciousness channel:
// scale * (1.5 + sin(0.05 x) * cos(0.05 y)).
double spaciousness_at(const Vec3& position, double scale);

}  // namespace kfminset
