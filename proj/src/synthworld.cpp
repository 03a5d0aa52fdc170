#include "kfminset/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kfminset/rng.hpp"

namespace kfminset {

void WorldConfig::validate() const {
  if (!(keyframe_spacing > 0.0)) {
    throw ConfigError("keyframe_spacing must be > 0");
  }
  if (odom_sigma_t < 0.0 || odom_sigma_r < 0.0) {
    throw ConfigError("odometry noise sigmas must be >= 0");
  }
  if (!(spaciousness_field_scale > 0.0)) {
    throw ConfigError("spaciousness_field_scale must be > 0");
  }
  field.validate();
  if (const auto* c = std::get_if<CircleTrajectory>(&trajectory)) {
    if (!(c->radius > 0.0)) throw ConfigError("circle radius must be > 0");
    if (c->laps < 1) throw ConfigError("circle laps must be >= 1");
  } else if (const auto* f = std::get_if<FigureEightTrajectory>(&trajectory)) {
    if (!(f->scale > 0.0)) throw ConfigError("figure-eight scale must be > 0");
  } else if (const auto* g = std::get_if<GridWalkTrajectory>(&trajectory)) {
    if (g->blocks < 1) throw ConfigError("grid walk needs >= 1 block");
    if (g->revisit_prob < 0.0 || g->revisit_prob > 1.0) {
      throw ConfigError("revisit_prob must lie in [0, 1]");
    }
  }
}

double spaciousness_at(const Vec3& position, double scale) {
  return scale *
         (1.5 + std::sin(0.05 * position.x()) * std::cos(0.05 * position.y()));
}

double histogram_entropy(const Eigen::VectorXd& values, int bins) {
  if (bins < 1) throw ConfigError("histogram needs >= 1 bin");
  if (values.size() == 0) return 0.0;
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  if (!(hi > lo)) return 0.0;  // constant vector carries no information
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    int bin = static_cast<int>((values(i) - lo) / (hi - lo) * bins);
    bin = std::clamp(bin, 0, bins - 1);  // the max lands in the last bin
    ++counts[static_cast<std::size_t>(bin)];
  }
  double entropy = 0.0;
  const double n = static_cast<double>(values.size());
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    entropy -= p * std::log(p);
  }
  return entropy;
}

namespace {

// Resamples a polyline at fixed arc-length spacing. Emits the first point,
// then one pose every `spacing` meters of arc; heading follows the segment
// direction. The trailing partial segment emits nothing.
std::vector<Pose> resample_polyline(const std::vector<Vec3>& points,
                                    double spacing) {
  std::vector<Pose> out;
  if (points.size() < 2) return out;
  const auto yaw_of = [](const Vec3& d) { return std::atan2(d.y(), d.x()); };

  double next_arc = 0.0;  // arc position of the next pose to emit
  double walked = 0.0;    // arc position at the start of the current segment
  for (std::size_t s = 0; s + 1 < points.size(); ++s) {
    const Vec3 a = points[s];
    const Vec3 b = points[s + 1];
    const double len = (b - a).norm();
    if (len < 1e-12) continue;
    const double yaw = yaw_of(b - a);
    while (next_arc <= walked + len) {
      const double t = (next_arc - walked) / len;
      const Vec3 p = a + t * (b - a);
      out.push_back(Pose::Planar(p.x(), p.y(), yaw));
      next_arc += spacing;
    }
    walked += len;
  }
  return out;
}

std::vector<Pose> circle_poses(const CircleTrajectory& c, double spacing) {
  const double total_arc = 2.0 * std::numbers::pi * c.radius * c.laps;
  const auto count = static_cast<std::size_t>(std::floor(total_arc / spacing));
  std::vector<Pose> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double theta = static_cast<double>(i) * spacing / c.radius;
    out.push_back(Pose::Planar(c.radius * std::cos(theta),
                               c.radius * std::sin(theta),
                               theta + std::numbers::pi / 2));
  }
  return out;
}

std::vector<Pose> figure_eight_poses(const FigureEightTrajectory& f,
                                     double spacing) {
  // Gerono lemniscate x = s sin(t), y = s sin(t) cos(t): dense parametric
  // samples, then arc-length resampling.
  const int dense = 200000;
  std::vector<Vec3> polyline;
  polyline.reserve(dense + 1);
  for (int i = 0; i <= dense; ++i) {
    const double t = 2.0 * std::numbers::pi * i / dense;
    polyline.emplace_back(f.scale * std::sin(t),
                          f.scale * std::sin(t) * std::cos(t), 0.0);
  }
  return resample_polyline(polyline, spacing);
}

std::vector<Pose> grid_walk_poses(const GridWalkTrajectory& g, double spacing,
                                  Rng& rng) {
  // Intersections form a side x side lattice; the walk starts at a corner
  // and moves one block edge at a time, preferring visited intersections
  // with probability revisit_prob.
  const int side =
      std::max(3, static_cast<int>(std::ceil(std::sqrt(
                      static_cast<double>(g.blocks)))) +
                      1);
  std::set<std::pair<int, int>> visited;
  std::vector<Vec3> polyline;
  int x = 0, y = 0;
  visited.insert({x, y});
  polyline.emplace_back(0.0, 0.0, 0.0);
  for (int step = 0; step < g.blocks; ++step) {
    std::vector<std::pair<int, int>> neighbors;
    for (const auto& [dx, dy] :
         {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1},
          std::pair{0, -1}}) {
      const int nx = x + dx, ny = y + dy;
      if (nx < 0 || ny < 0 || nx >= side || ny >= side) continue;
      neighbors.emplace_back(nx, ny);
    }
    std::vector<std::pair<int, int>> old_neighbors;
    for (const auto& n : neighbors) {
      if (visited.count(n) != 0) old_neighbors.push_back(n);
    }
    const auto& pool = (!old_neighbors.empty() &&
                        rng.uniform01() < g.revisit_prob)
                           ? old_neighbors
                           : neighbors;
    const auto [nx, ny] = pool[rng.uniform_index(pool.size())];
    x = nx;
    y = ny;
    visited.insert({x, y});
    polyline.emplace_back(kGridBlockLength * x, kGridBlockLength * y, 0.0);
  }
  return resample_polyline(polyline, spacing);
}

}  // namespace

std::set<std::pair<std::int64_t, std::int64_t>> gt_loop_pairs(
    const Dataset& dataset, double radius, std::int64_t exclusion_gap) {
  std::set<std::pair<std::int64_t, std::int64_t>> pairs;
  const auto n = static_cast<std::int64_t>(dataset.gt_poses.size());
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + exclusion_gap; j < n; ++j) {
      if ((dataset.gt_poses[static_cast<std::size_t>(i)].translation -
           dataset.gt_poses[static_cast<std::size_t>(j)].translation)
              .norm() < radius) {
        pairs.insert({i, j});
      }
    }
  }
  return pairs;
}

Dataset generate(const WorldConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  Dataset out;
  if (const auto* c = std::get_if<CircleTrajectory>(&cfg.trajectory)) {
    out.gt_poses = circle_poses(*c, cfg.keyframe_spacing);
  } else if (const auto* f =
                 std::get_if<FigureEightTrajectory>(&cfg.trajectory)) {
    out.gt_poses = figure_eight_poses(*f, cfg.keyframe_spacing);
  } else {
    out.gt_poses = grid_walk_poses(std::get<GridWalkTrajectory>(cfg.trajectory),
                                   cfg.keyframe_spacing, rng);
  }

  // Dead-reckoned odometry: compose ground-truth relative motions, each
  // perturbed by per-step Gaussian noise.
  out.odom_poses.reserve(out.gt_poses.size());
  if (!out.gt_poses.empty()) out.odom_poses.push_back(out.gt_poses[0]);
  for (std::size_t i = 0; i + 1 < out.gt_poses.size(); ++i) {
    Twist noise;
    noise.rho = Vec3(rng.normal(cfg.odom_sigma_t), rng.normal(cfg.odom_sigma_t),
                     rng.normal(cfg.odom_sigma_t));
    noise.phi = Vec3(rng.normal(cfg.odom_sigma_r), rng.normal(cfg.odom_sigma_r),
                     rng.normal(cfg.odom_sigma_r));
    const Pose step =
        compose(relative(out.gt_poses[i], out.gt_poses[i + 1]), se3_exp(noise));
    out.odom_poses.push_back(compose(out.odom_poses.back(), step));
  }

  DescriptorField field(cfg.field);
  out.keyframes.reserve(out.gt_poses.size());
  for (std::size_t i = 0; i < out.gt_poses.size(); ++i) {
    Keyframe kf;
    kf.id = static_cast<std::int64_t>(i);
    kf.timestamp = 0.1 * static_cast<double>(i);
    kf.pose = out.odom_poses[i];
    kf.descriptor = cfg.field.noise_sigma > 0.0
                        ? field.eval(out.gt_poses[i].translation, rng)
                        : field.eval(out.gt_poses[i].translation);
    kf.spaciousness = spaciousness_at(out.gt_poses[i].translation,
                                      cfg.spaciousness_field_scale);
    kf.entropy_proxy = histogram_entropy(kf.descriptor.values, 16);
    out.keyframes.push_back(std::move(kf));
  }

  out.gt_loop_pairs = gt_loop_pairs(out, kGtLoopRadius, kGtLoopGap);
  return out;
}

}  // namespace kfminset
