#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kfminset/synthworld.hpp"

using namespace kfminset;

namespace {

WorldConfig small_circle_config() {
  WorldConfig cfg;
  cfg.seed = 3;
  cfg.trajectory = CircleTrajectory{20.0, 2};
  cfg.keyframe_spacing = 1.0;
  cfg.field.dimension = 64;
  cfg.field.num_frequencies = 32;
  return cfg;
}

}  // namespace

TEST_CASE("generate: deterministic for a fixed config") {
  const WorldConfig cfg = small_circle_config();
  const Dataset a = generate(cfg);
  const Dataset b = generate(cfg);
  REQUIRE(a.keyframes.size() == b.keyframes.size());
  for (std::size_t i = 0; i < a.keyframes.size(); ++i) {
    CHECK(a.gt_poses[i].translation == b.gt_poses[i].translation);
    CHECK(a.odom_poses[i].translation == b.odom_poses[i].translation);
    CHECK(a.odom_poses[i].rotation.coeffs() ==
          b.odom_poses[i].rotation.coeffs());
    CHECK(a.keyframes[i].descriptor.values == b.keyframes[i].descriptor.values);
    CHECK(a.keyframes[i].spaciousness == b.keyframes[i].spaciousness);
    CHECK(a.keyframes[i].entropy_proxy == b.keyframes[i].entropy_proxy);
  }
  CHECK(a.gt_loop_pairs == b.gt_loop_pairs);

  WorldConfig other = cfg;
  other.seed = 4;
  const Dataset c = generate(other);
  // Different seed moves the odometry (ground truth is seed-independent for
  // a circle).
  CHECK(a.gt_poses.back().translation == c.gt_poses.back().translation);
  CHECK(a.odom_poses.back().translation != c.odom_poses.back().translation);
}

TEST_CASE("generate: structural invariants") {
  const Dataset d = generate(small_circle_config());
  REQUIRE_FALSE(d.keyframes.empty());
  CHECK(d.gt_poses.size() == d.odom_poses.size());
  CHECK(d.gt_poses.size() == d.keyframes.size());
  CHECK(translation_distance(d.odom_poses[0], d.gt_poses[0]) == 0.0);
  for (std::size_t i = 0; i < d.keyframes.size(); ++i) {
    const Keyframe& kf = d.keyframes[i];
    CHECK(kf.id == static_cast<std::int64_t>(i));
    CHECK(kf.timestamp == doctest::Approx(0.1 * static_cast<double>(i)));
    // Keyframe pose is the odometry pose (what a live pipeline sees).
    CHECK(translation_distance(kf.pose, d.odom_poses[i]) == 0.0);
    REQUIRE(kf.spaciousness.has_value());
    REQUIRE(kf.entropy_proxy.has_value());
    CHECK(*kf.spaciousness > 0.0);
    CHECK(*kf.entropy_proxy >= 0.0);
    CHECK(std::isfinite(*kf.entropy_proxy));
  }
}

TEST_CASE("generate: noise-free odometry equals ground truth exactly") {
  WorldConfig cfg = small_circle_config();
  cfg.odom_sigma_t = 0.0;
  cfg.odom_sigma_r = 0.0;
  const Dataset d = generate(cfg);
  for (std::size_t i = 0; i < d.gt_poses.size(); ++i) {
    CHECK(translation_distance(d.odom_poses[i], d.gt_poses[i]) < 1e-9);
    CHECK(rotation_distance(d.odom_poses[i], d.gt_poses[i]) < 1e-9);
  }
}

TEST_CASE("generate: circle keyframe count and revisit coverage") {
  WorldConfig cfg;
  cfg.trajectory = CircleTrajectory{50.0, 2};
  cfg.keyframe_spacing = 1.0;
  cfg.field.dimension = 32;
  cfg.field.num_frequencies = 16;
  const Dataset d = generate(cfg);
  // floor(2 * pi * 50 * 2 / 1) = 628 keyframes.
  CHECK(d.keyframes.size() == 628);
  // Every keyframe has a partner on the other lap within 1 m.
  const std::size_t per_lap = 314;
  for (std::size_t i = 0; i < d.keyframes.size(); ++i) {
    bool found = false;
    for (const auto& [a, b] : d.gt_loop_pairs) {
      if (a == static_cast<std::int64_t>(i) ||
          b == static_cast<std::int64_t>(i)) {
        found = true;
        break;
      }
    }
    CHECK(found);
    (void)per_lap;
  }
  // Consecutive spacing: chord of a 1 m arc on a 50 m circle.
  for (std::size_t i = 1; i < 40; ++i) {
    CHECK(translation_distance(d.gt_poses[i - 1], d.gt_poses[i]) ==
          doctest::Approx(2 * 50.0 * std::sin(0.5 / 50.0)).epsilon(1e-9));
  }
}

TEST_CASE("gt_loop_pairs: matches an independent brute-force recount") {
  const Dataset d = generate(small_circle_config());
  std::set<std::pair<std::int64_t, std::int64_t>> expected;
  const auto n = static_cast<std::int64_t>(d.gt_poses.size());
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + 1; j < n; ++j) {
      if (j - i < kGtLoopGap) continue;
      const double dist = (d.gt_poses[i].translation -
                           d.gt_poses[j].translation)
                              .norm();
      if (dist < kGtLoopRadius) expected.insert({i, j});
    }
  }
  CHECK(d.gt_loop_pairs == expected);
  CHECK_FALSE(d.gt_loop_pairs.empty());

  // Radius 0 is strict: empty set even on coincident laps.
  CHECK(gt_loop_pairs(d, 0.0, 1).empty());
}

TEST_CASE("generate: straight single-block walk has no loop pairs") {
  WorldConfig cfg;
  cfg.seed = 9;
  cfg.trajectory = GridWalkTrajectory{1, 0.0};
  cfg.keyframe_spacing = 1.0;
  cfg.field.dimension = 16;
  cfg.field.num_frequencies = 8;
  const Dataset d = generate(cfg);
  CHECK(d.keyframes.size() >= 20);  // a 25 m block at 1 m spacing
  CHECK(d.gt_loop_pairs.empty());
}

TEST_CASE("generate: figure eight crosses itself") {
  WorldConfig cfg;
  cfg.seed = 5;
  cfg.trajectory = FigureEightTrajectory{60.0};
  cfg.keyframe_spacing = 1.0;
  cfg.field.dimension = 32;
  cfg.field.num_frequencies = 16;
  const Dataset d = generate(cfg);
  CHECK(d.keyframes.size() > 200);
  // Arc-length resampling: consecutive gaps equal the nominal spacing.
  for (std::size_t i = 1; i < d.gt_poses.size(); ++i) {
    CHECK(translation_distance(d.gt_poses[i - 1], d.gt_poses[i]) ==
          doctest::Approx(1.0).epsilon(0.02));
  }
  // The crossing at the origin yields ground-truth loop pairs.
  CHECK_FALSE(d.gt_loop_pairs.empty());
  bool near_origin = false;
  for (const auto& [i, j] : d.gt_loop_pairs) {
    if (d.gt_poses[static_cast<std::size_t>(i)].translation.norm() < 3.0) {
      near_origin = true;
    }
  }
  CHECK(near_origin);
}

TEST_CASE("generate: revisiting grid walk produces loop pairs") {
  WorldConfig cfg;
  cfg.seed = 13;
  cfg.trajectory = GridWalkTrajectory{60, 0.9};
  cfg.keyframe_spacing = 1.0;
  cfg.field.dimension = 16;
  cfg.field.num_frequencies = 8;
  const Dataset d = generate(cfg);
  CHECK(d.keyframes.size() > 1000);  // 60 blocks of 25 m at 1 m spacing
  CHECK_FALSE(d.gt_loop_pairs.empty());
}

TEST_CASE("generate: dead-reckoning drift grows with trajectory length") {
  double mean_short = 0.0, mean_long = 0.0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    WorldConfig cfg;
    cfg.seed = 100 + static_cast<std::uint64_t>(s);
    cfg.keyframe_spacing = 2.0;
    cfg.field.dimension = 8;
    cfg.field.num_frequencies = 4;
    cfg.odom_sigma_t = 0.05;
    cfg.trajectory = CircleTrajectory{20.0, 1};
    const Dataset a = generate(cfg);
    mean_short += translation_distance(a.odom_poses.back(), a.gt_poses.back());
    cfg.trajectory = CircleTrajectory{20.0, 4};
    const Dataset b = generate(cfg);
    mean_long += translation_distance(b.odom_poses.back(), b.gt_poses.back());
  }
  CHECK(mean_long / seeds > mean_short / seeds);
}

TEST_CASE("generate: descriptors live at ground-truth positions and match nearby revisits") {
  WorldConfig cfg = small_circle_config();
  cfg.field.length_scale = 12.0;
  const Dataset d = generate(cfg);
  // Bitwise check against a separately constructed field (noise-free).
  DescriptorField field(cfg.field);
  for (std::size_t i = 0; i < d.keyframes.size(); i += 7) {
    CHECK(d.keyframes[i].descriptor.values ==
          field.eval(d.gt_poses[i].translation).values);
  }
  // Pairs within the loop radius are highly similar (length_scale >= 10 m).
  for (const auto& [i, j] : d.gt_loop_pairs) {
    CHECK(cosine_similarity(
              d.keyframes[static_cast<std::size_t>(i)].descriptor,
              d.keyframes[static_cast<std::size_t>(j)].descriptor) > 0.95);
  }
}

TEST_CASE("spaciousness and entropy helpers") {
  CHECK(spaciousness_at(Vec3::Zero(), 4.0) == doctest::Approx(6.0));
  // The offset keeps the field positive everywhere.
  for (double x = -100; x <= 100; x += 7) {
    for (double y = -100; y <= 100; y += 7) {
      CHECK(spaciousness_at(Vec3(x, y, 0), 4.0) > 0.0);
    }
  }

  Eigen::VectorXd constant = Eigen::VectorXd::Ones(32);
  CHECK(histogram_entropy(constant, 16) == 0.0);
  Eigen::VectorXd split(64);
  split.head(32).setZero();
  split.tail(32).setOnes();
  CHECK(histogram_entropy(split, 16) == doctest::Approx(std::log(2.0)));
  Eigen::VectorXd quarters(8);
  quarters << 0, 0, 1, 1, 2, 2, 3, 3;  // four equally filled bins
  CHECK(histogram_entropy(quarters, 4) == doctest::Approx(std::log(4.0)));
  CHECK_THROWS_AS(histogram_entropy(split, 0), ConfigError);
}

TEST_CASE("world config validation") {
  WorldConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.keyframe_spacing = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = WorldConfig{};
  cfg.odom_sigma_t = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = WorldConfig{};
  cfg.trajectory = CircleTrajectory{50.0, 0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = WorldConfig{};
  cfg.trajectory = GridWalkTrajectory{10, 1.5};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = WorldConfig{};
  cfg.trajectory = FigureEightTrajectory{-2.0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
