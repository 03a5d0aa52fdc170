#pragma once

// Trajectory and detection metrics: absolute trajectory error (translation
// and rotation, after rigid alignment), relative pose error, false-positive
// ratio, and deterministic report/CSV rendering.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kfminset/errors.hpp"
#include "kfminset/geometry.hpp"
#include "kfminset/loopclosure.hpp"

namespace kfminset {

struct TrajectoryMetrics {
  double ate_trans = 0.0;  // meters, RMSE
  double ate_rot = 0.0;    // radians, RMSE of residual rotation angles
  double rpe_trans = 0.0;  // meters
  double rpe_rot = 0.0;    // radians
  std::size_t n_poses = 0;
};

struct DetectionMetrics {
  std::size_t candidates = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t verified_edges = 0;
  double fpr = 0.0;  // false_positives / max(1, candidates)
};

// Rigidly aligns est to gt (translations, closed form), then returns the
// RMSE of translation residuals and of residual rotation angles. Sequences
// are index-associated and must have equal length >= 3.
// Throws TooFewPoses, DimensionMismatch, DegenerateGeometry.
std::pair<double, double> ate(const std::vector<Pose>& gt,
                              const std::vector<Pose>& est);

// Associates by id first (intersection of keys, ascending).
std::pair<double, double> ate(const std::map<std::int64_t, Pose>& gt,
                              const std::map<std::int64_t, Pose>& est);

// 100 * (before - after) / before; negative when the trajectory got worse.
// Throws ZeroBaseline when before is not positive.
double ate_improvement(double ate_before, double ate_after);

// RMSE over i of the error between relative motions gt(i -> i+delta) and
// est(i -> i+delta). Throws TooFewPoses when fewer than one pair exists.
std::pair<double, double> rpe(const std::vector<Pose>& gt,
                              const std::vector<Pose>& est, int delta);

// False-positive ratio over materialized candidates; 0 on empty input.
double fpr(const std::vector<LoopCandidate>& candidates);

DetectionMetrics detection_metrics(const std::vector<CandidateRecord>& records);

// One comparison row per sampler method.
struct MethodResult {
  std::string method;
  std::size_t input_frames = 0;
  std::size_t kept = 0;
  double ate_t_before = 0.0;  // odometry trajectory over kept poses
  double ate_t_after = 0.0;   // optimized trajectory over kept poses
  double ate_t_improvement = 0.0;
  double ate_r_before = 0.0;
  double ate_r_after = 0.0;
  double ate_r_improvement = 0.0;
  double rpe_t_after = 0.0;
  double rpe_r_after = 0.0;
  DetectionMetrics detection;
  std::size_t peak_memory_bytes = 0;
  double total_seconds = 0.0;       // whole pipeline for this method
  double mean_query_seconds = 0.0;  // descriptor database scans
  double mean_solve_seconds = 0.0;  // pose graph re-optimizations
  std::size_t windows_solved = 0;   // sampler windows (0 for non-window methods)
  double mean_window_seconds = 0.0;
};

struct Report {
  std::uint64_t seed = 0;
  std::string config_echo;  // serialized run configuration
  std::vector<MethodResult> rows;
};

// Deterministic human-readable rendering: identical inputs produce identical
// bytes. Documents the fixed metric conventions (kept-poses-only ATE,
// candidate-denominator FPR, logical memory accounting).
std::string render_report(const Report& report);

// CSV renderings (all numbers printed with round-trip precision).
std::string summary_csv(const std::vector<MethodResult>& rows);
std::string series_csv(const std::string& value_header,
                       const std::vector<std::int64_t>& steps,
                       const std::vector<double>& values);
std::string series_csv(const std::string& value_header,
                       const std::vector<std::int64_t>& steps,
                       const std::vector<std::size_t>& values);

// Round-trip-exact formatting used by every artifact writer: shortest form
// when exact, otherwise full %.17g precision.
std::string format_double(double value);

}  // namespace kfminset
