#pragma once

// Run configuration (strict JSON with a version field), dataset ingestion
// from synthetic worlds or pose/descriptor files, and the two benchmark
// drivers: a batch pipeline (sample -> build graph -> detect loops ->
// optimize -> evaluate) and an online pipeline that streams keyframes,
// re-optimizing periodically while recording memory and timing series.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kfminset/evaluation.hpp"
#include "kfminset/loopclosure.hpp"
#include "kfminset/posegraph.hpp"
#include "kfminset/sampling.hpp"
#include "kfminset/synthworld.hpp"

namespace kfminset {

enum class TrajectoryFormat { kKitti, kTum };

// File-backed dataset: a ground-truth trajectory, optionally a separate
// odometry trajectory (absent = "no-drift mode": the single trajectory
// serves as both), a binary descriptor file, and optional per-keyframe
// scalar channels.
struct FileSource {
  std::filesystem::path poses;
  std::optional<std::filesystem::path> odometry;
  TrajectoryFormat format = TrajectoryFormat::kTum;
  std::filesystem::path descriptors;
  std::optional<std::filesystem::path> channels;
};

// Exactly one of the two alternatives is set.
struct DatasetSource {
  std::optional<WorldConfig> synthetic;
  std::optional<FileSource> files;
};

struct RunConfig {
  int version = 1;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  DatasetSource dataset;  // defaults to the default synthetic world
  std::vector<SamplerMethod> methods;  // default: {all, msa}
  SamplerConfig sampler;
  LoopParams loop;
  LmParams lm;
  int reopt_every = 25;  // online re-optimization period, insertions
  int rpe_delta = 1;     // relative-pose-error step, kept-pose indices
  // Per-step odometry noise scales used to weight composed odometry edges.
  double odom_sigma_t = 0.05;
  double odom_sigma_r = 0.002;
  // When set, every recorded wall time is 0.0 so that artifacts and reports
  // are byte-stable across runs; the measured work still executes.
  bool deterministic_timing = false;

  void validate() const;  // throws ConfigError
};

// Strict parser: unknown keys anywhere are rejected, `version` must be 1,
// and all values are type- and range-checked (throws ConfigError).
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

// Canonical serialization: keys sorted, numbers in shortest round-trip
// form. serialize(parse(serialize(cfg))) == serialize(cfg) byte-for-byte.
std::string serialize_config(const RunConfig& cfg);

struct LoadedDataset {
  Dataset data;
  bool no_drift = false;    // one trajectory served as both gt and odometry
  std::string description;  // human-readable source summary
};

// Synthetic sources are generated; file sources are parsed and validated
// (descriptor count must equal pose count, odometry length must match,
// channel ids must be in range). Throws ParseError / CountMismatch /
// BadMagic / ConfigError.
LoadedDataset load_dataset(const DatasetSource& source);

// ─── pipeline stages (shared by the drivers and the CLI subcommands) ────

struct SampleOutcome {
  std::vector<Keyframe> kept;          // stream order
  std::size_t windows_solved = 0;      // 0 for non-window methods
  double mean_window_seconds = 0.0;
};

SampleOutcome run_sampler(const SamplerMethod& method,
                          const SamplerConfig& cfg,
                          const std::vector<Keyframe>& frames,
                          bool zero_timing);

// Information matrix of an odometry edge composed over `steps` unit steps:
// the per-step covariances add, so the composed weight is the per-step
// diagonal information divided by the step count.
Mat6 composed_odometry_information(double sigma_t, double sigma_r,
                                   std::int64_t steps);

// Pose graph over the kept keyframes: node states dead-reckoned through the
// composed odometry relative motions (node 0 at the raw odometry pose),
// one odometry edge per consecutive kept pair, loop edges appended in
// detection order, first kept node gauge-fixed.
PoseGraph build_graph(const std::vector<Keyframe>& kept,
                      const std::vector<Pose>& odom_poses,
                      const std::vector<LoopEdge>& loops,
                      double odom_sigma_t, double odom_sigma_r);

// Everything one method produced; the drivers turn this into artifacts and
// a summary row.
struct MethodRun {
  SamplerMethod method;
  SampleOutcome sample;
  DetectionResult detection;
  PoseGraph graph;                        // pre-optimization states
  std::map<std::int64_t, Pose> optimized;
  std::vector<std::int64_t> solve_steps;  // node id at each re-optimization
  std::vector<double> solve_seconds;      // one entry per re-optimization
  double total_seconds = 0.0;
  MethodResult row;
};

// ─── drivers ─────────────────────────────────────────────────────────────

// Batch: per method, sample -> detect -> single optimization -> evaluate.
// Writes per-method artifacts (kept.csv, candidates.csv, graph.txt,
// graph_optimized.txt, kept_gt.tum, kept_odom.tum, optimized.tum,
// memory.csv, query_time.csv, pgo_time.csv) under
// output_dir/<method>/, plus output_dir/{config.json, report.txt,
// summary.csv}. Methods run in parallel up to thread_cap(). Deterministic
// given the seed. Errors are annotated with the failing stage and method.
Report run_batch(const RunConfig& cfg);

// Online: same artifact set, but keyframes stream through the sampler and
// the pose graph is re-optimized after every `reopt_every` insertions
// (and once at the end), so pgo_time.csv holds one row per re-optimization.
// With reopt_every >= number of kept keyframes the final trajectory equals
// the batch one.
Report run_online(const RunConfig& cfg);

// Stage isolation: recompute a method's summary-row metrics purely from its
// dumped artifacts (kept.csv, the three trajectory files, candidates.csv,
// memory.csv). Timing fields are not recoverable from artifacts and are
// reported as 0, which matches deterministic-timing runs exactly.
MethodResult evaluate_artifacts(const std::filesystem::path& method_dir,
                                const std::string& method_name,
                                int rpe_delta);

// Parallelism cap from KF_MINSET_THREADS (0 or unset = hardware
// concurrency). Throws ConfigError for unparseable values.
int thread_cap();

const char* trajectory_format_name(TrajectoryFormat fmt);
TrajectoryFormat parse_trajectory_format(const std::string& text);

}  // namespace kfminset
