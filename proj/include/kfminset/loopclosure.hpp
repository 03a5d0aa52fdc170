#pragma once

// Descriptor database over kept keyframes, brute-force similarity search for
// loop-closure candidates, ground-truth classification, and a simulated
// registration verifier that turns accepted candidates into weighted graph
// edges.

#include <cstdint>
#include <optional>
#include <unordered_set>
#include <vector>

#include "kfminset/descriptors.hpp"
#include "kfminset/errors.hpp"
#include "kfminset/geometry.hpp"
#include "kfminset/rng.hpp"
#include "kfminset/sampling.hpp"

namespace kfminset {

enum class CandidateClass { kTruePositive, kFalsePositive };

// A similarity match between a query keyframe and a stored keyframe.
// Candidates below the similarity threshold are never materialized.
struct LoopCandidate {
  std::int64_t query_id = 0;
  std::int64_t match_id = 0;
  double similarity = 0.0;   // clamped cosine, in [0, 1], always > tau
  double gt_distance = 0.0;  // meters between the ground-truth positions
  CandidateClass classification = CandidateClass::kFalsePositive;
};

// A verified loop-closure constraint between keyframes i (earlier match) and
// j (later query): measurement is the relative pose taking frame i to frame j.
struct LoopEdge {
  std::int64_t i = 0;
  std::int64_t j = 0;
  Pose measurement;
  Mat6 information = Mat6::Identity();
  double residual = 0.0;  // meters, < verification threshold
};

// A candidate together with its verification outcome, as dumped to CSV.
struct CandidateRecord {
  LoopCandidate candidate;
  bool verified = false;
  double residual = 0.0;
};

struct LoopParams {
  double tau = 0.8;                 // similarity threshold
  int k = 1;                        // max matches returned per query
  std::int64_t exclusion_gap = 50;  // min id gap between query and match
  double gt_radius = 1.0;           // meters; true positive iff closer
  double verify_threshold = 0.3;    // meters; accepted iff residual below
  double sim_sigma_t = 0.05;        // registration-sim translation noise (m)
  double sim_sigma_r = 0.005;       // registration-sim rotation noise (rad)
  double sim_sigma_res = 0.05;      // registration-sim residual scale (m)

  void validate() const;  // throws ConfigError
};

struct VerifyOutcome {
  bool verified = false;
  double residual = 0.0;
  std::optional<LoopEdge> edge;  // present iff verified
};

// Exact brute-force descriptor index. Queries are read-only and may run
// concurrently between inserts; inserts require exclusive access.
class DescriptorDb {
 public:
  struct Entry {
    std::int64_t id;
    Descriptor descriptor;
    Vec3 gt_position;
  };

  // Logical accounting: each entry costs dimension * 4 bytes (float storage)
  // plus this fixed bookkeeping overhead.
  static constexpr std::size_t kEntryOverheadBytes = 32;

  // Indexes the keyframe's descriptor under its id. The ground-truth position
  // is kept solely to classify future candidates. Throws DuplicateId.
  void insert(const Keyframe& kf, const Vec3& gt_position);

  // Scans every stored entry, keeping matches with similarity > tau whose id
  // differs from the query id by at least exclusion_gap. Returns at most k
  // candidates sorted by descending similarity (ties: ascending match id).
  // Classification: true positive iff gt_distance < gt_radius.
  std::vector<LoopCandidate> query_candidates(const Keyframe& query,
                                              const Vec3& query_gt_position,
                                              const LoopParams& params) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t memory_bytes() const { return memory_bytes_; }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_set<std::int64_t> ids_;
  std::size_t memory_bytes_ = 0;
};

// Builds the diagonal information matrix for a measurement with the given
// noise scales: translation block 1/sigma_t^2, rotation block 1/sigma_r^2.
// Sigmas are floored at 1e-6 so noise-free configs stay finite.
Mat6 diagonal_information(double sigma_t, double sigma_r);

// Simulated registration replacing point-cloud alignment. True positives
// yield the ground-truth relative pose perturbed by zero-mean noise
// (sim_sigma_t, sim_sigma_r) and a residual drawn as |Normal(0, sigma_res)|.
// False positives draw their residual from Uniform[0.2, 5.0], so most but
// not all are rejected; a false positive that slips through carries a small
// random transform (a corrupt alignment), not the ground-truth one.
// Throws MissingGroundTruth when either id has no ground-truth pose.
VerifyOutcome verify_candidate(const LoopCandidate& c,
                               const std::vector<Pose>& gt_poses,
                               const LoopParams& params, Rng& rng);

// Full detection sweep over a kept-keyframe stream: for each keyframe, in
// order, query the database, verify each candidate, then insert the keyframe.
// Querying before inserting prevents self-matches.
struct DetectionResult {
  std::vector<CandidateRecord> records;   // every materialized candidate
  std::vector<LoopEdge> edges;            // verified candidates only
  std::vector<std::int64_t> steps;        // kept keyframe id per query
  std::vector<double> query_seconds;      // wall time per query
  std::vector<std::size_t> memory_bytes;  // cumulative bytes after insert
};

// gt_poses is indexed by keyframe id. When zero_timing is set the recorded
// query times are all 0.0 (for byte-stable artifacts); the queries still run.
DetectionResult detect_all(const std::vector<Keyframe>& kept,
                           const std::vector<Pose>& gt_poses,
                           const LoopParams& params, Rng& rng,
                           bool zero_timing = false);

}  // namespace kfminset
