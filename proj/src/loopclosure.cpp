#include "kfminset/loopclosure.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>

namespace kfminset {

void LoopParams::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ConfigError("similarity threshold must lie in (0, 1)");
  }
  if (k < 1) throw ConfigError("max matches per query must be >= 1");
  if (exclusion_gap < 0) throw ConfigError("exclusion gap must be >= 0");
  if (!(gt_radius > 0.0)) throw ConfigError("true-match radius must be > 0");
  if (!(verify_threshold > 0.0)) {
    throw ConfigError("verification threshold must be > 0");
  }
  if (sim_sigma_t < 0.0 || sim_sigma_r < 0.0 || sim_sigma_res < 0.0) {
    throw ConfigError("registration-sim sigmas must be >= 0");
  }
}

void DescriptorDb::insert(const Keyframe& kf, const Vec3& gt_position) {
  if (!ids_.insert(kf.id).second) {
    throw DuplicateId("keyframe id " + std::to_string(kf.id) +
                      " already indexed");
  }
  entries_.push_back(Entry{kf.id, kf.descriptor, gt_position});
  memory_bytes_ +=
      static_cast<std::size_t>(kf.descriptor.dimension()) * 4 +
      kEntryOverheadBytes;
}

std::vector<LoopCandidate> DescriptorDb::query_candidates(
    const Keyframe& query, const Vec3& query_gt_position,
    const LoopParams& params) const {
  std::vector<LoopCandidate> out;
  for (const Entry& e : entries_) {
    if (e.id == query.id) continue;
    if (std::llabs(query.id - e.id) < params.exclusion_gap) continue;
    const double sim = cosine_similarity(query.descriptor, e.descriptor);
    if (!(sim > params.tau)) continue;
    LoopCandidate c;
    c.query_id = query.id;
    c.match_id = e.id;
    c.similarity = sim;
    c.gt_distance = (query_gt_position - e.gt_position).norm();
    c.classification = c.gt_distance < params.gt_radius
                           ? CandidateClass::kTruePositive
                           : CandidateClass::kFalsePositive;
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(),
            [](const LoopCandidate& a, const LoopCandidate& b) {
              if (a.similarity != b.similarity) {
                return a.similarity > b.similarity;
              }
              return a.match_id < b.match_id;
            });
  if (out.size() > static_cast<std::size_t>(params.k)) {
    out.resize(static_cast<std::size_t>(params.k));
  }
  return out;
}

Mat6 diagonal_information(double sigma_t, double sigma_r) {
  const double st = std::max(sigma_t, 1e-6);
  const double sr = std::max(sigma_r, 1e-6);
  Mat6 info = Mat6::Zero();
  info.diagonal().head<3>().setConstant(1.0 / (st * st));
  info.diagonal().tail<3>().setConstant(1.0 / (sr * sr));
  return info;
}

namespace {

// A unit vector drawn uniformly on the sphere.
Vec3 random_axis(Rng& rng) {
  while (true) {
    const Vec3 v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-9) return v / n;
  }
}

}  // namespace

VerifyOutcome verify_candidate(const LoopCandidate& c,
                               const std::vector<Pose>& gt_poses,
                               const LoopParams& params, Rng& rng) {
  const auto lookup = [&](std::int64_t id) -> const Pose& {
    if (id < 0 || id >= static_cast<std::int64_t>(gt_poses.size())) {
      throw MissingGroundTruth("no ground-truth pose for keyframe id " +
                               std::to_string(id));
    }
    return gt_poses[static_cast<std::size_t>(id)];
  };

  VerifyOutcome out;
  if (c.classification == CandidateClass::kTruePositive) {
    const Pose& earlier = lookup(c.match_id);
    const Pose& later = lookup(c.query_id);
    Twist noise;
    noise.rho = Vec3(rng.normal(params.sim_sigma_t),
                     rng.normal(params.sim_sigma_t),
                     rng.normal(params.sim_sigma_t));
    noise.phi = Vec3(rng.normal(params.sim_sigma_r),
                     rng.normal(params.sim_sigma_r),
                     rng.normal(params.sim_sigma_r));
    const Pose measurement = compose(relative(earlier, later), se3_exp(noise));
    out.residual = std::abs(rng.normal(params.sim_sigma_res));
    out.verified = out.residual < params.verify_threshold;
    if (out.verified) {
      LoopEdge e;
      e.i = c.match_id;
      e.j = c.query_id;
      e.measurement = measurement;
      e.information =
          diagonal_information(params.sim_sigma_t, params.sim_sigma_r);
      e.residual = out.residual;
      out.edge = e;
    }
  } else {
    lookup(c.match_id);  // ground truth must exist even for rejects
    lookup(c.query_id);
    out.residual = rng.uniform(0.2, 5.0);
    out.verified = out.residual < params.verify_threshold;
    if (out.verified) {
      // A corrupt alignment: the places only look alike, so the "registered"
      // transform is a small random motion unrelated to the true geometry.
      Twist bogus;
      bogus.rho = Vec3(rng.normal(1.0), rng.normal(1.0), rng.normal(1.0));
      bogus.phi = rng.normal(0.1) * random_axis(rng);
      LoopEdge e;
      e.i = c.match_id;
      e.j = c.query_id;
      e.measurement = se3_exp(bogus);
      e.information =
          diagonal_information(params.sim_sigma_t, params.sim_sigma_r);
      e.residual = out.residual;
      out.edge = e;
    }
  }
  return out;
}

DetectionResult detect_all(const std::vector<Keyframe>& kept,
                           const std::vector<Pose>& gt_poses,
                           const LoopParams& params, Rng& rng,
                           bool zero_timing) {
  params.validate();
  DetectionResult res;
  DescriptorDb db;
  res.steps.reserve(kept.size());
  res.query_seconds.reserve(kept.size());
  res.memory_bytes.reserve(kept.size());
  for (const Keyframe& kf : kept) {
    if (kf.id < 0 || kf.id >= static_cast<std::int64_t>(gt_poses.size())) {
      throw MissingGroundTruth("no ground-truth pose for keyframe id " +
                               std::to_string(kf.id));
    }
    const Vec3 gt = gt_poses[static_cast<std::size_t>(kf.id)].translation;

    const auto t0 = std::chrono::steady_clock::now();
    const auto candidates = db.query_candidates(kf, gt, params);
    const auto t1 = std::chrono::steady_clock::now();

    for (const LoopCandidate& c : candidates) {
      const VerifyOutcome v = verify_candidate(c, gt_poses, params, rng);
      res.records.push_back(CandidateRecord{c, v.verified, v.residual});
      if (v.edge) res.edges.push_back(*v.edge);
    }
    db.insert(kf, gt);

    res.steps.push_back(kf.id);
    res.query_seconds.push_back(
        zero_timing ? 0.0
                    : std::chrono::duration<double>(t1 - t0).count());
    res.memory_bytes.push_back(db.memory_bytes());
  }
  return res;
}

}  // namespace kfminset
