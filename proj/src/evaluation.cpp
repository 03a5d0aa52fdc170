#include "kfminset/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace kfminset {

std::string format_double(double value) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
    if (std::strtod(buf, nullptr) == value) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::pair<double, double> ate(const std::vector<Pose>& gt,
                              const std::vector<Pose>& est) {
  if (gt.size() != est.size()) {
    throw DimensionMismatch("trajectories differ in length: " +
                            std::to_string(gt.size()) + " vs " +
                            std::to_string(est.size()));
  }
  if (gt.size() < 3) {
    throw TooFewPoses("need at least 3 associated poses, got " +
                      std::to_string(gt.size()));
  }
  std::vector<Vec3> gt_t, est_t;
  gt_t.reserve(gt.size());
  est_t.reserve(est.size());
  for (const Pose& p : gt) gt_t.push_back(p.translation);
  for (const Pose& p : est) est_t.push_back(p.translation);
  const Pose align = umeyama_align(gt_t, est_t);

  double sum_t = 0.0, sum_r = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const Pose aligned = compose(align, est[i]);
    sum_t += (aligned.translation - gt[i].translation).squaredNorm();
    const double angle = rotation_distance(aligned, gt[i]);
    sum_r += angle * angle;
  }
  const double n = static_cast<double>(gt.size());
  return {std::sqrt(sum_t / n), std::sqrt(sum_r / n)};
}

std::pair<double, double> ate(const std::map<std::int64_t, Pose>& gt,
                              const std::map<std::int64_t, Pose>& est) {
  std::vector<Pose> g, e;
  for (const auto& [id, pose] : est) {
    const auto it = gt.find(id);
    if (it == gt.end()) continue;
    g.push_back(it->second);
    e.push_back(pose);
  }
  return ate(g, e);
}

double ate_improvement(double ate_before, double ate_after) {
  if (!(ate_before > 0.0)) {
    throw ZeroBaseline("cannot compute percent improvement over a zero "
                       "baseline error");
  }
  return 100.0 * (ate_before - ate_after) / ate_before;
}

std::pair<double, double> rpe(const std::vector<Pose>& gt,
                              const std::vector<Pose>& est, int delta) {
  if (delta < 1) throw ConfigError("rpe delta must be >= 1");
  if (gt.size() != est.size()) {
    throw DimensionMismatch("trajectories differ in length");
  }
  if (gt.size() < static_cast<std::size_t>(delta) + 1) {
    throw TooFewPoses("need at least delta + 1 poses for rpe");
  }
  double sum_t = 0.0, sum_r = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + delta < gt.size(); ++i) {
    const Pose rel_gt = relative(gt[i], gt[i + delta]);
    const Pose rel_est = relative(est[i], est[i + delta]);
    const Pose err = compose(inverse(rel_gt), rel_est);
    sum_t += err.translation.squaredNorm();
    const double angle =
        2.0 * std::atan2(err.rotation.vec().norm(), std::abs(err.rotation.w()));
    sum_r += angle * angle;
    ++count;
  }
  const double n = static_cast<double>(count);
  return {std::sqrt(sum_t / n), std::sqrt(sum_r / n)};
}

double fpr(const std::vector<LoopCandidate>& candidates) {
  if (candidates.empty()) return 0.0;
  std::size_t fp = 0;
  for (const LoopCandidate& c : candidates) {
    if (c.classification == CandidateClass::kFalsePositive) ++fp;
  }
  return static_cast<double>(fp) / static_cast<double>(candidates.size());
}

DetectionMetrics detection_metrics(
    const std::vector<CandidateRecord>& records) {
  DetectionMetrics m;
  m.candidates = records.size();
  for (const CandidateRecord& r : records) {
    if (r.candidate.classification == CandidateClass::kTruePositive) {
      ++m.true_positives;
    } else {
      ++m.false_positives;
    }
    if (r.verified) ++m.verified_edges;
  }
  m.fpr = static_cast<double>(m.false_positives) /
          static_cast<double>(std::max<std::size_t>(1, m.candidates));
  return m;
}

std::string summary_csv(const std::vector<MethodResult>& rows) {
  std::ostringstream out;
  out << "method,kept,ate_t_impr,ate_r_impr,fpr,peak_mem,total_time\n";
  for (const MethodResult& r : rows) {
    out << r.method << ',' << r.kept << ','
        << format_double(r.ate_t_improvement) << ','
        << format_double(r.ate_r_improvement) << ','
        << format_double(r.detection.fpr) << ',' << r.peak_memory_bytes << ','
        << format_double(r.total_seconds) << '\n';
  }
  return out.str();
}

std::string series_csv(const std::string& value_header,
                       const std::vector<std::int64_t>& steps,
                       const std::vector<double>& values) {
  if (steps.size() != values.size()) {
    throw DimensionMismatch("series columns differ in length");
  }
  std::ostringstream out;
  out << "step," << value_header << '\n';
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out << steps[i] << ',' << format_double(values[i]) << '\n';
  }
  return out.str();
}

std::string series_csv(const std::string& value_header,
                       const std::vector<std::int64_t>& steps,
                       const std::vector<std::size_t>& values) {
  if (steps.size() != values.size()) {
    throw DimensionMismatch("series columns differ in length");
  }
  std::ostringstream out;
  out << "step," << value_header << '\n';
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out << steps[i] << ',' << values[i] << '\n';
  }
  return out.str();
}

namespace {

void render_row(std::ostringstream& out, const MethodResult& r) {
  out << "method: " << r.method << '\n'
      << "  kept_keyframes:        " << r.kept << " / " << r.input_frames
      << '\n'
      << "  ate_trans_before_m:    " << format_double(r.ate_t_before) << '\n'
      << "  ate_trans_after_m:     " << format_double(r.ate_t_after) << '\n'
      << "  ate_trans_improvement: " << format_double(r.ate_t_improvement)
      << " %\n"
      << "  ate_rot_before_rad:    " << format_double(r.ate_r_before) << '\n'
      << "  ate_rot_after_rad:     " << format_double(r.ate_r_after) << '\n'
      << "  ate_rot_improvement:   " << format_double(r.ate_r_improvement)
      << " %\n"
      << "  rpe_trans_after_m:     " << format_double(r.rpe_t_after) << '\n'
      << "  rpe_rot_after_rad:     " << format_double(r.rpe_r_after) << '\n'
      << "  candidates:            " << r.detection.candidates << " ("
      << r.detection.true_positives << " true, "
      << r.detection.false_positives << " false)\n"
      << "  verified_loop_edges:   " << r.detection.verified_edges << '\n'
      << "  fpr:                   " << format_double(r.detection.fpr) << '\n'
      << "  peak_memory_bytes:     " << r.peak_memory_bytes << '\n'
      << "  total_seconds:         " << format_double(r.total_seconds) << '\n'
      << "  mean_query_seconds:    " << format_double(r.mean_query_seconds)
      << '\n'
      << "  mean_solve_seconds:    " << format_double(r.mean_solve_seconds)
      << '\n';
  if (r.windows_solved > 0) {
    out << "  windows_solved:        " << r.windows_solved << '\n'
        << "  mean_window_seconds:   " << format_double(r.mean_window_seconds)
        << '\n';
  }
}

}  // namespace

std::string render_report(const Report& report) {
  std::ostringstream out;
  out << "keyframe sampling benchmark report\n"
      << "==================================\n"
      << "seed: " << report.seed << '\n'
      << "conventions:\n"
      << "  - ATE is computed over kept poses only (the optimized states),\n"
      << "    after rigid alignment of the estimate to ground truth.\n"
      << "  - FPR denominator = all materialized candidates (matches above\n"
      << "    the similarity threshold), a false-discovery-style ratio.\n"
      << "  - memory figures are logical descriptor-store bytes\n"
      << "    (dimension * 4 + fixed per-entry overhead), not RSS.\n"
      << '\n';
  for (const MethodResult& r : report.rows) {
    render_row(out, r);
    out << '\n';
  }
  out << "config:\n" << report.config_echo << '\n';
  return out.str();
}

}  // namespace kfminset
