#include "kfminset/sampling.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <thread>

namespace kfminset {

void SamplerConfig::validate() const {
  if (window_size < 2 || window_size > kMaxWindowSize) {
    throw ConfigError("window_size must be in [2, " +
                      std::to_string(kMaxWindowSize) + "], got " +
                      std::to_string(window_size));
  }
  if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
  if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
  if (!(delta_lower > 0.0)) throw ConfigError("delta_lower must be > 0");
  if (!(delta_upper > delta_lower)) {
    throw ConfigError("delta_upper must exceed delta_lower");
  }
}

namespace {

/// Worker-thread cap: KF_MINSET_THREADS, 0 or unset = all hardware threads.
int thread_budget() {
  static const int budget = [] {
    int n = 0;
    if (const char* env = std::getenv("KF_MINSET_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end != env && *end == '\0' && v >= 0 && v <= 256) {
        n = static_cast<int>(v);
      }
    }
    if (n == 0) {
      n = static_cast<int>(std::thread::hardware_concurrency());
      if (n <= 0) n = 1;
    }
    return n;
  }();
  return budget;
}

/// True when every consecutive kept gap of `mask` (and the anchor gap, when
/// an anchor exists) lies in [delta_lower, delta_upper].  Exits on the
/// first violation.
bool mask_feasible(std::span<const Keyframe> window,
                   const std::optional<Pose>& anchor, const SamplerConfig& cfg,
                   std::uint32_t mask) {
  const Pose* prev = anchor ? &*anchor : nullptr;
  for (int i = 0; i < static_cast<int>(window.size()); ++i) {
    if (!(mask >> i & 1u)) continue;
    if (prev != nullptr) {
      const double gap = translation_distance(*prev, window[i].pose);
      if (gap < cfg.delta_lower || gap > cfg.delta_upper) return false;
    }
    prev = &window[i].pose;
  }
  return true;
}

std::vector<int> mask_indices(std::uint32_t mask) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(std::popcount(mask)));
  for (int i = 0; i < 32; ++i) {
    if (mask >> i & 1u) out.push_back(i);
  }
  return out;
}

void check_window_size(std::size_t n) {
  if (n > static_cast<std::size_t>(kMaxWindowSize)) {
    throw WindowTooLarge("window of " + std::to_string(n) +
                         " exceeds the exhaustive-search limit of " +
                         std::to_string(kMaxWindowSize));
  }
}

}  // namespace

std::vector<std::vector<int>> constrained_power_set(
    std::span<const Keyframe> window, const std::optional<Pose>& anchor,
    const SamplerConfig& cfg) {
  check_window_size(window.size());
  const int w = static_cast<int>(window.size());
  std::vector<std::vector<int>> out;
  const std::uint32_t total = w >= 32 ? 0 : (1u << w);
  for (std::uint32_t mask = 1; mask < total; ++mask) {
    if (mask_feasible(window, anchor, cfg, mask)) {
      out.push_back(mask_indices(mask));
    }
  }
  std::sort(out.begin(), out.end());  // lexicographic by member ids
  return out;
}

Eigen::MatrixXd numeric_jacobian(std::span<const Keyframe> subset) {
  const std::size_t n = subset.size();
  if (n < 2) {
    throw TooFewPoses("sensitivity needs at least 2 keyframes, got " +
                      std::to_string(n));
  }
  const Eigen::Index m = subset[0].descriptor.values.size();
  Eigen::MatrixXd j(n - 1, m);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (subset[i].descriptor.values.size() != m ||
        subset[i + 1].descriptor.values.size() != m) {
      throw DimensionMismatch("descriptor lengths differ within the subset");
    }
    const double gap = translation_distance(subset[i].pose, subset[i + 1].pose);
    if (gap < kCoincidentTol) {
      throw CoincidentPoses("keyframes " + std::to_string(subset[i].id) +
                            " and " + std::to_string(subset[i + 1].id) +
                            " are closer than the difference-quotient tolerance");
    }
    j.row(i) =
        (subset[i + 1].descriptor.values - subset[i].descriptor.values) / gap;
  }
  return j;
}

PrincipalTransform principal_transform(std::span<const Keyframe> subset) {
  PrincipalTransform pt;
  pt.jacobian = numeric_jacobian(subset);
  const Eigen::Index r = pt.jacobian.rows();
  const Eigen::Index m = pt.jacobian.cols();

  Eigen::VectorXd lambda;           // descending
  Eigen::MatrixXd vectors;          // M x k, nonzero directions only
  if (r < m) {
    // Gram route: the r x r jacobian * jacobian^T shares all nonzero
    // eigenvalues with the M x M jacobian^T * jacobian, and eigenvectors
    // transfer as v = J^T u / sqrt(lambda).
    const Eigen::MatrixXd gram = pt.jacobian * pt.jacobian.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    lambda = eig.eigenvalues().reverse();
    const double lmax = lambda.size() > 0 ? lambda(0) : 0.0;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
      if (lambda(k) > lmax * kEigenRankTol && lambda(k) > 0.0) keep.push_back(k);
    }
    vectors.resize(m, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
      const Eigen::Index src = lambda.size() - 1 - keep[c];  // ascending slot
      vectors.col(static_cast<Eigen::Index>(c)) =
          pt.jacobian.transpose() * eig.eigenvectors().col(src) /
          std::sqrt(lambda(keep[c]));
    }
  } else {
    // Small descriptors: decompose jacobian^T jacobian directly.
    const Eigen::MatrixXd jtj = pt.jacobian.transpose() * pt.jacobian;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jtj);
    const Eigen::Index take = std::min(r, m);
    lambda.resize(take);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < take; ++k) {
      lambda(k) = eig.eigenvalues()(m - 1 - k);  // descending
    }
    const double lmax = lambda.size() > 0 ? lambda(0) : 0.0;
    for (Eigen::Index k = 0; k < take; ++k) {
      if (lambda(k) > lmax * kEigenRankTol && lambda(k) > 0.0) keep.push_back(k);
    }
    vectors.resize(m, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
      vectors.col(static_cast<Eigen::Index>(c)) =
          eig.eigenvectors().col(m - 1 - keep[c]);
    }
  }

  pt.eigenvalues = lambda;
  pt.eigenvectors = vectors;

  const Eigen::Index k = vectors.cols();
  pt.transformed.reserve(subset.size());
  for (const Keyframe& kf : subset) {
    Eigen::VectorXd d(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      // sqrt(Lambda) V^T d, using the eigenvalue that owns column c.
      d(c) = std::sqrt(std::max(pt.eigenvalues(c), 0.0)) *
             vectors.col(c).dot(kf.descriptor.values);
    }
    pt.transformed.push_back(std::move(d));
  }
  return pt;
}

double redundancy(std::span<const Keyframe> subset) {
  const std::size_t n = subset.size();
  if (n < 2) {
    throw TooFewPoses("redundancy needs at least 2 keyframes");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    sum += cosine_similarity(subset[i].descriptor, subset[i + 1].descriptor);
  }
  return sum / static_cast<double>(n - 1);
}

double info_preservation(const PrincipalTransform& pt) {
  const std::size_t n = pt.transformed.size();
  if (n < 2) return 0.0;
  std::vector<double> dist(n - 1);
  double max_dist = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    dist[i] = (pt.transformed[i + 1] - pt.transformed[i]).norm();
    max_dist = std::max(max_dist, dist[i]);
  }
  if (max_dist < 1e-300) return 0.0;  // degenerate transform
  double sum = 0.0;
  for (double d : dist) sum += d / max_dist;
  return -sum / static_cast<double>(n - 1);
}

double msa_score(double rho, double pi, const SamplerConfig& cfg) {
  switch (cfg.scoring_mode) {
    case ScoringMode::kPaperLiteral:
      return (rho + cfg.alpha) / (pi - cfg.beta);
    case ScoringMode::kInfoMax:
      return (rho + cfg.alpha) * (1.0 - pi);
  }
  throw ConfigError("unknown scoring mode");
}

double msa_score(std::span<const Keyframe> subset, const SamplerConfig& cfg) {
  if (subset.empty()) throw TooFewPoses("cannot score an empty subset");
  double rho = 0.0, pi = 0.0;
  if (subset.size() >= 2) {
    rho = redundancy(subset);
    pi = info_preservation(principal_transform(subset));
  }
  return msa_score(rho, pi, cfg);
}

namespace {

/// Per-window cache for exhaustive scoring.  Consecutive pairs of a subset
/// are pairs (a, b), a < b, of window indices; everything a subset score
/// needs reduces to dot products between per-pair descriptor differences
/// and the window descriptors, computed once per window:
///
///   gram(p, q)   = diff_p . diff_q / (dist_p dist_q)
///   proj(p, i)   = diff_p . d_i / dist_p          (the row p of J d_i)
///
/// so a subset costs one tiny (n-1)x(n-1) eigendecomposition instead of
/// repeated M-dimensional products.
class WindowScorer {
 public:
  explicit WindowScorer(std::span<const Keyframe> window)
      : window_(window), w_(static_cast<int>(window.size())) {
    const int pairs = w_ * (w_ - 1) / 2;
    dist_.assign(pairs, 0.0);
    cossim_.assign(pairs, 0.0);
    used_.assign(pairs, false);
    diffs_.assign(pairs, Eigen::VectorXd());
    proj_.assign(pairs, Eigen::VectorXd());
    pairdot_ = Eigen::MatrixXd::Constant(pairs, pairs,
                                         std::numeric_limits<double>::quiet_NaN());
  }

  int pair_id(int a, int b) const {  // a < b
    return a * (2 * w_ - a - 1) / 2 + (b - a - 1);
  }

  /// Prepare tables for every consecutive pair of every mask in `masks`.
  void prepare(const std::vector<std::uint32_t>& masks) {
    for (const std::uint32_t mask : masks) {
      int prev = -1;
      for (int i = 0; i < w_; ++i) {
        if (!(mask >> i & 1u)) continue;
        if (prev >= 0) ensure_pair(prev, i);
        prev = i;
      }
    }
    // Dot products between co-used difference vectors (superset: all used).
    for (std::size_t p = 0; p < used_.size(); ++p) {
      if (!used_[p]) continue;
      for (std::size_t q = p; q < used_.size(); ++q) {
        if (!used_[q]) continue;
        const double d = diffs_[p].dot(diffs_[q]);
        pairdot_(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) = d;
        pairdot_(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p)) = d;
      }
    }
  }

  /// Redundancy and information preservation of one feasible subset.
  /// Thread-safe after prepare().
  void score(std::uint32_t mask, double& rho, double& pi) const {
    std::array<int, kMaxWindowSize> idx{};
    int n = 0;
    for (int i = 0; i < w_; ++i) {
      if (mask >> i & 1u) idx[n++] = i;
    }
    if (n < 2) {
      rho = 0.0;
      pi = 0.0;
      return;
    }
    const int r = n - 1;
    std::array<int, kMaxWindowSize> pairs{};
    double rho_sum = 0.0;
    for (int k = 0; k < r; ++k) {
      pairs[k] = pair_id(idx[k], idx[k + 1]);
      rho_sum += cossim_[pairs[k]];
    }
    rho = rho_sum / r;

    Eigen::MatrixXd gram(r, r);
    for (int a = 0; a < r; ++a) {
      for (int b = a; b < r; ++b) {
        const double g =
            pairdot_(pairs[a], pairs[b]) / (dist_[pairs[a]] * dist_[pairs[b]]);
        gram(a, b) = g;
        gram(b, a) = g;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const double lmax = eig.eigenvalues()(r - 1);

    // Transformed descriptor of keyframe idx[i], component per nonzero
    // eigenvalue: u_k . (J d_i); the sqrt(lambda) of the eigenvector
    // transfer cancels against the projection.
    std::array<Eigen::Index, kMaxWindowSize> keep{};
    int nk = 0;
    for (Eigen::Index k = r - 1; k >= 0; --k) {
      const double l = eig.eigenvalues()(k);
      if (l > lmax * kEigenRankTol && l > 0.0) keep[nk++] = k;
    }
    if (nk == 0) {
      pi = 0.0;
      return;
    }
    Eigen::MatrixXd transformed(nk, n);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < nk; ++c) {
        double acc = 0.0;
        for (int p = 0; p < r; ++p) {
          acc += eig.eigenvectors()(p, keep[c]) *
                 (proj_[pairs[p]](idx[i]) );
        }
        transformed(c, i) = acc;
      }
    }
    double max_dist = 0.0;
    std::array<double, kMaxWindowSize> dists{};
    for (int i = 0; i < r; ++i) {
      dists[i] = (transformed.col(i + 1) - transformed.col(i)).norm();
      max_dist = std::max(max_dist, dists[i]);
    }
    if (max_dist < 1e-300) {
      pi = 0.0;
      return;
    }
    double sum = 0.0;
    for (int i = 0; i < r; ++i) sum += dists[i] / max_dist;
    pi = -sum / r;
  }

 private:
  void ensure_pair(int a, int b) {
    const int p = pair_id(a, b);
    if (used_[p]) return;
    used_[p] = true;
    const double gap = translation_distance(window_[a].pose, window_[b].pose);
    if (gap < kCoincidentTol) {
      throw CoincidentPoses("keyframes " + std::to_string(window_[a].id) +
                            " and " + std::to_string(window_[b].id) +
                            " are closer than the difference-quotient tolerance");
    }
    dist_[p] = gap;
    cossim_[p] =
        cosine_similarity(window_[a].descriptor, window_[b].descriptor);
    diffs_[p] = window_[b].descriptor.values - window_[a].descriptor.values;
    Eigen::VectorXd pr(w_);
    for (int i = 0; i < w_; ++i) {
      pr(i) = diffs_[p].dot(window_[i].descriptor.values) / gap;
    }
    proj_[p] = std::move(pr);
  }

  std::span<const Keyframe> window_;
  int w_;
  std::vector<double> dist_;
  std::vector<double> cossim_;
  std::vector<bool> used_;
  std::vector<Eigen::VectorXd> diffs_;
  std::vector<Eigen::VectorXd> proj_;  ///< proj_[p](i) = diff_p . d_i / dist_p
  Eigen::MatrixXd pairdot_;
};

/// Candidate tracked during the argmin scan.
struct BestCandidate {
  bool valid = false;
  double score = 0.0;
  double rho = 0.0;
  double pi = 0.0;
  int cardinality = 0;
  std::uint32_t mask = 0;
};

/// Strict "a ranks before b": lower score, then fewer keyframes, then the
/// lexicographically smaller index sequence.  Total order on distinct
/// masks, so the argmin is unique no matter how the scan is chunked.
bool ranks_before(const BestCandidate& a, const BestCandidate& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  if (a.score != b.score) return a.score < b.score;
  if (a.cardinality != b.cardinality) return a.cardinality < b.cardinality;
  if (a.mask == b.mask) return false;
  const std::vector<int> ia = mask_indices(a.mask);
  const std::vector<int> ib = mask_indices(b.mask);
  return std::lexicographical_compare(ia.begin(), ia.end(), ib.begin(),
                                      ib.end());
}

}  // namespace

WindowSolution msa_select_window(std::span<const Keyframe> window,
                                 const std::optional<Pose>& anchor,
                                 const SamplerConfig& cfg) {
  check_window_size(window.size());
  if (window.empty()) throw TooFewPoses("cannot optimize an empty window");
  const auto start = std::chrono::steady_clock::now();

  const int w = static_cast<int>(window.size());
  std::vector<std::uint32_t> feasible;
  for (std::uint32_t mask = 1; mask < (1u << w); ++mask) {
    if (mask_feasible(window, anchor, cfg, mask)) feasible.push_back(mask);
  }

  WindowSolution sol;
  if (feasible.empty()) {
    // Nothing satisfies the gap constraints; keep the window endpoints so
    // the odometry chain stays connected, and flag the breakdown.
    sol.constraint_infeasible = true;
    sol.selected_indices = w == 1 ? std::vector<int>{0}
                                  : std::vector<int>{0, w - 1};
    for (int i : sol.selected_indices) sol.selected.push_back(window[i]);
    if (sol.selected.size() >= 2) {
      sol.rho = redundancy(sol.selected);
      try {
        sol.pi = info_preservation(principal_transform(sol.selected));
      } catch (const CoincidentPoses&) {
        sol.pi = 0.0;  // coincident endpoints: no information direction
      }
    }
    sol.objective = msa_score(sol.rho, sol.pi, cfg);
    sol.candidates_evaluated = 0;
    sol.solve_time = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    return sol;
  }

  WindowScorer scorer(window);
  scorer.prepare(feasible);

  const auto scan = [&](std::size_t lo, std::size_t hi) {
    BestCandidate best;
    for (std::size_t i = lo; i < hi; ++i) {
      BestCandidate c;
      c.valid = true;
      c.mask = feasible[i];
      c.cardinality = std::popcount(c.mask);
      scorer.score(c.mask, c.rho, c.pi);
      c.score = msa_score(c.rho, c.pi, cfg);
      if (ranks_before(c, best)) best = c;
    }
    return best;
  };

  BestCandidate best;
  const int budget = thread_budget();
  if (feasible.size() >= 4096 && budget > 1) {
    const int workers =
        std::min<int>(budget, static_cast<int>(feasible.size() / 1024));
    std::vector<BestCandidate> partial(workers);
    std::vector<std::thread> pool;
    const std::size_t chunk = (feasible.size() + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
      const std::size_t lo = t * chunk;
      const std::size_t hi = std::min(feasible.size(), lo + chunk);
      pool.emplace_back([&, lo, hi, t] { partial[t] = scan(lo, hi); });
    }
    for (auto& th : pool) th.join();
    for (const BestCandidate& c : partial) {
      if (ranks_before(c, best)) best = c;
    }
  } else {
    best = scan(0, feasible.size());
  }

  sol.selected_indices = mask_indices(best.mask);
  for (int i : sol.selected_indices) sol.selected.push_back(window[i]);
  sol.rho = best.rho;
  sol.pi = best.pi;
  sol.objective = best.score;
  sol.candidates_evaluated = feasible.size();
  sol.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return sol;
}

// ─── streaming samplers ──────────────────────────────────────────────────

std::string SamplerMethod::name() const {
  switch (kind) {
    case Kind::kAll:
      return "all";
    case Kind::kMsa:
      return "msa";
    case Kind::kEntropy:
      return "entropy";
    case Kind::kSpaciousness:
      return "spacious";
    case Kind::kConstant: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "const-%g", distance);
      return buf;
    }
  }
  return "unknown";
}

SamplerMethod SamplerMethod::parse(const std::string& text) {
  SamplerMethod m;
  if (text == "all") {
    m.kind = Kind::kAll;
    return m;
  }
  if (text == "msa") {
    m.kind = Kind::kMsa;
    return m;
  }
  if (text == "entropy") {
    m.kind = Kind::kEntropy;
    return m;
  }
  if (text == "spacious" || text == "spaciousness") {
    m.kind = Kind::kSpaciousness;
    return m;
  }
  for (const std::string prefix : {"const-", "constant-"}) {
    if (text.rfind(prefix, 0) == 0) {
      const std::string num = text.substr(prefix.size());
      char* end = nullptr;
      const double d = std::strtod(num.c_str(), &end);
      if (end == num.c_str() || *end != '\0' || !(d > 0.0)) {
        throw ConfigError("bad interval in sampler method '" + text + "'");
      }
      m.kind = Kind::kConstant;
      m.distance = d;
      return m;
    }
  }
  throw ConfigError("unknown sampler method '" + text + "'");
}

namespace {

class AllSampler final : public StreamSampler {
 public:
  std::vector<Keyframe> push(const Keyframe& kf) override { return {kf}; }
  std::vector<Keyframe> finish() override { return {}; }
  std::string name() const override { return "all"; }
};

class ConstantSampler final : public StreamSampler {
 public:
  explicit ConstantSampler(double d) : interval_(d) {
    if (!(d > 0.0)) throw ConfigError("constant sampler interval must be > 0");
  }
  std::vector<Keyframe> push(const Keyframe& kf) override {
    bool keep = false;
    if (!prev_) {
      keep = true;  // always anchor the stream start
    } else {
      travelled_ += translation_distance(*prev_, kf.pose);
      keep = travelled_ >= interval_;
    }
    prev_ = kf.pose;
    if (!keep) return {};
    travelled_ = 0.0;
    return {kf};
  }
  std::vector<Keyframe> finish() override { return {}; }
  std::string name() const override {
    SamplerMethod m;
    m.kind = SamplerMethod::Kind::kConstant;
    m.distance = interval_;
    return m.name();
  }

 private:
  double interval_;
  double travelled_ = 0.0;
  std::optional<Pose> prev_;
};

/// Keeps a frame when its appearance-entropy jump since the last kept frame
/// exceeds the running mean + one standard deviation of recent per-frame
/// jumps (window of 50).
class EntropySampler final : public StreamSampler {
 public:
  std::vector<Keyframe> push(const Keyframe& kf) override {
    if (!kf.entropy_proxy) {
      throw MissingChannel("keyframe " + std::to_string(kf.id) +
                           " lacks the entropy channel");
    }
    const double e = *kf.entropy_proxy;
    bool keep;
    if (!last_kept_) {
      keep = true;
    } else {
      keep = std::abs(e - *last_kept_) > threshold();
    }
    if (prev_) {
      deltas_.push_back(std::abs(e - *prev_));
      if (deltas_.size() > kWindow) deltas_.pop_front();
    }
    prev_ = e;
    if (!keep) return {};
    last_kept_ = e;
    return {kf};
  }
  std::vector<Keyframe> finish() override { return {}; }
  std::string name() const override { return "entropy"; }

 private:
  static constexpr std::size_t kWindow = 50;

  double threshold() const {
    if (deltas_.empty()) return 0.0;
    double mean = 0.0;
    for (double d : deltas_) mean += d;
    mean /= static_cast<double>(deltas_.size());
    double var = 0.0;
    for (double d : deltas_) var += (d - mean) * (d - mean);
    var /= static_cast<double>(deltas_.size());
    return mean + std::sqrt(std::max(var, 0.0));
  }

  std::deque<double> deltas_;
  std::optional<double> prev_;
  std::optional<double> last_kept_;
};

/// Distance-interval sampler whose interval adapts to how open the current
/// surroundings are: half the spaciousness, clamped to the gap bounds.
class SpaciousnessSampler final : public StreamSampler {
 public:
  explicit SpaciousnessSampler(const SamplerConfig& cfg) : cfg_(cfg) {}
  std::vector<Keyframe> push(const Keyframe& kf) override {
    if (!kf.spaciousness) {
      throw MissingChannel("keyframe " + std::to_string(kf.id) +
                           " lacks the spaciousness channel");
    }
    bool keep = false;
    if (!prev_) {
      keep = true;
    } else {
      travelled_ += translation_distance(*prev_, kf.pose);
      const double interval = std::clamp(0.5 * *kf.spaciousness,
                                         cfg_.delta_lower, cfg_.delta_upper);
      keep = travelled_ >= interval;
    }
    prev_ = kf.pose;
    if (!keep) return {};
    travelled_ = 0.0;
    return {kf};
  }
  std::vector<Keyframe> finish() override { return {}; }
  std::string name() const override { return "spacious"; }

 private:
  SamplerConfig cfg_;
  double travelled_ = 0.0;
  std::optional<Pose> prev_;
};

}  // namespace

MsaSampler::MsaSampler(const SamplerConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  buffer_.reserve(static_cast<std::size_t>(cfg_.window_size));
}

std::vector<Keyframe> MsaSampler::push(const Keyframe& kf) {
  buffer_.push_back(kf);
  if (static_cast<int>(buffer_.size()) < cfg_.window_size) return {};
  return solve_buffer();
}

std::vector<Keyframe> MsaSampler::finish() {
  if (buffer_.empty()) return {};
  if (buffer_.size() == 1) {
    // A lone trailing frame cannot form a window; keep it so the mission
    // end stays represented.
    std::vector<Keyframe> kept = {buffer_.front()};
    anchor_ = buffer_.front().pose;
    buffer_.clear();
    return kept;
  }
  return solve_buffer();
}

std::vector<Keyframe> MsaSampler::solve_buffer() {
  WindowSolution sol = msa_select_window(buffer_, anchor_, cfg_);
  anchor_ = sol.selected.back().pose;
  windows_.push_back(sol);
  buffer_.clear();
  return windows_.back().selected;
}

std::unique_ptr<StreamSampler> make_sampler(const SamplerMethod& method,
                                            const SamplerConfig& cfg) {
  switch (method.kind) {
    case SamplerMethod::Kind::kAll:
      return std::make_unique<AllSampler>();
    case SamplerMethod::Kind::kMsa:
      return std::make_unique<MsaSampler>(cfg);
    case SamplerMethod::Kind::kConstant:
      return std::make_unique<ConstantSampler>(method.distance);
    case SamplerMethod::Kind::kEntropy:
      return std::make_unique<EntropySampler>();
    case SamplerMethod::Kind::kSpaciousness:
      return std::make_unique<SpaciousnessSampler>(cfg);
  }
  throw ConfigError("unknown sampler kind");
}

}  // namespace kfminset
