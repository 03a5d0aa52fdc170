#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kfminset/descriptors.hpp"
#include "kfminset/errors.hpp"
#include "kfminset/geometry.hpp"

namespace kfminset {

/// One node of the mission stream: pose estimate plus appearance descriptor
/// and optional scalar channels used by the baseline samplers.
struct Keyframe {
  std::int64_t id = 0;
  double timestamp = 0.0;
  Pose pose;
  Descriptor descriptor;
  std::optional<double> spaciousness;    ///< meters, openness of surroundings
  std::optional<double> entropy_proxy;   ///< nats, scan-appearance entropy
};

/// How a candidate subset is ranked.
enum class ScoringMode {
  /// (rho + alpha) / (pi - beta), minimized; the published objective taken
  /// exactly as written.
  kPaperLiteral,
  /// (rho + alpha) * (1 - pi), minimized; an alternative that prefers low
  /// redundancy together with high preserved variability.
  kInfoMax,
};

/// Window-optimizer configuration.
struct SamplerConfig {
  int window_size = 10;      ///< N, frames per sliding window (2..16)
  double alpha = 1.0;        ///< redundancy offset, > 0
  double beta = 1.0;         ///< information offset, > 0
  double delta_lower = 1.0;  ///< meters, minimum consecutive kept gap
  double delta_upper = 5.0;  ///< meters, maximum consecutive kept gap
  ScoringMode scoring_mode = ScoringMode::kPaperLiteral;

  void validate() const;
};

/// Maximum window the exhaustive enumerator accepts (2^16 subsets).
inline constexpr int kMaxWindowSize = 16;

/// Eigenvalues below max_eigenvalue * kEigenRankTol count as zero.
inline constexpr double kEigenRankTol = 1e-12;

/// Consecutive poses closer than this cannot form a difference quotient.
inline constexpr double kCoincidentTol = 1e-9;

/// Spectral decomposition of the descriptor-vs-pose sensitivity for one
/// subset, together with the descriptors mapped into its principal frame.
struct PrincipalTransform {
  /// (n-1) x M finite-difference quotients between consecutive keyframes.
  Eigen::MatrixXd jacobian;
  /// Eigenvalues of jacobian^T jacobian, sorted descending.  At most n-1
  /// are nonzero; tiny negatives (> -1e-9) may appear from round-off.
  Eigen::VectorXd eigenvalues;
  /// Orthonormal eigenvectors for the nonzero eigenvalues (M x k).
  Eigen::MatrixXd eigenvectors;
  /// Each input descriptor restricted to the k nonzero principal
  /// directions: sqrt(Lambda) V^T d.  Zero-dimensional when degenerate.
  std::vector<Eigen::VectorXd> transformed;

  int rank() const { return static_cast<int>(eigenvectors.cols()); }
};

/// Result of optimizing one window.
struct WindowSolution {
  std::vector<Keyframe> selected;     ///< kept keyframes, stream order
  std::vector<int> selected_indices;  ///< indices into the input window
  double rho = 0.0;                   ///< redundancy of the winner
  double pi = 0.0;                    ///< information preservation of the winner
  double objective = 0.0;             ///< winning score
  std::size_t candidates_evaluated = 0;  ///< feasible subsets scored
  double solve_time = 0.0;            ///< seconds, wall clock
  bool constraint_infeasible = false; ///< true when the fallback fired
};

/// All nonempty subsets of the window whose consecutive kept-pose gaps lie
/// in [delta_lower, delta_upper].  When anchor is set, the gap of the first
/// kept keyframe is measured from it.  Subsets are index lists into the
/// window, in stream order, and the result is sorted lexicographically.
///
/// Throws WindowTooLarge for windows longer than kMaxWindowSize.
std::vector<std::vector<int>> constrained_power_set(
    std::span<const Keyframe> window, const std::optional<Pose>& anchor,
    const SamplerConfig& cfg);

/// Finite-difference sensitivity of descriptors to motion along the subset:
/// row i = (d_{i+1} - d_i) / |x_{i+1} - x_i|.
///
/// Throws TooFewPoses for subsets shorter than 2, CoincidentPoses when a
/// consecutive gap is below kCoincidentTol, DimensionMismatch for ragged
/// descriptor lengths.
Eigen::MatrixXd numeric_jacobian(std::span<const Keyframe> subset);

/// Eigendecomposition of jacobian^T jacobian and the descriptors projected
/// onto the nonzero principal directions.  Uses the (n-1)x(n-1) Gram matrix
/// when that is the smaller problem; spectra agree either way.
PrincipalTransform principal_transform(std::span<const Keyframe> subset);

/// Mean clamped cosine similarity over consecutive keyframe pairs; in [0, 1].
double redundancy(std::span<const Keyframe> subset);

/// Information preservation: minus the mean of consecutive transformed
/// descriptor distances, each normalized by the largest such distance in
/// the subset; in [-1, 0].  A degenerate (all-zero) transform yields 0.
double info_preservation(const PrincipalTransform& pt);

/// Combine redundancy and information preservation into the window score.
double msa_score(double rho, double pi, const SamplerConfig& cfg);

/// Score a feasible subset.  Singletons have no consecutive pairs; both
/// terms are empty means and score as rho = pi = 0.
double msa_score(std::span<const Keyframe> subset, const SamplerConfig& cfg);

/// Exhaustively score every feasible subset of the window and return the
/// minimizer.  Ties break toward smaller cardinality, then the
/// lexicographically smaller id sequence.  When no subset is feasible the
/// fallback keeps {first, last} and flags the solution.
WindowSolution msa_select_window(std::span<const Keyframe> window,
                                 const std::optional<Pose>& anchor,
                                 const SamplerConfig& cfg);

// ─── streaming samplers ──────────────────────────────────────────────────

/// Online keyframe filter: push frames in stream order, collect the kept
/// ones from the return values, and call finish() once at end of stream to
/// flush anything buffered.
class StreamSampler {
 public:
  virtual ~StreamSampler() = default;
  virtual std::vector<Keyframe> push(const Keyframe& kf) = 0;
  virtual std::vector<Keyframe> finish() = 0;
  virtual std::string name() const = 0;
};

/// Sampler selector: which strategy plus its parameter.
struct SamplerMethod {
  enum class Kind { kAll, kMsa, kConstant, kEntropy, kSpaciousness };
  Kind kind = Kind::kAll;
  double distance = 1.0;  ///< interval for kConstant, meters

  /// Canonical method label: "all", "msa", "const-2", "entropy", "spacious".
  std::string name() const;

  /// Parse a label as produced by name(); accepts "constant-d" for
  /// "const-d" and "spaciousness" for "spacious".
  static SamplerMethod parse(const std::string& text);
};

/// Window-optimizing sampler; exposes its per-window solutions so callers
/// can report solve times and feasibility statistics.
class MsaSampler : public StreamSampler {
 public:
  explicit MsaSampler(const SamplerConfig& cfg);
  std::vector<Keyframe> push(const Keyframe& kf) override;
  std::vector<Keyframe> finish() override;
  std::string name() const override { return "msa"; }

  const std::vector<WindowSolution>& windows() const { return windows_; }

 private:
  std::vector<Keyframe> solve_buffer();

  SamplerConfig cfg_;
  std::vector<Keyframe> buffer_;
  std::optional<Pose> anchor_;
  std::vector<WindowSolution> windows_;
};

std::unique_ptr<StreamSampler> make_sampler(const SamplerMethod& method,
                                            const SamplerConfig& cfg);

}  // namespace kfminset
