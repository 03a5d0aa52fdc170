#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "kfminset/errors.hpp"
#include "kfminset/geometry.hpp"
#include "kfminset/rng.hpp"

namespace kfminset {

/// Fixed-length appearance descriptor attached to a keyframe.
struct Descriptor {
  Eigen::VectorXd values;

  Descriptor() = default;
  explicit Descriptor(Eigen::VectorXd v) : values(std::move(v)) {}

  int dimension() const { return static_cast<int>(values.size()); }
};

/// Cosine similarity clamped to [0, 1]: max(0, a.b / (|a||b|)).
/// Descriptors for this sensor model never point away from each other in a
/// meaningful way, so negative cosines carry no signal and are clamped.
///
/// Throws DimensionMismatch for different lengths, ZeroVector when either
/// norm is below 1e-12.
double cosine_similarity(const Descriptor& a, const Descriptor& b);

/// Euclidean distance between two descriptors of equal length.
double euclidean_distance(const Descriptor& a, const Descriptor& b);

/// Parameters of the synthetic place-recognition descriptor field.
///
/// The field maps a 3-D position to an M-dimensional vector built from
/// random Fourier features: num_frequencies random frequencies and phases
/// yield cos/sin component pairs, truncated to dimension and L2-normalized.
/// The map depends on position only, so descriptors are invariant to the
/// heading of the observer, and it is Lipschitz-smooth with a constant set
/// by length_scale.
struct DescriptorFieldParams {
  std::uint64_t seed = 1;
  int dimension = 256;        ///< M, length of the descriptor
  int num_frequencies = 128;  ///< must be >= ceil(dimension / 2)
  double length_scale = 15.0; ///< meters; larger = smoother field
  double noise_sigma = 0.0;   ///< per-component noise when an Rng is passed

  void validate() const;
};

/// Deterministic sampler of the descriptor field.  Construction draws the
/// frequency table from the seed; evaluation is pure.
class DescriptorField {
 public:
  explicit DescriptorField(const DescriptorFieldParams& params);

  const DescriptorFieldParams& params() const { return params_; }

  /// Noise-free field value at a position.
  Descriptor eval(const Vec3& position) const;

  /// Field value with zero-mean Gaussian noise (sigma = noise_sigma) added
  /// per component, drawn from the caller's generator.
  Descriptor eval(const Vec3& position, Rng& noise) const;

 private:
  DescriptorFieldParams params_;
  Eigen::Matrix<double, Eigen::Dynamic, 3> frequencies_;
  Eigen::VectorXd phases_;
};

/// One-call convenience wrapper; rebuilds the frequency table each time.
Descriptor field_eval(const DescriptorFieldParams& params, const Vec3& position);

}  // namespace kfminset
