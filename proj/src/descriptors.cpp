#include "kfminset/descriptors.hpp"

#include <cmath>
#include <numbers>

namespace kfminset {

double cosine_similarity(const Descriptor& a, const Descriptor& b) {
  if (a.dimension() != b.dimension()) {
    throw DimensionMismatch("cosine: dimensions " +
                            std::to_string(a.dimension()) + " vs " +
                            std::to_string(b.dimension()));
  }
  const double na = a.values.norm();
  const double nb = b.values.norm();
  if (na < 1e-12 || nb < 1e-12) {
    throw ZeroVector("cosine undefined for a zero descriptor");
  }
  const double c = a.values.dot(b.values) / (na * nb);
  return c < 0.0 ? 0.0 : c;
}

double euclidean_distance(const Descriptor& a, const Descriptor& b) {
  if (a.dimension() != b.dimension()) {
    throw DimensionMismatch("distance: dimensions " +
                            std::to_string(a.dimension()) + " vs " +
                            std::to_string(b.dimension()));
  }
  return (a.values - b.values).norm();
}

void DescriptorFieldParams::validate() const {
  if (dimension < 1) throw ConfigError("descriptor dimension must be >= 1");
  if (num_frequencies < (dimension + 1) / 2) {
    throw ConfigError("num_frequencies must be >= ceil(dimension/2)");
  }
  if (!(length_scale > 0.0)) throw ConfigError("length_scale must be > 0");
  if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
}

DescriptorField::DescriptorField(const DescriptorFieldParams& params)
    : params_(params) {
  params_.validate();
  Rng rng(params_.seed);
  frequencies_.resize(params_.num_frequencies, 3);
  phases_.resize(params_.num_frequencies);
  const double inv_ls = 1.0 / params_.length_scale;
  for (int k = 0; k < params_.num_frequencies; ++k) {
    for (int c = 0; c < 3; ++c) frequencies_(k, c) = inv_ls * rng.normal();
    phases_(k) = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
}

Descriptor DescriptorField::eval(const Vec3& position) const {
  const int m = params_.dimension;
  Eigen::VectorXd v(m);
  // Component pair 2k/2k+1 holds cos/sin of the k-th random phase; sin is
  // a quarter-turn shifted cosine, so every component is a random Fourier
  // feature of the position and the pair keeps the raw norm constant.
  for (int j = 0; j < m; ++j) {
    const int k = j / 2;
    const double arg = frequencies_.row(k).dot(position) + phases_(k);
    v(j) = (j % 2 == 0) ? std::cos(arg) : std::sin(arg);
  }
  const double n = v.norm();
  if (n > 0.0) v /= n;
  return Descriptor(std::move(v));
}

Descriptor DescriptorField::eval(const Vec3& position, Rng& noise) const {
  Descriptor d = eval(position);
  if (params_.noise_sigma > 0.0) {
    for (int j = 0; j < d.values.size(); ++j) {
      d.values(j) += noise.normal(params_.noise_sigma);
    }
  }
  return d;
}

Descriptor field_eval(const DescriptorFieldParams& params, const Vec3& position) {
  return DescriptorField(params).eval(position);
}

}  // namespace kfminset
