#pragma once

// Pose graph over kept keyframes (odometry edges between consecutive kept
// poses, loop-closure edges between revisits) and nonlinear least-squares
// optimization on the SE(3) manifold via Levenberg-Marquardt, plus a
// periodic re-optimization driver for streaming use.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "kfminset/errors.hpp"
#include "kfminset/geometry.hpp"

namespace kfminset {

enum class EdgeKind { kOdometry, kLoop };

// Relative-pose constraint: measurement takes frame i to frame j, weighted by
// a symmetric positive-definite information matrix.
struct GraphEdge {
  std::int64_t i = 0;
  std::int64_t j = 0;
  Pose measurement;
  Mat6 information = Mat6::Identity();
};

struct LmParams {
  int max_iterations = 100;
  double initial_lambda = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  double convergence_tol = 1e-9;  // relative error decrease
  double gradient_tol = 1e-8;     // max-norm of the gradient

  void validate() const;  // throws ConfigError
};

struct IterationRecord {
  int iteration = 0;
  double error = 0.0;
  double lambda = 0.0;
  bool accepted = false;
};

// Nodes keyed by keyframe id; two disjoint edge sets; a set of gauge-fixed
// nodes excluded from the optimization state.
class PoseGraph {
 public:
  // Node count above which the optimizer switches from dense Cholesky to a
  // sparse factorization.
  static constexpr std::size_t kDenseNodeLimit = 500;

  void add_node(std::int64_t id, const Pose& pose);  // throws DuplicateId
  void set_node_pose(std::int64_t id, const Pose& pose);
  void add_odometry_edge(const GraphEdge& e);
  void add_loop_edge(const GraphEdge& e);
  void fix_node(std::int64_t id);

  bool has_node(std::int64_t id) const { return nodes_.count(id) != 0; }
  const Pose& node(std::int64_t id) const;
  const std::map<std::int64_t, Pose>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& odometry_edges() const {
    return odometry_edges_;
  }
  const std::vector<GraphEdge>& loop_edges() const { return loop_edges_; }
  const std::set<std::int64_t>& fixed() const { return fixed_; }
  std::size_t edge_count() const {
    return odometry_edges_.size() + loop_edges_.size();
  }

 private:
  void check_edge(const GraphEdge& e) const;

  std::map<std::int64_t, Pose> nodes_;
  std::vector<GraphEdge> odometry_edges_;
  std::vector<GraphEdge> loop_edges_;
  std::set<std::pair<std::int64_t, std::int64_t>> edge_pairs_;
  std::set<std::int64_t> fixed_;
};

// Manifold residual: se3_log(inverse(z) * (inverse(x_i) * x_j)). Zero exactly
// when the relative pose matches the measurement. Throws NearPiRotation when
// the residual rotation approaches pi.
Twist edge_residual(const Pose& z, const Pose& x_i, const Pose& x_j);

// Residual plus its analytic Jacobians with respect to right perturbations
// x <- x * exp(delta) of each endpoint.
void edge_jacobians(const Pose& z, const Pose& x_i, const Pose& x_j,
                    Twist* residual, Mat6* j_i, Mat6* j_j);

// Sum over all edges of residual' * information * residual.
double total_error(const PoseGraph& g);

// Dense Gauss-Newton normal equations restricted to free (non-fixed) nodes,
// ordered by ascending id: H symmetric PSD, b the gradient. Requires at
// least one fixed node (throws SingularSystem otherwise).
std::pair<Eigen::MatrixXd, Eigen::VectorXd> linearize(const PoseGraph& g);

struct OptimizeResult {
  std::map<std::int64_t, Pose> poses;
  std::vector<IterationRecord> log;  // one record per attempted step
  double initial_error = 0.0;
  double final_error = 0.0;
  int accepted_steps = 0;
  bool converged = false;
};

// Levenberg-Marquardt: damped normal equations (H + lambda*I) delta = -b,
// accepted steps strictly decrease the error. Throws SingularSystem when the
// gauge is missing or some connected component has no fixed node.
OptimizeResult optimize(const PoseGraph& g, const LmParams& params);

// One streaming append: a new node (initialized by chaining the previous
// optimized pose through the odometry measurement when present, otherwise by
// `initial`) plus any loop edges that landed at this step.
struct IncrementalStep {
  std::int64_t id = 0;
  Pose initial;
  std::optional<GraphEdge> odometry;
  std::vector<GraphEdge> loops;
};

struct IncrementalResult {
  PoseGraph graph;  // node poses hold the latest optimized estimates
  std::vector<std::int64_t> solve_steps;  // node id at each re-optimization
  std::vector<double> solve_seconds;
  double final_error = 0.0;
};

// Appends steps in order, re-optimizing after every `reopt_every` node
// insertions and once more at the end when insertions remain. The first
// node is gauge-fixed. With reopt_every == stream length this is a single
// batch solve. zero_timing records 0.0 solve times (the solves still run).
IncrementalResult incremental_run(const std::vector<IncrementalStep>& stream,
                                  const LmParams& params, int reopt_every,
                                  bool zero_timing = false);

}  // namespace kfminset
