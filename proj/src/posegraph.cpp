#include "kfminset/posegraph.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace kfminset {

void LmParams::validate() const {
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(initial_lambda > 0.0)) throw ConfigError("initial_lambda must be > 0");
  if (!(lambda_up > 1.0)) throw ConfigError("lambda_up must be > 1");
  if (!(lambda_down > 0.0 && lambda_down < 1.0)) {
    throw ConfigError("lambda_down must lie in (0, 1)");
  }
  if (!(convergence_tol > 0.0)) throw ConfigError("convergence_tol must be > 0");
  if (!(gradient_tol > 0.0)) throw ConfigError("gradient_tol must be > 0");
}

void PoseGraph::add_node(std::int64_t id, const Pose& pose) {
  if (!nodes_.emplace(id, pose).second) {
    throw DuplicateId("node " + std::to_string(id) + " already in graph");
  }
}

void PoseGraph::set_node_pose(std::int64_t id, const Pose& pose) {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) {
    throw ConfigError("cannot set pose of unknown node " + std::to_string(id));
  }
  it->second = pose;
}

const Pose& PoseGraph::node(std::int64_t id) const {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) {
    throw ConfigError("unknown node " + std::to_string(id));
  }
  return it->second;
}

void PoseGraph::check_edge(const GraphEdge& e) const {
  if (e.i == e.j) {
    throw ConfigError("self edge on node " + std::to_string(e.i));
  }
  if (!has_node(e.i) || !has_node(e.j)) {
    throw ConfigError("edge (" + std::to_string(e.i) + ", " +
                      std::to_string(e.j) + ") references an unknown node");
  }
  if (edge_pairs_.count({e.i, e.j}) != 0) {
    throw DuplicateId("edge (" + std::to_string(e.i) + ", " +
                      std::to_string(e.j) + ") already in graph");
  }
  if ((e.information - e.information.transpose()).norm() > 1e-9) {
    throw ConfigError("edge information matrix is not symmetric");
  }
}

void PoseGraph::add_odometry_edge(const GraphEdge& e) {
  check_edge(e);
  edge_pairs_.insert({e.i, e.j});
  odometry_edges_.push_back(e);
}

void PoseGraph::add_loop_edge(const GraphEdge& e) {
  check_edge(e);
  edge_pairs_.insert({e.i, e.j});
  loop_edges_.push_back(e);
}

void PoseGraph::fix_node(std::int64_t id) {
  if (!has_node(id)) {
    throw ConfigError("cannot fix unknown node " + std::to_string(id));
  }
  fixed_.insert(id);
}

Twist edge_residual(const Pose& z, const Pose& x_i, const Pose& x_j) {
  return se3_log(compose(inverse(z), relative(x_i, x_j)));
}

void edge_jacobians(const Pose& z, const Pose& x_i, const Pose& x_j,
                    Twist* residual, Mat6* j_i, Mat6* j_j) {
  const Twist r = edge_residual(z, x_i, x_j);
  const Mat6 jr_inv = se3_right_jacobian_inverse(r);
  // Right perturbation of x_j lands directly behind the residual's exp:
  //   log(exp(r) * exp(delta)) ~ r + Jr^{-1}(r) * delta.
  *j_j = jr_inv;
  // A right perturbation of x_i enters as exp(-delta) inside the product and
  // is carried past x_i^{-1} x_j by the adjoint of its inverse.
  *j_i = -jr_inv * adjoint(relative(x_j, x_i));
  *residual = r;
}

namespace {

double graph_error(const PoseGraph& g,
                   const std::map<std::int64_t, Pose>& poses) {
  double sum = 0.0;
  const auto accumulate = [&](const std::vector<GraphEdge>& edges) {
    for (const GraphEdge& e : edges) {
      const Twist r =
          edge_residual(e.measurement, poses.at(e.i), poses.at(e.j));
      const Vec6 v = r.vector();
      sum += v.dot(e.information * v);
    }
  };
  accumulate(g.odometry_edges());
  accumulate(g.loop_edges());
  return sum;
}

// Free (non-fixed) node ids in ascending order mapped to state indices.
std::map<std::int64_t, int> free_index(const PoseGraph& g) {
  std::map<std::int64_t, int> index;
  int next = 0;
  for (const auto& [id, pose] : g.nodes()) {
    if (g.fixed().count(id) == 0) index[id] = next++;
  }
  return index;
}

// Every connected component must contain a fixed node, otherwise the system
// has a free rigid-motion gauge and the normal equations are singular.
void check_gauge(const PoseGraph& g) {
  if (g.fixed().empty()) {
    throw SingularSystem("no gauge: fix at least one node");
  }
  std::map<std::int64_t, std::int64_t> parent;
  for (const auto& [id, pose] : g.nodes()) parent[id] = id;
  const auto find = [&](std::int64_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  const auto unite = [&](std::int64_t a, std::int64_t b) {
    parent[find(a)] = find(b);
  };
  for (const GraphEdge& e : g.odometry_edges()) unite(e.i, e.j);
  for (const GraphEdge& e : g.loop_edges()) unite(e.i, e.j);
  std::set<std::int64_t> anchored;
  for (std::int64_t id : g.fixed()) anchored.insert(find(id));
  for (const auto& [id, pose] : g.nodes()) {
    if (anchored.count(find(id)) == 0) {
      throw SingularSystem("node " + std::to_string(id) +
                           " is not connected to any fixed node");
    }
  }
}

struct EdgeBlocks {
  Twist residual;
  Mat6 j_i, j_j;
};

// Assembles H and b over the free state. The sink receives each nonzero
// 6x6 block of H exactly once per edge term (upper and lower separately).
template <typename BlockSink>
void assemble(const PoseGraph& g, const std::map<std::int64_t, Pose>& poses,
              const std::map<std::int64_t, int>& index, BlockSink&& sink,
              Eigen::VectorXd* b) {
  b->setZero();
  const auto process = [&](const std::vector<GraphEdge>& edges) {
    for (const GraphEdge& e : edges) {
      EdgeBlocks blk;
      edge_jacobians(e.measurement, poses.at(e.i), poses.at(e.j),
                     &blk.residual, &blk.j_i, &blk.j_j);
      const Vec6 r = blk.residual.vector();
      const auto it_i = index.find(e.i);
      const auto it_j = index.find(e.j);
      const bool free_i = it_i != index.end();
      const bool free_j = it_j != index.end();
      if (free_i) {
        const int bi = 6 * it_i->second;
        sink(bi, bi, Mat6(blk.j_i.transpose() * e.information * blk.j_i));
        b->segment<6>(bi) += blk.j_i.transpose() * e.information * r;
      }
      if (free_j) {
        const int bj = 6 * it_j->second;
        sink(bj, bj, Mat6(blk.j_j.transpose() * e.information * blk.j_j));
        b->segment<6>(bj) += blk.j_j.transpose() * e.information * r;
      }
      if (free_i && free_j) {
        const int bi = 6 * it_i->second;
        const int bj = 6 * it_j->second;
        const Mat6 h_ij = blk.j_i.transpose() * e.information * blk.j_j;
        sink(bi, bj, h_ij);
        sink(bj, bi, Mat6(h_ij.transpose()));
      }
    }
  };
  process(g.odometry_edges());
  process(g.loop_edges());
}

std::map<std::int64_t, Pose> apply_step(
    const std::map<std::int64_t, Pose>& poses,
    const std::map<std::int64_t, int>& index, const Eigen::VectorXd& delta) {
  std::map<std::int64_t, Pose> out = poses;
  for (const auto& [id, idx] : index) {
    const Vec6 d = delta.segment<6>(6 * idx);
    out[id] = compose(out.at(id), se3_exp(Twist(d)));
  }
  return out;
}

}  // namespace

double total_error(const PoseGraph& g) { return graph_error(g, g.nodes()); }

std::pair<Eigen::MatrixXd, Eigen::VectorXd> linearize(const PoseGraph& g) {
  check_gauge(g);
  const auto index = free_index(g);
  const int n = 6 * static_cast<int>(index.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b(n);
  assemble(g, g.nodes(), index,
           [&](int row, int col, const Mat6& block) {
             h.block<6, 6>(row, col) += block;
           },
           &b);
  return {std::move(h), std::move(b)};
}

OptimizeResult optimize(const PoseGraph& g, const LmParams& params) {
  params.validate();
  check_gauge(g);
  const auto index = free_index(g);
  const int n = 6 * static_cast<int>(index.size());

  OptimizeResult result;
  result.poses = g.nodes();
  result.initial_error = graph_error(g, result.poses);
  result.final_error = result.initial_error;
  if (n == 0) {  // every node fixed: nothing to do
    result.converged = true;
    return result;
  }

  const bool dense = index.size() <= PoseGraph::kDenseNodeLimit;
  const Eigen::SparseMatrix<double> sparse_identity = [&] {
    Eigen::SparseMatrix<double> id(n, n);
    id.setIdentity();
    return id;
  }();

  double error = result.initial_error;
  double lambda = params.initial_lambda;
  Eigen::VectorXd b(n);
  Eigen::MatrixXd h_dense;
  Eigen::SparseMatrix<double> h_sparse;
  std::vector<Eigen::Triplet<double>> triplets;

  for (int iteration = 1; iteration <= params.max_iterations; ++iteration) {
    // Linearize at the current estimate.
    if (dense) {
      h_dense.setZero(n, n);
      assemble(g, result.poses, index,
               [&](int row, int col, const Mat6& block) {
                 h_dense.block<6, 6>(row, col) += block;
               },
               &b);
    } else {
      triplets.clear();
      assemble(g, result.poses, index,
               [&](int row, int col, const Mat6& block) {
                 for (int r = 0; r < 6; ++r) {
                   for (int c = 0; c < 6; ++c) {
                     triplets.emplace_back(row + r, col + c, block(r, c));
                   }
                 }
               },
               &b);
      h_sparse.resize(n, n);
      h_sparse.setFromTriplets(triplets.begin(), triplets.end());
    }

    if (b.lpNorm<Eigen::Infinity>() < params.gradient_tol) {
      result.converged = true;
      break;
    }

    // Damped trials: raise lambda until a step decreases the error.
    bool accepted = false;
    while (true) {
      Eigen::VectorXd delta;
      bool solved = false;
      if (dense) {
        Eigen::MatrixXd damped = h_dense;
        damped.diagonal().array() += lambda;
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
        if (ldlt.info() == Eigen::Success) {
          delta = ldlt.solve(-b);
          solved = delta.allFinite();
        }
      } else {
        const Eigen::SparseMatrix<double> damped =
            h_sparse + lambda * sparse_identity;
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(damped);
        if (ldlt.info() == Eigen::Success) {
          delta = ldlt.solve(-b);
          solved = ldlt.info() == Eigen::Success && delta.allFinite();
        }
      }
      if (!solved) {
        throw SingularSystem("damped normal equations are unsolvable");
      }

      double trial_error = std::numeric_limits<double>::infinity();
      std::map<std::int64_t, Pose> trial;
      bool trial_valid = true;
      try {
        trial = apply_step(result.poses, index, delta);
        trial_error = graph_error(g, trial);
      } catch (const NearPiRotation&) {
        trial_valid = false;  // overshoot into the log-map singularity
      }

      if (trial_valid && trial_error < error) {
        const double relative_decrease = (error - trial_error) / error;
        result.poses = std::move(trial);
        error = trial_error;
        lambda = std::max(lambda * params.lambda_down, 1e-15);
        ++result.accepted_steps;
        result.log.push_back({iteration, error, lambda, true});
        accepted = true;
        if (relative_decrease < params.convergence_tol) {
          result.converged = true;
        }
        break;
      }

      lambda *= params.lambda_up;
      result.log.push_back({iteration, trial_error, lambda, false});
      if (lambda > 1e32) break;  // no usable step at any damping
    }

    if (!accepted || result.converged) break;
  }

  result.final_error = error;
  return result;
}

IncrementalResult incremental_run(const std::vector<IncrementalStep>& stream,
                                  const LmParams& params, int reopt_every,
                                  bool zero_timing) {
  if (reopt_every < 1) throw ConfigError("reopt_every must be >= 1");
  IncrementalResult result;
  int since_solve = 0;

  const auto solve_now = [&](std::int64_t step_id) {
    const auto t0 = std::chrono::steady_clock::now();
    OptimizeResult opt = optimize(result.graph, params);
    const auto t1 = std::chrono::steady_clock::now();
    for (const auto& [id, pose] : opt.poses) {
      result.graph.set_node_pose(id, pose);
    }
    result.final_error = opt.final_error;
    result.solve_steps.push_back(step_id);
    result.solve_seconds.push_back(
        zero_timing ? 0.0 : std::chrono::duration<double>(t1 - t0).count());
    since_solve = 0;
  };

  for (const IncrementalStep& step : stream) {
    Pose initial = step.initial;
    if (step.odometry) {
      if (step.odometry->j != step.id) {
        throw ConfigError("odometry edge of step " + std::to_string(step.id) +
                          " does not end at the new node");
      }
      // Chain from the latest optimized estimate of the previous node.
      initial = compose(result.graph.node(step.odometry->i),
                        step.odometry->measurement);
    }
    result.graph.add_node(step.id, initial);
    if (result.graph.nodes().size() == 1) result.graph.fix_node(step.id);
    if (step.odometry) result.graph.add_odometry_edge(*step.odometry);
    for (const GraphEdge& loop : step.loops) {
      result.graph.add_loop_edge(loop);
    }
    ++since_solve;
    if (since_solve >= reopt_every) solve_now(step.id);
  }
  if (since_solve > 0 && !stream.empty()) {
    solve_now(stream.back().id);
  }
  if (result.solve_steps.empty() && !stream.empty()) {
    result.final_error = total_error(result.graph);
  }
  return result;
}

}  // namespace kfminset
