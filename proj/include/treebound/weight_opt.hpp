#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "treebound/bound.hpp"
#include "treebound/exact.hpp"
#include "treebound/message_passing.hpp"
#include "treebound/tree.hpp"

namespace treebound {

struct OptimizerOptions {
  double beta_init = 10.0;
  double step_beta = 1.0;
  double step_v = 0.05;
  std::size_t outer_iters = 50;
  MpOptions inner;
  bool reselect_positive = true;
  std::size_t reselect_period = 5;
  std::uint64_t seed = 0;
};

struct OptimizerTraceRow {
  std::size_t iteration = 0;
  double beta = 0.0;  ///< Weight parameter used at this iteration (0 for TRBP).
  double bound = 0.0;
  bool certified = false;
  double entropy_gap = 0.0;
  std::string tree_edges;  ///< Positive tree (lower) or added tree (upper).
  bool beta_clamped = false;
};

/// iter,beta,bound,certified,entropy_gap,tree_edges
std::string trace_to_csv(const std::vector<OptimizerTraceRow>& trace);

struct OptimizerOutcome {
  BoundResult result;
  std::vector<OptimizerTraceRow> trace;
  WeightedEnsemble ensemble;  ///< Ensemble of the returned result.
  MarginalSet marginals;      ///< Pseudomarginals of the returned result.
};

inline constexpr double kBetaExponentClamp = 50.0;
inline constexpr double kBetaFloor = 1e-3;

struct BetaUpdate {
  double beta = 0.0;
  bool clamped = false;
};

/// beta * exp(eps * (H+ - sum_r v_r H-_r) * beta), exponent clamped to ±50.
BetaUpdate update_beta(double beta, double h_plus, const std::vector<double>& v,
                       const std::vector<double>& h_minus, double eps_beta);

/// Mutual information of every edge's pseudomarginal.
std::vector<double> edge_mutual_information(const PairwiseModel& model,
                                            const MarginalSet& marginals);

struct VUpdate {
  std::vector<Subtree> trees;
  std::vector<double> v;
  Subtree vertex;            ///< Max-sum-MI spanning tree.
  std::size_t vertex_index;  ///< Its position in `trees`.
};

/// One conditional-gradient step on the negative-tree weights: the linear
/// subproblem's vertex is the spanning tree of maximum total mutual
/// information; v moves eps_v toward it (appending it if new).
VUpdate update_v(const PairwiseModel& model, const std::vector<Subtree>& trees,
                 const std::vector<double>& v, const MarginalSet& marginals, double eps_v);

/// Chow-Liu: maximum spanning tree under the current mutual informations.
Subtree reselect_positive_tree(const PairwiseModel& model, const MarginalSet& marginals);

/// Negative TRBP lower bound with beta / v updates and optional positive-tree
/// reselection. Returns the best certified iterate (the last one if none
/// certified).
OptimizerOutcome optimize_lower_bound(const PairwiseModel& model, const OptimizerOptions& options);

/// TRBP upper bound: positive weights over a lazily grown tree pool,
/// conditional-gradient steps toward the max-MI spanning tree with
/// backtracking, accepting only steps that do not raise the bound.
OptimizerOutcome optimize_upper_bound(const PairwiseModel& model, const OptimizerOptions& options);

struct MeanFieldResult {
  BoundResult result;
  MarginalSet marginals;           ///< Unary tables; pairwise are products.
  std::vector<double> sweep_values;  ///< Bound after each sweep (best run).
};

/// <tau, theta> + sum_i H_i for a fully factorized tau.
double mean_field_bound(const PairwiseModel& model, const std::vector<std::vector<double>>& unary);

/// Sequential coordinate ascent from the given node distributions until the
/// max change drops below 1e-10 or 1e4 sweeps.
MeanFieldResult mean_field_coordinate_ascent(const PairwiseModel& model,
                                             std::vector<std::vector<double>> initial);

/// Best of one uniform start and restarts - 1 random starts.
MeanFieldResult naive_mean_field(const PairwiseModel& model, std::size_t restarts,
                                 std::uint64_t seed);

/// Message passing with mu = 1 on the skeleton and the mean-field limit on
/// every other edge. Throws ModelError unless the skeleton is v-acyclic.
BoundResult structured_mean_field(const PairwiseModel& model, const Subtree& skeleton,
                                  const MpOptions& options = {});

/// Greedy v-acyclic skeleton: edges in decreasing weight order, each kept if
/// the set stays v-acyclic.
Subtree greedy_v_acyclic_skeleton(const PairwiseModel& model, const std::vector<double>& weights);

}  // namespace treebound
