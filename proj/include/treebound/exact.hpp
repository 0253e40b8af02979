#pragma once

#include <cstddef>
#include <vector>

#include "treebound/model.hpp"
#include "treebound/tree.hpp"

namespace treebound {

/// Node and edge distributions. pairwise[e] is empty when edge e carries no
/// table (e.g. off-tree edges of tree_marginals).
struct MarginalSet {
  std::vector<std::vector<double>> unary;
  std::vector<std::vector<double>> pairwise;

  bool has_pairwise(std::size_t e) const { return e < pairwise.size() && !pairwise[e].empty(); }
};

inline constexpr std::size_t kDefaultEnumerationCap = std::size_t{1} << 20;

/// Phi(theta) by exhaustive enumeration. Throws ModelError when the state
/// space exceeds `cap`.
double brute_force_log_partition(const PairwiseModel& model,
                                 std::size_t cap = kDefaultEnumerationCap);

MarginalSet brute_force_marginals(const PairwiseModel& model,
                                  std::size_t cap = kDefaultEnumerationCap);

/// Exact log partition of the tree-structured distribution with parameters
/// `params` over `model`'s nodes. Throws if params are nonzero on an edge
/// outside `tree`.
double tree_log_partition(const PairwiseModel& model, const Subtree& tree,
                          const LogPotentials& params);

/// Exact marginals by an upward then downward pass per component (rooted at
/// its lowest-index node). Pairwise tables are filled for tree edges only.
MarginalSet tree_marginals(const PairwiseModel& model, const Subtree& tree,
                           const LogPotentials& params);

double entropy_unary(const std::vector<double>& tau);

/// tau_ij is row-major tau_i.size() x tau_j.size(). Values within -1e-12 of
/// zero are clamped to zero.
double mutual_information(const std::vector<double>& tau_ij, const std::vector<double>& tau_i,
                          const std::vector<double>& tau_j);

/// sum_i H_i - sum_{(i,j) in tree} I_ij.
double tree_entropy(const PairwiseModel& model, const MarginalSet& marginals, const Subtree& tree);

/// Exact Phi for a binary rows x cols grid (edges exactly grid_edges(rows,
/// cols)) by row-wise elimination over 2^min(rows, cols) states. The grid
/// shape is inferred from the model.
double grid_log_partition(const PairwiseModel& model);

struct GridShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// The grid shape matching the model's edges, preferring the fewest columns.
std::optional<GridShape> detect_grid(const PairwiseModel& model);

inline constexpr std::size_t kMaxGridWidth = 14;

/// Best available exact Phi: tree pass, brute force under the cap, or grid
/// elimination. nullopt when none applies.
std::optional<double> exact_log_partition(const PairwiseModel& model,
                                          std::size_t cap = kDefaultEnumerationCap);

}  // namespace treebound
