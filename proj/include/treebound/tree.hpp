#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "treebound/model.hpp"

namespace treebound {

/// Acyclic subset of a model's edges, spanning all of its nodes (possibly a
/// forest). Holds sorted edge indices into PairwiseModel::edges().
class Subtree {
 public:
  Subtree() = default;

  /// Throws ModelError if an index is out of range, repeated, or the edges
  /// contain a cycle.
  Subtree(const PairwiseModel& model, std::vector<std::size_t> edge_indices);

  const std::vector<std::size_t>& edges() const { return edges_; }
  std::size_t size() const { return edges_.size(); }
  bool contains(std::size_t edge_index) const;

  auto operator<=>(const Subtree&) const = default;

 private:
  std::vector<std::size_t> edges_;
};

/// The spanning-forest view of the empty edge set.
inline Subtree empty_subtree() { return Subtree(); }

/// Union-find over node indices.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n);
  std::size_t find(std::size_t x);
  bool unite(std::size_t a, std::size_t b);

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> rank_;
};

struct EnsembleMember {
  Subtree tree;
  double weight = 0.0;
};

/// Signed combination of subtrees with weights summing to one.
class WeightedEnsemble {
 public:
  WeightedEnsemble() = default;

  /// Throws ModelError when the weights do not sum to one within 1e-12
  /// (relative to the total absolute weight when that exceeds one).
  WeightedEnsemble(const PairwiseModel& model, std::vector<EnsembleMember> members);

  const std::vector<EnsembleMember>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }

  /// mu_ij = sum of weights of members containing edge (i, j).
  const std::vector<double>& edge_appearance() const { return mu_; }

 private:
  std::vector<EnsembleMember> members_;
  std::vector<double> mu_;
};

/// Positive tree with weight beta + 1 and negative trees with weights
/// -beta * v_r, sum(v) = 1, v_r in [0, 1].
struct NegativeEnsembleView {
  Subtree positive_tree;
  double beta = 1.0;
  std::vector<Subtree> negative_trees;
  std::vector<double> v;

  /// Member 0 is the positive tree; member r + 1 is negative tree r.
  WeightedEnsemble ensemble(const PairwiseModel& model) const;
};

enum class WeightDomain { kPositive, kNegative, kMixed };

struct DomainLabel {
  WeightDomain domain = WeightDomain::kMixed;
  std::size_t positive_index = 0;  ///< Meaningful for kNegative.
  bool operator==(const DomainLabel&) const = default;
};

std::string to_string(const DomainLabel& label);

bool is_acyclic(const PairwiseModel& model, const std::vector<std::size_t>& edge_indices);

/// True iff adding any single model edge to the tree keeps it acyclic.
bool is_v_acyclic(const PairwiseModel& model, const Subtree& tree);

struct SpanningTreeResult {
  Subtree tree;
  bool spanning = true;  ///< False when the graph is disconnected (forest returned).
};

/// Kruskal. Ties are broken toward the lexicographically smaller edge.
SpanningTreeResult max_weight_spanning_tree(const PairwiseModel& model,
                                            const std::vector<double>& edge_weights);

/// Kruskal over i.i.d. U[0,1) edge weights. Throws on disconnected graphs.
Subtree random_spanning_tree(const PairwiseModel& model, std::uint64_t seed);

/// Draws random spanning trees until every edge is covered. After the first
/// draw, uncovered edges get weight 2 so each draw covers at least one new
/// edge; the list therefore has at most |E| trees.
std::vector<Subtree> cover_with_spanning_trees(const PairwiseModel& model, std::uint64_t seed);

std::vector<double> edge_appearance(const PairwiseModel& model,
                                    const std::vector<EnsembleMember>& members);

/// Weights with magnitude below 1e-12 are ignored.
DomainLabel classify_weights(const std::vector<double>& weights);
DomainLabel classify_weights(const WeightedEnsemble& ensemble);

/// "i-j;i-j;..." in edge-index order.
std::string edge_list_string(const PairwiseModel& model, const Subtree& tree);

/// One line per member "w : i-j i-j ...", then "mu: i-j=value ...".
std::string dump_ensemble(const PairwiseModel& model, const WeightedEnsemble& ensemble);

}  // namespace treebound
