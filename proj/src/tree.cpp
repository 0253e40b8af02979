#include "treebound/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "treebound/rng.hpp"

namespace treebound {

DisjointSets::DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
  std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t DisjointSets::find(std::size_t x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool DisjointSets::unite(std::size_t a, std::size_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (rank_[a] < rank_[b]) std::swap(a, b);
  parent_[b] = a;
  if (rank_[a] == rank_[b]) ++rank_[a];
  return true;
}

bool is_acyclic(const PairwiseModel& model, const std::vector<std::size_t>& edge_indices) {
  DisjointSets sets(model.node_count());
  for (std::size_t e : edge_indices) {
    if (!sets.unite(model.edge(e).i, model.edge(e).j)) return false;
  }
  return true;
}

Subtree::Subtree(const PairwiseModel& model, std::vector<std::size_t> edge_indices)
    : edges_(std::move(edge_indices)) {
  std::sort(edges_.begin(), edges_.end());
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    if (edges_[k] >= model.edge_count()) throw ModelError("subtree edge index out of range");
    if (k > 0 && edges_[k] == edges_[k - 1]) throw ModelError("subtree repeats an edge");
  }
  if (!is_acyclic(model, edges_)) throw ModelError("subtree edge set contains a cycle");
}

bool Subtree::contains(std::size_t edge_index) const {
  return std::binary_search(edges_.begin(), edges_.end(), edge_index);
}

std::vector<double> edge_appearance(const PairwiseModel& model,
                                    const std::vector<EnsembleMember>& members) {
  std::vector<double> mu(model.edge_count(), 0.0);
  for (const EnsembleMember& m : members) {
    for (std::size_t e : m.tree.edges()) mu[e] += m.weight;
  }
  return mu;
}

WeightedEnsemble::WeightedEnsemble(const PairwiseModel& model, std::vector<EnsembleMember> members)
    : members_(std::move(members)) {
  double total = 0.0;
  double magnitude = 0.0;
  for (const EnsembleMember& m : members_) {
    if (!std::isfinite(m.weight)) throw ModelError("non-finite ensemble weight");
    total += m.weight;
    magnitude += std::abs(m.weight);
    for (std::size_t e : m.tree.edges()) {
      if (e >= model.edge_count()) throw ModelError("ensemble tree does not belong to model");
    }
  }
  if (std::abs(total - 1.0) > 1e-12 * std::max(1.0, magnitude)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "ensemble weights sum to " << total << ", expected 1";
    throw ModelError(msg.str());
  }
  mu_ = treebound::edge_appearance(model, members_);
}

WeightedEnsemble NegativeEnsembleView::ensemble(const PairwiseModel& model) const {
  if (!(beta > 0.0)) throw ModelError("beta must be positive");
  if (v.size() != negative_trees.size()) throw ModelError("one v per negative tree required");
  std::vector<EnsembleMember> members;
  members.push_back({positive_tree, beta + 1.0});
  for (std::size_t r = 0; r < negative_trees.size(); ++r) {
    members.push_back({negative_trees[r], -beta * v[r]});
  }
  return WeightedEnsemble(model, std::move(members));
}

std::string to_string(const DomainLabel& label) {
  switch (label.domain) {
    case WeightDomain::kPositive:
      return "positive";
    case WeightDomain::kNegative:
      return "negative(" + std::to_string(label.positive_index) + ")";
    case WeightDomain::kMixed:
      return "mixed";
  }
  return "mixed";
}

bool is_v_acyclic(const PairwiseModel& model, const Subtree& tree) {
  DisjointSets sets(model.node_count());
  for (std::size_t e : tree.edges()) {
    if (!sets.unite(model.edge(e).i, model.edge(e).j)) return false;
  }
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    if (tree.contains(e)) continue;
    if (sets.find(model.edge(e).i) == sets.find(model.edge(e).j)) return false;
  }
  return true;
}

SpanningTreeResult max_weight_spanning_tree(const PairwiseModel& model,
                                            const std::vector<double>& edge_weights) {
  if (edge_weights.size() != model.edge_count()) {
    throw ModelError("one weight per model edge required");
  }
  std::vector<std::size_t> order(model.edge_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Edge indices are already lexicographic, so a stable sort keeps the tie rule.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return edge_weights[a] > edge_weights[b];
  });
  DisjointSets sets(model.node_count());
  std::vector<std::size_t> chosen;
  for (std::size_t e : order) {
    if (sets.unite(model.edge(e).i, model.edge(e).j)) chosen.push_back(e);
  }
  SpanningTreeResult result;
  result.spanning = model.node_count() == 0 || chosen.size() + 1 == model.node_count();
  result.tree = Subtree(model, std::move(chosen));
  return result;
}

namespace {

Subtree require_spanning(SpanningTreeResult r) {
  if (!r.spanning) throw ModelError("model graph is disconnected; no spanning tree exists");
  return std::move(r.tree);
}

}  // namespace

Subtree random_spanning_tree(const PairwiseModel& model, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(model.edge_count());
  for (double& x : w) x = rng.uniform(0.0, 1.0);
  return require_spanning(max_weight_spanning_tree(model, w));
}

std::vector<Subtree> cover_with_spanning_trees(const PairwiseModel& model, std::uint64_t seed) {
  if (!model.is_connected()) throw ModelError("model graph is disconnected; no spanning tree exists");
  Rng rng(seed);
  std::vector<bool> covered(model.edge_count(), false);
  std::size_t uncovered = model.edge_count();
  std::vector<Subtree> trees;
  bool first = true;
  do {
    std::vector<double> w(model.edge_count());
    for (std::size_t e = 0; e < w.size(); ++e) {
      w[e] = (!first && !covered[e]) ? 2.0 : rng.uniform(0.0, 1.0);
    }
    first = false;
    Subtree t = require_spanning(max_weight_spanning_tree(model, w));
    for (std::size_t e : t.edges()) {
      if (!covered[e]) {
        covered[e] = true;
        --uncovered;
      }
    }
    trees.push_back(std::move(t));
  } while (uncovered > 0);
  return trees;
}

DomainLabel classify_weights(const std::vector<double>& weights) {
  std::size_t positives = 0;
  std::size_t above_one = 0;
  std::size_t negatives = 0;
  std::size_t big_index = 0;
  for (std::size_t r = 0; r < weights.size(); ++r) {
    const double w = weights[r];
    if (std::abs(w) < 1e-12) continue;
    if (w > 0) {
      ++positives;
      if (w > 1.0) {
        ++above_one;
        big_index = r;
      }
    } else {
      ++negatives;
    }
  }
  if (negatives == 0 && positives > 0) return {WeightDomain::kPositive, 0};
  if (positives == 1 && above_one == 1) return {WeightDomain::kNegative, big_index};
  return {WeightDomain::kMixed, 0};
}

DomainLabel classify_weights(const WeightedEnsemble& ensemble) {
  std::vector<double> w;
  for (const EnsembleMember& m : ensemble.members()) w.push_back(m.weight);
  return classify_weights(w);
}

std::string edge_list_string(const PairwiseModel& model, const Subtree& tree) {
  std::string out;
  for (std::size_t k = 0; k < tree.edges().size(); ++k) {
    const Edge& e = model.edge(tree.edges()[k]);
    if (k) out += ';';
    out += std::to_string(e.i) + "-" + std::to_string(e.j);
  }
  return out;
}

std::string dump_ensemble(const PairwiseModel& model, const WeightedEnsemble& ensemble) {
  std::ostringstream out;
  out.precision(17);
  for (const EnsembleMember& m : ensemble.members()) {
    out << m.weight << " :";
    for (std::size_t e : m.tree.edges()) out << ' ' << model.edge(e).i << '-' << model.edge(e).j;
    out << '\n';
  }
  out << "mu:";
  const auto& mu = ensemble.edge_appearance();
  for (std::size_t e = 0; e < mu.size(); ++e) {
    out << ' ' << model.edge(e).i << '-' << model.edge(e).j << '=' << mu[e];
  }
  out << '\n';
  return out.str();
}

}  // namespace treebound
