#pragma once

// Random model builders shared by the unit and acceptance tests.

#include <cstdint>
#include <vector>

#include "treebound/model.hpp"
#include "treebound/rng.hpp"

namespace treebound::testing {

// Ising-style tables on arbitrary edges: theta_i = [-h, h], theta_ij =
// [J, -J; -J, J] with h ~ U[-field, field), J ~ U[0, c) or U[-c, c).
inline PairwiseModel random_ising(std::size_t n, const std::vector<Edge>& edges, Coupling coupling,
                                  double c, Rng& rng, double field = 0.5) {
  LogPotentials theta;
  for (std::size_t i = 0; i < n; ++i) {
    const double h = rng.uniform(-field, field);
    theta.unary.push_back({-h, h});
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double j = coupling == Coupling::kAttractive ? rng.uniform(0.0, c) : rng.uniform(-c, c);
    theta.pairwise.push_back({j, -j, -j, j});
  }
  return PairwiseModel(std::vector<std::size_t>(n, 2), edges, std::move(theta));
}

// Node k > 0 attaches to a uniformly drawn earlier node.
inline std::vector<Edge> random_tree_edges(std::size_t n, Rng& rng) {
  std::vector<Edge> edges;
  for (std::size_t k = 1; k < n; ++k) {
    const auto parent = static_cast<std::size_t>(rng.uniform(0.0, static_cast<double>(k)));
    edges.push_back({parent, k});
  }
  return edges;
}

// Arbitrary cardinalities and dense random tables in [-scale, scale).
inline PairwiseModel random_general(const std::vector<std::size_t>& cards,
                                    const std::vector<Edge>& edges, double scale, Rng& rng) {
  LogPotentials theta;
  for (std::size_t m : cards) {
    std::vector<double> t(m);
    for (double& x : t) x = rng.uniform(-scale, scale);
    theta.unary.push_back(std::move(t));
  }
  for (const Edge& e : edges) {
    std::vector<double> t(cards[e.i] * cards[e.j]);
    for (double& x : t) x = rng.uniform(-scale, scale);
    theta.pairwise.push_back(std::move(t));
  }
  return PairwiseModel(cards, edges, std::move(theta));
}

inline std::vector<std::size_t> random_cards(std::size_t n, std::size_t max_card, Rng& rng) {
  std::vector<std::size_t> cards(n);
  for (auto& m : cards) m = 2 + static_cast<std::size_t>(rng.uniform(0.0, double(max_card - 1)));
  return cards;
}

inline std::vector<Edge> triangle_edges() { return {{0, 1}, {0, 2}, {1, 2}}; }

}  // namespace treebound::testing
