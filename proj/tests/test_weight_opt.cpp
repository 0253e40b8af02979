#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support.hpp"
#include "treebound/exact.hpp"
#include "treebound/weight_opt.hpp"

using namespace treebound;
using namespace treebound::testing;

namespace {

PairwiseModel small_grid(Coupling c, double strength, std::uint64_t seed) {
  ModelFamilySpec spec;
  spec.rows = 3;
  spec.cols = 3;
  spec.coupling = c;
  spec.strength = strength;
  spec.seed = seed;
  return gen_ising_grid(spec);
}

}  // namespace

TEST_CASE("beta update follows the entropy gap and clamps") {
  const BetaUpdate up = update_beta(2.0, 1.0, {0.5, 0.5}, {0.4, 0.8}, 0.1);
  CHECK(up.beta == doctest::Approx(2.0 * std::exp(0.1 * (1.0 - 0.6) * 2.0)));
  CHECK_FALSE(up.clamped);
  const BetaUpdate down = update_beta(2.0, 0.0, {1.0}, {1.0}, 0.1);
  CHECK(down.beta < 2.0);
  const BetaUpdate huge = update_beta(100.0, 10.0, {1.0}, {0.0}, 1.0);
  CHECK(huge.clamped);
  CHECK(huge.beta == doctest::Approx(100.0 * std::exp(kBetaExponentClamp)));
  CHECK_THROWS_AS(update_beta(1.0, 0.0, {1.0}, {}, 1.0), ModelError);
}

TEST_CASE("v update stays on the simplex and moves toward the max-MI tree") {
  const PairwiseModel m = small_grid(Coupling::kMixed, 1.0, 2);
  const MarginalSet tau = brute_force_marginals(m);
  const std::vector<Subtree> trees = {random_spanning_tree(m, 1), random_spanning_tree(m, 2)};
  const std::vector<double> v = {0.3, 0.7};
  const VUpdate u = update_v(m, trees, v, tau, 0.1);
  CHECK(std::accumulate(u.v.begin(), u.v.end(), 0.0) == doctest::Approx(1.0));
  for (double x : u.v) CHECK(x >= 0.0);
  CHECK(u.trees.size() == u.v.size());
  REQUIRE(u.vertex_index < u.trees.size());
  CHECK(u.trees[u.vertex_index] == u.vertex);
  const auto mi = edge_mutual_information(m, tau);
  CHECK(u.vertex == max_weight_spanning_tree(m, mi).tree);
  // non-vertex weights shrink by exactly (1 - eps)
  for (std::size_t r = 0; r < trees.size(); ++r)
    if (r != u.vertex_index) CHECK(u.v[r] == doctest::Approx(0.9 * v[r]));
  // repeating the step with the vertex already present does not grow the pool
  const VUpdate again = update_v(m, u.trees, u.v, tau, 0.1);
  CHECK(again.trees.size() == u.trees.size());
  CHECK_THROWS_AS(update_v(m, trees, {1.0}, tau, 0.1), ModelError);
}

TEST_CASE("Chow-Liu reselection on exact marginals") {
  // a chain plus one weak closing edge: the chain carries the most MI
  LogPotentials p;
  p.unary.assign(4, {0.0, 0.0});
  p.pairwise = {{2, -2, -2, 2}, {2, -2, -2, 2}, {2, -2, -2, 2}, {0.05, -0.05, -0.05, 0.05}};
  const PairwiseModel m({2, 2, 2, 2}, {{0, 1}, {1, 2}, {2, 3}, {0, 3}}, p);
  const Subtree t = reselect_positive_tree(m, brute_force_marginals(m));
  CHECK(t.edges() == std::vector<std::size_t>{0, 2, 3});  // 0-1, 1-2, 2-3 after sorting
}

TEST_CASE("lower-bound optimizer: certified, below the truth, deterministic") {
  for (Coupling c : {Coupling::kMixed, Coupling::kAttractive}) {
    const PairwiseModel m = small_grid(c, 1.0, 3);
    OptimizerOptions o;
    o.seed = 4;
    o.outer_iters = 20;
    const OptimizerOutcome a = optimize_lower_bound(m, o);
    const double z = brute_force_log_partition(m);
    CHECK(a.result.certified);
    CHECK(a.result.direction == BoundDirection::kLower);
    CHECK(a.result.value <= z + 1e-7);
    CHECK(a.trace.size() == 20);
    CHECK(classify_weights(a.ensemble).domain == WeightDomain::kNegative);
    // the returned value is the best certified trace entry
    double best = -1e300;
    for (const auto& r : a.trace)
      if (r.certified) best = std::max(best, r.bound);
    CHECK(a.result.value == best);
    const OptimizerOutcome b = optimize_lower_bound(m, o);
    CHECK(b.result.value == a.result.value);
    CHECK(trace_to_csv(b.trace) == trace_to_csv(a.trace));
  }
}

TEST_CASE("lower-bound optimizer improves on its starting point") {
  const PairwiseModel m = small_grid(Coupling::kAttractive, 0.8, 5);
  OptimizerOptions o;
  o.seed = 1;
  const OptimizerOutcome r = optimize_lower_bound(m, o);
  CHECK(r.result.value >= r.trace.front().bound);
}

TEST_CASE("upper-bound optimizer: certified, above the truth, non-increasing") {
  const PairwiseModel m = small_grid(Coupling::kMixed, 1.5, 6);
  OptimizerOptions o;
  o.seed = 2;
  o.outer_iters = 15;
  const OptimizerOutcome r = optimize_upper_bound(m, o);
  CHECK(r.result.certified);
  CHECK(r.result.direction == BoundDirection::kUpper);
  CHECK(r.result.value >= brute_force_log_partition(m) - 1e-7);
  for (std::size_t k = 1; k < r.trace.size(); ++k)
    CHECK(r.trace[k].bound <= r.trace[k - 1].bound + 1e-12);
  for (const auto& mem : r.ensemble.members()) CHECK(mem.weight > 0.0);
}

TEST_CASE("optimizers reject disconnected models") {
  const PairwiseModel g({2, 2, 2, 2}, {{0, 1}, {2, 3}});
  CHECK_THROWS_AS(optimize_lower_bound(g, {}), ModelError);
  CHECK_THROWS_AS(optimize_upper_bound(g, {}), ModelError);
}

TEST_CASE("naive mean field ascends monotonically and stays below the truth") {
  Rng rng(40);
  for (int k = 0; k < 5; ++k) {
    const PairwiseModel m = random_ising(9, grid_edges(3, 3), Coupling::kMixed, 1.5, rng);
    std::vector<std::vector<double>> init(9, {0.3, 0.7});
    const MeanFieldResult r = mean_field_coordinate_ascent(m, init);
    CHECK(r.result.converged);
    for (std::size_t s = 1; s < r.sweep_values.size(); ++s)
      CHECK(r.sweep_values[s] >= r.sweep_values[s - 1] - 1e-12);
    CHECK(r.result.value <= brute_force_log_partition(m));
    CHECK(r.result.value == doctest::Approx(mean_field_bound(m, r.marginals.unary)));
  }
}

TEST_CASE("restarts never hurt and are seed-deterministic") {
  const PairwiseModel m = small_grid(Coupling::kMixed, 2.0, 7);
  const double one = naive_mean_field(m, 1, 3).result.value;
  const MeanFieldResult ten = naive_mean_field(m, 10, 3);
  CHECK(ten.result.value >= one);
  CHECK(naive_mean_field(m, 10, 3).result.value == ten.result.value);
}

TEST_CASE("mean field is exact on an uncoupled model") {
  const PairwiseModel m = small_grid(Coupling::kMixed, 0.0, 8);
  CHECK(naive_mean_field(m, 1, 0).result.value ==
        doctest::Approx(brute_force_log_partition(m)).epsilon(1e-10));
}

TEST_CASE("structured mean field") {
  const PairwiseModel m = small_grid(Coupling::kAttractive, 1.0, 9);
  const double z = brute_force_log_partition(m);
  const Subtree skel = greedy_v_acyclic_skeleton(m, std::vector<double>(m.edge_count(), 1.0));
  CHECK(is_v_acyclic(m, skel));
  CHECK(skel.size() > 0);
  const BoundResult s = structured_mean_field(m, skel);
  CHECK(s.certified);
  CHECK(s.value <= z);
  // a spanning tree of a loopy grid is not v-acyclic
  CHECK_THROWS_AS(structured_mean_field(m, random_spanning_tree(m, 1)), ModelError);
  // on a tree model the whole tree is an admissible skeleton and the bound is exact
  Rng rng(41);
  const PairwiseModel tree = random_ising(7, random_tree_edges(7, rng), Coupling::kMixed, 1.5, rng);
  std::vector<std::size_t> all(tree.edge_count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  CHECK(structured_mean_field(tree, Subtree(tree, all)).value ==
        doctest::Approx(brute_force_log_partition(tree)).epsilon(1e-8));
}
