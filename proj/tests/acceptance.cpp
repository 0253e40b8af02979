// Acceptance suite. Prints one PASS/FAIL line per criterion.
//
//   treebound_acceptance            run all criteria
//   treebound_acceptance 3 7        run the listed ones
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "treebound/bound.hpp"
#include "treebound/exact.hpp"
#include "treebound/experiments.hpp"
#include "treebound/log_math.hpp"
#include "treebound/message_passing.hpp"
#include "treebound/model.hpp"
#include "treebound/rng.hpp"
#include "treebound/tree.hpp"
#include "treebound/weight_opt.hpp"

using namespace treebound;
using namespace treebound::testing;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

Coupling pick_coupling(Rng& rng) {
  return rng.uniform(0.0, 1.0) < 0.5 ? Coupling::kMixed : Coupling::kAttractive;
}

// 1 ------------------------------------------------------------------------
Verdict sandwich() {
  Rng rng(101);
  MethodConfig cfg;
  cfg.mf_restarts = 3;
  std::size_t checked = 0, certified = 0, violations = 0;
  double worst = -1e300;
  std::string first;
  for (std::size_t k = 0; k < 200; ++k) {
    const Coupling coupling = pick_coupling(rng);
    const double c = rng.uniform(0.0, 2.0);
    PairwiseModel model;
    switch (k % 4) {
      case 0: {
        const auto n = 3 + static_cast<std::size_t>(rng.uniform(0.0, 8.0));
        model = random_ising(n, random_tree_edges(n, rng), coupling, c, rng);
        break;
      }
      case 1:
        model = random_ising(3, triangle_edges(), coupling, c, rng);
        break;
      case 2:
        model = random_ising(9, grid_edges(3, 3), coupling, c, rng);
        break;
      default:
        model = random_ising(16, grid_edges(4, 4), coupling, c, rng);
        break;
    }
    const double exact = brute_force_log_partition(model);
    cfg.optimizer.seed = k;
    for (Method m : {Method::kNegTrbp, Method::kNaiveMf, Method::kStructuredMf, Method::kTrbp}) {
      const BoundResult r = run_method(model, m, cfg).result;
      ++checked;
      if (!r.certified) continue;
      ++certified;
      const double err = r.direction == BoundDirection::kUpper ? exact - r.value : r.value - exact;
      worst = std::max(worst, err);
      if (r.direction == BoundDirection::kNone || err > 1e-7) {
        if (violations++ == 0) {
          first = "model " + std::to_string(k) + " " + to_string(m) + " err " + fmt(err);
        }
      }
    }
  }
  Verdict v;
  v.pass = violations == 0 && certified > 0;
  v.detail = std::to_string(certified) + "/" + std::to_string(checked) +
             " certified, violations " + std::to_string(violations) + ", worst wrong-side gap " +
             fmt(worst) + (first.empty() ? "" : ", first: " + first);
  return v;
}

// 2 ------------------------------------------------------------------------
Verdict triangle() {
  const PairwiseModel model = triangle_example();
  const double exact = brute_force_log_partition(model);
  MethodConfig cfg;
  const BoundResult up = run_method(model, Method::kTrbp, cfg).result;
  const BoundResult lo = run_method(model, Method::kNegTrbp, cfg).result;
  const bool phi_ok = std::abs(exact - std::log(4.1)) <= 1e-9;
  const bool bracket = up.certified && lo.certified && up.direction == BoundDirection::kUpper &&
                       lo.direction == BoundDirection::kLower && up.value >= exact - 1e-7 &&
                       lo.value <= exact + 1e-7;

  SurfaceConfig sc;
  sc.resolution = 0.05;
  const auto points = run_weight_surface(model, sc);
  std::size_t pos = 0, neg = 0, bad = 0, converged = 0;
  for (const auto& p : points) {
    if (!p.converged) continue;
    ++converged;
    if (p.domain.domain == WeightDomain::kPositive) {
      ++pos;
      bad += !p.exceeds_exact;
    } else if (p.domain.domain == WeightDomain::kNegative) {
      ++neg;
      bad += p.exceeds_exact;
    }
  }
  Verdict v;
  v.pass = phi_ok && bracket && bad == 0 && pos > 0 && neg > 0;
  v.detail = "phi " + fmt(exact) + ", bounds [" + fmt(lo.value) + ", " + fmt(up.value) +
             "], surface " + std::to_string(converged) + "/" + std::to_string(points.size()) +
             " converged (D+ " + std::to_string(pos) + ", D- " + std::to_string(neg) +
             "), inconsistent " + std::to_string(bad);
  return v;
}

// 3 ------------------------------------------------------------------------
double lse5(const std::vector<double>& p) { return log_sum_exp(p); }

// Returns the number of inequality violations over `trials` random draws.
std::size_t jensen_violations(bool negative_domain, std::size_t trials, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t violations = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto members = 2 + static_cast<std::size_t>(rng.uniform(0.0, 4.0));
    std::vector<double> w(members);
    if (negative_domain) {
      double neg = 0.0;
      const auto r = static_cast<std::size_t>(rng.uniform(0.0, static_cast<double>(members)));
      for (std::size_t k = 0; k < members; ++k) {
        if (k == r) continue;
        w[k] = -rng.uniform(0.01, 2.0);
        neg += w[k];
      }
      w[r] = 1.0 - neg;
    } else {
      // at least two positive weights and one negative, rescaled to sum 1
      const std::size_t k_pos = std::max<std::size_t>(2, members - 1);
      w.resize(k_pos + 1);
      double sum = 0.0;
      for (std::size_t k = 0; k < k_pos; ++k) sum += (w[k] = rng.uniform(0.2, 1.5));
      sum += (w[k_pos] = rng.uniform(-0.3, -0.05));
      for (double& x : w) x /= sum;
    }
    std::vector<std::vector<double>> p(w.size(), std::vector<double>(5));
    for (auto& x : p)
      for (double& y : x) y = rng.uniform(-3.0, 3.0);
    std::vector<double> combined(5, 0.0), values;
    for (std::size_t k = 0; k < w.size(); ++k) {
      for (std::size_t d = 0; d < 5; ++d) combined[d] += w[k] * p[k][d];
      values.push_back(lse5(p[k]));
    }
    violations += !reverse_jensen_holds(values, lse5(combined), w).holds;
  }
  return violations;
}

Verdict reverse_jensen() {
  const std::size_t neg = jensen_violations(true, 1000, 303);
  const std::size_t mixed = jensen_violations(false, 1000, 304);
  Verdict v;
  v.pass = neg == 0 && mixed >= 1;
  v.detail = "negative-domain violations " + std::to_string(neg) + "/1000, mixed-domain " +
             std::to_string(mixed) + "/1000";
  return v;
}

// 4 ------------------------------------------------------------------------
Verdict tree_exactness() {
  Rng rng(404);
  MethodConfig cfg;
  cfg.mf_restarts = 3;
  const std::vector<Method> methods = {Method::kTrbp, Method::kNegTrbp, Method::kNaiveMf,
                                       Method::kStructuredMf, Method::kLoopyBp};
  std::vector<double> worst(methods.size(), 0.0);
  std::vector<std::size_t> misses(methods.size(), 0);
  for (std::size_t k = 0; k < 50; ++k) {
    const auto n = 2 + static_cast<std::size_t>(rng.uniform(0.0, 11.0));
    const Coupling coupling = pick_coupling(rng);
    const double c = rng.uniform(0.0, 2.0);
    const PairwiseModel model = random_ising(n, random_tree_edges(n, rng), coupling, c, rng);
    const double exact = brute_force_log_partition(model);
    cfg.optimizer.seed = k;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const double err = std::abs(run_method(model, methods[m], cfg).result.value - exact);
      worst[m] = std::max(worst[m], err);
      misses[m] += err > 1e-6;
    }
  }
  Verdict v;
  v.pass = true;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    v.pass = v.pass && misses[m] == 0;
    v.detail += (m ? ", " : "") + to_string(methods[m]) + " max|err| " + fmt(worst[m]) + " (" +
                std::to_string(misses[m]) + "/50 off)";
  }
  return v;
}

// 5 ------------------------------------------------------------------------
Verdict gradient() {
  Rng rng(505);
  const double eps = 1e-5;
  double worst_rel = 0.0;
  std::size_t failures = 0;
  for (std::size_t k = 0; k < 20; ++k) {
    const PairwiseModel model = k % 2 ? random_ising(9, grid_edges(3, 3), Coupling::kMixed, 1.0, rng)
                                      : random_ising(3, triangle_edges(), Coupling::kMixed, 1.0, rng);
    const auto members = 2 + static_cast<std::size_t>(rng.uniform(0.0, 3.0));
    std::vector<DecompositionMember> dm;
    for (std::size_t r = 0; r < members; ++r) {
      DecompositionMember m;
      m.tree = random_spanning_tree(model, rng.next());
      m.weight = rng.uniform(0.2, 1.5) * (rng.uniform(0.0, 1.0) < 0.3 ? -1.0 : 1.0);
      m.params = model.zero_potentials();
      for (auto& t : m.params.unary)
        for (double& x : t) x = rng.uniform(-1.0, 1.0);
      for (std::size_t e : m.tree.edges())
        for (double& x : m.params.pairwise[e]) x = rng.uniform(-1.0, 1.0);
      dm.push_back(std::move(m));
    }
    const TreeDecomposition d = make_decomposition(model, dm);
    const auto grad = psi_weight_gradient(model, d);
    for (std::size_t r = 0; r < members; ++r) {
      TreeDecomposition hi = d, lo = d;
      hi.members[r].weight += eps;
      lo.members[r].weight -= eps;
      const double fd = (evaluate_psi(model, hi) - evaluate_psi(model, lo)) / (2 * eps);
      const double rel = std::abs(fd - grad[r]) / std::max(1.0, std::abs(grad[r]));
      worst_rel = std::max(worst_rel, rel);
      failures += rel > 1e-4;
    }
  }

  // Marginal matching at converged TRBP fixed points.
  double worst_match = 0.0;
  std::size_t converged = 0;
  for (std::size_t k = 0; k < 20; ++k) {
    const PairwiseModel model = random_ising(9, grid_edges(3, 3), pick_coupling(rng), 1.0, rng);
    const auto trees = cover_with_spanning_trees(model, k);
    std::vector<EnsembleMember> members;
    for (const auto& t : trees) members.push_back({t, 1.0 / static_cast<double>(trees.size())});
    const WeightedEnsemble ens(model, members);
    const BeliefState s = run_message_passing(model, ens.edge_appearance(), MpOptions{});
    if (!s.converged) continue;
    ++converged;
    worst_match = std::max(worst_match, marginal_matching_residual(model, s.pseudomarginals));
  }
  Verdict v;
  v.pass = failures == 0 && worst_match <= 1e-6 && converged > 0;
  v.detail = "max relative FD error " + fmt(worst_rel) + " (" + std::to_string(failures) +
             " over 1e-4), marginal matching " + fmt(worst_match) + " over " +
             std::to_string(converged) + " fixed points";
  return v;
}

// 6 ------------------------------------------------------------------------
Verdict mean_field_equivalence() {
  Rng rng(606);
  const std::vector<PairwiseModel> models = {
      triangle_example(), random_ising(9, grid_edges(3, 3), Coupling::kMixed, 0.5, rng)};
  double worst_marg = 0.0, worst_value = 0.0;
  for (const auto& model : models) {
    const EdgeAppearanceMap mu(model.edge_count(), kMeanField);
    MpOptions opts;
    opts.tol = 1e-12;
    opts.max_iters = 20000;
    const BeliefState s = run_message_passing(model, mu, opts);
    std::vector<std::vector<double>> uniform;
    for (std::size_t i = 0; i < model.node_count(); ++i) {
      uniform.emplace_back(model.cardinality(i), 1.0 / static_cast<double>(model.cardinality(i)));
    }
    const MeanFieldResult ca = mean_field_coordinate_ascent(model, uniform);
    for (std::size_t i = 0; i < model.node_count(); ++i) {
      for (std::size_t x = 0; x < model.cardinality(i); ++x) {
        worst_marg = std::max(worst_marg,
                              std::abs(s.pseudomarginals.unary[i][x] - ca.marginals.unary[i][x]));
      }
    }
    const BoundResult smf = structured_mean_field(model, empty_subtree());
    worst_value = std::max(worst_value, std::abs(smf.value - ca.result.value));
  }
  Verdict v;
  v.pass = worst_marg <= 1e-4 && worst_value <= 1e-6;
  v.detail = "max marginal gap " + fmt(worst_marg) + ", structured(empty) vs naive value gap " +
             fmt(worst_value);
  return v;
}

// 7 ------------------------------------------------------------------------
Verdict fig3_trend() {
  std::string detail;
  bool pass = true;
  for (Coupling coupling : {Coupling::kMixed, Coupling::kAttractive}) {
    Fig3Config cfg;
    cfg.coupling = coupling;
    cfg.c_grid = {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
    cfg.trials = 20;
    cfg.seed = 7;
    const auto summary = summarize_fig3(run_fig3(cfg));
    std::size_t wins = 0;
    for (double c : cfg.c_grid) {
      double neg = 0.0, mf = 0.0;
      for (const auto& s : summary) {
        if (s.c != c) continue;
        if (s.method == Method::kNegTrbp) neg = std::abs(s.median);
        if (s.method == Method::kNaiveMf) mf = std::abs(s.median);
      }
      wins += neg <= mf;
    }
    pass = pass && wins >= 7;
    detail += std::string(detail.empty() ? "" : ", ") +
              (coupling == Coupling::kMixed ? "mixed " : "attractive ") + std::to_string(wins) +
              "/8";
  }
  return {pass, "negtrbp median |error| <= naive-mf: " + detail};
}

// 8 ------------------------------------------------------------------------
Verdict adapt_trend() {
  std::size_t wins = 0, same_start = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ModelFamilySpec spec;
    spec.rows = 5;
    spec.cols = 5;
    spec.coupling = Coupling::kAttractive;
    spec.strength = 0.6;
    spec.seed = seed;
    OptimizerOptions opts;
    opts.seed = seed;
    const auto rows = run_adapt_trace(gen_ising_grid(spec), opts);
    wins += rows.back().bound_chowliu >= rows.back().bound_fixed;
    same_start += rows.front().bound_chowliu == rows.front().bound_fixed;
  }
  return {wins >= 16 && same_start == 20, "chow-liu final >= fixed in " + std::to_string(wins) +
                                              "/20 seeds, identical iteration 0 in " +
                                              std::to_string(same_start) + "/20"};
}

// 9 ------------------------------------------------------------------------
Verdict oracles() {
  Rng rng(909);
  double worst_z = 0.0, worst_m = 0.0, worst_h = 0.0, worst_g = 0.0;
  for (std::size_t k = 0; k < 100; ++k) {
    // forests with mixed cardinalities, every edge on the tree
    const auto n = 2 + static_cast<std::size_t>(rng.uniform(0.0, 7.0));
    auto edges = random_tree_edges(n, rng);
    if (k % 3 == 0 && edges.size() > 1) edges.erase(edges.begin());
    const PairwiseModel model = random_general(random_cards(n, 3, rng), edges, 1.5, rng);
    std::vector<std::size_t> all(model.edge_count());
    for (std::size_t e = 0; e < all.size(); ++e) all[e] = e;
    const Subtree tree(model, all);

    const double z = brute_force_log_partition(model);
    const MarginalSet bm = brute_force_marginals(model);
    worst_z = std::max(worst_z, std::abs(tree_log_partition(model, tree, model.theta()) - z));
    const MarginalSet tm = tree_marginals(model, tree, model.theta());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t x = 0; x < model.cardinality(i); ++x)
        worst_m = std::max(worst_m, std::abs(tm.unary[i][x] - bm.unary[i][x]));
    for (std::size_t e = 0; e < model.edge_count(); ++e)
      for (std::size_t x = 0; x < bm.pairwise[e].size(); ++x)
        worst_m = std::max(worst_m, std::abs(tm.pairwise[e][x] - bm.pairwise[e][x]));
    // H = Phi - <mu, theta> for the exact distribution
    const double h = z - expected_log_potential(model, bm);
    worst_h = std::max(worst_h, std::abs(tree_entropy(model, tm, tree) - h));

    const auto rows = 1 + static_cast<std::size_t>(rng.uniform(0.0, 4.0));
    const auto cols = 2 + static_cast<std::size_t>(rng.uniform(0.0, 3.0));
    const PairwiseModel grid =
        random_ising(rows * cols, grid_edges(rows, cols), pick_coupling(rng), 2.0, rng);
    worst_g = std::max(worst_g,
                       std::abs(grid_log_partition(grid) - brute_force_log_partition(grid)));
  }
  const double worst = std::max({worst_z, worst_m, worst_h, worst_g});
  return {worst <= 1e-9, "max |diff| tree_log_partition " + fmt(worst_z) + ", tree_marginals " +
                             fmt(worst_m) + ", tree_entropy " + fmt(worst_h) +
                             ", grid_log_partition " + fmt(worst_g)};
}

// 10 -----------------------------------------------------------------------
Verdict determinism() {
  Fig3Config cfg;
  cfg.coupling = Coupling::kMixed;
  cfg.c_grid = {0.0, 1.0};
  cfg.trials = 3;
  cfg.seed = 11;
  cfg.methods.optimizer.outer_iters = 10;
  cfg.threads = 3;
  const std::string a = fig3_csv(run_fig3(cfg));
  cfg.threads = 1;
  const std::string b = fig3_csv(run_fig3(cfg));

  ModelFamilySpec spec;
  spec.rows = 4;
  spec.cols = 4;
  spec.coupling = Coupling::kAttractive;
  spec.strength = 0.6;
  spec.seed = 3;
  OptimizerOptions opts;
  opts.seed = 3;
  opts.outer_iters = 15;
  const PairwiseModel model = gen_ising_grid(spec);
  const std::string c = adapt_trace_csv(run_adapt_trace(model, opts));
  const std::string d = adapt_trace_csv(run_adapt_trace(model, opts));
  return {a == b && c == d, std::string("fig3 csv ") + (a == b ? "identical" : "differs") +
                                " (" + std::to_string(a.size()) + " bytes), adapt-trace csv " +
                                (c == d ? "identical" : "differs") + " (" +
                                std::to_string(c.size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"sandwich property", sandwich},
      {"triangle example", triangle},
      {"reverse Jensen", reverse_jensen},
      {"exactness on trees", tree_exactness},
      {"gradient check", gradient},
      {"mean-field equivalence", mean_field_equivalence},
      {"Ising error trend", fig3_trend},
      {"Chow-Liu adaptation trend", adapt_trend},
      {"oracle cross-checks", oracles},
      {"determinism", determinism},
  };
  std::vector<std::size_t> selected;
  for (int a = 1; a < argc; ++a) {
    const long k = std::strtol(argv[a], nullptr, 10);
    if (k < 1 || k > static_cast<long>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion '%s' (1-%zu)\n", argv[a], criteria.size());
      return 1;
    }
    selected.push_back(static_cast<std::size_t>(k));
  }
  if (selected.empty())
    for (std::size_t k = 1; k <= criteria.size(); ++k) selected.push_back(k);

  bool all = true;
  for (std::size_t k : selected) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[k - 1].second();
    } catch (const std::exception& ex) {
      v = {false, std::string("exception: ") + ex.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %zu %s: %s (%s) [%.1fs]\n", k, v.pass ? "PASS" : "FAIL",
                criteria[k - 1].first, v.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
