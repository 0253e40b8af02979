#include "treebound/weight_opt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "treebound/log_math.hpp"
#include "treebound/rng.hpp"

namespace treebound {

namespace {

constexpr std::uint64_t kCoverSeedMix = 0x9E3779B97F4A7C15ull;

std::size_t find_tree(const std::vector<Subtree>& trees, const Subtree& t) {
  return static_cast<std::size_t>(std::find(trees.begin(), trees.end(), t) - trees.begin());
}

struct Evaluation {
  BeliefState state;
  BoundResult result;
  bool ok = false;  // message passing and reconstruction both succeeded
};

Evaluation evaluate(const PairwiseModel& model, const WeightedEnsemble& ensemble,
                    const MpOptions& inner, const std::vector<std::vector<double>>& messages) {
  Evaluation ev;
  try {
    ev.state = run_message_passing(model, ensemble.edge_appearance(), inner, messages);
    ev.result = certify_bound(model, ensemble, ev.state);
    ev.ok = true;
  } catch (const MessagePassingError&) {
    ev.ok = false;
  } catch (const ModelError&) {
    // Reconstruction failed on a vanishing marginal; the iterate is unusable.
    ev.ok = false;
  }
  if (!ev.ok) {
    ev.result = BoundResult{};
    ev.result.domain = classify_weights(ensemble);
  }
  return ev;
}

}  // namespace

std::string trace_to_csv(const std::vector<OptimizerTraceRow>& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "iter,beta,bound,certified,entropy_gap,tree_edges\n";
  for (const auto& r : trace) {
    out << r.iteration << ',' << r.beta << ',' << r.bound << ',' << (r.certified ? 1 : 0) << ','
        << r.entropy_gap << ',' << r.tree_edges << '\n';
  }
  return out.str();
}

BetaUpdate update_beta(double beta, double h_plus, const std::vector<double>& v,
                       const std::vector<double>& h_minus, double eps_beta) {
  if (v.size() != h_minus.size()) throw ModelError("one entropy per negative tree required");
  double mixed = 0.0;
  for (std::size_t r = 0; r < v.size(); ++r) mixed += v[r] * h_minus[r];
  double exponent = eps_beta * (h_plus - mixed) * beta;
  BetaUpdate out;
  if (exponent > kBetaExponentClamp || exponent < -kBetaExponentClamp) {
    exponent = std::clamp(exponent, -kBetaExponentClamp, kBetaExponentClamp);
    out.clamped = true;
  }
  out.beta = beta * std::exp(exponent);
  return out;
}

std::vector<double> edge_mutual_information(const PairwiseModel& model,
                                            const MarginalSet& marginals) {
  std::vector<double> info(model.edge_count(), 0.0);
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    if (!marginals.has_pairwise(e)) continue;
    const Edge& ed = model.edge(e);
    info[e] = mutual_information(marginals.pairwise[e], marginals.unary[ed.i], marginals.unary[ed.j]);
  }
  return info;
}

VUpdate update_v(const PairwiseModel& model, const std::vector<Subtree>& trees,
                 const std::vector<double>& v, const MarginalSet& marginals, double eps_v) {
  if (trees.size() != v.size()) throw ModelError("one weight per negative tree required");
  const auto mst = max_weight_spanning_tree(model, edge_mutual_information(model, marginals));
  if (!mst.spanning) throw ModelError("model graph is disconnected; no spanning tree exists");
  VUpdate out{trees, v, mst.tree, find_tree(trees, mst.tree)};
  if (out.vertex_index == out.trees.size()) {
    out.trees.push_back(mst.tree);
    out.v.push_back(0.0);
  }
  for (double& x : out.v) x *= (1.0 - eps_v);
  out.v[out.vertex_index] += eps_v;
  return out;
}

Subtree reselect_positive_tree(const PairwiseModel& model, const MarginalSet& marginals) {
  const auto mst = max_weight_spanning_tree(model, edge_mutual_information(model, marginals));
  if (!mst.spanning) throw ModelError("model graph is disconnected; no spanning tree exists");
  return mst.tree;
}

OptimizerOutcome optimize_lower_bound(const PairwiseModel& model, const OptimizerOptions& options) {
  if (!model.is_connected()) throw ModelError("model graph is disconnected");
  NegativeEnsembleView view;
  view.positive_tree = random_spanning_tree(model, options.seed);
  view.negative_trees = cover_with_spanning_trees(model, options.seed ^ kCoverSeedMix);
  if (find_tree(view.negative_trees, view.positive_tree) == view.negative_trees.size()) {
    view.negative_trees.push_back(view.positive_tree);
  }
  view.v.assign(view.negative_trees.size(), 1.0 / static_cast<double>(view.negative_trees.size()));
  view.beta = options.beta_init;

  OptimizerOutcome best;
  bool have_certified = false;
  OptimizerOutcome last;
  auto messages = uniform_messages(model);

  for (std::size_t it = 0; it < options.outer_iters; ++it) {
    const WeightedEnsemble ensemble = view.ensemble(model);
    Evaluation ev = evaluate(model, ensemble, options.inner, messages);

    OptimizerTraceRow row;
    row.iteration = it;
    row.beta = view.beta;
    row.bound = ev.result.value;
    row.certified = ev.result.certified;
    row.tree_edges = edge_list_string(model, view.positive_tree);

    last.result = ev.result;
    last.ensemble = ensemble;
    if (ev.ok) last.marginals = ev.state.pseudomarginals;
    if (ev.result.certified && (!have_certified || ev.result.value > best.result.value)) {
      have_certified = true;
      best.result = ev.result;
      best.ensemble = ensemble;
      best.marginals = ev.state.pseudomarginals;
    }
    if (!ev.ok) {
      // No usable marginals: restart from uniform messages with the same
      // weights; beta and v stay put.
      messages = uniform_messages(model);
      row.bound = std::numeric_limits<double>::quiet_NaN();
      best.trace.push_back(row);
      continue;
    }
    messages = ev.state.log_messages;

    const MarginalSet& tau = ev.state.pseudomarginals;
    const double h_plus = tree_entropy(model, tau, view.positive_tree);
    std::vector<double> h_minus;
    for (const Subtree& t : view.negative_trees) h_minus.push_back(tree_entropy(model, tau, t));
    double mixed = 0.0;
    for (std::size_t r = 0; r < h_minus.size(); ++r) mixed += view.v[r] * h_minus[r];
    row.entropy_gap = h_plus - mixed;

    const BetaUpdate bu = update_beta(view.beta, h_plus, view.v, h_minus, options.step_beta);
    row.beta_clamped = bu.clamped;
    best.trace.push_back(row);
    view.beta = std::max(bu.beta, kBetaFloor);

    VUpdate vu = update_v(model, view.negative_trees, view.v, tau, options.step_v);
    view.negative_trees = std::move(vu.trees);
    view.v = std::move(vu.v);

    if (options.reselect_positive && options.reselect_period > 0 &&
        (it + 1) % options.reselect_period == 0) {
      view.positive_tree = reselect_positive_tree(model, tau);
      if (find_tree(view.negative_trees, view.positive_tree) == view.negative_trees.size()) {
        view.negative_trees.push_back(view.positive_tree);
        view.v.push_back(0.0);
      }
    }
  }
  if (!have_certified) {
    best.result = last.result;
    best.ensemble = last.ensemble;
    best.marginals = last.marginals;
  }
  best.result.trace.clear();
  for (const auto& r : best.trace) best.result.trace.push_back(r.bound);
  return best;
}

namespace {

WeightedEnsemble positive_ensemble(const PairwiseModel& model, const std::vector<Subtree>& trees,
                                   std::vector<double> w) {
  double total = 0.0;
  for (double& x : w) {
    x = std::max(x, 1e-9);
    total += x;
  }
  std::vector<EnsembleMember> members;
  for (std::size_t r = 0; r < trees.size(); ++r) members.push_back({trees[r], w[r] / total});
  // Absorb rounding so the weights sum to one.
  double sum = 0.0;
  for (const auto& m : members) sum += m.weight;
  members.front().weight += 1.0 - sum;
  return WeightedEnsemble(model, std::move(members));
}

}  // namespace

OptimizerOutcome optimize_upper_bound(const PairwiseModel& model, const OptimizerOptions& options) {
  if (!model.is_connected()) throw ModelError("model graph is disconnected");
  std::vector<Subtree> trees = cover_with_spanning_trees(model, options.seed ^ kCoverSeedMix);
  std::vector<double> w(trees.size(), 1.0 / static_cast<double>(trees.size()));

  OptimizerOutcome out;
  WeightedEnsemble ensemble = positive_ensemble(model, trees, w);
  Evaluation current = evaluate(model, ensemble, options.inner, uniform_messages(model));
  auto record = [&](std::size_t it, const Evaluation& ev, const Subtree* added) {
    OptimizerTraceRow row;
    row.iteration = it;
    row.bound = ev.result.value;
    row.certified = ev.result.certified;
    if (added) row.tree_edges = edge_list_string(model, *added);
    out.trace.push_back(row);
  };
  record(0, current, nullptr);

  bool have_certified = current.result.certified;
  out.result = current.result;
  out.ensemble = ensemble;
  if (current.ok) out.marginals = current.state.pseudomarginals;

  for (std::size_t it = 1; it < options.outer_iters && current.ok; ++it) {
    const Subtree vertex = reselect_positive_tree(model, current.state.pseudomarginals);
    std::vector<Subtree> cand_trees = trees;
    std::vector<double> cand_w = w;
    std::size_t idx = find_tree(cand_trees, vertex);
    if (idx == cand_trees.size()) {
      cand_trees.push_back(vertex);
      cand_w.push_back(0.0);
    }
    bool accepted = false;
    double step = 2.0 / (static_cast<double>(it) + 2.0);
    for (int attempt = 0; attempt < 6 && !accepted; ++attempt, step *= 0.5) {
      std::vector<double> trial = cand_w;
      for (double& x : trial) x *= (1.0 - step);
      trial[idx] += step;
      const WeightedEnsemble cand = positive_ensemble(model, cand_trees, trial);
      Evaluation ev = evaluate(model, cand, options.inner, current.state.log_messages);
      if (ev.ok && ev.result.certified &&
          (!have_certified || ev.result.value <= current.result.value)) {
        accepted = true;
        have_certified = true;
        trees = cand_trees;
        w = trial;
        current = std::move(ev);
        ensemble = cand;
        record(it, current, &vertex);
      }
    }
    if (!accepted) break;
    out.result = current.result;
    out.ensemble = ensemble;
    out.marginals = current.state.pseudomarginals;
  }
  out.result.trace.clear();
  for (const auto& r : out.trace) out.result.trace.push_back(r.bound);
  return out;
}

double mean_field_bound(const PairwiseModel& model, const std::vector<std::vector<double>>& unary) {
  double value = 0.0;
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    value += entropy_unary(unary[i]);
    for (std::size_t s = 0; s < model.cardinality(i); ++s) value += unary[i][s] * model.unary(i, s);
  }
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    const Edge& ed = model.edge(e);
    for (std::size_t s = 0; s < model.cardinality(ed.i); ++s) {
      for (std::size_t u = 0; u < model.cardinality(ed.j); ++u) {
        value += unary[ed.i][s] * unary[ed.j][u] * model.pairwise(e, s, u);
      }
    }
  }
  return value;
}

namespace {

MarginalSet product_marginals(const PairwiseModel& model, std::vector<std::vector<double>> unary) {
  MarginalSet m;
  m.unary = std::move(unary);
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    const Edge& ed = model.edge(e);
    std::vector<double> t;
    for (double a : m.unary[ed.i])
      for (double b : m.unary[ed.j]) t.push_back(a * b);
    m.pairwise.push_back(std::move(t));
  }
  return m;
}

}  // namespace

MeanFieldResult mean_field_coordinate_ascent(const PairwiseModel& model,
                                             std::vector<std::vector<double>> tau) {
  constexpr std::size_t kMaxSweeps = 10000;
  constexpr double kTol = 1e-10;
  if (tau.size() != model.node_count()) throw ModelError("one distribution per node required");
  MeanFieldResult out;
  std::vector<double> field;
  std::size_t sweeps = 0;
  bool converged = false;
  while (sweeps < kMaxSweeps) {
    double change = 0.0;
    for (std::size_t i = 0; i < model.node_count(); ++i) {
      field.assign(model.unary(i).begin(), model.unary(i).end());
      for (const Neighbor& nb : model.neighbors(i)) {
        const Edge& ed = model.edge(nb.edge);
        for (std::size_t s = 0; s < field.size(); ++s) {
          for (std::size_t t = 0; t < tau[nb.node].size(); ++t) {
            field[s] += tau[nb.node][t] *
                        (ed.i == i ? model.pairwise(nb.edge, s, t) : model.pairwise(nb.edge, t, s));
          }
        }
      }
      log_normalize(field);
      for (std::size_t s = 0; s < field.size(); ++s) {
        const double p = std::exp(field[s]);
        change = std::max(change, std::abs(p - tau[i][s]));
        tau[i][s] = p;
      }
    }
    ++sweeps;
    out.sweep_values.push_back(mean_field_bound(model, tau));
    if (change < kTol) {
      converged = true;
      break;
    }
  }
  out.result.value = out.sweep_values.empty() ? mean_field_bound(model, tau) : out.sweep_values.back();
  out.result.direction = BoundDirection::kLower;
  out.result.certified = true;  // any product distribution gives a valid Gibbs lower bound
  out.result.converged = converged;
  out.result.iterations = sweeps;
  out.result.domain = {WeightDomain::kNegative, 0};
  out.marginals = product_marginals(model, std::move(tau));
  return out;
}

MeanFieldResult naive_mean_field(const PairwiseModel& model, std::size_t restarts,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> init(model.node_count());
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    init[i].assign(model.cardinality(i), 1.0 / static_cast<double>(model.cardinality(i)));
  }
  MeanFieldResult best = mean_field_coordinate_ascent(model, init);
  for (std::size_t k = 1; k < restarts; ++k) {
    for (auto& t : init) {
      double total = 0.0;
      for (double& x : t) {
        x = rng.uniform(1e-3, 1.0);
        total += x;
      }
      for (double& x : t) x /= total;
    }
    MeanFieldResult run = mean_field_coordinate_ascent(model, init);
    if (run.result.value > best.result.value) best = std::move(run);
  }
  return best;
}

BoundResult structured_mean_field(const PairwiseModel& model, const Subtree& skeleton,
                                  const MpOptions& options) {
  if (!is_v_acyclic(model, skeleton)) {
    throw ModelError("skeleton is not v-acyclic: adding some model edge closes a cycle "
                     "(only v-acyclic skeletons are supported)");
  }
  EdgeAppearanceMap mu(model.edge_count(), kMeanField);
  for (std::size_t e : skeleton.edges()) mu[e] = 1.0;
  const BeliefState state = run_message_passing(model, mu, options);
  BoundResult r;
  r.value = free_energy(model, mu, state.pseudomarginals);
  r.direction = BoundDirection::kLower;
  r.converged = state.converged;
  r.certified = state.converged;
  r.iterations = state.iterations;
  r.residual_max = marginal_matching_residual(model, state.pseudomarginals);
  r.domain = {WeightDomain::kNegative, 0};
  return r;
}

Subtree greedy_v_acyclic_skeleton(const PairwiseModel& model, const std::vector<double>& weights) {
  if (weights.size() != model.edge_count()) throw ModelError("one weight per edge required");
  std::vector<std::size_t> order(model.edge_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  std::vector<std::size_t> chosen;
  for (std::size_t e : order) {
    std::vector<std::size_t> trial = chosen;
    trial.push_back(e);
    if (!is_acyclic(model, trial)) continue;
    if (is_v_acyclic(model, Subtree(model, trial))) chosen = std::move(trial);
  }
  return Subtree(model, std::move(chosen));
}

}  // namespace treebound
