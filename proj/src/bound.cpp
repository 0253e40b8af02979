#include "treebound/bound.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace treebound {

namespace {

LogPotentials scaled(const LogPotentials& p, double factor) {
  LogPotentials out = p;
  for (auto& t : out.unary)
    for (double& x : t) x *= factor;
  for (auto& t : out.pairwise)
    for (double& x : t) x *= factor;
  return out;
}

// theta - sum_r theta^r, index-wise.
LogPotentials raw_residual(const PairwiseModel& model,
                           const std::vector<DecompositionMember>& members) {
  LogPotentials r = model.theta();
  for (const auto& m : members) {
    check_potential_shape(model, m.params);
    for (std::size_t i = 0; i < r.unary.size(); ++i)
      for (std::size_t s = 0; s < r.unary[i].size(); ++s) r.unary[i][s] -= m.params.unary[i][s];
    for (std::size_t e = 0; e < r.pairwise.size(); ++e)
      for (std::size_t k = 0; k < r.pairwise[e].size(); ++k)
        r.pairwise[e][k] -= m.params.pairwise[e][k];
  }
  return r;
}

struct GaugeSplit {
  LogPotentials interaction;                // zero unary, centred edge tables
  std::vector<std::vector<double>> unary;   // main effects per node
  double constant = 0.0;
};

// ANOVA split of a pairwise function: constant + per-node main effects +
// per-edge double-centred interactions.
GaugeSplit split_gauge(const PairwiseModel& model, const LogPotentials& r) {
  GaugeSplit g;
  g.interaction = model.zero_potentials();
  g.unary.resize(model.node_count());
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    const auto& t = r.unary[i];
    double mean = 0.0;
    for (double x : t) mean += x;
    mean /= static_cast<double>(t.size());
    g.constant += mean;
    g.unary[i].resize(t.size());
    for (std::size_t s = 0; s < t.size(); ++s) g.unary[i][s] = t[s] - mean;
  }
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    const Edge& ed = model.edge(e);
    const std::size_t mi = model.cardinality(ed.i);
    const std::size_t mj = model.cardinality(ed.j);
    const auto& t = r.pairwise[e];
    std::vector<double> row(mi, 0.0), col(mj, 0.0);
    double grand = 0.0;
    for (std::size_t s = 0; s < mi; ++s) {
      for (std::size_t u = 0; u < mj; ++u) {
        row[s] += t[s * mj + u];
        col[u] += t[s * mj + u];
        grand += t[s * mj + u];
      }
    }
    for (double& x : row) x /= static_cast<double>(mj);
    for (double& x : col) x /= static_cast<double>(mi);
    grand /= static_cast<double>(mi * mj);
    g.constant += grand;
    for (std::size_t s = 0; s < mi; ++s) g.unary[ed.i][s] += row[s] - grand;
    for (std::size_t u = 0; u < mj; ++u) g.unary[ed.j][u] += col[u] - grand;
    for (std::size_t s = 0; s < mi; ++s) {
      for (std::size_t u = 0; u < mj; ++u) {
        g.interaction.pairwise[e][s * mj + u] = t[s * mj + u] - row[s] - col[u] + grand;
      }
    }
  }
  return g;
}

void summarize_residual(TreeDecomposition& d) {
  d.residual_max = 0.0;
  d.residual_slack = 0.0;
  for (const auto& t : d.residual.unary) {
    double m = 0.0;
    for (double x : t) m = std::max(m, std::abs(x));
    d.residual_max = std::max(d.residual_max, m);
    d.residual_slack += m;
  }
  for (const auto& t : d.residual.pairwise) {
    double m = 0.0;
    for (double x : t) m = std::max(m, std::abs(x));
    d.residual_max = std::max(d.residual_max, m);
    d.residual_slack += m;
  }
}

double checked_log(double p, const std::string& where) {
  if (!(p >= kMinMarginal)) {
    std::ostringstream msg;
    msg << "marginal entry " << p << " at " << where << " is too small to take its log";
    throw ModelError(msg.str());
  }
  return std::log(p);
}

}  // namespace

double evaluate_psi(const PairwiseModel& model, const TreeDecomposition& decomposition) {
  double psi = 0.0;
  for (const auto& m : decomposition.members) {
    if (m.weight == 0.0) throw ModelError("decomposition member has zero weight");
    psi += m.weight * tree_log_partition(model, m.tree, scaled(m.params, 1.0 / m.weight));
  }
  return psi;
}

TreeDecomposition make_decomposition(const PairwiseModel& model,
                                     std::vector<DecompositionMember> members) {
  TreeDecomposition d;
  d.members = std::move(members);
  const GaugeSplit g = split_gauge(model, raw_residual(model, d.members));
  // Main effects are not gauge: they stay in the residual.
  d.residual = g.interaction;
  for (std::size_t i = 0; i < model.node_count(); ++i) d.residual.unary[i] = g.unary[i];
  summarize_residual(d);
  return d;
}

TreeDecomposition reconstruct_decomposition(const PairwiseModel& model,
                                            const WeightedEnsemble& ensemble,
                                            const MarginalSet& marginals) {
  if (marginals.unary.size() != model.node_count()) {
    throw ModelError("marginals do not cover every node");
  }
  std::vector<std::vector<double>> log_tau(model.node_count());
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    for (std::size_t s = 0; s < model.cardinality(i); ++s) {
      log_tau[i].push_back(checked_log(marginals.unary[i][s],
                                       "node " + std::to_string(i) + " state " + std::to_string(s)));
    }
  }
  // log tau_ij / (tau_i tau_j) per edge, computed on demand.
  std::vector<std::vector<double>> log_ratio(model.edge_count());
  auto ratio = [&](std::size_t e) -> const std::vector<double>& {
    if (!log_ratio[e].empty()) return log_ratio[e];
    const Edge& ed = model.edge(e);
    if (!marginals.has_pairwise(e)) {
      throw ModelError("missing pairwise marginal for tree edge " + std::to_string(ed.i) + "-" +
                       std::to_string(ed.j));
    }
    const std::size_t mj = model.cardinality(ed.j);
    auto& out = log_ratio[e];
    for (std::size_t s = 0; s < model.cardinality(ed.i); ++s) {
      for (std::size_t u = 0; u < mj; ++u) {
        const double lp = checked_log(marginals.pairwise[e][s * mj + u],
                                      "edge " + std::to_string(ed.i) + "-" + std::to_string(ed.j) +
                                          " states (" + std::to_string(s) + "," +
                                          std::to_string(u) + ")");
        out.push_back(lp - log_tau[ed.i][s] - log_tau[ed.j][u]);
      }
    }
    return out;
  };

  TreeDecomposition d;
  for (const auto& member : ensemble.members()) {
    if (std::abs(member.weight) < 1e-12) continue;
    DecompositionMember dm{member.tree, member.weight, model.zero_potentials()};
    for (std::size_t i = 0; i < model.node_count(); ++i) {
      for (std::size_t s = 0; s < model.cardinality(i); ++s) {
        dm.params.unary[i][s] = member.weight * log_tau[i][s];
      }
    }
    for (std::size_t e : member.tree.edges()) {
      const auto& lr = ratio(e);
      for (std::size_t k = 0; k < lr.size(); ++k) dm.params.pairwise[e][k] = member.weight * lr[k];
    }
    d.members.push_back(std::move(dm));
  }
  if (d.members.empty()) throw ModelError("ensemble has no member with nonzero weight");

  const GaugeSplit g = split_gauge(model, raw_residual(model, d.members));
  auto& target = d.members.front().params.unary;
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    for (std::size_t s = 0; s < model.cardinality(i); ++s) target[i][s] += g.unary[i][s];
  }
  if (model.node_count() > 0) {
    for (double& x : target[0]) x += g.constant;
  }
  d.residual = g.interaction;
  summarize_residual(d);
  return d;
}

std::vector<double> psi_weight_gradient(const PairwiseModel& model,
                                        const TreeDecomposition& decomposition) {
  std::vector<double> h;
  for (const auto& m : decomposition.members) {
    if (m.weight == 0.0) throw ModelError("decomposition member has zero weight");
    const LogPotentials p = scaled(m.params, 1.0 / m.weight);
    h.push_back(tree_entropy(model, tree_marginals(model, m.tree, p), m.tree));
  }
  return h;
}

JensenCheck reverse_jensen_holds(const std::vector<double>& member_values, double combined_value,
                                 const std::vector<double>& weights) {
  if (member_values.size() != weights.size()) {
    throw ModelError("one value per weight required");
  }
  double total = 0.0;
  double magnitude = 0.0;
  double lhs = 0.0;
  for (std::size_t r = 0; r < weights.size(); ++r) {
    total += weights[r];
    magnitude += std::abs(weights[r]);
    lhs += weights[r] * member_values[r];
  }
  if (std::abs(total - 1.0) > 1e-9 * std::max(1.0, magnitude)) {
    throw ModelError("weights must sum to 1");
  }
  JensenCheck check;
  check.domain = classify_weights(weights);
  check.hypothesis_met = check.domain.domain == WeightDomain::kNegative;
  check.holds = lhs <= combined_value + 1e-9;
  return check;
}

std::string to_string(BoundDirection d) {
  switch (d) {
    case BoundDirection::kUpper:
      return "upper";
    case BoundDirection::kLower:
      return "lower";
    case BoundDirection::kNone:
      return "none";
  }
  return "none";
}

BoundResult certify_bound(const PairwiseModel& model, const WeightedEnsemble& ensemble,
                          const BeliefState& state) {
  const TreeDecomposition d =
      reconstruct_decomposition(model, ensemble, state.pseudomarginals);
  const double psi = evaluate_psi(model, d);
  BoundResult r;
  r.domain = classify_weights(ensemble);
  switch (r.domain.domain) {
    case WeightDomain::kPositive:
      r.direction = BoundDirection::kUpper;
      r.value = psi + d.residual_slack;
      break;
    case WeightDomain::kNegative:
      r.direction = BoundDirection::kLower;
      r.value = psi - d.residual_slack;
      break;
    case WeightDomain::kMixed:
      r.direction = BoundDirection::kNone;
      r.value = psi;
      break;
  }
  r.residual_max = d.residual_max;
  r.converged = state.converged;
  r.iterations = state.iterations;
  r.certified = state.converged && d.residual_max <= kCertifyResidual &&
                r.direction != BoundDirection::kNone;
  return r;
}

std::string serialize(const BoundResult& result) {
  std::ostringstream out;
  out.precision(17);
  out << "value=" << result.value << '\n'
      << "direction=" << to_string(result.direction) << '\n'
      << "certified=" << (result.certified ? "true" : "false") << '\n'
      << "residual_max=" << result.residual_max << '\n'
      << "converged=" << (result.converged ? "true" : "false") << '\n'
      << "iterations=" << result.iterations << '\n'
      << "domain=" << to_string(result.domain) << '\n';
  return out.str();
}

}  // namespace treebound
