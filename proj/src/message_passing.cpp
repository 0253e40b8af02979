#include "treebound/message_passing.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "treebound/log_math.hpp"
#include "treebound/rng.hpp"

namespace treebound {

namespace {

std::string edge_name(const PairwiseModel& model, std::size_t e) {
  return std::to_string(model.edge(e).i) + "-" + std::to_string(model.edge(e).j);
}

// log m_~i(x) = sum of incoming log-messages at node i.
std::vector<std::vector<double>> incoming_sums(const PairwiseModel& model,
                                               const std::vector<std::vector<double>>& msgs) {
  std::vector<std::vector<double>> in(model.node_count());
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    in[i].assign(model.cardinality(i), 0.0);
  }
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    const Edge& ed = model.edge(e);
    const auto& to_j = msgs[2 * e];
    const auto& to_i = msgs[2 * e + 1];
    for (std::size_t t = 0; t < to_j.size(); ++t) in[ed.j][t] += to_j[t];
    for (std::size_t s = 0; s < to_i.size(); ++s) in[ed.i][s] += to_i[s];
  }
  return in;
}

struct Direction {
  std::size_t from;
  std::size_t to;
  std::size_t reverse;  // index of the opposite directed message
};

Direction direction(const PairwiseModel& model, std::size_t d) {
  const Edge& ed = model.edge(d / 2);
  return d % 2 == 0 ? Direction{ed.i, ed.j, d + 1} : Direction{ed.j, ed.i, d - 1};
}

// theta_ij with the sender in state xs and the receiver in state xr.
double directed_pair(const PairwiseModel& model, std::size_t d, std::size_t xs, std::size_t xr) {
  return d % 2 == 0 ? model.pairwise(d / 2, xs, xr) : model.pairwise(d / 2, xr, xs);
}

void compute_update(const PairwiseModel& model, double mu, std::size_t d,
                    const std::vector<double>& in_from, const std::vector<double>& reverse_msg,
                    std::vector<double>& scratch, std::vector<double>& out) {
  const Direction dir = direction(model, d);
  const std::size_t ms = model.cardinality(dir.from);
  const std::size_t mr = model.cardinality(dir.to);
  std::vector<double> a(ms);
  for (std::size_t xs = 0; xs < ms; ++xs) a[xs] = model.unary(dir.from, xs) + in_from[xs];
  log_normalize(a);  // log b_i, the sender's current belief
  out.resize(mr);
  if (is_mean_field(mu)) {
    for (std::size_t xr = 0; xr < mr; ++xr) {
      double v = 0.0;
      for (std::size_t xs = 0; xs < ms; ++xs) v += std::exp(a[xs]) * directed_pair(model, d, xs, xr);
      out[xr] = v;
    }
  } else {
    scratch.resize(ms);
    for (std::size_t xr = 0; xr < mr; ++xr) {
      for (std::size_t xs = 0; xs < ms; ++xs) {
        scratch[xs] = a[xs] + (directed_pair(model, d, xs, xr) - reverse_msg[xs]) / mu;
      }
      out[xr] = mu * log_sum_exp(scratch);
    }
  }
  log_normalize(out);
}

}  // namespace

void validate_edge_appearance(const PairwiseModel& model, const EdgeAppearanceMap& mu) {
  if (mu.size() != model.edge_count()) {
    throw MessagePassingError("edge appearance map needs one value per edge");
  }
  for (std::size_t e = 0; e < mu.size(); ++e) {
    if (is_mean_field(mu[e])) continue;
    if (!std::isfinite(mu[e]) || std::abs(mu[e]) < kMinAppearance) {
      std::ostringstream msg;
      msg << "invalid edge appearance " << mu[e] << " on edge " << edge_name(model, e)
          << " (|mu| must be >= " << kMinAppearance << "; remove the edge instead)";
      throw MessagePassingError(msg.str());
    }
  }
}

std::vector<std::vector<double>> uniform_messages(const PairwiseModel& model) {
  std::vector<std::vector<double>> msgs(2 * model.edge_count());
  for (std::size_t d = 0; d < msgs.size(); ++d) {
    const std::size_t m = model.cardinality(direction(model, d).to);
    msgs[d].assign(m, -std::log(static_cast<double>(m)));
  }
  return msgs;
}

BeliefState run_message_passing(const PairwiseModel& model, const EdgeAppearanceMap& mu,
                                const MpOptions& options, const MpTraceSink& sink) {
  auto init = uniform_messages(model);
  if (options.seed) {
    Rng rng(*options.seed);
    for (auto& msg : init) {
      for (double& x : msg) x = std::log(rng.uniform(0.5, 1.5));
      log_normalize(msg);
    }
  }
  return run_message_passing(model, mu, options, std::move(init), sink);
}

BeliefState run_message_passing(const PairwiseModel& model, const EdgeAppearanceMap& mu,
                                const MpOptions& options,
                                std::vector<std::vector<double>> initial_messages,
                                const MpTraceSink& sink) {
  validate_edge_appearance(model, mu);
  if (!(options.damping >= 0.0 && options.damping < 1.0)) {
    throw MessagePassingError("damping must lie in [0, 1)");
  }
  if (initial_messages.size() != 2 * model.edge_count()) {
    throw MessagePassingError("initial messages must cover every directed edge");
  }
  for (std::size_t d = 0; d < initial_messages.size(); ++d) {
    if (initial_messages[d].size() != model.cardinality(direction(model, d).to)) {
      throw MessagePassingError("initial message has wrong length");
    }
  }

  BeliefState state;
  state.log_messages = std::move(initial_messages);
  std::vector<std::vector<double>> next(state.log_messages.size());
  std::vector<double> scratch;
  const double keep = options.damping;

  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    const auto in = incoming_sums(model, state.log_messages);
    double delta = 0.0;
    for (std::size_t d = 0; d < next.size(); ++d) {
      const Direction dir = direction(model, d);
      compute_update(model, mu[d / 2], d, in[dir.from], state.log_messages[dir.reverse], scratch,
                     next[d]);
      if (keep > 0.0) {
        for (std::size_t x = 0; x < next[d].size(); ++x) {
          next[d][x] = (1.0 - keep) * next[d][x] + keep * state.log_messages[d][x];
        }
        log_normalize(next[d]);
      }
      for (std::size_t x = 0; x < next[d].size(); ++x) {
        if (!std::isfinite(next[d][x])) {
          throw MessagePassingError("non-finite message on edge " + edge_name(model, d / 2) +
                                    " (" + std::to_string(dir.from) + "->" +
                                    std::to_string(dir.to) + ") at iteration " +
                                    std::to_string(it));
        }
        delta = std::max(delta, std::abs(next[d][x] - state.log_messages[d][x]));
      }
    }
    state.log_messages.swap(next);
    state.iterations = it;
    state.final_delta = delta;
    if (sink) {
      const MarginalSet tau = compute_pseudomarginals(model, mu, state.log_messages);
      double energy = std::numeric_limits<double>::quiet_NaN();
      try {
        energy = free_energy(model, mu, tau);
      } catch (const MessagePassingError&) {
        // mean-field edge not yet factorized; leave the energy undefined
      }
      sink({it, delta, energy});
    }
    if (delta < options.tol) {
      state.converged = true;
      break;
    }
  }
  state.pseudomarginals = compute_pseudomarginals(model, mu, state.log_messages);
  return state;
}

MarginalSet compute_pseudomarginals(const PairwiseModel& model, const EdgeAppearanceMap& mu,
                                    const std::vector<std::vector<double>>& log_messages) {
  const auto in = incoming_sums(model, log_messages);
  MarginalSet tau;
  std::vector<std::vector<double>> log_belief(model.node_count());
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    auto& b = log_belief[i];
    b.resize(model.cardinality(i));
    for (std::size_t s = 0; s < b.size(); ++s) b[s] = model.unary(i, s) + in[i][s];
    std::vector<double> p = b;
    log_normalize(p);
    for (double& x : p) x = std::exp(x);
    tau.unary.push_back(std::move(p));
  }
  tau.pairwise.resize(model.edge_count());
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    const Edge& ed = model.edge(e);
    const std::size_t mi = model.cardinality(ed.i);
    const std::size_t mj = model.cardinality(ed.j);
    std::vector<double> t(mi * mj);
    if (is_mean_field(mu[e])) {
      for (std::size_t s = 0; s < mi; ++s)
        for (std::size_t u = 0; u < mj; ++u) t[s * mj + u] = tau.unary[ed.i][s] * tau.unary[ed.j][u];
    } else {
      const auto& to_j = log_messages[2 * e];
      const auto& to_i = log_messages[2 * e + 1];
      for (std::size_t s = 0; s < mi; ++s) {
        for (std::size_t u = 0; u < mj; ++u) {
          t[s * mj + u] = log_belief[ed.i][s] + log_belief[ed.j][u] +
                          (model.pairwise(e, s, u) - to_j[u] - to_i[s]) / mu[e];
        }
      }
      log_normalize(t);
      for (double& x : t) x = std::exp(x);
    }
    tau.pairwise[e] = std::move(t);
  }
  return tau;
}

double expected_log_potential(const PairwiseModel& model, const MarginalSet& marginals) {
  double total = 0.0;
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    for (std::size_t s = 0; s < model.cardinality(i); ++s) {
      total += marginals.unary[i][s] * model.unary(i, s);
    }
  }
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    const Edge& ed = model.edge(e);
    const std::size_t mj = model.cardinality(ed.j);
    for (std::size_t s = 0; s < model.cardinality(ed.i); ++s) {
      for (std::size_t u = 0; u < mj; ++u) {
        const double p = marginals.has_pairwise(e)
                             ? marginals.pairwise[e][s * mj + u]
                             : marginals.unary[ed.i][s] * marginals.unary[ed.j][u];
        total += p * model.pairwise(e, s, u);
      }
    }
  }
  return total;
}

double free_energy(const PairwiseModel& model, const EdgeAppearanceMap& mu,
                   const MarginalSet& marginals) {
  if (mu.size() != model.edge_count()) {
    throw MessagePassingError("edge appearance map needs one value per edge");
  }
  double value = expected_log_potential(model, marginals);
  for (const auto& tau : marginals.unary) value += entropy_unary(tau);
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    const Edge& ed = model.edge(e);
    if (!marginals.has_pairwise(e)) {
      if (is_mean_field(mu[e])) continue;
      throw MessagePassingError("missing pairwise marginal on edge " + edge_name(model, e));
    }
    const double info =
        mutual_information(marginals.pairwise[e], marginals.unary[ed.i], marginals.unary[ed.j]);
    if (is_mean_field(mu[e])) {
      if (info > 1e-8) {
        throw MessagePassingError("mean-field edge " + edge_name(model, e) +
                                  " has nonzero mutual information");
      }
      continue;
    }
    value -= mu[e] * info;
  }
  return value;
}

double marginal_matching_residual(const PairwiseModel& model, const MarginalSet& marginals) {
  double worst = 0.0;
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    if (!marginals.has_pairwise(e)) continue;
    const Edge& ed = model.edge(e);
    const std::size_t mi = model.cardinality(ed.i);
    const std::size_t mj = model.cardinality(ed.j);
    const auto& t = marginals.pairwise[e];
    for (std::size_t s = 0; s < mi; ++s) {
      double row = 0.0;
      for (std::size_t u = 0; u < mj; ++u) row += t[s * mj + u];
      worst = std::max(worst, std::abs(row - marginals.unary[ed.i][s]));
    }
    for (std::size_t u = 0; u < mj; ++u) {
      double col = 0.0;
      for (std::size_t s = 0; s < mi; ++s) col += t[s * mj + u];
      worst = std::max(worst, std::abs(col - marginals.unary[ed.j][u]));
    }
  }
  return worst;
}

std::string trace_to_csv(const std::vector<MpTraceRecord>& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "iter,delta,energy\n";
  for (const auto& r : trace) out << r.iteration << ',' << r.delta << ',' << r.energy << '\n';
  return out.str();
}

}  // namespace treebound
