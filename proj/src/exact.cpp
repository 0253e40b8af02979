#include "treebound/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "treebound/log_math.hpp"

namespace treebound {

namespace {

std::size_t state_space_size(const PairwiseModel& model, std::size_t cap) {
  std::size_t total = 1;
  for (std::size_t c : model.cardinalities()) {
    if (total > cap / c) {
      throw ModelError("state space exceeds enumeration cap of " + std::to_string(cap));
    }
    total *= c;
  }
  return total;
}

// Visits every joint configuration with its unnormalized log-probability.
template <typename Visitor>
void enumerate(const PairwiseModel& model, std::size_t cap, Visitor&& visit) {
  const std::size_t total = state_space_size(model, cap);
  const std::size_t n = model.node_count();
  std::vector<std::size_t> x(n, 0);
  for (std::size_t k = 0; k < total; ++k) {
    double lw = 0.0;
    for (std::size_t i = 0; i < n; ++i) lw += model.unary(i, x[i]);
    for (std::size_t e = 0; e < model.edge_count(); ++e) {
      lw += model.pairwise(e, x[model.edge(e).i], x[model.edge(e).j]);
    }
    visit(x, lw);
    for (std::size_t i = 0; i < n; ++i) {
      if (++x[i] < model.cardinality(i)) break;
      x[i] = 0;
    }
  }
}

// Value of edge e's table with `node` in state a and the other endpoint in b.
double edge_value(const PairwiseModel& model, const LogPotentials& params, std::size_t e,
                  std::size_t node, std::size_t a, std::size_t b) {
  const Edge& ed = model.edge(e);
  const std::size_t mj = model.cardinality(ed.j);
  return node == ed.i ? params.pairwise[e][a * mj + b] : params.pairwise[e][b * mj + a];
}

void require_tree_support(const PairwiseModel& model, const Subtree& tree,
                          const LogPotentials& params) {
  check_potential_shape(model, params);
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    if (tree.contains(e)) continue;
    for (double v : params.pairwise[e]) {
      if (v != 0.0) {
        throw ModelError("parameters are nonzero on off-tree edge " +
                         std::to_string(model.edge(e).i) + "-" + std::to_string(model.edge(e).j));
      }
    }
  }
}

// Rooted traversal of a forest: BFS order per component, rooted at the
// component's lowest-index node.
struct RootedForest {
  std::vector<std::size_t> order;
  std::vector<std::size_t> parent;       // npos for roots
  std::vector<std::size_t> parent_edge;  // npos for roots
  std::vector<std::vector<std::size_t>> children;
  std::vector<std::size_t> roots;
};

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

RootedForest root_forest(const PairwiseModel& model, const Subtree& tree) {
  const std::size_t n = model.node_count();
  std::vector<std::vector<Neighbor>> adj(n);
  for (std::size_t e : tree.edges()) {
    adj[model.edge(e).i].push_back({model.edge(e).j, e});
    adj[model.edge(e).j].push_back({model.edge(e).i, e});
  }
  RootedForest f;
  f.parent.assign(n, npos);
  f.parent_edge.assign(n, npos);
  f.children.resize(n);
  std::vector<bool> seen(n, false);
  for (std::size_t root = 0; root < n; ++root) {
    if (seen[root]) continue;
    seen[root] = true;
    f.roots.push_back(root);
    std::size_t head = f.order.size();
    f.order.push_back(root);
    while (head < f.order.size()) {
      const std::size_t u = f.order[head++];
      for (const Neighbor& nb : adj[u]) {
        if (seen[nb.node]) continue;
        seen[nb.node] = true;
        f.parent[nb.node] = u;
        f.parent_edge[nb.node] = nb.edge;
        f.children[u].push_back(nb.node);
        f.order.push_back(nb.node);
      }
    }
  }
  return f;
}

struct TreePasses {
  RootedForest forest;
  std::vector<std::vector<double>> up;      // child -> parent, over parent states
  std::vector<std::vector<double>> down;    // parent -> child, over child states
  std::vector<std::vector<double>> belief;  // unnormalized log belief
};

// Upward pass: belief[v] holds theta_v plus all messages from children.
TreePasses upward(const PairwiseModel& model, const Subtree& tree, const LogPotentials& params) {
  TreePasses p;
  p.forest = root_forest(model, tree);
  const std::size_t n = model.node_count();
  p.up.resize(n);
  p.belief = params.unary;
  std::vector<double> terms;
  for (auto it = p.forest.order.rbegin(); it != p.forest.order.rend(); ++it) {
    const std::size_t v = *it;
    const std::size_t par = p.forest.parent[v];
    if (par == npos) continue;
    const std::size_t e = p.forest.parent_edge[v];
    auto& msg = p.up[v];
    msg.resize(model.cardinality(par));
    terms.resize(model.cardinality(v));
    for (std::size_t xp = 0; xp < msg.size(); ++xp) {
      for (std::size_t xv = 0; xv < terms.size(); ++xv) {
        terms[xv] = p.belief[v][xv] + edge_value(model, params, e, v, xv, xp);
      }
      msg[xp] = log_sum_exp(terms);
    }
    for (std::size_t xp = 0; xp < msg.size(); ++xp) p.belief[par][xp] += msg[xp];
  }
  return p;
}

}  // namespace

double brute_force_log_partition(const PairwiseModel& model, std::size_t cap) {
  LogSumExpAccumulator acc;
  enumerate(model, cap, [&](const std::vector<std::size_t>&, double lw) { acc.add(lw); });
  return acc.value();
}

MarginalSet brute_force_marginals(const PairwiseModel& model, std::size_t cap) {
  const double log_z = brute_force_log_partition(model, cap);
  MarginalSet m;
  for (std::size_t i = 0; i < model.node_count(); ++i) m.unary.emplace_back(model.cardinality(i), 0.0);
  for (const Edge& e : model.edges()) {
    m.pairwise.emplace_back(model.cardinality(e.i) * model.cardinality(e.j), 0.0);
  }
  enumerate(model, cap, [&](const std::vector<std::size_t>& x, double lw) {
    const double p = std::exp(lw - log_z);
    for (std::size_t i = 0; i < x.size(); ++i) m.unary[i][x[i]] += p;
    for (std::size_t e = 0; e < model.edge_count(); ++e) {
      const Edge& ed = model.edge(e);
      m.pairwise[e][x[ed.i] * model.cardinality(ed.j) + x[ed.j]] += p;
    }
  });
  return m;
}

double tree_log_partition(const PairwiseModel& model, const Subtree& tree,
                          const LogPotentials& params) {
  require_tree_support(model, tree, params);
  const TreePasses p = upward(model, tree, params);
  double total = 0.0;
  for (std::size_t root : p.forest.roots) total += log_sum_exp(p.belief[root]);
  return total;
}

MarginalSet tree_marginals(const PairwiseModel& model, const Subtree& tree,
                           const LogPotentials& params) {
  require_tree_support(model, tree, params);
  TreePasses p = upward(model, tree, params);
  const std::size_t n = model.node_count();
  p.down.resize(n);

  // Downward pass in BFS order; belief[v] becomes the full log belief.
  std::vector<double> terms;
  for (std::size_t v : p.forest.order) {
    const std::size_t par = p.forest.parent[v];
    if (par == npos) continue;
    const std::size_t e = p.forest.parent_edge[v];
    auto& msg = p.down[v];
    msg.resize(model.cardinality(v));
    terms.resize(model.cardinality(par));
    for (std::size_t xv = 0; xv < msg.size(); ++xv) {
      for (std::size_t xp = 0; xp < terms.size(); ++xp) {
        terms[xp] = p.belief[par][xp] - p.up[v][xp] + edge_value(model, params, e, par, xp, xv);
      }
      msg[xv] = log_sum_exp(terms);
    }
    for (std::size_t xv = 0; xv < msg.size(); ++xv) p.belief[v][xv] += msg[xv];
  }

  MarginalSet m;
  m.unary.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> b = p.belief[i];
    log_normalize(b);
    for (double& x : b) x = std::exp(x);
    m.unary[i] = std::move(b);
  }
  m.pairwise.resize(model.edge_count());
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t par = p.forest.parent[v];
    if (par == npos) continue;
    const std::size_t e = p.forest.parent_edge[v];
    const Edge& ed = model.edge(e);
    const std::size_t mi = model.cardinality(ed.i);
    const std::size_t mj = model.cardinality(ed.j);
    std::vector<double> t(mi * mj);
    for (std::size_t s = 0; s < mi; ++s) {
      for (std::size_t u = 0; u < mj; ++u) {
        const std::size_t xv = ed.i == v ? s : u;
        const std::size_t xp = ed.i == v ? u : s;
        t[s * mj + u] = (p.belief[v][xv] - p.down[v][xv]) + (p.belief[par][xp] - p.up[v][xp]) +
                        params.pairwise[e][s * mj + u];
      }
    }
    log_normalize(t);
    for (double& x : t) x = std::exp(x);
    m.pairwise[e] = std::move(t);
  }
  return m;
}

double entropy_unary(const std::vector<double>& tau) {
  double h = 0.0;
  for (double p : tau) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double mutual_information(const std::vector<double>& tau_ij, const std::vector<double>& tau_i,
                          const std::vector<double>& tau_j) {
  const std::size_t mj = tau_j.size();
  double mi = 0.0;
  for (std::size_t s = 0; s < tau_i.size(); ++s) {
    for (std::size_t t = 0; t < mj; ++t) {
      const double p = tau_ij[s * mj + t];
      if (p > 0.0) mi += p * std::log(p / (tau_i[s] * tau_j[t]));
    }
  }
  if (mi < 0.0 && mi > -1e-12) mi = 0.0;
  return mi;
}

double tree_entropy(const PairwiseModel& model, const MarginalSet& marginals, const Subtree& tree) {
  double h = 0.0;
  for (const auto& tau : marginals.unary) h += entropy_unary(tau);
  for (std::size_t e : tree.edges()) {
    if (!marginals.has_pairwise(e)) {
      throw ModelError("missing pairwise marginal for tree edge " +
                       std::to_string(model.edge(e).i) + "-" + std::to_string(model.edge(e).j));
    }
    const Edge& ed = model.edge(e);
    h -= mutual_information(marginals.pairwise[e], marginals.unary[ed.i], marginals.unary[ed.j]);
  }
  return h;
}

std::optional<GridShape> detect_grid(const PairwiseModel& model) {
  const std::size_t n = model.node_count();
  for (std::size_t cols = 1; cols <= n; ++cols) {
    if (n % cols != 0) continue;
    if (grid_edges(n / cols, cols) == model.edges()) return GridShape{n / cols, cols};
  }
  return std::nullopt;
}

double grid_log_partition(const PairwiseModel& model) {
  const auto shape = detect_grid(model);
  if (!shape) throw ModelError("model graph is not a rows x cols grid");
  for (std::size_t c : model.cardinalities()) {
    if (c != 2) throw ModelError("grid elimination requires binary nodes");
  }
  // Eliminate line by line along the longer dimension; a line has `width` nodes.
  const bool by_rows = shape->cols <= shape->rows;
  const std::size_t width = by_rows ? shape->cols : shape->rows;
  const std::size_t lines = by_rows ? shape->rows : shape->cols;
  if (width > kMaxGridWidth) {
    throw ModelError("grid width " + std::to_string(width) + " exceeds elimination cap of " +
                     std::to_string(kMaxGridWidth));
  }
  const std::size_t cols = shape->cols;
  auto node = [&](std::size_t line, std::size_t k) {
    return by_rows ? line * cols + k : k * cols + line;
  };
  const LogPotentials& th = model.theta();
  // Edge table value with node a in state sa and node b in state sb.
  auto pair = [&](std::size_t a, std::size_t b, std::size_t sa, std::size_t sb) {
    const std::size_t e = *model.find_edge(a, b);
    return edge_value(model, th, e, a, sa, sb);
  };

  const std::size_t states = std::size_t{1} << width;
  auto add_line_terms = [&](std::vector<double>& f, std::size_t line) {
    for (std::size_t s = 0; s < states; ++s) {
      double v = 0.0;
      for (std::size_t k = 0; k < width; ++k) {
        const std::size_t sk = (s >> k) & 1u;
        v += model.unary(node(line, k), sk);
        if (k + 1 < width) v += pair(node(line, k), node(line, k + 1), sk, (s >> (k + 1)) & 1u);
      }
      f[s] += v;
    }
  };

  std::vector<double> f(states, 0.0);
  add_line_terms(f, 0);
  std::vector<double> g(states);
  for (std::size_t line = 1; line < lines; ++line) {
    // Swap old-line bits for new-line bits one position at a time.
    for (std::size_t k = 0; k < width; ++k) {
      const std::size_t a = node(line - 1, k);
      const std::size_t b = node(line, k);
      const std::size_t bit = std::size_t{1} << k;
      double w[2][2];
      for (std::size_t sa = 0; sa < 2; ++sa)
        for (std::size_t sb = 0; sb < 2; ++sb) w[sa][sb] = pair(a, b, sa, sb);
      for (std::size_t s = 0; s < states; ++s) {
        const std::size_t sb = (s >> k) & 1u;
        const double t0 = f[s & ~bit] + w[0][sb];
        const double t1 = f[s | bit] + w[1][sb];
        const double hi = std::max(t0, t1);
        g[s] = hi + std::log1p(std::exp(std::min(t0, t1) - hi));
      }
      f.swap(g);
    }
    add_line_terms(f, line);
  }
  return log_sum_exp(f);
}

std::optional<double> exact_log_partition(const PairwiseModel& model, std::size_t cap) {
  std::vector<std::size_t> all(model.edge_count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (is_acyclic(model, all)) return tree_log_partition(model, Subtree(model, all), model.theta());
  double states = 1.0;
  for (std::size_t c : model.cardinalities()) states *= static_cast<double>(c);
  if (states <= static_cast<double>(cap)) return brute_force_log_partition(model, cap);
  if (const auto shape = detect_grid(model)) {
    const bool binary = std::all_of(model.cardinalities().begin(), model.cardinalities().end(),
                                    [](std::size_t c) { return c == 2; });
    if (binary && std::min(shape->rows, shape->cols) <= kMaxGridWidth) {
      return grid_log_partition(model);
    }
  }
  return std::nullopt;
}

}  // namespace treebound
