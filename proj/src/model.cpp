#include "treebound/model.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "treebound/rng.hpp"

namespace treebound {

namespace {

std::vector<std::vector<Neighbor>> build_adjacency(std::size_t n, const std::vector<Edge>& edges) {
  std::vector<std::vector<Neighbor>> adj(n);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    adj[edges[e].i].push_back({edges[e].j, e});
    adj[edges[e].j].push_back({edges[e].i, e});
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
  }
  return adj;
}

}  // namespace

PairwiseModel::PairwiseModel(std::vector<std::size_t> cardinalities, std::vector<Edge> edges)
    : PairwiseModel(cardinalities, edges, [&] {
        LogPotentials zero;
        for (std::size_t c : cardinalities) zero.unary.emplace_back(c, 0.0);
        for (const Edge& e : edges) {
          const std::size_t a = e.i < cardinalities.size() ? cardinalities[e.i] : 0;
          const std::size_t b = e.j < cardinalities.size() ? cardinalities[e.j] : 0;
          zero.pairwise.emplace_back(a * b, 0.0);
        }
        return zero;
      }()) {}

PairwiseModel::PairwiseModel(std::vector<std::size_t> cardinalities, std::vector<Edge> edges,
                             LogPotentials theta) {
  const std::size_t n = cardinalities.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (cardinalities[i] < 2) {
      throw ModelError("node " + std::to_string(i) + " has cardinality < 2");
    }
  }
  if (theta.unary.size() != n) throw ModelError("unary table count does not match node count");
  if (theta.pairwise.size() != edges.size()) {
    throw ModelError("pairwise table count does not match edge count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (theta.unary[i].size() != cardinalities[i]) {
      throw ModelError("unary table of node " + std::to_string(i) + " has wrong length");
    }
  }

  // Orient every edge i < j (transposing its table) and sort.
  std::vector<std::size_t> order(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    Edge& ed = edges[e];
    if (ed.i >= n || ed.j >= n) throw ModelError("edge endpoint out of range");
    if (ed.i == ed.j) throw ModelError("self-loop on node " + std::to_string(ed.i));
    if (theta.pairwise[e].size() != cardinalities[ed.i] * cardinalities[ed.j]) {
      throw ModelError("pairwise table of edge " + std::to_string(ed.i) + "-" +
                       std::to_string(ed.j) + " has wrong length");
    }
    if (ed.i > ed.j) {
      const std::size_t mi = cardinalities[ed.i];
      const std::size_t mj = cardinalities[ed.j];
      std::vector<double> t(mi * mj);
      for (std::size_t s = 0; s < mi; ++s)
        for (std::size_t u = 0; u < mj; ++u) t[u * mi + s] = theta.pairwise[e][s * mj + u];
      theta.pairwise[e] = std::move(t);
      std::swap(ed.i, ed.j);
    }
    order[e] = e;
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return edges[a] < edges[b]; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (edges[order[k]] == edges[order[k - 1]]) {
      const Edge& d = edges[order[k]];
      throw ModelError("duplicate edge " + std::to_string(d.i) + "-" + std::to_string(d.j));
    }
  }

  cards_ = std::move(cardinalities);
  theta_.unary = std::move(theta.unary);
  for (std::size_t k : order) {
    edges_.push_back(edges[k]);
    theta_.pairwise.push_back(std::move(theta.pairwise[k]));
  }
  for (const auto& table : theta_.unary)
    for (double v : table)
      if (!std::isfinite(v)) throw ModelError("non-finite unary log-potential");
  for (const auto& table : theta_.pairwise)
    for (double v : table)
      if (!std::isfinite(v)) throw ModelError("non-finite pairwise log-potential");
  adjacency_ = build_adjacency(cards_.size(), edges_);
}

std::optional<std::size_t> PairwiseModel::find_edge(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  const Edge key{i, j};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
  if (it == edges_.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - edges_.begin());
}

LogPotentials PairwiseModel::zero_potentials() const {
  LogPotentials zero;
  for (std::size_t c : cards_) zero.unary.emplace_back(c, 0.0);
  for (const Edge& e : edges_) zero.pairwise.emplace_back(cards_[e.i] * cards_[e.j], 0.0);
  return zero;
}

PairwiseModel PairwiseModel::with_potentials(LogPotentials theta) const {
  return PairwiseModel(cards_, edges_, std::move(theta));
}

bool PairwiseModel::is_connected() const {
  if (cards_.empty()) return true;
  std::vector<bool> seen(cards_.size(), false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (const Neighbor& nb : adjacency_[u]) {
      if (!seen[nb.node]) {
        seen[nb.node] = true;
        ++count;
        stack.push_back(nb.node);
      }
    }
  }
  return count == cards_.size();
}

void check_potential_shape(const PairwiseModel& model, const LogPotentials& theta) {
  if (theta.unary.size() != model.node_count() || theta.pairwise.size() != model.edge_count()) {
    throw ModelError("log-potential tables do not match model structure");
  }
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    if (theta.unary[i].size() != model.cardinality(i)) {
      throw ModelError("unary table of node " + std::to_string(i) + " has wrong length");
    }
  }
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    const Edge& ed = model.edge(e);
    if (theta.pairwise[e].size() != model.cardinality(ed.i) * model.cardinality(ed.j)) {
      throw ModelError("pairwise table of edge " + std::to_string(e) + " has wrong length");
    }
  }
}

// ---------------------------------------------------------------------------
// Text format

namespace {

struct Token {
  std::string text;
  std::size_t line;
};

class TokenStream {
 public:
  explicit TokenStream(std::string_view text) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      ++line_no;
      std::string_view line = text.substr(pos, end - pos);
      const std::size_t first = line.find_first_not_of(" \t\r");
      if (first != std::string_view::npos && line[first] != '#') {
        std::istringstream in{std::string(line)};
        std::string tok;
        while (in >> tok) tokens_.push_back({tok, line_no});
      }
      pos = end + 1;
    }
    last_line_ = line_no;
  }

  bool done() const { return next_ >= tokens_.size(); }

  const Token& take(const char* what) {
    if (done()) fail(last_line_, std::string("unexpected end of file, expected ") + what);
    return tokens_[next_++];
  }

  std::size_t take_count(const char* what) {
    const Token& t = take(what);
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(t.text.c_str(), &end, 10);
    if (errno != 0 || end != t.text.c_str() + t.text.size() || v < 0) {
      fail(t.line, std::string("malformed header: expected ") + what + ", got '" + t.text + "'");
    }
    return static_cast<std::size_t>(v);
  }

  double take_real(std::size_t* line) {
    const Token& t = take("table entry");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.text.c_str(), &end);
    if (errno == ERANGE && v != 0.0) fail(t.line, "table entry out of range: '" + t.text + "'");
    if (end != t.text.c_str() + t.text.size()) {
      fail(t.line, "malformed table entry '" + t.text + "'");
    }
    *line = t.line;
    return v;
  }

  std::size_t peek_line() const { return done() ? last_line_ : tokens_[next_].line; }

  [[noreturn]] static void fail(std::size_t line, const std::string& msg) {
    throw ModelError("line " + std::to_string(line) + ": " + msg);
  }

 private:
  std::vector<Token> tokens_;
  std::size_t next_ = 0;
  std::size_t last_line_ = 0;
};

}  // namespace

PairwiseModel load_model(std::string_view text) {
  TokenStream in(text);
  const Token& magic = in.take("MARKOV");
  if (magic.text != "MARKOV") {
    TokenStream::fail(magic.line, "malformed header: expected MARKOV, got '" + magic.text + "'");
  }
  const std::size_t n = in.take_count("node count");
  std::vector<std::size_t> cards(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t line = in.peek_line();
    cards[i] = in.take_count("cardinality");
    if (cards[i] < 2) TokenStream::fail(line, "cardinality must be at least 2");
  }
  const std::size_t factor_count = in.take_count("factor count");

  struct Scope {
    std::vector<std::size_t> vars;
    std::size_t line;
  };
  std::vector<Scope> scopes;
  for (std::size_t f = 0; f < factor_count; ++f) {
    const std::size_t line = in.peek_line();
    const std::size_t arity = in.take_count("factor arity");
    if (arity < 1 || arity > 2) {
      TokenStream::fail(line, "unsupported factor arity " + std::to_string(arity));
    }
    Scope scope{{}, line};
    for (std::size_t k = 0; k < arity; ++k) {
      const std::size_t v = in.take_count("scope variable");
      if (v >= n) TokenStream::fail(line, "scope variable " + std::to_string(v) + " out of range");
      scope.vars.push_back(v);
    }
    if (arity == 2 && scope.vars[0] == scope.vars[1]) {
      TokenStream::fail(line, "factor scope repeats variable " + std::to_string(scope.vars[0]));
    }
    scopes.push_back(std::move(scope));
  }

  LogPotentials theta;
  for (std::size_t c : cards) theta.unary.emplace_back(c, 0.0);
  std::vector<Edge> edges;
  std::vector<std::size_t> seen_edge_line;

  for (const Scope& scope : scopes) {
    const std::size_t line = in.peek_line();
    const std::size_t declared = in.take_count("table length");
    std::size_t expected = 1;
    for (std::size_t v : scope.vars) expected *= cards[v];
    if (declared != expected) {
      TokenStream::fail(line, "table length mismatch: declared " + std::to_string(declared) +
                                  ", scope needs " + std::to_string(expected));
    }
    std::vector<double> table(expected);
    for (double& x : table) {
      std::size_t entry_line = 0;
      const double psi = in.take_real(&entry_line);
      if (!(psi > 0.0) || !std::isfinite(psi)) {
        TokenStream::fail(entry_line, "potential entries must be positive and finite");
      }
      x = std::log(psi);
    }
    if (scope.vars.size() == 1) {
      auto& u = theta.unary[scope.vars[0]];
      for (std::size_t s = 0; s < table.size(); ++s) u[s] += table[s];
      continue;
    }
    Edge e{scope.vars[0], scope.vars[1]};
    Edge key{std::min(e.i, e.j), std::max(e.i, e.j)};
    for (std::size_t k = 0; k < edges.size(); ++k) {
      Edge other{std::min(edges[k].i, edges[k].j), std::max(edges[k].i, edges[k].j)};
      if (other == key) {
        TokenStream::fail(scope.line, "duplicate edge " + std::to_string(key.i) + "-" +
                                          std::to_string(key.j) + " (first declared on line " +
                                          std::to_string(seen_edge_line[k]) + ")");
      }
    }
    edges.push_back(e);
    seen_edge_line.push_back(scope.line);
    theta.pairwise.push_back(std::move(table));
  }
  if (!in.done()) TokenStream::fail(in.peek_line(), "trailing content after last table");
  return PairwiseModel(std::move(cards), std::move(edges), std::move(theta));
}

PairwiseModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_model(buf.str());
}

std::string save_model(const PairwiseModel& model) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "MARKOV\n" << model.node_count() << '\n';
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    out << (i ? " " : "") << model.cardinality(i);
  }
  out << '\n' << model.node_count() + model.edge_count() << '\n';
  for (std::size_t i = 0; i < model.node_count(); ++i) out << "1 " << i << '\n';
  for (const Edge& e : model.edges()) out << "2 " << e.i << ' ' << e.j << '\n';

  auto write_table = [&](const std::vector<double>& logs, std::size_t row) {
    out << '\n' << logs.size() << '\n';
    for (std::size_t k = 0; k < logs.size(); ++k) {
      out << std::exp(logs[k]);
      out << (((k + 1) % row == 0 || k + 1 == logs.size()) ? '\n' : ' ');
    }
  };
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    write_table(model.unary(i), model.cardinality(i));
  }
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    write_table(model.pairwise(e), model.cardinality(model.edge(e).j));
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Generators

std::vector<Edge> grid_edges(std::size_t rows, std::size_t cols) {
  std::vector<Edge> edges;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t v = r * cols + c;
      if (c + 1 < cols) edges.push_back({v, v + 1});
      if (r + 1 < rows) edges.push_back({v, v + cols});
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

PairwiseModel gen_ising_grid(const ModelFamilySpec& spec) {
  if (spec.rows * spec.cols < 1) throw ModelError("grid must have at least one node");
  if (!(spec.strength >= 0.0)) throw ModelError("coupling strength must be nonnegative");
  const std::size_t n = spec.rows * spec.cols;
  const std::vector<Edge> edges = grid_edges(spec.rows, spec.cols);
  Rng rng(spec.seed);

  // Spin encoding: state 0 -> -1, state 1 -> +1.
  LogPotentials theta;
  for (std::size_t i = 0; i < n; ++i) {
    const double h = rng.uniform(-0.05, 0.05);
    theta.unary.push_back({-h, h});
  }
  const double lo = spec.coupling == Coupling::kAttractive ? 0.0 : -spec.strength;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double J = rng.uniform(lo, spec.strength);
    theta.pairwise.push_back({J, -J, -J, J});
  }
  return PairwiseModel(std::vector<std::size_t>(n, 2), edges, std::move(theta));
}

PairwiseModel triangle_example() {
  const double strong = std::log(0.8);
  const double weak = std::log(0.5);
  LogPotentials theta;
  theta.unary.assign(3, {0.0, 0.0});
  theta.pairwise = {{0.0, strong, strong, 0.0}, {0.0, weak, weak, 0.0}, {0.0, weak, weak, 0.0}};
  return PairwiseModel({2, 2, 2}, {{0, 1}, {0, 2}, {1, 2}}, std::move(theta));
}

PairwiseModel generate_model(const ModelFamilySpec& spec) {
  switch (spec.family) {
    case ModelFamily::kTriangle:
      return triangle_example();
    case ModelFamily::kIsingGrid:
      return gen_ising_grid(spec);
  }
  throw ModelError("unknown model family");
}

}  // namespace treebound
