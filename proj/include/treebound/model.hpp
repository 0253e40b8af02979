#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace treebound {

/// Undirected edge with i < j.
struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;
  auto operator<=>(const Edge&) const = default;
};

/// Log-potential tables in the overcomplete representation: one table per
/// node (length m_i) and one row-major m_i x m_j table per edge.
struct LogPotentials {
  std::vector<std::vector<double>> unary;
  std::vector<std::vector<double>> pairwise;

  bool operator==(const LogPotentials&) const = default;
};

struct Neighbor {
  std::size_t node;
  std::size_t edge;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Discrete pairwise Markov random field
///   p(x) ∝ exp( sum_i theta_i(x_i) + sum_ij theta_ij(x_i, x_j) ).
///
/// Immutable after construction. Edges are stored canonically (i < j, sorted
/// lexicographically); an edge's position in edges() is its edge index
/// everywhere else in the library.
class PairwiseModel {
 public:
  PairwiseModel() = default;

  /// All log-potentials zero.
  PairwiseModel(std::vector<std::size_t> cardinalities, std::vector<Edge> edges);

  /// Edges may be given in any order and orientation; tables are permuted
  /// and transposed to the canonical layout. Throws ModelError on invalid
  /// structure, mismatched table sizes or non-finite entries.
  PairwiseModel(std::vector<std::size_t> cardinalities, std::vector<Edge> edges,
                LogPotentials theta);

  std::size_t node_count() const { return cards_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t cardinality(std::size_t i) const { return cards_[i]; }
  const std::vector<std::size_t>& cardinalities() const { return cards_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }
  const std::vector<Neighbor>& neighbors(std::size_t i) const { return adjacency_[i]; }
  std::optional<std::size_t> find_edge(std::size_t i, std::size_t j) const;

  const LogPotentials& theta() const { return theta_; }
  const std::vector<double>& unary(std::size_t i) const { return theta_.unary[i]; }
  const std::vector<double>& pairwise(std::size_t e) const { return theta_.pairwise[e]; }
  double unary(std::size_t i, std::size_t s) const { return theta_.unary[i][s]; }
  double pairwise(std::size_t e, std::size_t s, std::size_t t) const {
    return theta_.pairwise[e][s * cards_[edges_[e].j] + t];
  }

  /// Zero tables shaped like this model's.
  LogPotentials zero_potentials() const;

  /// Same structure, different parameters.
  PairwiseModel with_potentials(LogPotentials theta) const;

  bool is_connected() const;

  bool operator==(const PairwiseModel& other) const {
    return cards_ == other.cards_ && edges_ == other.edges_ && theta_ == other.theta_;
  }

 private:
  std::vector<std::size_t> cards_;
  std::vector<Edge> edges_;
  LogPotentials theta_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

/// Throws ModelError if `theta` is not shaped like `model`'s tables.
void check_potential_shape(const PairwiseModel& model, const LogPotentials& theta);

// ---------------------------------------------------------------------------
// Model file format (UAI "MARKOV" subset restricted to arity <= 2).

/// Parses model text. Tables in the file hold potentials (psi), which are
/// stored as natural logs. Errors carry the offending line number.
PairwiseModel load_model(std::string_view text);
PairwiseModel load_model_file(const std::string& path);

/// Writes every node's unary factor, then every edge factor, with 17
/// significant digits.
std::string save_model(const PairwiseModel& model);

// ---------------------------------------------------------------------------
// Generators.

enum class ModelFamily { kIsingGrid, kTriangle };
enum class Coupling { kAttractive, kMixed };

struct ModelFamilySpec {
  ModelFamily family = ModelFamily::kIsingGrid;
  std::size_t rows = 1;
  std::size_t cols = 1;
  Coupling coupling = Coupling::kMixed;
  double strength = 0.0;
  std::uint64_t seed = 0;
};

/// Binary Ising grid with spins {-1,+1} encoded as states {0,1}.
/// theta_i ~ U[-0.05, 0.05), theta_ij ~ U[0, c) or U[-c, c); draws are taken
/// for nodes in index order, then edges in lexicographic order. Node (r, c)
/// has index r * cols + c.
PairwiseModel gen_ising_grid(const ModelFamilySpec& spec);

/// Three binary nodes, all pairs connected, psi_i = [1, 1],
/// psi_01 = [[1, .8], [.8, 1]], psi_02 = psi_12 = [[1, .5], [.5, 1]].
PairwiseModel triangle_example();

/// Generates the model named by spec.family.
PairwiseModel generate_model(const ModelFamilySpec& spec);

/// Edge list of a rows x cols 4-connected grid, lexicographic.
std::vector<Edge> grid_edges(std::size_t rows, std::size_t cols);

}  // namespace treebound
