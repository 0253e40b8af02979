#pragma once

#include <string>
#include <vector>

#include "treebound/exact.hpp"
#include "treebound/message_passing.hpp"
#include "treebound/model.hpp"
#include "treebound/tree.hpp"

namespace treebound {

struct DecompositionMember {
  Subtree tree;
  double weight = 0.0;
  LogPotentials params;  ///< theta^r; zero on edges outside `tree`.
};

/// theta split into tree-supported pieces, theta ≈ sum_r theta^r.
///
/// `residual` is theta - sum_r theta^r reduced to its gauge-invariant part:
/// unary tables are zero and each edge table holds the double-centred
/// interaction term. Two parameter vectors differing only by main effects
/// and constants define the same function of x up to a constant, so this is
/// exactly the part of the mismatch that can move Phi.
struct TreeDecomposition {
  std::vector<DecompositionMember> members;
  LogPotentials residual;
  double residual_max = 0.0;    ///< Max-norm of `residual`.
  double residual_slack = 0.0;  ///< sum_e max|residual_e| >= sup_x |R(x)|.
};

inline constexpr double kCertifyResidual = 1e-6;
inline constexpr double kMinMarginal = 1e-300;

/// sum_r w_r Phi(theta^r / w_r), each term by an exact tree pass.
double evaluate_psi(const PairwiseModel& model, const TreeDecomposition& decomposition);

/// Builds theta^r = w_r * canonical tree parameters of the marginals (log tau_i
/// on nodes, log tau_ij / (tau_i tau_j) on tree edges), then folds the main
/// effects and constants of theta - sum_r theta^r into the unary tables of the
/// first member with nonzero weight. Members with |w| < 1e-12 are dropped.
/// Throws ModelError on marginal entries below 1e-300.
TreeDecomposition reconstruct_decomposition(const PairwiseModel& model,
                                            const WeightedEnsemble& ensemble,
                                            const MarginalSet& marginals);

/// Decomposition whose members are given explicitly; residual is computed the
/// same way but nothing is folded.
TreeDecomposition make_decomposition(const PairwiseModel& model,
                                     std::vector<DecompositionMember> members);

/// d Psi / d w_r = H_r, the entropy of member r's tree distribution.
std::vector<double> psi_weight_gradient(const PairwiseModel& model,
                                        const TreeDecomposition& decomposition);

struct JensenCheck {
  bool holds = false;
  DomainLabel domain;
  /// False when the weights are outside every negative subdomain, where the
  /// inequality carries no guarantee.
  bool hypothesis_met = false;
};

/// Checks sum_r w_r f(p_r) <= f(sum_r w_r p_r) + 1e-9, given the member
/// values f(p_r) and the combined value. Throws when weights do not sum to 1.
JensenCheck reverse_jensen_holds(const std::vector<double>& member_values, double combined_value,
                                 const std::vector<double>& weights);

enum class BoundDirection { kUpper, kLower, kNone };

std::string to_string(BoundDirection d);

struct BoundResult {
  double value = 0.0;
  BoundDirection direction = BoundDirection::kNone;
  bool certified = false;
  double residual_max = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  DomainLabel domain;
  std::vector<double> trace;
};

/// Reconstructs and evaluates the decomposition at `state`. The reported value
/// is Psi moved outward by the residual slack (down for lower bounds, up for
/// upper bounds), so it stays a valid bound for any small residual.
/// certified = converged && residual_max <= 1e-6 && direction != none.
BoundResult certify_bound(const PairwiseModel& model, const WeightedEnsemble& ensemble,
                          const BeliefState& state);

/// key=value lines: value, direction, certified, residual_max, converged,
/// iterations, domain.
std::string serialize(const BoundResult& result);

}  // namespace treebound
