#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "treebound/exact.hpp"
#include "treebound/model.hpp"

namespace treebound {

/// Edge appearance value denoting the mu -> -infinity (mean-field) limit.
inline constexpr double kMeanField = -std::numeric_limits<double>::infinity();

/// One mu per model edge. Finite values must satisfy |mu| >= kMinAppearance.
using EdgeAppearanceMap = std::vector<double>;

inline constexpr double kMinAppearance = 1e-6;

inline bool is_mean_field(double mu) { return mu == kMeanField; }

/// Throws MessagePassingError when a value is NaN, +inf, or too close to 0.
void validate_edge_appearance(const PairwiseModel& model, const EdgeAppearanceMap& mu);

class MessagePassingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MpOptions {
  std::size_t max_iters = 2000;
  double tol = 1e-8;     ///< On the max absolute change of any log-message entry.
  double damping = 0.5;  ///< new = (1 - damping) * update + damping * old, in log domain.
  /// Absent: uniform initial messages. Present: seeded positive perturbation.
  std::optional<std::uint64_t> seed;
};

struct MpTraceRecord {
  std::size_t iteration = 0;
  double delta = 0.0;
  double energy = 0.0;  ///< -F(tau, mu) at this sweep.
};

using MpTraceSink = std::function<void(const MpTraceRecord&)>;

/// Directed message i -> j of edge e is index 2e when i < j, else 2e + 1.
/// Each entry is a normalized log table over the target node's states.
struct BeliefState {
  std::vector<std::vector<double>> log_messages;
  MarginalSet pseudomarginals;
  bool converged = false;
  std::size_t iterations = 0;
  double final_delta = 0.0;
};

/// Uniform log-messages for every directed edge.
std::vector<std::vector<double>> uniform_messages(const PairwiseModel& model);

/// Runs the damped synchronous reweighted update until the max log-message
/// change drops below tol. Mean-field edges use the geometric-mean limit
/// log m_ij(x_j) = sum_{x_i} b_i(x_i) theta_ij(x_i, x_j). Throws on invalid
/// mu or when a message becomes non-finite.
BeliefState run_message_passing(const PairwiseModel& model, const EdgeAppearanceMap& mu,
                                const MpOptions& options, const MpTraceSink& sink = {});

/// Same, warm-started from the given log-messages.
BeliefState run_message_passing(const PairwiseModel& model, const EdgeAppearanceMap& mu,
                                const MpOptions& options,
                                std::vector<std::vector<double>> initial_messages,
                                const MpTraceSink& sink = {});

/// Node and edge pseudomarginals implied by the messages. Mean-field edges get
/// tau_ij = tau_i tau_j.
MarginalSet compute_pseudomarginals(const PairwiseModel& model, const EdgeAppearanceMap& mu,
                                    const std::vector<std::vector<double>>& log_messages);

/// -F(tau, mu) = <tau, theta> + sum_i H_i - sum_ij mu_ij I_ij. Mean-field edges
/// must have I_ij <= 1e-8 and then contribute nothing.
double free_energy(const PairwiseModel& model, const EdgeAppearanceMap& mu,
                   const MarginalSet& marginals);

/// <tau, theta> over all nodes and edges; edges without a table use tau_i tau_j.
double expected_log_potential(const PairwiseModel& model, const MarginalSet& marginals);

/// Largest |sum_{x_i} tau_ij - tau_j| (and the symmetric row sums) over edges.
double marginal_matching_residual(const PairwiseModel& model, const MarginalSet& marginals);

/// "iter,delta,energy" rows with header.
std::string trace_to_csv(const std::vector<MpTraceRecord>& trace);

}  // namespace treebound
