#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "treebound/bound.hpp"
#include "treebound/model.hpp"
#include "treebound/weight_opt.hpp"

namespace treebound {

enum class Method { kTrbp, kNegTrbp, kNaiveMf, kStructuredMf, kLoopyBp };

std::string to_string(Method m);
std::optional<Method> parse_method(const std::string& name);

struct MethodConfig {
  OptimizerOptions optimizer;
  std::size_t mf_restarts = 10;
  /// structured-mf skeleton; default is greedy_v_acyclic_skeleton over
  /// coupling strength.
  std::optional<Subtree> skeleton;
};

struct MethodOutcome {
  BoundResult result;
  std::optional<WeightedEnsemble> ensemble;
  std::vector<OptimizerTraceRow> trace;
};

/// Dispatches to the optimizer or engine behind `method`. loopy-bp runs
/// mu = 1 everywhere and reports the Bethe value with direction none.
MethodOutcome run_method(const PairwiseModel& model, Method method, const MethodConfig& config);

/// Coupling strength per edge: max - min of its log-potential table.
std::vector<double> coupling_strength(const PairwiseModel& model);

struct RunRecord {
  std::string model_id;
  Method method = Method::kNegTrbp;
  BoundResult result;
  std::optional<double> exact;
  double wall_seconds = 0.0;

  std::optional<double> error() const {
    if (!exact) return std::nullopt;
    return result.value - *exact;
  }
};

/// key=value lines.
std::string format_run_record(const RunRecord& record);

struct Fig3Config {
  Coupling coupling = Coupling::kMixed;
  std::size_t rows = 5;
  std::size_t cols = 5;
  std::vector<double> c_grid;
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  MethodConfig methods;
  std::size_t threads = 0;  ///< 0: hardware concurrency.
};

struct Fig3Row {
  double c = 0.0;
  std::size_t trial = 0;
  Method method = Method::kNegTrbp;
  double bound = 0.0;
  double exact = 0.0;
  double error = 0.0;
  bool certified = false;
};

struct Fig3Summary {
  double c = 0.0;
  Method method = Method::kNegTrbp;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

/// Rows are ordered by (c, trial, method) whatever the thread count. Trial t
/// uses seed ^ t for the model, the optimizer and the mean-field restarts.
std::vector<Fig3Row> run_fig3(const Fig3Config& config);

/// Per (c, method): median and 25% / 75% quantiles of error.
std::vector<Fig3Summary> summarize_fig3(const std::vector<Fig3Row>& rows);

std::string fig3_csv(const std::vector<Fig3Row>& rows);
std::string fig3_summary_csv(const std::vector<Fig3Summary>& summary);

/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

struct AdaptRow {
  std::size_t iteration = 0;
  double bound_fixed = 0.0;
  double bound_chowliu = 0.0;
};

/// optimize_lower_bound twice from the same options, positive-tree
/// reselection off then on. Each column is the best certified bound so far
/// (the current iterate's value until one certifies).
std::vector<AdaptRow> run_adapt_trace(const PairwiseModel& model, const OptimizerOptions& options);
std::string adapt_trace_csv(const std::vector<AdaptRow>& rows);

struct SurfacePoint {
  double w1 = 0.0;
  double w2 = 0.0;
  double w3 = 0.0;
  bool converged = false;
  double psi = 0.0;
  bool exceeds_exact = false;
  DomainLabel domain;
};

struct SurfaceConfig {
  double resolution = 0.05;
  double lo = -1.5;
  double hi = 2.5;
  MpOptions mp;
};

/// The three spanning trees of a triangle model, lexicographic:
/// {01,02}, {01,12}, {02,12}.
std::vector<Subtree> triangle_spanning_trees(const PairwiseModel& model);

/// Scans (w1, w2) over [lo, hi]^2 with w3 = 1 - w1 - w2, skipping points with
/// any |w_r| < 1e-3. psi is -F at the fixed point. Requires a 3-node, 3-edge
/// model.
std::vector<SurfacePoint> run_weight_surface(const PairwiseModel& model, const SurfaceConfig& config);
std::string weight_surface_csv(const std::vector<SurfacePoint>& points);

/// Shortest decimal text for CSV cells ("nan" for NaN).
std::string format_real(double x);

}  // namespace treebound
