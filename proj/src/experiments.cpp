#include "treebound/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

namespace treebound {

std::string to_string(Method m) {
  switch (m) {
    case Method::kTrbp:
      return "trbp";
    case Method::kNegTrbp:
      return "negtrbp";
    case Method::kNaiveMf:
      return "naive-mf";
    case Method::kStructuredMf:
      return "structured-mf";
    case Method::kLoopyBp:
      return "loopy-bp";
  }
  return "unknown";
}

std::optional<Method> parse_method(const std::string& name) {
  for (Method m : {Method::kTrbp, Method::kNegTrbp, Method::kNaiveMf, Method::kStructuredMf,
                   Method::kLoopyBp}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::vector<double> coupling_strength(const PairwiseModel& model) {
  std::vector<double> s;
  for (std::size_t e = 0; e < model.edge_count(); ++e) {
    const auto& t = model.pairwise(e);
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    s.push_back(*hi - *lo);
  }
  return s;
}

MethodOutcome run_method(const PairwiseModel& model, Method method, const MethodConfig& config) {
  MethodOutcome out;
  switch (method) {
    case Method::kNegTrbp: {
      OptimizerOutcome o = optimize_lower_bound(model, config.optimizer);
      out.result = o.result;
      out.ensemble = o.ensemble;
      out.trace = std::move(o.trace);
      break;
    }
    case Method::kTrbp: {
      OptimizerOutcome o = optimize_upper_bound(model, config.optimizer);
      out.result = o.result;
      out.ensemble = o.ensemble;
      out.trace = std::move(o.trace);
      break;
    }
    case Method::kNaiveMf:
      out.result = naive_mean_field(model, config.mf_restarts, config.optimizer.seed).result;
      break;
    case Method::kStructuredMf: {
      const Subtree skeleton = config.skeleton
                                   ? *config.skeleton
                                   : greedy_v_acyclic_skeleton(model, coupling_strength(model));
      out.result = structured_mean_field(model, skeleton, config.optimizer.inner);
      break;
    }
    case Method::kLoopyBp: {
      const EdgeAppearanceMap mu(model.edge_count(), 1.0);
      const BeliefState state = run_message_passing(model, mu, config.optimizer.inner);
      out.result.value = free_energy(model, mu, state.pseudomarginals);
      out.result.direction = BoundDirection::kNone;
      out.result.certified = false;
      out.result.converged = state.converged;
      out.result.iterations = state.iterations;
      out.result.residual_max = marginal_matching_residual(model, state.pseudomarginals);
      out.result.domain = {WeightDomain::kMixed, 0};
      break;
    }
  }
  return out;
}

std::string format_run_record(const RunRecord& record) {
  std::ostringstream out;
  out << "model=" << record.model_id << '\n'
      << "method=" << to_string(record.method) << '\n'
      << serialize(record.result);
  if (record.exact) {
    out << "exact=" << format_real(*record.exact) << '\n'
        << "error=" << format_real(*record.error()) << '\n';
  }
  out << "wall_time=" << format_real(record.wall_seconds) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------

std::vector<Fig3Row> run_fig3(const Fig3Config& config) {
  if (std::min(config.rows, config.cols) > kMaxGridWidth) {
    throw ModelError("grid too large for exact elimination");
  }
  const std::vector<Method> methods = {Method::kNegTrbp, Method::kNaiveMf, Method::kTrbp};
  const std::size_t jobs = config.c_grid.size() * config.trials;
  std::vector<std::vector<Fig3Row>> results(jobs);
  std::vector<std::string> errors(jobs);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const std::size_t ci = job / config.trials;
      const std::size_t trial = job % config.trials;
      const std::uint64_t seed = config.seed ^ static_cast<std::uint64_t>(trial);
      try {
        ModelFamilySpec spec;
        spec.rows = config.rows;
        spec.cols = config.cols;
        spec.coupling = config.coupling;
        spec.strength = config.c_grid[ci];
        spec.seed = seed;
        const PairwiseModel model = gen_ising_grid(spec);
        const double exact = grid_log_partition(model);
        MethodConfig mc = config.methods;
        mc.optimizer.seed = seed;
        for (Method m : methods) {
          const BoundResult r = run_method(model, m, mc).result;
          results[job].push_back(
              {config.c_grid[ci], trial, m, r.value, exact, r.value - exact, r.certified});
        }
      } catch (const std::exception& ex) {
        errors[job] = ex.what();
      }
    }
  };

  std::size_t threads = config.threads ? config.threads : std::thread::hardware_concurrency();
  threads = std::max<std::size_t>(1, std::min(threads, jobs));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::vector<Fig3Row> rows;
  for (std::size_t job = 0; job < jobs; ++job) {
    if (!errors[job].empty()) throw ModelError("fig3 trial failed: " + errors[job]);
    rows.insert(rows.end(), results[job].begin(), results[job].end());
  }
  return rows;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<Fig3Summary> summarize_fig3(const std::vector<Fig3Row>& rows) {
  std::vector<Fig3Summary> out;
  std::vector<double> cs;
  for (const auto& r : rows) {
    if (std::find(cs.begin(), cs.end(), r.c) == cs.end()) cs.push_back(r.c);
  }
  for (double c : cs) {
    for (Method m : {Method::kNegTrbp, Method::kNaiveMf, Method::kTrbp}) {
      std::vector<double> errs;
      for (const auto& r : rows)
        if (r.c == c && r.method == m) errs.push_back(r.error);
      if (errs.empty()) continue;
      out.push_back({c, m, quantile(errs, 0.5), quantile(errs, 0.25), quantile(errs, 0.75)});
    }
  }
  return out;
}

std::string fig3_csv(const std::vector<Fig3Row>& rows) {
  std::string out = "c,trial,method,bound,exact,error,certified\n";
  for (const auto& r : rows) {
    out += format_real(r.c) + ',' + std::to_string(r.trial) + ',' + to_string(r.method) + ',' +
           format_real(r.bound) + ',' + format_real(r.exact) + ',' + format_real(r.error) + ',' +
           (r.certified ? "1" : "0") + '\n';
  }
  return out;
}

std::string fig3_summary_csv(const std::vector<Fig3Summary>& summary) {
  std::string out = "c,method,median_error,q25_error,q75_error\n";
  for (const auto& s : summary) {
    out += format_real(s.c) + ',' + to_string(s.method) + ',' + format_real(s.median) + ',' +
           format_real(s.q25) + ',' + format_real(s.q75) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<AdaptRow> run_adapt_trace(const PairwiseModel& model, const OptimizerOptions& options) {
  auto column = [&](bool reselect) {
    OptimizerOptions o = options;
    o.reselect_positive = reselect;
    const OptimizerOutcome out = optimize_lower_bound(model, o);
    std::vector<double> values;
    bool any = false;
    double best = 0.0;
    for (const auto& row : out.trace) {
      if (row.certified && (!any || row.bound > best)) {
        best = row.bound;
        any = true;
      }
      values.push_back(any ? best : row.bound);
    }
    return values;
  };
  const auto fixed = column(false);
  const auto adaptive = column(true);
  std::vector<AdaptRow> rows;
  for (std::size_t k = 0; k < std::min(fixed.size(), adaptive.size()); ++k) {
    rows.push_back({k, fixed[k], adaptive[k]});
  }
  return rows;
}

std::string adapt_trace_csv(const std::vector<AdaptRow>& rows) {
  std::string out = "iter,bound_fixed,bound_chowliu\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + ',' + format_real(r.bound_fixed) + ',' +
           format_real(r.bound_chowliu) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Subtree> triangle_spanning_trees(const PairwiseModel& model) {
  if (model.node_count() != 3 || model.edge_count() != 3) {
    throw ModelError("weight surface needs a triangle model (3 nodes, 3 edges)");
  }
  return {Subtree(model, {0, 1}), Subtree(model, {0, 2}), Subtree(model, {1, 2})};
}

std::vector<SurfacePoint> run_weight_surface(const PairwiseModel& model,
                                             const SurfaceConfig& config) {
  const auto trees = triangle_spanning_trees(model);
  if (!(config.resolution > 0.0) || !(config.hi >= config.lo)) {
    throw ModelError("invalid weight grid");
  }
  const double exact = brute_force_log_partition(model);
  const auto steps =
      static_cast<std::size_t>(std::floor((config.hi - config.lo) / config.resolution + 1e-9));
  std::vector<SurfacePoint> points;
  for (std::size_t a = 0; a <= steps; ++a) {
    for (std::size_t b = 0; b <= steps; ++b) {
      SurfacePoint p;
      p.w1 = config.lo + static_cast<double>(a) * config.resolution;
      p.w2 = config.lo + static_cast<double>(b) * config.resolution;
      p.w3 = 1.0 - p.w1 - p.w2;
      if (std::abs(p.w1) < 1e-3 || std::abs(p.w2) < 1e-3 || std::abs(p.w3) < 1e-3) continue;
      const WeightedEnsemble ensemble(
          model, {{trees[0], p.w1}, {trees[1], p.w2}, {trees[2], p.w3}});
      p.domain = classify_weights(ensemble);
      p.psi = std::numeric_limits<double>::quiet_NaN();
      try {
        const auto& mu = ensemble.edge_appearance();
        const BeliefState state = run_message_passing(model, mu, config.mp);
        p.converged = state.converged;
        p.psi = free_energy(model, mu, state.pseudomarginals);
        if (!std::isfinite(p.psi)) p.converged = false;
      } catch (const MessagePassingError&) {
        p.converged = false;
      }
      p.exceeds_exact = p.psi > exact;
      points.push_back(p);
    }
  }
  return points;
}

std::string weight_surface_csv(const std::vector<SurfacePoint>& points) {
  std::string out = "w1,w2,w3,converged,psi,exceeds_exact\n";
  for (const auto& p : points) {
    out += format_real(p.w1) + ',' + format_real(p.w2) + ',' + format_real(p.w3) + ',' +
           (p.converged ? "1" : "0") + ',' + format_real(p.psi) + ',' +
           (p.exceeds_exact ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace treebound
