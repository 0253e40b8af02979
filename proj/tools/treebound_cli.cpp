// treebound: bounds on log partition functions of pairwise MRFs.
//
// Exit status: 0 certified, 2 uncertified, 1 usage or model error.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "treebound/experiments.hpp"

using namespace treebound;

namespace {

constexpr int kExitCertified = 0;
constexpr int kExitError = 1;
constexpr int kExitUncertified = 2;

struct Shared {
  std::uint64_t seed = 0;
  std::string out;
  double tol = MpOptions{}.tol;
  std::size_t max_iters = MpOptions{}.max_iters;
  double damping = MpOptions{}.damping;
  bool require_certified = false;
  bool dump_ensemble = false;
  bool full = false;
  std::size_t outer_iters = OptimizerOptions{}.outer_iters;
  std::size_t mf_restarts = MethodConfig{}.mf_restarts;

  MpOptions mp() const {
    MpOptions o;
    o.tol = tol;
    o.max_iters = max_iters;
    o.damping = damping;
    return o;
  }
  MethodConfig method_config() const {
    MethodConfig c;
    c.optimizer.inner = mp();
    c.optimizer.outer_iters = outer_iters;
    c.optimizer.seed = seed;
    c.mf_restarts = mf_restarts;
    return c;
  }
};

void add_shared(CLI::App* cmd, Shared& s) {
  cmd->add_option("--seed", s.seed, "RNG seed")->capture_default_str();
  cmd->add_option("--out", s.out, "Output path (default stdout)");
  cmd->add_option("--tol", s.tol, "Message-passing tolerance")->capture_default_str();
  cmd->add_option("--max-iters", s.max_iters, "Message-passing iteration cap")
      ->capture_default_str();
  cmd->add_option("--damping", s.damping, "Message damping in [0, 1)")
      ->check(CLI::Range(0.0, 0.999999))
      ->capture_default_str();
  cmd->add_flag("--require-certified", s.require_certified,
                "Exit 2 when a result that should be certified is not");
  cmd->add_flag("--dump-ensemble", s.dump_ensemble, "Print the final tree ensemble");
  cmd->add_flag("--full", s.full, "Full-scale experiment (10x10 grids)");
  cmd->add_option("--outer-iters", s.outer_iters, "Weight-optimizer iterations")
      ->capture_default_str();
  cmd->add_option("--mf-restarts", s.mf_restarts, "Naive mean-field restarts")
      ->capture_default_str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

Coupling parse_mode(const std::string& mode) {
  return mode == "attractive" ? Coupling::kAttractive : Coupling::kMixed;
}

std::vector<double> default_c_grid() {
  std::vector<double> c;
  for (int k = 0; k <= 8; ++k) c.push_back(0.25 * k);
  return c;
}

// bound ---------------------------------------------------------------------

int cmd_bound(const Shared& s, const std::string& model_path, const std::string& method_name) {
  const auto method = parse_method(method_name);
  if (!method) throw std::runtime_error("unknown method '" + method_name + "'");
  const PairwiseModel model = load_model_file(model_path);

  const auto start = std::chrono::steady_clock::now();
  const MethodOutcome outcome = run_method(model, *method, s.method_config());
  RunRecord record;
  record.model_id = model_path;
  record.method = *method;
  record.result = outcome.result;
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  record.exact = exact_log_partition(model);

  std::string text = format_run_record(record);
  if (s.dump_ensemble && outcome.ensemble) text += dump_ensemble(model, *outcome.ensemble);
  write_output(s.out, text);
  return record.result.certified ? kExitCertified : kExitUncertified;
}

// fig3 ----------------------------------------------------------------------

int cmd_fig3(const Shared& s, const std::string& mode, std::size_t rows, std::size_t cols,
             std::vector<double> c_grid, std::size_t trials, std::size_t threads,
             const std::string& summary_out) {
  Fig3Config cfg;
  cfg.coupling = parse_mode(mode);
  cfg.rows = s.full ? 10 : rows;
  cfg.cols = s.full ? 10 : cols;
  cfg.c_grid = c_grid.empty() ? default_c_grid() : std::move(c_grid);
  cfg.trials = trials;
  cfg.seed = s.seed;
  cfg.methods = s.method_config();
  cfg.threads = threads;

  const auto rows_out = run_fig3(cfg);
  write_output(s.out, fig3_csv(rows_out));
  std::string summary_path = summary_out;
  if (summary_path.empty() && !s.out.empty() && s.out != "-") summary_path = s.out + ".summary.csv";
  if (!summary_path.empty()) write_output(summary_path, fig3_summary_csv(summarize_fig3(rows_out)));

  if (s.require_certified) {
    for (const auto& r : rows_out)
      if (!r.certified) return kExitUncertified;
  }
  return kExitCertified;
}

// adapt-trace ---------------------------------------------------------------

int cmd_adapt(const Shared& s, const std::string& model_path, const std::string& mode,
              std::size_t rows, std::size_t cols, double c) {
  PairwiseModel model;
  if (!model_path.empty()) {
    model = load_model_file(model_path);
  } else {
    ModelFamilySpec spec;
    spec.rows = s.full ? 10 : rows;
    spec.cols = s.full ? 10 : cols;
    spec.coupling = parse_mode(mode);
    spec.strength = c;
    spec.seed = s.seed;
    model = gen_ising_grid(spec);
  }
  OptimizerOptions opts = s.method_config().optimizer;
  write_output(s.out, adapt_trace_csv(run_adapt_trace(model, opts)));
  return kExitCertified;
}

// weight-surface ------------------------------------------------------------

int cmd_surface(const Shared& s, const std::string& model_path, double resolution, double lo,
                double hi) {
  const PairwiseModel model = load_model_file(model_path);
  SurfaceConfig cfg;
  cfg.resolution = resolution;
  cfg.lo = lo;
  cfg.hi = hi;
  cfg.mp = s.mp();
  const auto points = run_weight_surface(model, cfg);
  write_output(s.out, weight_surface_csv(points));
  if (s.require_certified) {
    for (const auto& p : points)
      if (!p.converged && p.domain.domain != WeightDomain::kMixed) return kExitUncertified;
  }
  return kExitCertified;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-reweighted upper and lower bounds on log partition functions"};
  app.require_subcommand(1);

  Shared bound_s, fig3_s, adapt_s, surface_s;

  auto* bound = app.add_subcommand("bound", "Bound the log partition function of a model file");
  std::string bound_model, method = "negtrbp";
  bound->add_option("model", bound_model, "Model file (UAI MARKOV format)")->required();
  bound->add_option("--method", method, "trbp, negtrbp, naive-mf, structured-mf or loopy-bp")
      ->capture_default_str();
  add_shared(bound, bound_s);

  auto* fig3 = app.add_subcommand("fig3", "Bound error against coupling strength on Ising grids");
  std::string fig3_mode = "mixed", summary_out;
  std::size_t fig3_rows = 5, fig3_cols = 5, trials = 20, threads = 0;
  std::vector<double> c_grid;
  fig3->add_option("--mode", fig3_mode)
      ->check(CLI::IsMember({"attractive", "mixed"}))
      ->capture_default_str();
  fig3->add_option("--rows", fig3_rows)->capture_default_str();
  fig3->add_option("--cols", fig3_cols)->capture_default_str();
  fig3->add_option("--c-grid", c_grid, "Coupling strengths (default 0,0.25,...,2)")
      ->delimiter(',');
  fig3->add_option("--trials", trials)->capture_default_str();
  fig3->add_option("--threads", threads, "Worker threads (0: all cores)")->capture_default_str();
  fig3->add_option("--summary-out", summary_out,
                   "Quantile summary CSV (default <out>.summary.csv when --out is set)");
  add_shared(fig3, fig3_s);

  auto* adapt = app.add_subcommand("adapt-trace",
                                   "Lower-bound trace with and without positive-tree reselection");
  std::string adapt_model, adapt_mode = "attractive";
  std::size_t adapt_rows = 5, adapt_cols = 5;
  double adapt_c = 0.6;
  adapt->add_option("model", adapt_model, "Model file; omit to generate an Ising grid");
  adapt->add_option("--mode", adapt_mode)
      ->check(CLI::IsMember({"attractive", "mixed"}))
      ->capture_default_str();
  adapt->add_option("--rows", adapt_rows)->capture_default_str();
  adapt->add_option("--cols", adapt_cols)->capture_default_str();
  adapt->add_option("--c", adapt_c, "Coupling strength")->capture_default_str();
  add_shared(adapt, adapt_s);

  auto* surface = app.add_subcommand("weight-surface", "Scan tree weights of a triangle model");
  std::string surface_model;
  double resolution = 0.05, lo = SurfaceConfig{}.lo, hi = SurfaceConfig{}.hi;
  surface->add_option("model", surface_model, "Triangle model file")->required();
  surface->add_option("--resolution", resolution)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  surface->add_option("--lo", lo, "Lowest w1, w2")->capture_default_str();
  surface->add_option("--hi", hi, "Highest w1, w2")->capture_default_str();
  add_shared(surface, surface_s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (*bound) return cmd_bound(bound_s, bound_model, method);
    if (*fig3)
      return cmd_fig3(fig3_s, fig3_mode, fig3_rows, fig3_cols, c_grid, trials, threads,
                      summary_out);
    if (*adapt) return cmd_adapt(adapt_s, adapt_model, adapt_mode, adapt_rows, adapt_cols, adapt_c);
    if (*surface) return cmd_surface(surface_s, surface_model, resolution, lo, hi);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitError;
  }
  return kExitError;
}
