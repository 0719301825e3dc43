#pragma once

// Experiment commands. Each command computes its three tables in memory and
// only then writes them, so a failing engine leaves nothing behind.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "bsbu/cli/config.hpp"
#include "bsbu/oracle.hpp"
#include "bsbu/solver.hpp"
#include "bsbu/va_model.hpp"

#ifndef BSBU_VERSION
#define BSBU_VERSION "0.0.0"
#endif

namespace bsbu::cli {

enum class Command { Price, CompareRegression, CompareSimulation, ConvergenceSweep, OracleCheck };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::Price: return "price";
    case Command::CompareRegression: return "compare-regression";
    case Command::CompareSimulation: return "compare-simulation";
    case Command::ConvergenceSweep: return "convergence-sweep";
    case Command::OracleCheck: return "oracle-check";
  }
  return "unknown";
}

inline Command parse_command(const std::string& name) {
  for (Command c : {Command::Price, Command::CompareRegression, Command::CompareSimulation, Command::ConvergenceSweep,
                    Command::OracleCheck})
    if (name == to_string(c)) return c;
  throw ValidationError("unknown command '" + name + "'");
}

/// Exit statuses of run_command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;
inline constexpr int kExitTolerance = 3;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    if (row.size() != header.size()) throw InternalError("Table: row width does not match header");
    rows.push_back(std::move(row));
  }
};

inline std::string cell(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
inline std::string cell(std::size_t v) { return std::to_string(v); }
inline std::string cell(int v) { return std::to_string(v); }
inline std::string cell(bool v) { return v ? "1" : "0"; }
inline std::string cell(const char* v) { return v; }
inline std::string cell(const std::string& v) { return v; }
inline std::string cell(const LabelVec& label) {
  std::string out;
  for (std::size_t i = 0; i < label.size(); ++i) out += (i ? ";" : "") + std::to_string(label[i]);
  return out;
}

inline std::string csv_text(const Table& t) {
  auto line = [](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    return out + '\n';
  };
  std::string out = line(t.header);
  for (const auto& r : t.rows) out += line(r);
  return out;
}

struct CommandOutput {
  Table summary;
  Table repeats;
  Table diagnostics;
  std::vector<std::string> warnings;
  int status = kExitOk;
  std::string message;  // one-line human summary
};

namespace detail {

struct Setup {
  VaModel model;
  TruncatedDomain dom;
};

inline Setup setup(const ExperimentConfig& cfg) {
  return {VaModel(cfg.contract), va_domain(cfg.solver.truncation)};
}

inline Table step_table(std::vector<std::string> leading) {
  Table t;
  t.header = std::move(leading);
  for (const char* c : {"repeat", "step", "slice", "sample_size", "basis_order", "ssr", "kkt_residual",
                        "absorbed_fraction", "rank_deficient"})
    t.header.emplace_back(c);
  return t;
}

inline void add_step_rows(Table& t, const std::vector<std::string>& leading, const Experiment& ex) {
  for (std::size_t i = 0; i < ex.runs.size(); ++i)
    for (const StepDiagnostic& d : ex.runs[i].diagnostics) {
      std::vector<std::string> row = leading;
      for (std::string c : {cell(i), cell(d.step), cell(d.slice), cell(d.sample_size), cell(d.basis_order), cell(d.ssr),
                            cell(d.kkt_residual), cell(d.absorbed_fraction), cell(d.rank_deficient)})
        row.push_back(std::move(c));
      t.add(std::move(row));
    }
}

inline void collect_warnings(std::vector<std::string>& out, const Experiment& ex, const std::string& prefix) {
  std::set<std::string> seen(out.begin(), out.end());
  for (std::size_t i = 0; i < ex.runs.size(); ++i)
    for (const std::string& w : ex.runs[i].warnings) {
      std::string msg = prefix + "repeat " + std::to_string(i) + ": " + w;
      if (seen.insert(msg).second) out.push_back(std::move(msg));
    }
}

inline const char* regression_name(Regression r) { return r == Regression::Rse ? "rse" : "spse"; }

inline CommandOutput price(const ExperimentConfig& cfg) {
  const Setup s = setup(cfg);
  const Experiment ex = repeat_experiment(s.model, s.dom, cfg.effective_solver(), cfg.engine);
  CommandOutput out;
  out.summary.header = {"engine", "regression", "constraint", "paths", "basis_order", "repeats",
                        "mean",   "sd",         "min",        "max"};
  out.summary.add({to_string(cfg.engine), regression_name(cfg.regression), to_string(cfg.effective_constraint()),
                   cell(cfg.solver.paths), cell(cfg.solver.basis_order), cell(ex.runs.size()), cell(ex.stats.mean),
                   cell(ex.stats.sd), cell(ex.stats.min), cell(ex.stats.max)});
  out.repeats.header = {"repeat", "v0"};
  for (std::size_t i = 0; i < ex.runs.size(); ++i) out.repeats.add({cell(i), cell(ex.runs[i].v0)});
  out.diagnostics = step_table({});
  add_step_rows(out.diagnostics, {}, ex);
  collect_warnings(out.warnings, ex, "");
  out.message = "V0 mean " + cell(ex.stats.mean) + ", sd " + cell(ex.stats.sd) + " over " +
                std::to_string(ex.runs.size()) + " repeats";
  return out;
}

inline CommandOutput compare_regression(const ExperimentConfig& cfg) {
  const Setup s = setup(cfg);
  CommandOutput out;
  out.summary.header = {"setting", "paths", "basis_order", "repeats", "spse_mean", "spse_sd", "rse_mean", "rse_sd",
                        "sd_ratio"};
  out.repeats.header = {"setting", "paths", "basis_order", "regression", "repeat", "v0"};
  out.diagnostics = step_table({"setting", "regression"});
  const ShapeConstraint shape =
      cfg.solver.constraint == ShapeConstraint::None ? ShapeConstraint::Monotone : cfg.solver.constraint;
  for (std::size_t k = 0; k < cfg.settings.size(); ++k) {
    SolverConfig sc = cfg.solver;
    sc.paths = cfg.settings[k].paths;
    sc.basis_order = cfg.settings[k].order;
    sc.selection.reset();
    sc.constraint = shape;
    const Experiment spse = repeat_experiment(s.model, s.dom, sc, cfg.engine);
    sc.constraint = ShapeConstraint::None;
    const Experiment rse = repeat_experiment(s.model, s.dom, sc, cfg.engine);
    out.summary.add({cell(k), cell(sc.paths), cell(sc.basis_order), cell(spse.runs.size()), cell(spse.stats.mean),
                     cell(spse.stats.sd), cell(rse.stats.mean), cell(rse.stats.sd),
                     cell(rse.stats.sd > 0.0 ? spse.stats.sd / rse.stats.sd : 0.0)});
    for (const auto& [name, ex] : {std::pair<const char*, const Experiment*>{"spse", &spse}, {"rse", &rse}}) {
      for (std::size_t i = 0; i < ex->runs.size(); ++i)
        out.repeats.add({cell(k), cell(sc.paths), cell(sc.basis_order), name, cell(i), cell(ex->runs[i].v0)});
      add_step_rows(out.diagnostics, {cell(k), name}, *ex);
      collect_warnings(out.warnings, *ex, "setting " + std::to_string(k) + " " + name + " ");
    }
  }
  out.message = std::to_string(cfg.settings.size()) + " settings compared";
  return out;
}

inline CommandOutput compare_simulation(const ExperimentConfig& cfg) {
  const Setup s = setup(cfg);
  const int t = cfg.step_for_simulation();
  const std::size_t m = cfg.solver.paths;
  const double lo = s.dom.lo()[0];
  const double hi = s.dom.hi()[0];
  const int bins = cfg.histogram_bins;
  const RandomStream base{cfg.solver.seed, 0};

  CommandOutput out;
  out.summary.header = {"sampler",         "step",           "paths",           "fraction_w_zero",
                        "fraction_i_zero", "fraction_k1_zero", "fraction_k2_zero", "k2_slices"};
  out.repeats.header = {"sampler", "step", "k2", "count"};
  out.diagnostics.header = {"sampler", "step", "bin", "k1_lo", "k1_hi", "count"};

  struct Source {
    std::string name;
    std::vector<State> states;  // empty for backward sampling
    std::vector<PostActionValue> post;
  };
  std::vector<Source> sources;
  std::uint64_t index = 0;
  for (CrRule rule : {CrRule::CR0, CrRule::CR1, CrRule::CR2}) {
    ForwardSample fs = forward_simulate(s.model, s.dom, rule, t, m, base.child(index++));
    sources.push_back({to_string(rule), std::move(fs.current), std::move(fs.post_actions)});
  }
  sources.push_back({"bsbu", {}, UniformPostActionSampler(s.dom).sample(t, m, base.child(index++))});

  for (const Source& src : sources) {
    const double n = static_cast<double>(src.post.size());
    std::vector<std::size_t> k2_counts(static_cast<std::size_t>(t) + 1, 0);
    std::vector<std::size_t> hist(static_cast<std::size_t>(bins), 0);
    std::size_t k1_zero = 0;
    for (const PostActionValue& k : src.post) {
      const double k1 = k.continuous[0];
      if (k1 == lo) ++k1_zero;
      ++k2_counts.at(static_cast<std::size_t>(k.discrete[0]));
      auto b = static_cast<long>(std::floor((k1 - lo) / (hi - lo) * bins));
      hist[static_cast<std::size_t>(std::clamp(b, 0L, static_cast<long>(bins) - 1))]++;
    }
    std::string w_zero;
    std::string i_zero;
    if (!src.states.empty()) {
      std::size_t wz = 0;
      std::size_t iz = 0;
      for (const State& x : src.states) {
        wz += x.continuous[0] == lo;
        iz += x.discrete[0] == 0;
      }
      w_zero = cell(static_cast<double>(wz) / n);
      i_zero = cell(static_cast<double>(iz) / n);
    }
    std::size_t populated = 0;
    for (std::size_t c : k2_counts) populated += c > 0;
    out.summary.add({src.name, cell(t), cell(src.post.size()), w_zero, i_zero, cell(static_cast<double>(k1_zero) / n),
                     cell(static_cast<double>(k2_counts[0]) / n), cell(populated)});
    for (std::size_t j = 0; j < k2_counts.size(); ++j)
      out.repeats.add({src.name, cell(t), cell(j), cell(k2_counts[j])});
    for (int b = 0; b < bins; ++b)
      out.diagnostics.add({src.name, cell(t), cell(b), cell(lo + (hi - lo) * b / bins),
                           cell(b + 1 == bins ? hi : lo + (hi - lo) * (b + 1) / bins),
                           cell(hist[static_cast<std::size_t>(b)])});
  }
  out.message = "post-action samples at t=" + std::to_string(t) + " for cr0, cr1, cr2 and bsbu";
  return out;
}

inline CommandOutput convergence_sweep(const ExperimentConfig& cfg) {
  const Setup s = setup(cfg);
  CommandOutput out;
  out.summary.header = {"paths", "basis_order", "repeats", "mean", "sd", "min", "max"};
  out.repeats.header = {"paths", "repeat", "v0"};
  out.diagnostics = step_table({"paths"});
  for (std::size_t m : cfg.sweep_paths) {
    SolverConfig sc = cfg.effective_solver();
    sc.paths = m;
    const Experiment ex = repeat_experiment(s.model, s.dom, sc, cfg.engine);
    out.summary.add({cell(m), cell(sc.basis_order), cell(ex.runs.size()), cell(ex.stats.mean), cell(ex.stats.sd),
                     cell(ex.stats.min), cell(ex.stats.max)});
    for (std::size_t i = 0; i < ex.runs.size(); ++i) out.repeats.add({cell(m), cell(i), cell(ex.runs[i].v0)});
    add_step_rows(out.diagnostics, {cell(m)}, ex);
    collect_warnings(out.warnings, ex, "M=" + std::to_string(m) + " ");
  }
  out.message = std::to_string(cfg.sweep_paths.size()) + " path counts swept";
  return out;
}

inline CommandOutput oracle_check(const ExperimentConfig& cfg) {
  const Setup s = setup(cfg);
  const GridSolution grid =
      grid_dp_solve(s.model, s.dom, GridSpec::uniform(s.dom, cfg.grid_points, cfg.quadrature_order));
  const Experiment ex = repeat_experiment(s.model, s.dom, cfg.effective_solver(), cfg.engine);
  const EstimateComparison cmp = compare_estimates(ex.stats.mean, grid.v0);
  const bool ok = cmp.relative_error <= cfg.oracle_tolerance;

  CommandOutput out;
  out.summary.header = {"horizon",  "grid_points", "quadrature_order", "grid_v0",        "engine",
                        "regression", "paths",     "basis_order",      "repeats",        "mean",
                        "sd",       "absolute_error", "relative_error", "tolerance",     "within_tolerance"};
  out.summary.add({cell(cfg.contract.horizon), cell(cfg.grid_points), cell(cfg.quadrature_order), cell(grid.v0),
                   to_string(cfg.engine), regression_name(cfg.regression), cell(cfg.solver.paths),
                   cell(cfg.solver.basis_order), cell(ex.runs.size()), cell(ex.stats.mean), cell(ex.stats.sd),
                   cell(cmp.absolute_error), cell(cmp.relative_error), cell(cfg.oracle_tolerance), cell(ok)});
  out.repeats.header = {"repeat", "v0", "relative_error"};
  for (std::size_t i = 0; i < ex.runs.size(); ++i)
    out.repeats.add({cell(i), cell(ex.runs[i].v0), cell(compare_estimates(ex.runs[i].v0, grid.v0).relative_error)});

  // Value table, thinned to at most 201 points per slice.
  out.diagnostics.header = {"step", "label", "w", "value"};
  const std::size_t n = grid.w.size();
  const std::size_t stride = std::max<std::size_t>(1, (n - 1 + 199) / 200);
  std::vector<std::size_t> points;
  for (std::size_t i = 0; i < n; i += stride) points.push_back(i);
  if (points.back() != n - 1) points.push_back(n - 1);
  for (std::size_t t = 0; t < grid.values.size(); ++t)
    for (std::size_t label = 0; label < grid.values[t].size(); ++label)
      for (std::size_t i : points)
        out.diagnostics.add({cell(t), cell(label), cell(grid.w[i]), cell(grid.values[t][label][i])});
  collect_warnings(out.warnings, ex, "");
  out.status = ok ? kExitOk : kExitTolerance;
  out.message = "grid V0 " + cell(grid.v0) + ", estimate " + cell(ex.stats.mean) + ", relative error " +
                cell(cmp.relative_error) + (ok ? " (within " : " (exceeds ") + cell(cfg.oracle_tolerance) + ")";
  return out;
}

}  // namespace detail

/// Computes a command's tables without touching the file system.
inline CommandOutput compute_command(Command cmd, const ExperimentConfig& cfg) {
  switch (cmd) {
    case Command::Price: return detail::price(cfg);
    case Command::CompareRegression: return detail::compare_regression(cfg);
    case Command::CompareSimulation: return detail::compare_simulation(cfg);
    case Command::ConvergenceSweep: return detail::convergence_sweep(cfg);
    case Command::OracleCheck: return detail::oracle_check(cfg);
  }
  throw InternalError("compute_command: unknown command");
}

inline std::string manifest_text(Command cmd, const ExperimentConfig& cfg, const CommandOutput& out) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016" PRIx64, fnv1a64(canonical_text(cfg)));
  std::string m;
  m += "command = " + std::string(to_string(cmd)) + "\n";
  m += "version = " BSBU_VERSION "\n";
  m += "seed = " + std::to_string(cfg.solver.seed) + "\n";
  m += "config_hash = fnv1a64:" + std::string(hash) + "\n";
  m += "status = " + std::to_string(out.status) + "\n";
  m += "warnings = " + std::to_string(out.warnings.size()) + "\n";
  m += "files = summary.csv repeats.csv diagnostics.csv\n";
  m += "\n# resolved configuration\n" + canonical_text(cfg);
  return m;
}

/// Runs a command and writes summary.csv, repeats.csv, diagnostics.csv and
/// manifest.txt into `dir`. Returns the exit status; on failure every file
/// this call created is removed.
inline int run_command(Command cmd, const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  namespace fs = std::filesystem;
  CommandOutput out;
  try {
    out = compute_command(cmd, cfg);
  } catch (const std::exception& e) {
    log << "error: " << to_string(cmd) << " failed: " << e.what() << '\n';
    return kExitFailure;
  }
  for (const std::string& w : out.warnings) log << "warning: " << w << '\n';

  std::vector<fs::path> written;
  bool created_dir = false;
  try {
    if (!fs::exists(dir)) created_dir = fs::create_directories(dir);
    const std::pair<const char*, std::string> files[] = {{"summary.csv", csv_text(out.summary)},
                                                         {"repeats.csv", csv_text(out.repeats)},
                                                         {"diagnostics.csv", csv_text(out.diagnostics)},
                                                         {"manifest.txt", manifest_text(cmd, cfg, out)}};
    for (const auto& [name, text] : files) {
      const fs::path path = dir / name;
      written.push_back(path);
      std::ofstream f(path, std::ios::binary | std::ios::trunc);
      f << text;
      f.close();
      if (!f) throw std::runtime_error("cannot write " + path.string());
    }
  } catch (const std::exception& e) {
    std::error_code ec;
    for (const fs::path& p : written) fs::remove(p, ec);
    if (created_dir) fs::remove(dir, ec);
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  log << to_string(cmd) << ": " << out.message << '\n';
  return out.status;
}

}  // namespace bsbu::cli
