#pragma once

// Experiment configuration: a flat `key = value` document, '#' starts a
// comment. Every key is optional; defaults reproduce the reference contract.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bsbu/solver.hpp"
#include "bsbu/va_model.hpp"

namespace bsbu::cli {

struct ParseError : ValidationError {
  ParseError(const std::string& key, int line, const std::string& what)
      : ValidationError(line > 0 ? "config key '" + key + "' (line " + std::to_string(line) + "): " + what
                                 : "config key '" + key + "': " + what),
        key(key),
        line(line) {}
  std::string key;
  int line;
};

enum class Regression { Spse, Rse };

struct PathsAndOrder {
  std::size_t paths;
  int order;
  friend bool operator==(const PathsAndOrder&, const PathsAndOrder&) = default;
};

struct ExperimentConfig {
  VaContract contract;
  SolverConfig solver;
  Engine engine = Engine::bsbu();
  Regression regression = Regression::Spse;
  std::string output_dir = "out";

  std::vector<std::size_t> sweep_paths{100000, 200000, 400000};
  std::vector<PathsAndOrder> settings{{100000, 15}, {100000, 20}, {100000, 25}, {200000, 20}, {400000, 20}};
  std::optional<int> simulation_step;  // defaults to T - 1
  int histogram_bins = 40;
  int grid_points = 1601;
  int quadrature_order = 64;
  double oracle_tolerance = 0.01;

  /// Shape constraint actually used by the regression step.
  ShapeConstraint effective_constraint() const {
    return regression == Regression::Rse ? ShapeConstraint::None : solver.constraint;
  }
  SolverConfig effective_solver() const {
    SolverConfig s = solver;
    s.constraint = effective_constraint();
    return s;
  }
  int step_for_simulation() const { return simulation_step.value_or(contract.horizon - 1); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

struct Entry {
  std::string value;
  int line;
};

class Reader {
 public:
  explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  int line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }
  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::optional<double> real(const std::string& key) const {
    auto e = get(key);
    if (!e) return std::nullopt;
    return parse_real(key, e->value, e->line);
  }
  std::optional<long long> integer(const std::string& key) const {
    auto e = get(key);
    if (!e) return std::nullopt;
    return parse_integer(key, e->value, e->line);
  }
  std::optional<std::string> text(const std::string& key) const {
    auto e = get(key);
    if (!e) return std::nullopt;
    if (e->value.empty()) throw ParseError(key, e->line, "empty value");
    return e->value;
  }
  std::optional<std::vector<double>> reals(const std::string& key) const {
    auto e = get(key);
    if (!e) return std::nullopt;
    std::vector<double> out;
    for (const std::string& item : split_list(e->value)) out.push_back(parse_real(key, item, e->line));
    return out;
  }
  std::optional<std::vector<long long>> integers(const std::string& key) const {
    auto e = get(key);
    if (!e) return std::nullopt;
    std::vector<long long> out;
    for (const std::string& item : split_list(e->value)) out.push_back(parse_integer(key, item, e->line));
    return out;
  }

  static double parse_real(const std::string& key, const std::string& v, int line) {
    // from_chars for double is missing from older toolchains; strtod with a
    // full-consumption check is equivalent here.
    if (v.empty()) throw ParseError(key, line, "expected a real number, got an empty value");
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size() || !std::isfinite(out))
      throw ParseError(key, line, "expected a finite real number, got '" + v + "'");
    return out;
  }
  static long long parse_integer(const std::string& key, const std::string& v, int line) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec == std::errc() && ptr == v.data() + v.size()) return out;
    // Accept integral scientific notation such as 1e5.
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (!v.empty() && end == v.c_str() + v.size() && std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15)
      return static_cast<long long>(d);
    throw ParseError(key, line, "expected an integer, got '" + v + "'");
  }

 private:
  const Entry* get(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }
  std::map<std::string, Entry> entries_;
};

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "contract.T",       "contract.delta",        "contract.r",         "contract.q",
      "contract.sigma",   "contract.W0",           "contract.P0",        "contract.kappa",
      "contract.guarantee", "contract.discount",   "solver.M",           "solver.J",
      "solver.R",         "solver.constraint",     "solver.seed",        "solver.repeats",
      "solver.workers",   "solver.selection",      "solver.candidates",  "engine",
      "regression",       "output.dir",            "sweep.M",            "compare.settings",
      "simulation.step",  "simulation.bins",       "oracle.grid_points", "oracle.quadrature_order",
      "oracle.tolerance"};
  return keys;
}

}  // namespace detail

/// Parses and validates a configuration document.
inline ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, detail::Entry> entries;
  {
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const auto hash = raw.find('#');
      const std::string body = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos)
        throw ParseError(detail::trim(body), line, "expected 'key = value'");
      const std::string key = detail::trim(body.substr(0, eq));
      const std::string value = detail::trim(body.substr(eq + 1));
      if (key.empty()) throw ParseError("", line, "missing key before '='");
      const auto& known = detail::known_keys();
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw ParseError(key, line, "unknown key");
      if (entries.count(key)) throw ParseError(key, line, "duplicate key (first set on line " +
                                                              std::to_string(entries[key].line) + ")");
      entries[key] = {value, line};
    }
  }
  const detail::Reader r(std::move(entries));
  ExperimentConfig cfg;

  // Wraps module-level validation so that the message names the key.
  auto guard = [&](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(key, r.line_of(key), e.what());
    }
  };
  auto positive_int = [&](const std::string& key, long long v, long long min) {
    if (v < min) throw ParseError(key, r.line_of(key), "must be >= " + std::to_string(min));
    if (v > 2000000000LL) throw ParseError(key, r.line_of(key), "value too large");
    return static_cast<int>(v);
  };

  // Contract.
  VaContract& c = cfg.contract;
  if (auto v = r.integer("contract.T")) {
    c = VaContract::with_horizon(positive_int("contract.T", *v, 1));
  }
  if (auto v = r.real("contract.delta")) c.delta = *v;
  if (auto v = r.real("contract.r")) c.r = *v;
  if (auto v = r.real("contract.q")) c.q = *v;
  if (auto v = r.real("contract.sigma")) c.sigma = *v;
  if (auto v = r.real("contract.W0")) c.initial_premium = *v;
  c.guarantee_base = c.initial_premium;
  if (auto v = r.real("contract.P0")) c.guarantee_base = *v;
  if (auto v = r.real("contract.kappa")) c.penalty = *v;
  if (auto v = r.reals("contract.guarantee")) {
    if (static_cast<int>(v->size()) != c.horizon)
      throw ParseError("contract.guarantee", r.line_of("contract.guarantee"),
                       "expected " + std::to_string(c.horizon) + " rates (one per I = 0..T-1), got " +
                           std::to_string(v->size()));
    c.guarantee = *v;
  }
  if (auto v = r.real("contract.discount")) c.discount_override = *v;
  try {
    c.validate();
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    std::string key = "contract";
    const std::pair<const char*, const char*> hints[] = {
        {"sigma", "contract.sigma"}, {"kappa", "contract.kappa"},   {"W0", "contract.W0"},
        {"P0", "contract.P0"},       {"delta", "contract.delta"},   {"guarantee", "contract.guarantee"},
        {"discount", "contract.discount"}, {"horizon", "contract.T"}};
    for (const auto& [needle, name] : hints)
      if (msg.find(needle) != std::string::npos) {
        key = name;
        break;
      }
    throw ParseError(key, r.line_of(key), msg);
  }

  // Solver.
  SolverConfig& s = cfg.solver;
  if (auto v = r.integer("solver.M")) {
    if (*v < 1) throw ParseError("solver.M", r.line_of("solver.M"), "must be >= 1");
    s.paths = static_cast<std::size_t>(*v);
  }
  if (auto v = r.integer("solver.J")) s.basis_order = positive_int("solver.J", *v, 0);
  if (auto v = r.real("solver.R")) {
    if (!(*v > c.initial_premium))
      throw ParseError("solver.R", r.line_of("solver.R"), "R must exceed W0 = " + std::to_string(c.initial_premium));
    s.truncation = *v;
  }
  if (auto v = r.text("solver.constraint")) guard("solver.constraint", [&] { s.constraint = parse_shape_constraint(*v); });
  if (auto v = r.integer("solver.seed")) {
    if (*v < 0) throw ParseError("solver.seed", r.line_of("solver.seed"), "must be >= 0");
    s.seed = static_cast<std::uint64_t>(*v);
  }
  if (auto v = r.integer("solver.repeats")) s.repeats = positive_int("solver.repeats", *v, 1);
  if (auto v = r.integer("solver.workers")) s.workers = positive_int("solver.workers", *v, 0);
  if (auto v = r.text("solver.selection")) {
    if (*v != "none") {
      BasisSelection sel;
      guard("solver.selection", [&] { sel.criterion = parse_selection_criterion(*v); });
      auto cands = r.integers("solver.candidates");
      if (!cands) throw ParseError("solver.selection", r.line_of("solver.selection"), "requires solver.candidates");
      for (long long j : *cands) sel.candidates.push_back(positive_int("solver.candidates", j, 0));
      s.selection = sel;
    }
  } else if (r.has("solver.candidates")) {
    throw ParseError("solver.candidates", r.line_of("solver.candidates"), "requires solver.selection");
  }
  if (s.paths < static_cast<std::size_t>(s.basis_order) + 1) {
    const std::string key = r.has("solver.M") ? "solver.M" : "solver.J";
    throw ParseError(key, r.line_of(key),
                     "M=" + std::to_string(s.paths) + " must be >= J+1=" + std::to_string(s.basis_order + 1));
  }
  if (s.constraint != ShapeConstraint::None && s.basis_order < min_order_for(s.constraint))
    throw ParseError("solver.J", r.line_of("solver.J"),
                     std::string("J too small for constraint ") + to_string(s.constraint));
  guard("solver", [&] { s.validate(); });

  // Experiment.
  if (auto v = r.text("engine")) guard("engine", [&] { cfg.engine = parse_engine(*v); });
  if (auto v = r.text("regression")) {
    if (*v == "spse") {
      cfg.regression = Regression::Spse;
    } else if (*v == "rse") {
      cfg.regression = Regression::Rse;
    } else {
      throw ParseError("regression", r.line_of("regression"), "expected 'spse' or 'rse', got '" + *v + "'");
    }
  }
  if (cfg.regression == Regression::Spse && s.constraint == ShapeConstraint::None)
    throw ParseError("solver.constraint", r.line_of("solver.constraint"),
                     "regression = spse needs a shape constraint; use regression = rse for none");
  if (auto v = r.text("output.dir")) cfg.output_dir = *v;
  if (auto v = r.integers("sweep.M")) {
    cfg.sweep_paths.clear();
    for (long long m : *v) {
      if (m < s.basis_order + 1) throw ParseError("sweep.M", r.line_of("sweep.M"), "every M must be >= J+1");
      cfg.sweep_paths.push_back(static_cast<std::size_t>(m));
    }
    if (cfg.sweep_paths.empty()) throw ParseError("sweep.M", r.line_of("sweep.M"), "empty list");
  }
  if (r.has("compare.settings")) {
    cfg.settings.clear();
    const int line = r.line_of("compare.settings");
    for (const std::string& item : detail::split_list(*r.text("compare.settings"))) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw ParseError("compare.settings", line, "expected M:J pairs, got '" + item + "'");
      const long long m = detail::Reader::parse_integer("compare.settings", detail::trim(item.substr(0, colon)), line);
      const long long j = detail::Reader::parse_integer("compare.settings", detail::trim(item.substr(colon + 1)), line);
      if (j < std::max(1, min_order_for(s.constraint)) || m < j + 1)
        throw ParseError("compare.settings", line, "setting '" + item + "' needs J >= " +
                                                       std::to_string(std::max(1, min_order_for(s.constraint))) +
                                                       " and M >= J+1");
      cfg.settings.push_back({static_cast<std::size_t>(m), static_cast<int>(j)});
    }
  }
  if (auto v = r.integer("simulation.step")) {
    if (*v < 0 || *v > c.horizon - 1)
      throw ParseError("simulation.step", r.line_of("simulation.step"),
                       "must lie in 0.." + std::to_string(c.horizon - 1));
    cfg.simulation_step = static_cast<int>(*v);
  }
  if (auto v = r.integer("simulation.bins")) cfg.histogram_bins = positive_int("simulation.bins", *v, 1);
  if (auto v = r.integer("oracle.grid_points")) cfg.grid_points = positive_int("oracle.grid_points", *v, 201);
  if (auto v = r.integer("oracle.quadrature_order"))
    cfg.quadrature_order = positive_int("oracle.quadrature_order", *v, 32);
  if (auto v = r.real("oracle.tolerance")) {
    if (!(*v > 0.0)) throw ParseError("oracle.tolerance", r.line_of("oracle.tolerance"), "must be > 0");
    cfg.oracle_tolerance = *v;
  }
  return cfg;
}

/// Canonical text of the resolved configuration, used for the manifest hash.
inline std::string canonical_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  const VaContract& c = cfg.contract;
  out << "contract.T = " << c.horizon << "\ncontract.delta = " << c.delta << "\ncontract.r = " << c.r
      << "\ncontract.q = " << c.q << "\ncontract.sigma = " << c.sigma << "\ncontract.W0 = " << c.initial_premium
      << "\ncontract.P0 = " << c.guarantee_base << "\ncontract.kappa = " << c.penalty << "\ncontract.guarantee =";
  for (double g : c.guarantee) out << ' ' << g;
  out << "\ncontract.discount = " << c.discount();
  const SolverConfig& s = cfg.solver;
  out << "\nsolver.M = " << s.paths << "\nsolver.J = " << s.basis_order << "\nsolver.R = " << s.truncation
      << "\nsolver.constraint = " << to_string(s.constraint) << "\nsolver.seed = " << s.seed
      << "\nsolver.repeats = " << s.repeats;
  if (s.selection) {
    out << "\nsolver.selection = " << to_string(s.selection->criterion) << "\nsolver.candidates =";
    for (int j : s.selection->candidates) out << ' ' << j;
  }
  out << "\nengine = " << to_string(cfg.engine) << "\nregression = " << (cfg.regression == Regression::Rse ? "rse" : "spse")
      << "\nsweep.M =";
  for (std::size_t m : cfg.sweep_paths) out << ' ' << m;
  out << "\ncompare.settings =";
  for (const auto& st : cfg.settings) out << ' ' << st.paths << ':' << st.order;
  out << "\nsimulation.step = " << cfg.step_for_simulation() << "\nsimulation.bins = " << cfg.histogram_bins
      << "\noracle.grid_points = " << cfg.grid_points << "\noracle.quadrature_order = " << cfg.quadrature_order
      << "\noracle.tolerance = " << cfg.oracle_tolerance << '\n';
  return out.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace bsbu::cli
