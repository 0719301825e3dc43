#pragma once

// Least-squares Monte Carlo engines. Both walk t = T-1, ..., 0, regress the
// next-step value on post-action values one discrete slice at a time, and
// store the fitted continuation functions in a ValueEstimate. They differ only
// in where the post-action sample comes from.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "bsbu/sieve.hpp"
#include "bsbu/simulate.hpp"
#include "bsbu/truncation.hpp"

namespace bsbu {

namespace detail {

template <class T, std::size_t N>
bool lexicographic_less(const SmallVec<T, N>& a, const SmallVec<T, N>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

struct BoundaryKey {
  int t;
  State x;
  friend bool operator<(const BoundaryKey& a, const BoundaryKey& b) {
    if (a.t != b.t) return a.t < b.t;
    if (lexicographic_less(a.x.continuous, b.x.continuous)) return true;
    if (lexicographic_less(b.x.continuous, a.x.continuous)) return false;
    return lexicographic_less(a.x.discrete, b.x.discrete);
  }
};

}  // namespace detail

/// Fitted continuation functions C~_t for t = 0..T-1, one sieve per discrete
/// slice of the post-action value, plus a memo of boundary values. An estimate
/// belongs to the model it was built for; queries with another model are
/// meaningless.
class ValueEstimate {
 public:
  struct Slice {
    LabelVec label;
    FittedSieve fit;
  };

  ValueEstimate(int horizon, bool allow_slice_fallback)
      : horizon_(horizon), allow_fallback_(allow_slice_fallback), steps_(static_cast<std::size_t>(horizon)) {
    if (horizon < 1) throw ValidationError("ValueEstimate: horizon must be >= 1");
  }

  int horizon() const { return horizon_; }
  bool allows_fallback() const { return allow_fallback_; }

  void set_slices(int t, std::vector<Slice> slices) {
    check_step(t);
    std::sort(slices.begin(), slices.end(),
              [](const Slice& a, const Slice& b) { return detail::lexicographic_less(a.label, b.label); });
    steps_[static_cast<std::size_t>(t)] = std::move(slices);
  }

  const std::vector<Slice>& slices(int t) const {
    check_step(t);
    return steps_[static_cast<std::size_t>(t)];
  }

  const FittedSieve* find(int t, const LabelVec& label) const {
    for (const Slice& s : slices(t))
      if (s.label == label) return &s.fit;
    return nullptr;
  }

  /// Nearest populated slice by first-label distance; ties go to the smaller label.
  const Slice* nearest(int t, const LabelVec& label) const {
    const Slice* best = nullptr;
    long best_gap = 0;
    for (const Slice& s : slices(t)) {
      if (s.label.size() != label.size()) continue;
      long gap = 0;
      for (std::size_t i = 0; i < label.size(); ++i) gap += std::labs(static_cast<long>(s.label[i]) - label[i]);
      if (best == nullptr || gap < best_gap) {
        best = &s;
        best_gap = gap;
      }
    }
    return best;
  }

  double boundary(const ControlModel& model, int t, const State& x) const {
    const detail::BoundaryKey key{t, x};
    {
      std::lock_guard lock(mutex_);
      if (auto it = boundary_cache_.find(key); it != boundary_cache_.end()) return it->second;
    }
    const double v = boundary_value(model, t, x);
    std::lock_guard lock(mutex_);
    boundary_cache_.emplace(key, v);
    return v;
  }

  void note_fallback(int t, const LabelVec& wanted, const LabelVec& used) const {
    std::lock_guard lock(mutex_);
    std::string msg = "t=" + std::to_string(t) + ": slice";
    for (int v : wanted) msg += " " + std::to_string(v);
    msg += " missing, used slice";
    for (int v : used) msg += " " + std::to_string(v);
    fallbacks_.insert(msg);
  }

  std::vector<std::string> fallback_warnings() const {
    std::lock_guard lock(mutex_);
    return {fallbacks_.begin(), fallbacks_.end()};
  }

 private:
  void check_step(int t) const {
    if (t < 0 || t >= horizon_) throw DomainError("ValueEstimate: step " + std::to_string(t) + " out of range");
  }

  int horizon_;
  bool allow_fallback_;
  std::vector<std::vector<Slice>> steps_;
  mutable std::mutex mutex_;
  mutable std::map<detail::BoundaryKey, double> boundary_cache_;
  mutable std::set<std::string> fallbacks_;
};

/// C~^E_t(k): boundary chain for absorbing k, sieve prediction otherwise.
inline double continuation_query(const ValueEstimate& est, const ControlModel& model, const TruncatedDomain& dom,
                                 int t, const PostActionValue& k) {
  if (!dom.in_closure(k.continuous))
    throw RangeError("continuation_query: post-action value outside the truncated domain at t=" +
                     std::to_string(t));
  if (is_absorbing(k, dom)) {
    const State landed = project_to_closure(model.innovation_map(t, k, model.neutral_innovation()), dom);
    return est.boundary(model, t + 1, landed);
  }
  if (const FittedSieve* fit = est.find(t, k.discrete)) return fit->predict(k.continuous[0]);
  if (est.allows_fallback()) {
    if (const auto* slice = est.nearest(t, k.discrete)) {
      est.note_fallback(t, k.discrete, slice->label);
      return slice->fit.predict(k.continuous[0]);
    }
  }
  std::string label;
  for (int v : k.discrete) label += " " + std::to_string(v);
  throw InternalError("continuation_query: no fitted slice" + label + " at t=" + std::to_string(t));
}

/// V~^E_t(x): f_T at maturity, the frozen boundary value on the boundary,
/// otherwise the Bellman maximum (ties to the earliest action).
inline double bellman_update(const ValueEstimate& est, const ControlModel& model, const TruncatedDomain& dom,
                             int t, const State& x) {
  const int horizon = model.horizon();
  if (t < 0 || t > horizon) throw DomainError("bellman_update: step out of range");
  if (t == horizon) return model.terminal_reward(x);
  if (!dom.in_closure(x.continuous))
    throw RangeError("bellman_update: state outside the truncated domain at t=" + std::to_string(t));
  if (dom.on_boundary(x.continuous)) return est.boundary(model, t, x);
  const double phi = model.discount();
  const ActionList actions = model.feasible_actions(t, x);
  if (actions.size() == 0) throw ConfigurationError("bellman_update: empty feasible set at t=" + std::to_string(t));
  double best = -std::numeric_limits<double>::infinity();
  for (const Action& a : actions) {
    const double v = model.intermediate_reward(t, x, a) +
                     phi * continuation_query(est, model, dom, t, model.pre_action_map(t, x, a));
    if (v > best) best = v;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Configuration and results.

struct BasisSelection {
  std::vector<int> candidates;
  SelectionCriterion criterion = SelectionCriterion::MallowsCp;
};

struct SolverConfig {
  std::size_t paths = 100000;  // M
  int basis_order = 20;        // J
  std::optional<BasisSelection> selection;
  double truncation = 4.0;  // R
  ShapeConstraint constraint = ShapeConstraint::Monotone;
  std::uint64_t seed = 1;
  int repeats = 40;
  int workers = 0;  // 0 -> hardware concurrency

  void validate() const {
    if (basis_order < 0) throw ValidationError("SolverConfig: J must be >= 0");
    if (paths < static_cast<std::size_t>(basis_order) + 1)
      throw ValidationError("SolverConfig: M=" + std::to_string(paths) + " must be >= J+1=" +
                            std::to_string(basis_order + 1));
    if (!(truncation > 0.0) || !std::isfinite(truncation)) throw ValidationError("SolverConfig: R must be > 0");
    if (repeats < 1) throw ValidationError("SolverConfig: repeats must be >= 1");
    if (workers < 0) throw ValidationError("SolverConfig: workers must be >= 0");
    if (selection) {
      if (selection->candidates.empty()) throw ValidationError("SolverConfig: empty J candidate list");
      for (int j : selection->candidates)
        if (j < 0) throw ValidationError("SolverConfig: negative J candidate");
    }
  }
};

struct StepDiagnostic {
  int step = 0;
  LabelVec slice;
  std::size_t sample_size = 0;
  int basis_order = 0;
  double ssr = 0.0;
  double kkt_residual = 0.0;
  double absorbed_fraction = 0.0;  // share of paths left out of the regression
  bool rank_deficient = false;
};

struct RunResult {
  double v0 = 0.0;
  std::vector<StepDiagnostic> diagnostics;
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;
  std::shared_ptr<const ValueEstimate> estimate;
};

struct SummaryStats {
  double mean = 0.0;
  double sd = 0.0;  // n - 1 divisor; 0 for a single value
  double min = 0.0;
  double max = 0.0;
  std::vector<double> values;
};

inline SummaryStats summarize(std::vector<double> values) {
  if (values.empty()) throw ValidationError("summarize: no values");
  SummaryStats s;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.values = std::move(values);
  return s;
}

namespace detail {

struct SliceSamples {
  LabelVec label;
  RegressionSample sample;
};

inline SliceSamples& slice_for(std::vector<SliceSamples>& slices, const LabelVec& label) {
  for (SliceSamples& s : slices)
    if (s.label == label) return s;
  slices.push_back({label, {}});
  return slices.back();
}

// Fits every slice at step t and stores the result.
inline void fit_step(ValueEstimate& est, const TruncatedDomain& dom, const SolverConfig& config, int t,
                     std::vector<SliceSamples> slices, double absorbed_fraction, RunResult& result) {
  std::sort(slices.begin(), slices.end(),
            [](const SliceSamples& a, const SliceSamples& b) { return lexicographic_less(a.label, b.label); });
  const double lo = dom.lo()[0];
  const double hi = dom.hi()[0];
  std::vector<ValueEstimate::Slice> fitted;
  fitted.reserve(slices.size());
  for (SliceSamples& s : slices) {
    const std::size_t n = s.sample.size();
    const int cap = static_cast<int>(std::min<std::size_t>(n - 1, 1u << 20));
    int order = config.basis_order;
    if (config.selection) {
      std::vector<int> candidates;
      for (int j : config.selection->candidates)
        if (j <= cap) candidates.push_back(j);
      if (candidates.empty()) candidates.push_back(std::min(cap, *std::min_element(config.selection->candidates.begin(),
                                                                                   config.selection->candidates.end())));
      order = select_basis_count(s.sample, lo, hi, candidates, config.selection->criterion, config.constraint);
    } else if (order > cap) {
      std::string label;
      for (int v : s.label) label += " " + std::to_string(v);
      result.warnings.push_back("t=" + std::to_string(t) + ": slice" + label + " has " + std::to_string(n) +
                                " points; J reduced from " + std::to_string(order) + " to " + std::to_string(cap));
      order = cap;
    }
    FittedSieve fit = fit_sieve(s.sample, BernsteinBasis(order, lo, hi), config.constraint);
    StepDiagnostic d;
    d.step = t;
    d.slice = s.label;
    d.sample_size = n;
    d.basis_order = order;
    d.ssr = fit.diagnostics().ssr;
    d.kkt_residual = fit.diagnostics().kkt_residual;
    d.absorbed_fraction = absorbed_fraction;
    d.rank_deficient = fit.diagnostics().rank_deficient;
    result.diagnostics.push_back(d);
    fitted.push_back({s.label, std::move(fit)});
  }
  est.set_slices(t, std::move(fitted));
}

inline void check_univariate(const TruncatedDomain& dom) {
  if (dom.dims() != 1) throw ValidationError("solver: regression needs a univariate continuous post-action value");
}

}  // namespace detail

/// Backward simulation and backward updating.
inline RunResult bsbu_solve(const ControlModel& model, const TruncatedDomain& dom, const SolverConfig& config,
                            const RandomStream& stream, const PostActionSampler& sampler) {
  config.validate();
  detail::check_univariate(dom);
  const auto started = std::chrono::steady_clock::now();
  auto est = std::make_shared<ValueEstimate>(model.horizon(), false);
  RunResult result;
  for (int t = model.horizon() - 1; t >= 0; --t) {
    const RandomStream step = stream.child(static_cast<std::uint64_t>(t));
    const std::vector<PostActionValue> ks = sampler.sample(t, config.paths, step.child(0));
    RandomGenerator innovations = step.child(1).generator();
    std::vector<detail::SliceSamples> slices;
    for (const PostActionValue& k : ks) {
      if (!dom.in_interior(k.continuous)) throw ContractError("bsbu_solve: sampler left the open domain");
      const State next = truncated_step(model, dom, t, k, model.draw_innovation(t, innovations));
      const double y = bellman_update(*est, model, dom, t + 1, next);
      detail::slice_for(slices, k.discrete).sample.add(k.continuous[0], y);
    }
    detail::fit_step(*est, dom, config, t, std::move(slices), 0.0, result);
  }
  result.v0 = bellman_update(*est, model, dom, 0, model.initial_state());
  if (!std::isfinite(result.v0)) throw NumericError("bsbu_solve: non-finite V0");
  result.estimate = est;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

inline RunResult bsbu_solve(const ControlModel& model, const TruncatedDomain& dom, const SolverConfig& config,
                            const RandomStream& stream) {
  return bsbu_solve(model, dom, config, stream, UniformPostActionSampler(dom));
}

inline RunResult bsbu_solve(const ControlModel& model, const TruncatedDomain& dom, const SolverConfig& config) {
  return bsbu_solve(model, dom, config, RandomStream{config.seed, 0});
}

/// Forward simulation and backward updating. Each step re-simulates an
/// independent set of paths up to t. Paths already frozen on the boundary and
/// absorbing post-action values never reach the fitted sieve, so they are
/// left out of the regression.
inline RunResult fsbu_solve(const ControlModel& model, const TruncatedDomain& dom, const SolverConfig& config,
                            CrRule rule, const RandomStream& stream) {
  config.validate();
  detail::check_univariate(dom);
  const auto started = std::chrono::steady_clock::now();
  auto est = std::make_shared<ValueEstimate>(model.horizon(), true);
  RunResult result;
  for (int t = model.horizon() - 1; t >= 0; --t) {
    const ForwardSample fs =
        forward_simulate(model, dom, rule, t, config.paths, stream.child(static_cast<std::uint64_t>(t)));
    std::vector<detail::SliceSamples> slices;
    std::size_t excluded = 0;
    for (std::size_t m = 0; m < fs.post_actions.size(); ++m) {
      const PostActionValue& k = fs.post_actions[m];
      if (dom.on_boundary(fs.current[m].continuous) || is_absorbing(k, dom)) {
        ++excluded;
        continue;
      }
      const double y = bellman_update(*est, model, dom, t + 1, fs.next[m]);
      detail::slice_for(slices, k.discrete).sample.add(k.continuous[0], y);
    }
    const double absorbed = static_cast<double>(excluded) / static_cast<double>(config.paths);
    if (slices.empty()) {
      result.warnings.push_back("t=" + std::to_string(t) + ": every path absorbed; no slice fitted");
      est->set_slices(t, {});
      continue;
    }
    detail::fit_step(*est, dom, config, t, std::move(slices), absorbed, result);
  }
  result.v0 = bellman_update(*est, model, dom, 0, model.initial_state());
  if (!std::isfinite(result.v0)) throw NumericError("fsbu_solve: non-finite V0");
  for (std::string& w : est->fallback_warnings()) result.warnings.push_back(std::move(w));
  result.estimate = est;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

inline RunResult fsbu_solve(const ControlModel& model, const TruncatedDomain& dom, const SolverConfig& config,
                            CrRule rule) {
  return fsbu_solve(model, dom, config, rule, RandomStream{config.seed, 0});
}

// ---------------------------------------------------------------------------
// Repeats.

struct Engine {
  enum class Kind { Bsbu, Fsbu } kind = Kind::Bsbu;
  CrRule rule = CrRule::CR2;

  static Engine bsbu() { return {}; }
  static Engine fsbu(CrRule r) { return {Kind::Fsbu, r}; }
};

inline std::string to_string(const Engine& e) {
  return e.kind == Engine::Kind::Bsbu ? "bsbu" : std::string("fsbu-") + to_string(e.rule);
}

inline Engine parse_engine(const std::string& name) {
  if (name == "bsbu") return Engine::bsbu();
  if (name.rfind("fsbu-", 0) == 0) return Engine::fsbu(parse_cr_rule(name.substr(5)));
  throw ValidationError("unknown engine '" + name + "'");
}

inline RunResult run_engine(const ControlModel& model, const TruncatedDomain& dom, const SolverConfig& config,
                            const Engine& engine, const RandomStream& stream) {
  return engine.kind == Engine::Kind::Bsbu ? bsbu_solve(model, dom, config, stream)
                                           : fsbu_solve(model, dom, config, engine.rule, stream);
}

struct RepeatError : std::runtime_error {
  RepeatError(int repeat, const std::string& what)
      : std::runtime_error("repeat " + std::to_string(repeat) + " failed: " + what), repeat(repeat) {}
  int repeat;
};

inline int resolve_workers(int requested, int tasks) {
  int w = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  return std::clamp(w, 1, std::max(tasks, 1));
}

/// Runs `repeats` independent solves, repeat i on stream base.child(i) (or on
/// base itself for every repeat when same_stream is set). Results are ordered
/// by repeat index whatever the worker count.
inline std::vector<RunResult> repeat_runs(const ControlModel& model, const TruncatedDomain& dom,
                                          const SolverConfig& config, const Engine& engine, bool same_stream = false) {
  config.validate();
  const RandomStream base{config.seed, 0};
  const int repeats = config.repeats;
  std::vector<RunResult> results(static_cast<std::size_t>(repeats));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(repeats));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < repeats; i = next++) {
      try {
        const RandomStream s = same_stream ? base : base.child(static_cast<std::uint64_t>(i));
        results[static_cast<std::size_t>(i)] = run_engine(model, dom, config, engine, s);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int workers = resolve_workers(config.workers, repeats);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }
  for (int i = 0; i < repeats; ++i) {
    if (!errors[static_cast<std::size_t>(i)]) continue;
    try {
      std::rethrow_exception(errors[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
      throw RepeatError(i, e.what());
    }
  }
  return results;
}

struct Experiment {
  SummaryStats stats;
  std::vector<RunResult> runs;
};

inline Experiment repeat_experiment(const ControlModel& model, const TruncatedDomain& dom, const SolverConfig& config,
                                    const Engine& engine, bool same_stream = false) {
  Experiment out;
  out.runs = repeat_runs(model, dom, config, engine, same_stream);
  std::vector<double> v0;
  v0.reserve(out.runs.size());
  for (const RunResult& r : out.runs) v0.push_back(r.v0);
  out.stats = summarize(std::move(v0));
  return out;
}

}  // namespace bsbu
