#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "member.hpp"
#include "model.hpp"
#include "value.hpp"

namespace focusdiag {

// ---------------------------------------------------------------------------
// Single component evaluation

struct EvalOptions {
  double tolerance = 0.0;
  std::vector<bool> free;          // ports known at no dependency cost (measured drivers)
  std::optional<Domain> domain;    // output domain the result is coerced into
};

struct ComponentEvaluation {
  std::optional<Value> value;
  std::vector<std::vector<std::size_t>> gamma;  // minimal sufficient non-free port subsets
  std::vector<std::size_t> non_masking;
};

namespace detail {

inline std::optional<Value> fire_from(const FunctionSpec& f, std::size_t i, PartialInputs in,
                                      const EvalContext& ctx, const std::optional<Domain>& domain) {
  if (i == f.branches.size()) return std::nullopt;
  const Branch& b = f.branches[i];
  auto result = [&]() -> std::optional<Value> {
    auto v = b.expr.evaluate(in, ctx);
    if (v && domain) return domain->coerce(*v);
    return v;
  };
  auto g = b.guard.evaluate(in, ctx);
  if (g) return Expr::is_true(*g) ? result() : fire_from(f, i + 1, in, ctx, domain);
  // Unknown guard: the value is determined only if both outcomes agree.
  auto fired = result();
  if (!fired) return std::nullopt;
  auto skipped = fire_from(f, i + 1, in, ctx, domain);
  if (!skipped) return std::nullopt;
  bool same = domain ? domain->equal(*fired, *skipped) : *fired == *skipped;
  return same ? fired : std::nullopt;
}

}  // namespace detail

/// Output of `f` for the known inputs, or nullopt when no branch can be decided.
inline std::optional<Value> fire(const FunctionSpec& f, PartialInputs in, const EvalContext& ctx = {},
                                 const std::optional<Domain>& domain = std::nullopt) {
  return detail::fire_from(f, 0, in, ctx, domain);
}

inline constexpr std::size_t kMaxGammaPorts = 16;

inline ComponentEvaluation evaluate_component(const FunctionSpec& f, PartialInputs inputs,
                                              const EvalOptions& opts = {}) {
  ComponentEvaluation out;
  const std::size_t m = inputs.size();
  for (std::size_t p = 0; p < m; ++p)
    if (p >= f.masking.size() || !f.masking[p]) out.non_masking.push_back(p);

  EvalContext ctx{opts.domain ? opts.domain->tolerance : opts.tolerance};
  out.value = fire(f, inputs, ctx, opts.domain);
  if (!out.value) return out;

  std::vector<std::size_t> candidates;
  for (std::size_t p = 0; p < m; ++p) {
    bool is_free = p < opts.free.size() && opts.free[p];
    if (inputs[p] && !is_free) candidates.push_back(p);
  }
  if (candidates.size() > kMaxGammaPorts) {
    out.gamma.push_back(candidates);
    return out;
  }

  std::vector<std::optional<Value>> trial(m);
  std::vector<std::uint32_t> found;
  const std::uint32_t full = (std::uint32_t{1} << candidates.size()) - 1;
  std::vector<std::uint32_t> masks(full + 1);
  for (std::uint32_t mask = 0; mask <= full; ++mask) masks[mask] = mask;
  std::stable_sort(masks.begin(), masks.end(),
                   [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) < std::popcount(b); });
  for (std::uint32_t mask : masks) {
    bool superset = std::any_of(found.begin(), found.end(),
                                [mask](std::uint32_t g) { return (mask & g) == g; });
    if (superset) continue;
    for (std::size_t p = 0; p < m; ++p) {
      bool is_free = p < opts.free.size() && opts.free[p];
      trial[p] = is_free ? inputs[p] : std::nullopt;
    }
    for (std::size_t k = 0; k < candidates.size(); ++k)
      if (mask & (std::uint32_t{1} << k)) trial[candidates[k]] = inputs[candidates[k]];
    auto v = fire(f, trial, ctx, opts.domain);
    if (v) found.push_back(mask);
  }
  for (std::uint32_t mask : found) {
    std::vector<std::size_t> subset;
    for (std::size_t k = 0; k < candidates.size(); ++k)
      if (mask & (std::uint32_t{1} << k)) subset.push_back(candidates[k]);
    out.gamma.push_back(std::move(subset));
  }
  std::sort(out.gamma.begin(), out.gamma.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Prediction state

struct DepSets {
  MemberSet dep;
  MemberSet focused;
  MemberSet mask_free;
  MemberSet assumptions;  // environment: every assumption the value rests on

  bool operator==(const DepSets&) const = default;
};

enum class Origin { Evaluated, Assumed, Loopback };

inline const char* origin_name(Origin o) {
  switch (o) {
    case Origin::Evaluated: return "evaluated";
    case Origin::Assumed: return "assumed";
    case Origin::Loopback: return "loopback";
  }
  return "?";
}

struct Prediction {
  Member owner;
  Value value;
  DepSets deps;
  Origin origin = Origin::Evaluated;
};

class PredictionState {
 public:
  PredictionState() = default;
  PredictionState(std::size_t components, int horizon)
      : n_(components), horizon_(horizon), rows_(components * static_cast<std::size_t>(horizon)),
        measured_(components * static_cast<std::size_t>(horizon)) {}

  std::size_t components() const { return n_; }
  int horizon() const { return horizon_; }

  const std::vector<Prediction>& at(std::size_t c, int t) const { return rows_[slot(c, t)]; }
  std::vector<Prediction>& at(std::size_t c, int t) { return rows_[slot(c, t)]; }

  const std::optional<Value>& measurement(std::size_t c, int t) const { return measured_[slot(c, t)]; }
  void set_measurement(std::size_t c, int t, Value v) { measured_[slot(c, t)] = std::move(v); }
  bool measured(std::size_t c, int t) const { return measured_[slot(c, t)].has_value(); }

  /// Single evaluated prediction at (c, t), if there is exactly one.
  const Prediction* unique(std::size_t c, int t) const {
    const Prediction* found = nullptr;
    for (const auto& p : at(c, t)) {
      if (p.origin != Origin::Evaluated) continue;
      if (found) return nullptr;
      found = &p;
    }
    return found;
  }

  std::size_t row_count() const {
    std::size_t total = 0;
    for (const auto& r : rows_) total += r.size();
    return total;
  }

  /// All predictions ordered by (time, component).
  std::vector<const Prediction*> all() const {
    std::vector<const Prediction*> out;
    for (const auto& r : rows_)
      for (const auto& p : r) out.push_back(&p);
    return out;
  }

 private:
  std::size_t slot(std::size_t c, int t) const {
    if (c >= n_ || t < 0 || t >= horizon_) throw Error(ErrorCode::NotFound, "prediction index out of range");
    return static_cast<std::size_t>(t) * n_ + c;
  }

  std::size_t n_ = 0;
  int horizon_ = 0;
  std::vector<std::vector<Prediction>> rows_;
  std::vector<std::optional<Value>> measured_;
};

enum class LoopStrategy { Assumption, Stateful };

struct PredictOptions {
  LoopStrategy loops = LoopStrategy::Assumption;
  std::map<std::size_t, Value> previous_state;  // loop wire values before t = 0 (Stateful)
  bool allow_partial = false;                   // leave undeterminable outputs unknown
  bool assume_unknown_sources = false;          // unknown finite sources get assumption families
  int max_iters = 0;                            // 0: 2|SCC| + 2
  std::optional<int> horizon;
  std::size_t max_combinations = 4096;
};

namespace detail {

/// One way of knowing an input: a measured value (deps == nullptr) or a prediction row.
struct Family {
  const Value* value = nullptr;
  const DepSets* deps = nullptr;
};

inline bool env_compatible(const MemberSet& a, const MemberSet& b) {
  auto i = a.begin(), j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (i->component == j->component && i->time == j->time) {
      if (i->assumed != j->assumed) return false;
      ++i;
      ++j;
    } else if (std::tie(i->component, i->time) < std::tie(j->component, j->time)) {
      ++i;
    } else {
      ++j;
    }
  }
  return true;
}

class Propagator {
 public:
  Propagator(const SystemModel& model, const std::vector<Observation>& observations, const PredictOptions& opts)
      : model_(model), opts_(opts) {
    int h = opts.horizon.value_or(model.is_temporal() ? model.horizon() : 1);
    if (!opts.horizon && model.is_temporal() && !model.time_horizon) {
      for (const auto& o : observations) h = std::max(h, o.time + 1);
    }
    state_ = PredictionState(model.size(), h);
    for (const auto& o : observations) {
      if (o.component >= model.size()) throw Error(ErrorCode::NotFound, "observation on unknown component");
      if (o.time < 0 || o.time >= h)
        throw Error(ErrorCode::DomainViolation, "observation of '" + model.components[o.component].id +
                                                    "' at time " + std::to_string(o.time) + " is outside the horizon");
      Value v = model.components[o.component].domain.coerce(o.value);
      const auto& prev = state_.measurement(o.component, o.time);
      if (prev && !(*prev == v))
        throw Error(ErrorCode::DuplicateMeasurement,
                    "conflicting observations for '" + model.components[o.component].id + "'");
      state_.set_measurement(o.component, o.time, v);
    }
  }

  PredictionState run() {
    for (int t = 0; t < state_.horizon(); ++t) step(t);
    return std::move(state_);
  }

 private:
  const Component& comp(std::size_t c) const { return model_.components[c]; }

  void step(int t) {
    std::vector<bool> cut(model_.size(), false);
    for (std::size_t c = 0; c < model_.size(); ++c) cut[c] = state_.measured(c, t);
    auto adj = instant_graph(model_, cut);
    for (const auto& scc : condensation_order(adj)) {
      if (!is_loop(scc, adj)) {
        evaluate_single(scc.front(), t);
      } else if (opts_.loops == LoopStrategy::Stateful && stateful_loop(scc, t)) {
        continue;
      } else {
        assumption_loop(scc, adj, t);
      }
    }
  }

  std::vector<Family> families(std::size_t driver, int time) const {
    std::vector<Family> out;
    if (const auto& m = state_.measurement(driver, time)) {
      out.push_back({&*m, nullptr});
      return out;
    }
    const auto& rows = state_.at(driver, time);
    bool assumed = std::any_of(rows.begin(), rows.end(), [](const Prediction& p) { return p.origin == Origin::Assumed; });
    for (const auto& p : rows) {
      if (p.origin == (assumed ? Origin::Assumed : Origin::Evaluated)) out.push_back({&p.value, &p.deps});
    }
    return out;
  }

  void evaluate_single(std::size_t c, int t) {
    const Component& k = comp(c);
    if (k.is_source) {
      if (state_.measured(c, t)) return;
      if (opts_.assume_unknown_sources && k.domain.finite()) {
        add_assumptions(c, t);
        return;
      }
      if (opts_.allow_partial) return;
      bool has_trace = false;
      for (int s = 0; s < state_.horizon(); ++s) has_trace = has_trace || state_.measured(c, s);
      if (has_trace && model_.is_temporal())
        throw Error(ErrorCode::TraceTooShort, "input trace of '" + k.id + "' has no value at time " + std::to_string(t));
      throw Error(ErrorCode::MissingSource, "source '" + k.id + "' has no observed value at time " + std::to_string(t));
    }
    if (k.stateful && t < k.stateful->delay) {
      if (!k.stateful->initial)
        throw Error(ErrorCode::InvalidModel, "stateful component '" + k.id + "' has no initial value");
      Prediction p;
      p.owner = Member::of(c, t);
      p.value = *k.stateful->initial;
      p.deps.dep = p.deps.focused = p.deps.mask_free = {p.owner};
      state_.at(c, t).push_back(std::move(p));
      return;
    }
    int read_time = k.stateful ? t - k.stateful->delay : t;
    std::vector<std::vector<Family>> ports(k.inputs.size());
    for (std::size_t p = 0; p < k.inputs.size(); ++p) {
      auto d = model_.drivers()[c][p];
      if (!d) throw Error(ErrorCode::InvalidModel, "input '" + k.inputs[p] + "' of '" + k.id + "' is unconnected");
      ports[p] = families(*d, read_time);
    }
    auto rows = combine(c, t, ports, Origin::Evaluated);
    auto& slot = state_.at(c, t);
    for (auto& r : rows) slot.push_back(std::move(r));
  }

  void add_assumptions(std::size_t c, int t) {
    const Component& k = comp(c);
    if (!k.domain.finite())
      throw Error(ErrorCode::NonFiniteDomain, "cannot place an assumption on '" + k.id + "': domain is not finite");
    for (std::size_t i = 0; i < k.domain.size(); ++i) {
      Prediction p;
      p.owner = Member::of(c, t);
      p.value = k.domain.at(i);
      Member a = Member::assumption(c, t, i);
      p.deps.dep = p.deps.focused = p.deps.mask_free = p.deps.assumptions = {a};
      p.origin = Origin::Assumed;
      state_.at(c, t).push_back(std::move(p));
    }
  }

  /// Evaluates component c once per environment-compatible choice of input families.
  std::vector<Prediction> combine(std::size_t c, int t, const std::vector<std::vector<Family>>& ports, Origin origin) {
    const Component& k = comp(c);
    std::vector<Prediction> out;
    const std::size_t m = ports.size();
    std::vector<std::size_t> choice(m, 0);
    std::vector<MemberSet> env_stack(m + 1);
    std::size_t visited = 0;

    std::vector<std::optional<Value>> values(m);
    EvalOptions eo;
    eo.domain = k.domain;
    eo.free.assign(m, false);

    // Ports with no family are unknown inputs.
    auto recurse = [&](auto& self, std::size_t p) -> void {
      if (p == m) {
        if (++visited > opts_.max_combinations)
          throw Error(ErrorCode::SizeLimit, "too many assumption combinations at '" + k.id + "'");
        for (std::size_t q = 0; q < m; ++q) {
          if (ports[q].empty()) {
            values[q].reset();
            eo.free[q] = false;
          } else {
            const Family& f = ports[q][choice[q]];
            values[q] = *f.value;
            eo.free[q] = f.deps == nullptr;
          }
        }
        auto ev = evaluate_component(k.function, values, eo);
        if (!ev.value) {
          if (opts_.allow_partial) return;
          throw Error(ErrorCode::Undetermined, "no branch of '" + k.id + "' fires at time " + std::to_string(t));
        }
        Prediction pr;
        pr.owner = Member::of(c, t);
        pr.value = *ev.value;
        pr.origin = origin;
        pr.deps = dep_sets(pr.owner, ports, choice, ev);
        pr.deps.assumptions = env_stack[m];
        out.push_back(std::move(pr));
        return;
      }
      if (ports[p].empty()) {
        env_stack[p + 1] = env_stack[p];
        self(self, p + 1);
        return;
      }
      for (std::size_t i = 0; i < ports[p].size(); ++i) {
        const Family& f = ports[p][i];
        if (f.deps && !f.deps->assumptions.empty()) {
          if (!env_compatible(env_stack[p], f.deps->assumptions)) continue;
          env_stack[p + 1] = set_union(env_stack[p], f.deps->assumptions);
        } else {
          env_stack[p + 1] = env_stack[p];
        }
        choice[p] = i;
        self(self, p + 1);
      }
    };
    recurse(recurse, 0);
    return out;
  }

 public:
  /// Dep = owner + union over the first cover; Dep^f and Dep^mf intersect over all covers.
  static DepSets dep_sets(const Member& owner, const std::vector<std::vector<Family>>& ports,
                          const std::vector<std::size_t>& choice, const ComponentEvaluation& ev) {
    static const DepSets none;
    auto deps_of = [&](std::size_t p) -> const DepSets& {
      const Family& f = ports[p][choice[p]];
      return f.deps ? *f.deps : none;
    };
    DepSets d;
    d.dep = {owner};
    bool first = true;
    for (const auto& cover : ev.gamma) {
      MemberSet delta, sigma;
      for (auto p : cover) {
        const DepSets& in = deps_of(p);
        if (first) d.dep = set_union(d.dep, in.dep);
        delta = set_union(delta, in.focused);
        if (std::binary_search(ev.non_masking.begin(), ev.non_masking.end(), p))
          sigma = set_union(sigma, in.mask_free);
      }
      if (first) {
        d.focused = std::move(delta);
        d.mask_free = std::move(sigma);
      } else {
        d.focused = set_intersection(d.focused, delta);
        d.mask_free = set_intersection(d.mask_free, sigma);
      }
      first = false;
    }
    insert(d.focused, owner);
    insert(d.mask_free, owner);
    return d;
  }

 private:
  /// Greedy choice of wires that open every cycle inside `scc`.
  std::vector<std::size_t> choose_wires(const std::vector<std::size_t>& scc,
                                        const std::vector<std::vector<std::size_t>>& adj) const {
    std::vector<bool> inside(model_.size(), false);
    for (auto c : scc) inside[c] = true;
    std::vector<std::vector<std::size_t>> sub(model_.size());
    for (auto c : scc)
      for (auto v : adj[c])
        if (inside[v]) sub[c].push_back(v);
    std::vector<std::size_t> wires;
    for (;;) {
      std::vector<std::size_t> loop;
      for (auto& q : detail::tarjan(sub)) {
        if (q.size() == 1 && !inside[q.front()]) continue;
        if (is_loop(q, sub) && (loop.empty() || q < loop)) loop = q;
      }
      if (loop.empty()) break;
      std::vector<bool> in_loop(model_.size(), false);
      for (auto c : loop) in_loop[c] = true;
      std::optional<std::size_t> best;
      std::size_t best_cut = 0, best_consumer = 0;
      for (auto w : loop) {
        if (!comp(w).domain.finite()) continue;
        std::size_t cut = 0, consumer = static_cast<std::size_t>(-1);
        for (auto v : sub[w])
          if (in_loop[v]) {
            ++cut;
            consumer = std::min(consumer, v);
          }
        if (cut == 0) continue;
        if (!best || cut > best_cut || (cut == best_cut && consumer < best_consumer)) {
          best = w;
          best_cut = cut;
          best_consumer = consumer;
        }
      }
      if (!best) {
        throw Error(ErrorCode::NonFiniteDomain, "loop through '" + comp(loop.front()).id +
                                                    "' has no finite-domain wire to place an assumption on");
      }
      wires.push_back(*best);
      sub[*best].clear();
    }
    std::sort(wires.begin(), wires.end());
    return wires;
  }

  void assumption_loop(const std::vector<std::size_t>& scc, const std::vector<std::vector<std::size_t>>& adj, int t) {
    auto wires = choose_wires(scc, adj);
    for (auto w : wires) add_assumptions(w, t);
    // Order the opened loop topologically and evaluate; assumed wires are read
    // through their Assumed rows, their own evaluations become loopback rows.
    std::vector<bool> inside(model_.size(), false), wire(model_.size(), false);
    for (auto c : scc) inside[c] = true;
    for (auto w : wires) wire[w] = true;
    std::vector<std::vector<std::size_t>> sub(model_.size());
    for (auto c : scc) {
      if (wire[c]) continue;
      for (auto v : adj[c])
        if (inside[v]) sub[c].push_back(v);
    }
    for (const auto& group : condensation_order(sub)) {
      std::size_t c = group.front();
      if (!inside[c]) continue;
      const Component& k = comp(c);
      std::vector<std::vector<Family>> ports(k.inputs.size());
      for (std::size_t p = 0; p < k.inputs.size(); ++p) ports[p] = families(*model_.drivers()[c][p], t);
      auto rows = combine(c, t, ports, wire[c] ? Origin::Loopback : Origin::Evaluated);
      auto& slot = state_.at(c, t);
      for (auto& r : rows) slot.push_back(std::move(r));
    }
  }

  /// Fixed-point iteration from the previous loop state. Returns false when the
  /// previous state or a unique external input is unavailable.
  bool stateful_loop(const std::vector<std::size_t>& scc, int t) {
    struct Cur {
      Value value;
      DepSets deps;
    };
    std::map<std::size_t, Cur> cur;
    for (auto c : scc) {
      if (t == 0) {
        auto it = opts_.previous_state.find(c);
        if (it == opts_.previous_state.end()) return false;
        cur[c] = {comp(c).domain.coerce(it->second), {}};
      } else if (const auto& m = state_.measurement(c, t - 1)) {
        cur[c] = {*m, {}};
      } else {
        const Prediction* p = state_.unique(c, t - 1);
        if (!p || !p->deps.assumptions.empty()) return false;
        cur[c] = {p->value, p->deps};
      }
    }
    std::vector<bool> inside(model_.size(), false);
    for (auto c : scc) inside[c] = true;
    std::map<std::size_t, std::vector<std::vector<Family>>> external;
    for (auto c : scc) {
      const Component& k = comp(c);
      auto& ports = external[c];
      ports.resize(k.inputs.size());
      for (std::size_t p = 0; p < k.inputs.size(); ++p) {
        auto d = *model_.drivers()[c][p];
        if (inside[d]) continue;
        ports[p] = families(d, t);
        if (ports[p].size() > 1) return false;
        if (ports[p].size() == 1 && ports[p][0].deps && !ports[p][0].deps->assumptions.empty()) return false;
      }
    }

    int limit = opts_.max_iters > 0 ? opts_.max_iters : 2 * static_cast<int>(scc.size()) + 2;
    for (int iter = 0; iter < limit; ++iter) {
      std::map<std::size_t, Cur> next;
      for (auto c : scc) {
        const Component& k = comp(c);
        std::vector<std::vector<Family>> ports = external[c];
        for (std::size_t p = 0; p < k.inputs.size(); ++p) {
          auto d = *model_.drivers()[c][p];
          if (inside[d]) ports[p] = {Family{&cur[d].value, &cur[d].deps}};
        }
        std::vector<std::size_t> choice(ports.size(), 0);
        std::vector<std::optional<Value>> values(ports.size());
        EvalOptions eo;
        eo.domain = k.domain;
        eo.free.assign(ports.size(), false);
        for (std::size_t p = 0; p < ports.size(); ++p) {
          if (ports[p].empty()) continue;
          values[p] = *ports[p][0].value;
          eo.free[p] = ports[p][0].deps == nullptr;
        }
        auto ev = evaluate_component(k.function, values, eo);
        if (!ev.value)
          throw Error(ErrorCode::Undetermined, "loop member '" + k.id + "' is undetermined at time " + std::to_string(t));
        Member owner = Member::of(c, t);
        DepSets d = dep_sets(owner, ports, choice, ev);
        // Dependencies accumulate across sweeps so the iteration is monotone.
        d.dep = set_union(d.dep, cur[c].deps.dep);
        d.focused = set_union(d.focused, cur[c].deps.focused);
        d.mask_free = set_union(d.mask_free, cur[c].deps.mask_free);
        next[c] = {*ev.value, std::move(d)};
      }
      bool stable = true;
      for (auto c : scc) {
        if (!comp(c).domain.equal(next[c].value, cur[c].value) || !(next[c].deps == cur[c].deps)) stable = false;
      }
      cur = std::move(next);
      if (stable && iter > 0) {
        for (auto c : scc) {
          Prediction p;
          p.owner = Member::of(c, t);
          p.value = cur[c].value;
          p.deps = cur[c].deps;
          state_.at(c, t).push_back(std::move(p));
        }
        return true;
      }
    }
    throw Error(ErrorCode::NoFixedPoint, "loop through '" + comp(scc.front()).id + "' has no fixed point within " +
                                             std::to_string(limit) + " sweeps at time " + std::to_string(t));
  }

  const SystemModel& model_;
  const PredictOptions& opts_;
  PredictionState state_;
};

}  // namespace detail

/// Forward prediction of every component output at every time point, with
/// dependency, focused and mask-free dependency sets.
inline PredictionState forward_predict(const SystemModel& model, const std::vector<Observation>& observations,
                                       const PredictOptions& opts = {}) {
  return detail::Propagator(model, observations, opts).run();
}

/// Predictions for the members of one loop under assumption-based opening.
inline std::vector<Prediction> loop_predict_assumption(const SystemModel& model, const std::vector<std::size_t>& scc,
                                                       const std::vector<Observation>& known,
                                                       PredictOptions opts = {}) {
  opts.loops = LoopStrategy::Assumption;
  auto state = forward_predict(model, known, opts);
  std::vector<Prediction> out;
  for (int t = 0; t < state.horizon(); ++t)
    for (auto c : scc)
      for (const auto& p : state.at(c, t)) out.push_back(p);
  return out;
}

/// Predictions for the members of one loop by fixed-point iteration from a
/// known previous state.
inline std::vector<Prediction> loop_predict_stateful(const SystemModel& model, const std::vector<std::size_t>& scc,
                                                     const std::map<std::size_t, Value>& previous_state,
                                                     const std::vector<Observation>& known, int max_iters = 0) {
  PredictOptions opts;
  opts.loops = LoopStrategy::Stateful;
  opts.previous_state = previous_state;
  opts.max_iters = max_iters;
  for (auto c : scc)
    if (!previous_state.count(c))
      throw Error(ErrorCode::InvalidModel, "previous state misses loop member '" + model.components[c].id + "'");
  auto state = forward_predict(model, known, opts);
  std::vector<Prediction> out;
  for (auto c : scc)
    for (const auto& p : state.at(c, 0)) out.push_back(p);
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force dependency-set enumeration (test oracle)

struct DepEnumeration {
  std::vector<MemberSet> sets;
  bool truncated = false;
};

inline constexpr std::size_t kMaxEnumeratedAncestors = 20;

/// Every inclusion-minimal set satisfying the dependency-set conditions for the
/// output of `owner` (static, loop-free models with all sources observed).
inline DepEnumeration enumerate_dep_sets(const SystemModel& model, const std::vector<Observation>& observations,
                                         std::size_t owner, std::size_t limit = 1024) {
  if (model.is_temporal()) throw Error(ErrorCode::InvalidModel, "dep-set enumeration supports static models only");
  if (!find_loops(model).empty()) throw Error(ErrorCode::InvalidModel, "dep-set enumeration needs a loop-free model");
  const std::size_t n = model.size();
  std::vector<std::optional<Value>> measured(n);
  for (const auto& o : observations) measured[o.component] = model.components[o.component].domain.coerce(o.value);

  // Reference values by plain simulation in topological order.
  std::vector<std::optional<Value>> value(n);
  for (const auto& group : condensation_order(instant_graph(model))) {
    std::size_t c = group.front();
    const Component& k = model.components[c];
    if (k.is_source) {
      if (!measured[c]) throw Error(ErrorCode::MissingSource, "source '" + k.id + "' is not observed");
      value[c] = measured[c];
      continue;
    }
    std::vector<std::optional<Value>> in(k.inputs.size());
    for (std::size_t p = 0; p < k.inputs.size(); ++p) {
      std::size_t d = *model.drivers()[c][p];
      in[p] = measured[d] ? measured[d] : value[d];
    }
    value[c] = fire(k.function, in, {k.domain.tolerance}, k.domain);
    if (!value[c]) throw Error(ErrorCode::Undetermined, "'" + k.id + "' is undetermined");
  }

  // Unmeasured ancestors reachable without passing through a measured output.
  std::vector<std::size_t> pool{owner};
  std::vector<bool> seen(n, false);
  seen[owner] = true;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (const auto& d : model.drivers()[pool[i]]) {
      if (!d || seen[*d] || measured[*d]) continue;
      seen[*d] = true;
      pool.push_back(*d);
    }
  }
  std::sort(pool.begin(), pool.end());
  if (pool.size() > kMaxEnumeratedAncestors)
    throw Error(ErrorCode::SizeLimit, "too many ancestors for exhaustive enumeration");
  const std::size_t owner_bit = static_cast<std::size_t>(std::find(pool.begin(), pool.end(), owner) - pool.begin());
  std::vector<std::size_t> pos(n, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < pool.size(); ++i) pos[pool[i]] = i;

  auto member = [&](std::uint32_t mask, std::size_t c) {
    return pos[c] != static_cast<std::size_t>(-1) && (mask >> pos[c] & 1U);
  };
  auto satisfies = [&](std::uint32_t mask) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!(mask >> i & 1U)) continue;
      std::size_t d = pool[i];
      if (d != owner) {
        bool feeds = false;
        for (const auto& [consumer, port] : model.consumers()[d]) {
          (void)port;
          feeds = feeds || member(mask, consumer);
        }
        if (!feeds) return false;
      }
      const Component& k = model.components[d];
      std::vector<std::optional<Value>> in(k.inputs.size());
      for (std::size_t p = 0; p < k.inputs.size(); ++p) {
        std::size_t e = *model.drivers()[d][p];
        if (measured[e]) in[p] = measured[e];
        else if (member(mask, e)) in[p] = value[e];
      }
      auto v = fire(k.function, in, {k.domain.tolerance}, k.domain);
      if (!v || !k.domain.equal(*v, *value[d])) return false;
    }
    return true;
  };

  std::vector<std::uint32_t> minimal;
  const std::uint32_t full = (std::uint32_t{1} << pool.size()) - 1;
  std::vector<std::uint32_t> masks;
  for (std::uint32_t mask = 0; mask <= full; ++mask)
    if (mask >> owner_bit & 1U) masks.push_back(mask);
  std::stable_sort(masks.begin(), masks.end(),
                   [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) < std::popcount(b); });
  DepEnumeration out;
  for (std::uint32_t mask : masks) {
    bool superset = std::any_of(minimal.begin(), minimal.end(), [mask](std::uint32_t g) { return (mask & g) == g; });
    if (superset || !satisfies(mask)) continue;
    if (minimal.size() == limit) {
      out.truncated = true;
      break;
    }
    minimal.push_back(mask);
  }
  for (std::uint32_t mask : minimal) {
    MemberSet s;
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (mask >> i & 1U) s.push_back(Member::of(pool[i], 0));
    out.sets.push_back(std::move(s));
  }
  std::sort(out.sets.begin(), out.sets.end());
  return out;
}

}  // namespace focusdiag
