#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "diagnosis.hpp"
#include "error.hpp"
#include "model.hpp"

namespace focusdiag {

// ---------------------------------------------------------------------------
// Faults

enum class FaultKind { StuckAt, FunctionOverride, IntermittentStuckAt };

struct Fault {
  std::size_t component = 0;
  FaultKind kind = FaultKind::StuckAt;
  Value value;                 // StuckAt, IntermittentStuckAt
  FunctionSpec function;       // FunctionOverride
  std::set<int> active_times;  // IntermittentStuckAt
};

/// A copy of a model with some component behaviours replaced.
struct FaultyModel {
  SystemModel model;
  std::map<std::size_t, Fault> faults;

  std::vector<std::size_t> faulty_components() const {
    std::vector<std::size_t> out;
    for (const auto& [c, f] : faults) out.push_back(c);
    return out;
  }
};

inline FaultyModel inject(const SystemModel& model, const std::vector<Fault>& faults, bool allow_sources = false) {
  FaultyModel fm{model, {}};
  for (auto f : faults) {
    if (f.component >= model.size()) throw Error(ErrorCode::InvalidFault, "fault on unknown component");
    const Component& c = model.components[f.component];
    if (c.is_source && !allow_sources) throw Error(ErrorCode::InvalidFault, "fault on source '" + c.id + "'");
    if (fm.faults.count(f.component)) throw Error(ErrorCode::InvalidFault, "two faults on '" + c.id + "'");
    if (f.kind != FaultKind::FunctionOverride) f.value = c.domain.coerce(f.value);
    if (f.kind == FaultKind::FunctionOverride) {
      f.function.masking.resize(c.inputs.size(), false);
      fm.model.components[f.component].function = f.function;
    }
    if (f.kind == FaultKind::IntermittentStuckAt) {
      for (int t : f.active_times)
        if (t < 0 || (model.time_horizon && t >= *model.time_horizon))
          throw Error(ErrorCode::InvalidFault, "active time outside the horizon for '" + c.id + "'");
    }
    fm.faults.emplace(f.component, std::move(f));
  }
  return fm;
}

/// True output values of every component at every time point, indexed t * n + c.
class Trace {
 public:
  Trace(std::size_t n, int horizon) : n_(n), horizon_(horizon), values_(n * static_cast<std::size_t>(horizon)) {}
  const Value& at(std::size_t c, int t) const { return *values_.at(static_cast<std::size_t>(t) * n_ + c); }
  std::optional<Value>& slot(std::size_t c, int t) { return values_.at(static_cast<std::size_t>(t) * n_ + c); }
  int horizon() const { return horizon_; }

 private:
  std::size_t n_;
  int horizon_;
  std::vector<std::optional<Value>> values_;
};

/// Ground truth of a (possibly faulty) model given source values. Loops are
/// settled by synchronous sweeps starting from the previous time step (or
/// `initial_state`, or each domain's first value).
inline Trace simulate(const FaultyModel& fm, const std::vector<Observation>& sources, int horizon,
                      const std::map<std::size_t, Value>& initial_state = {}) {
  const SystemModel& model = fm.model;
  const std::size_t n = model.size();
  Trace trace(n, horizon);
  std::vector<std::optional<Value>> given(n * static_cast<std::size_t>(horizon));
  for (const auto& o : sources)
    if (model.components[o.component].is_source && o.time < horizon)
      given[static_cast<std::size_t>(o.time) * n + o.component] = model.components[o.component].domain.coerce(o.value);

  auto output = [&](std::size_t c, int t, std::span<const std::optional<Value>> in) -> std::optional<Value> {
    const Component& k = model.components[c];
    auto it = fm.faults.find(c);
    if (it != fm.faults.end()) {
      const Fault& f = it->second;
      if (f.kind == FaultKind::StuckAt) return f.value;
      if (f.kind == FaultKind::IntermittentStuckAt && f.active_times.count(t)) return f.value;
    }
    if (k.is_source) return given[static_cast<std::size_t>(t) * n + c];
    if (k.stateful && t < k.stateful->delay) return k.stateful->initial;
    return fire(k.function, in, {k.domain.tolerance}, k.domain);
  };
  auto inputs_of = [&](std::size_t c, int t, auto&& value_of) {
    const Component& k = model.components[c];
    int rt = k.stateful ? t - k.stateful->delay : t;
    std::vector<std::optional<Value>> in(k.inputs.size());
    if (rt < 0) return in;
    for (std::size_t p = 0; p < k.inputs.size(); ++p) in[p] = value_of(*model.drivers()[c][p], rt);
    return in;
  };

  auto adj = instant_graph(model);
  auto order = condensation_order(adj);
  for (int t = 0; t < horizon; ++t) {
    auto known = [&](std::size_t d, int s) -> std::optional<Value> { return trace.slot(d, s); };
    for (const auto& scc : order) {
      if (!is_loop(scc, adj)) {
        std::size_t c = scc.front();
        auto v = output(c, t, inputs_of(c, t, known));
        if (!v) throw Error(ErrorCode::Undetermined, "cannot simulate '" + model.components[c].id + "'");
        trace.slot(c, t) = *v;
        continue;
      }
      std::map<std::size_t, Value> cur;
      for (auto c : scc) {
        if (t > 0) cur[c] = trace.at(c, t - 1);
        else if (initial_state.count(c)) cur[c] = model.components[c].domain.coerce(initial_state.at(c));
        else cur[c] = model.components[c].domain.finite() ? model.components[c].domain.at(0) : Value::integer(0);
      }
      bool settled = false;
      for (std::size_t iter = 0; iter < 4 * scc.size() + 4 && !settled; ++iter) {
        auto loop_value = [&](std::size_t d, int s) -> std::optional<Value> {
          if (s == t && cur.count(d)) return cur[d];
          return trace.slot(d, s);
        };
        std::map<std::size_t, Value> next;
        for (auto c : scc) {
          auto v = output(c, t, inputs_of(c, t, loop_value));
          if (!v) throw Error(ErrorCode::Undetermined, "cannot simulate '" + model.components[c].id + "'");
          next[c] = *v;
        }
        settled = next == cur;
        cur = std::move(next);
      }
      if (!settled) throw Error(ErrorCode::NoFixedPoint, "simulated loop does not settle");
      for (auto c : scc) trace.slot(c, t) = cur[c];
    }
  }
  return trace;
}

/// Outputs nobody consumes.
inline std::vector<std::size_t> sinks(const SystemModel& model) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < model.size(); ++c)
    if (!model.components[c].is_source && model.consumers()[c].empty()) out.push_back(c);
  return out;
}

// ---------------------------------------------------------------------------
// Closed-loop sessions

enum class Outcome { Diagnosed, Exhausted, Inconsistent };

inline const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Diagnosed: return "diagnosed";
    case Outcome::Exhausted: return "exhausted";
    case Outcome::Inconsistent: return "inconsistent";
  }
  return "?";
}

struct TranscriptStep {
  std::size_t predictions = 0;
  std::size_t conflicts = 0;
  std::size_t confirmations = 0;
  std::vector<Evidence> evidence;
  std::vector<Focus> focuses;
  std::optional<ProbeAdvice> advice;
  std::optional<Observation> measurement;
  double rule_micros = 0.0;
};

struct Transcript {
  std::vector<TranscriptStep> steps;
  Outcome outcome = Outcome::Exhausted;
  MemberSet diagnosed;
  std::size_t probe_count = 0;
};

inline TranscriptStep record_step(const Diagnosis& d) {
  TranscriptStep s;
  s.predictions = d.state.row_count();
  s.conflicts = d.conflicts;
  s.confirmations = d.confirmations;
  s.evidence = d.evidence;
  s.focuses = d.focus.focuses;
  s.advice = d.advice;
  s.rule_micros = d.rule_micros;
  return s;
}

/// Drives predict -> classify -> focus -> advise -> measure against the faulty
/// model until the focuses are singletons, no probe helps, or the evidence is
/// inconsistent.
inline Transcript run_session(const SystemModel& model, const FaultyModel& faulty, const DiagnosisConfig& config,
                              std::vector<Observation> observations) {
  int horizon = model.is_temporal() ? model.horizon() : 1;
  for (const auto& o : observations) horizon = std::max(horizon, o.time + 1);
  std::vector<Observation> sources;
  for (const auto& o : observations)
    if (model.components[o.component].is_source) sources.push_back(o);
  Trace truth = simulate(faulty, sources, horizon, config.predict.previous_state);

  Transcript tr;
  const std::size_t budget = model.size() * static_cast<std::size_t>(horizon);
  for (;;) {
    Diagnosis d = diagnose(model, observations, config);
    TranscriptStep step = record_step(d);
    if (d.conflicts == 0) {
      tr.outcome = Outcome::Diagnosed;
      tr.steps.push_back(std::move(step));
      break;
    }
    if (d.status != SessionStatus::Active || !d.advice || tr.probe_count >= budget) {
      tr.outcome = d.status == SessionStatus::Diagnosed     ? Outcome::Diagnosed
                   : d.status == SessionStatus::Inconsistent ? Outcome::Inconsistent
                                                             : Outcome::Exhausted;
      if (tr.outcome == Outcome::Diagnosed) tr.diagnosed = d.diagnosed();
      tr.steps.push_back(std::move(step));
      break;
    }
    Observation m{d.advice->probe.component, d.advice->probe.time,
                  truth.at(d.advice->probe.component, d.advice->probe.time)};
    step.measurement = m;
    observations.push_back(m);
    ++tr.probe_count;
    tr.steps.push_back(std::move(step));
  }
  return tr;
}

/// Sources plus every observable sink, read from the ground truth.
inline std::vector<Observation> observe_outputs(const SystemModel& model, const Trace& truth,
                                                const std::vector<Observation>& sources) {
  std::vector<Observation> out = sources;
  for (int t = 0; t < truth.horizon(); ++t)
    for (auto c : sinks(model))
      if (model.observable[c]) out.push_back({c, t, truth.at(c, t)});
  return out;
}

// ---------------------------------------------------------------------------
// Hitting-set oracles

struct HittingSet {
  std::size_t size = 0;
  MemberSet witness;
};

inline constexpr std::size_t kMaxHittingUniverse = 20;

namespace detail {

inline std::pair<MemberSet, std::vector<std::uint32_t>> encode_sets(const std::vector<MemberSet>& sets) {
  MemberSet universe;
  for (const auto& s : sets) universe = set_union(universe, s);
  if (universe.size() > kMaxHittingUniverse) throw Error(ErrorCode::SizeLimit, "hitting-set oracle universe too large");
  std::vector<std::uint32_t> masks;
  for (const auto& s : sets) {
    std::uint32_t m = 0;
    for (const auto& x : s)
      m |= std::uint32_t{1} << (std::lower_bound(universe.begin(), universe.end(), x) - universe.begin());
    if (m == 0) throw Error(ErrorCode::DegenerateFocus, "an empty set cannot be hit");
    masks.push_back(m);
  }
  return {universe, masks};
}

inline bool hits_all(std::uint32_t candidate, const std::vector<std::uint32_t>& masks) {
  return std::all_of(masks.begin(), masks.end(), [candidate](std::uint32_t m) { return (m & candidate) != 0; });
}

inline MemberSet decode(std::uint32_t mask, const MemberSet& universe) {
  MemberSet out;
  for (std::size_t i = 0; i < universe.size(); ++i)
    if (mask >> i & 1U) out.push_back(universe[i]);
  return out;
}

}  // namespace detail

/// Exact minimum hitting set by exhaustive search in size order; the witness
/// is the lexicographically smallest member list of that size.
inline HittingSet minimal_hitting_set(const std::vector<MemberSet>& sets) {
  auto [universe, masks] = detail::encode_sets(sets);
  const std::size_t u = universe.size();
  for (std::size_t k = 0; k <= u; ++k) {
    // Combinations of k indices in lexicographic order.
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    for (;;) {
      std::uint32_t cand = 0;
      for (auto i : idx) cand |= std::uint32_t{1} << i;
      if (detail::hits_all(cand, masks)) return {k, detail::decode(cand, universe)};
      std::size_t pos = k;
      while (pos > 0 && idx[pos - 1] == u - k + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t i = pos; i < k; ++i) idx[i] = idx[i - 1] + 1;
    }
  }
  return {u, universe};
}

/// Every inclusion-minimal hitting set (minimal candidate diagnoses).
inline std::vector<MemberSet> all_minimal_hitting_sets(const std::vector<MemberSet>& sets) {
  auto [universe, masks] = detail::encode_sets(sets);
  const std::uint32_t full = universe.empty() ? 0 : ((std::uint32_t{1} << universe.size()) - 1);
  std::vector<std::uint32_t> order;
  for (std::uint32_t m = 0; m <= full; ++m) order.push_back(m);
  std::stable_sort(order.begin(), order.end(),
                   [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) < std::popcount(b); });
  std::vector<std::uint32_t> found;
  for (auto m : order) {
    if (std::any_of(found.begin(), found.end(), [m](std::uint32_t g) { return (m & g) == g; })) continue;
    if (detail::hits_all(m, masks)) found.push_back(m);
  }
  std::vector<MemberSet> out;
  for (auto m : found) out.push_back(detail::decode(m, universe));
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Random model families

enum class ModelFamily { Chain, Tree, Dag };
enum class FunctionKind { Sum, Xor, Gates };

struct GeneratorConfig {
  ModelFamily family = ModelFamily::Dag;
  std::size_t n = 10;        // function components
  std::size_t k = 2;         // fan-in bound
  std::size_t window = 0;    // DAG: inputs drawn from the previous `window` nodes (0 = any earlier node)
  std::size_t sources = 0;   // 0: max(2, k)
  FunctionKind function = FunctionKind::Sum;
  std::uint64_t seed = 1;
};

struct GeneratedModel {
  SystemModel model;
  std::vector<Observation> inputs;  // one value per source
};

namespace detail {

inline std::string padded(const char* prefix, std::size_t i, std::size_t count) {
  std::string digits = std::to_string(count == 0 ? 0 : count - 1);
  std::string s = std::to_string(i);
  return prefix + std::string(digits.size() - std::min(digits.size(), s.size()), '0') + s;
}

inline std::string gate_expr(FunctionKind kind, std::size_t arity, std::mt19937_64& rng) {
  auto port = [](std::size_t i) { return "in" + std::to_string(i); };
  auto fold = [&](const std::string& op) {
    std::string e = port(0);
    for (std::size_t i = 1; i < arity; ++i) e = "(" + e + " " + op + " " + port(i) + ")";
    return e;
  };
  if (kind == FunctionKind::Sum) return fold("+");
  if (kind == FunctionKind::Xor) return arity == 1 ? port(0) : fold("!=");
  if (arity == 1) return std::uniform_int_distribution<int>(0, 1)(rng) ? port(0) : "not " + port(0);
  switch (std::uniform_int_distribution<int>(0, 4)(rng)) {
    case 0: return fold("and");
    case 1: return fold("or");
    case 2: return "not " + fold("and");
    case 3: return "not " + fold("or");
    default: return fold("!=");
  }
}

}  // namespace detail

inline GeneratedModel generate_model(const GeneratorConfig& cfg) {
  using oj = nlohmann::ordered_json;
  std::mt19937_64 rng(cfg.seed);
  const std::size_t n = cfg.n;
  const std::size_t k = std::max<std::size_t>(1, cfg.k);
  const std::size_t ns = cfg.sources ? cfg.sources : std::max<std::size_t>(2, k);
  const bool numeric = cfg.function == FunctionKind::Sum;
  std::vector<std::string> src_ids, ids;
  for (std::size_t i = 0; i < ns; ++i) src_ids.push_back(detail::padded("s", i, ns));
  for (std::size_t i = 0; i < n; ++i) ids.push_back(detail::padded("g", i, n));

  // Drivers per node: negative values index sources.
  std::vector<std::vector<long>> drivers(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<long> pool;
    switch (cfg.family) {
      case ModelFamily::Chain:
        pool.push_back(i == 0 ? -1 : static_cast<long>(i) - 1);
        break;
      case ModelFamily::Tree:
        for (std::size_t j = k * i + 1; j <= k * i + k; ++j)
          pool.push_back(j < n ? static_cast<long>(j) : -1 - static_cast<long>((j - n) % ns));
        break;
      case ModelFamily::Dag: {
        for (std::size_t s = 0; s < ns; ++s) pool.push_back(-1 - static_cast<long>(s));
        std::size_t lo = (cfg.window == 0 || i < cfg.window) ? 0 : i - cfg.window;
        for (std::size_t j = lo; j < i; ++j) pool.push_back(static_cast<long>(j));
        std::shuffle(pool.begin(), pool.end(), rng);
        if (pool.size() > k) pool.resize(k);
        std::sort(pool.begin(), pool.end());
        break;
      }
    }
    drivers[i] = pool;
  }

  oj comps = oj::array(), conns = oj::array();
  std::vector<std::string> observables;
  const char* domain = numeric ? "int" : "bool";
  for (const auto& s : src_ids) comps.push_back({{"id", s}, {"type", "source"}, {"domain", domain}});
  auto name_of = [&](long d) { return d < 0 ? src_ids[static_cast<std::size_t>(-1 - d)] : ids[static_cast<std::size_t>(d)]; };
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> ports;
    for (std::size_t p = 0; p < drivers[i].size(); ++p) {
      ports.push_back("in" + std::to_string(p));
      conns.push_back({{"from", name_of(drivers[i][p])}, {"to", ids[i] + ".in" + std::to_string(p)}});
    }
    std::string expr = detail::gate_expr(cfg.function, ports.size(), rng);
    comps.push_back({{"id", ids[i]},
                     {"type", "function"},
                     {"domain", domain},
                     {"inputs", ports},
                     {"function", {{"branches", oj::array({oj{{"expr", expr}}})}}}});
    observables.push_back(ids[i]);
  }
  oj doc{{"components", comps}, {"connections", conns}, {"observables", observables}};
  GeneratedModel g{parse_model(doc.dump()), {}};
  for (const auto& s : src_ids) {
    Value v = numeric ? Value::integer(std::uniform_int_distribution<int>(0, 9)(rng))
                      : Value::boolean(std::uniform_int_distribution<int>(0, 1)(rng) == 1);
    g.inputs.push_back({g.model.index(s), 0, v});
  }
  return g;
}

/// A stuck-at value that differs from `truth` within the domain.
inline Value wrong_value(const Domain& d, const Value& truth, std::mt19937_64& rng) {
  switch (d.kind) {
    case ValueKind::Boolean: return Value::boolean(!truth.as_bool());
    case ValueKind::Integer: return Value::integer(truth.as_int() + std::uniform_int_distribution<int>(1, 5)(rng));
    case ValueKind::Real: return Value::real(truth.as_real() + 1.0 + d.tolerance * 2.0);
    case ValueKind::Enum:
      for (std::size_t i = 0; i < d.size(); ++i)
        if (!(d.at(i) == truth)) return d.at(i);
      break;
  }
  throw Error(ErrorCode::InvalidFault, "domain has no wrong value");
}

struct SweepConfig {
  GeneratorConfig generator;
  DiagnosisConfig diagnosis;
  std::size_t runs = 0;
  std::size_t faults_per_run = 1;
};

struct SweepRow {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  Rule rule = Rule::R1;
  Strategy strategy = Strategy::EntropySplit;
  std::size_t probes = 0;
  bool correct = false;
  double rule_micros = 0.0;
  Outcome outcome = Outcome::Exhausted;
};

/// One seeded run: generate, inject faults, observe sources and sinks, run a session.
inline SweepRow sweep_run(const SweepConfig& cfg, std::uint64_t seed) {
  GeneratorConfig gc = cfg.generator;
  gc.seed = seed;
  auto g = generate_model(gc);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  FaultyModel golden = inject(g.model, {});
  Trace clean = simulate(golden, g.inputs, 1);
  std::vector<std::size_t> pool;
  for (std::size_t c = 0; c < g.model.size(); ++c)
    if (!g.model.components[c].is_source) pool.push_back(c);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(pool.size(), cfg.faults_per_run));
  std::sort(pool.begin(), pool.end());
  std::vector<Fault> faults;
  for (auto c : pool) {
    Fault f;
    f.component = c;
    f.value = wrong_value(g.model.components[c].domain, clean.at(c, 0), rng);
    faults.push_back(f);
  }
  FaultyModel faulty = inject(g.model, faults);
  Trace truth = simulate(faulty, g.inputs, 1);
  auto tr = run_session(g.model, faulty, cfg.diagnosis, observe_outputs(g.model, truth, g.inputs));

  SweepRow row;
  row.seed = seed;
  row.n = cfg.generator.n;
  row.k = cfg.generator.k;
  row.rule = cfg.diagnosis.rule;
  row.strategy = cfg.diagnosis.strategy;
  row.probes = tr.probe_count;
  row.outcome = tr.outcome;
  MemberSet expected;
  for (auto c : pool) expected.push_back(Member::of(c, 0));
  row.correct = tr.outcome == Outcome::Diagnosed && tr.diagnosed == expected;
  for (const auto& s : tr.steps) row.rule_micros += s.rule_micros;
  return row;
}

inline std::vector<SweepRow> sweep(const SweepConfig& cfg, std::uint64_t base_seed) {
  std::vector<SweepRow> rows;
  for (std::size_t r = 0; r < cfg.runs; ++r) rows.push_back(sweep_run(cfg, base_seed + r));
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "seed,n,k,rule,strategy,probes,correct,rule_micros\n";
  for (const auto& r : rows) {
    out << r.seed << ',' << r.n << ',' << r.k << ',' << rule_name(r.rule) << ',' << strategy_name(r.strategy) << ','
        << r.probes << ',' << (r.correct ? 1 : 0) << ',' << static_cast<long long>(r.rule_micros + 0.5) << '\n';
  }
  return out.str();
}

}  // namespace focusdiag
