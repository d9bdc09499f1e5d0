// Acceptance runner: one PASS/FAIL line per criterion, INFO lines for
// measured numbers. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace fd = focusdiag;
using fdtest::BoundCounts;

namespace {

using Labels = std::vector<std::string>;
using LabelSets = std::vector<Labels>;
using Clock = std::chrono::steady_clock;

std::string models_dir() { return FOCUSDIAG_MODELS_DIR; }

fd::SystemModel load(const std::string& name) { return fd::parse_model(fd::read_file(models_dir() + "/" + name)); }

std::vector<fd::Observation> obs(const fd::SystemModel& m, const std::string& json) {
  return fd::observations_from_json(m, fd::parse_json(json, "observations"));
}

std::vector<fd::Observation> obs_file(const fd::SystemModel& m, const std::string& name) {
  return obs(m, fd::read_file(models_dir() + "/" + name));
}

Labels labels(const fd::SystemModel& m, const fd::MemberSet& s) {
  auto out = m.labels(s);
  std::sort(out.begin(), out.end());
  return out;
}

LabelSets focus_sets(const fd::SystemModel& m, const std::vector<fd::Focus>& fs) {
  LabelSets out;
  for (const auto& f : fs) out.push_back(labels(m, f.members));
  std::sort(out.begin(), out.end());
  return out;
}

std::string show(const Labels& l) {
  std::string s = "{";
  for (std::size_t i = 0; i < l.size(); ++i) s += (i ? "," : "") + l[i];
  return s + "}";
}

std::string show(const LabelSets& ls) {
  std::string s;
  for (const auto& l : ls) s += show(l);
  return s.empty() ? "none" : s;
}

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Collects mismatches for one criterion.
struct Check {
  std::vector<std::string> problems;
  void expect(bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  }
  template <typename T>
  void equal(const T& got, const T& want, const std::string& what) {
    if (!(got == want)) problems.push_back(what);
  }
};

int failures = 0;

void report(const std::string& name, const Check& c, const std::string& detail = "") {
  if (c.problems.empty()) {
    std::cout << "PASS " << name << (detail.empty() ? "" : " (" + detail + ")") << '\n';
    return;
  }
  ++failures;
  std::cout << "FAIL " << name << ": " << c.problems.front();
  if (c.problems.size() > 1) std::cout << " (+" << c.problems.size() - 1 << " more)";
  std::cout << '\n';
}

void info(const std::string& text) { std::cout << "INFO " << text << '\n'; }

/// Runs one criterion, turning unexpected exceptions into failures.
void criterion(const std::string& name, const std::function<std::string(Check&)>& body) {
  Check c;
  std::string detail;
  try {
    detail = body(c);
  } catch (const std::exception& e) {
    c.problems.push_back(std::string("exception: ") + e.what());
  }
  report(name, c, detail);
}

// ---------------------------------------------------------------------------

std::string full_adder(Check& c) {
  auto m = load("fulladder.json");
  auto o = obs_file(m, "fulladder_obs.json");
  auto t0 = Clock::now();
  fd::PredictOptions po;
  po.allow_partial = true;
  auto state = fd::forward_predict(m, o, po);
  auto ev = fd::classify(m, state);
  auto r2 = fd::focus_rule2(ev);
  fd::MemberSet focus = r2.focuses.empty() ? fd::MemberSet{} : r2.focuses.front().members;
  auto entropy = fd::select_probe(fd::Strategy::EntropySplit, focus, state, m);
  auto halving = fd::select_probe(fd::Strategy::Halving, focus, state, m);
  double elapsed = ms_since(t0);

  // Table rows computed from the inputs alone, as in the worked example.
  auto inputs = obs(m, R"([{"component":"a","value":1},{"component":"b","value":0},{"component":"cin","value":1}])");
  auto table_state = fd::forward_predict(m, inputs);
  std::map<std::string, Labels> table{{"and1", {"and1"}},
                                      {"xor1", {"xor1"}},
                                      {"and2", {"and2", "xor1"}},
                                      {"xor2", {"xor1", "xor2"}},
                                      {"or1", {"and2", "or1", "xor1"}}};
  for (const auto& [id, want] : table) {
    const auto* p = table_state.unique(m.index(id), 0);
    c.expect(p != nullptr, "no prediction for " + id);
    if (p) c.equal(labels(m, p->deps.focused), want, "Dep^f(" + id + ") = " + show(labels(m, p->deps.focused)));
  }
  c.equal(focus_sets(m, r2.focuses), LabelSets{{"and2", "or1"}}, "Rule 2 focus " + show(focus_sets(m, r2.focuses)));
  c.expect(entropy.ok() && m.member_label(entropy.probe) == "and2", "entropy probe is not and2");
  c.expect(halving.ok() && m.member_label(halving.probe) == "and2", "halving probe is not and2");
  c.expect(elapsed < 10.0, "took " + std::to_string(elapsed) + " ms");
  std::ostringstream d;
  d.precision(3);
  d << elapsed << " ms";
  return d.str();
}

std::string generators(Check& c) {
  auto m = load("generators.json");
  struct Case {
    const char *cv, *dv, *ev;
    LabelSets want;
  };
  std::vector<Case> cases{{"1", "1", "0", {{"b", "e"}}}, {"1", "0", "0", {{"b"}}}, {"0", "0", "0", {{"b"}, {"c"}}}};
  for (const auto& k : cases) {
    auto o = obs(m, std::string(R"([{"component":"sa","value":1},{"component":"sb","value":1},)") +
                        R"({"component":"c","value":)" + k.cv + R"(},{"component":"d","value":)" + k.dv +
                        R"(},{"component":"e","value":)" + k.ev + "}]");
    auto got = focus_sets(m, fd::focus_rule1(fd::classify(m, fd::forward_predict(m, o))).focuses);
    c.equal(got, k.want, std::string("c=") + k.cv + " d=" + k.dv + " e=" + k.ev + " gave " + show(got));
  }
  return "";
}

std::string flipflop(Check& c) {
  auto m = load("flipflop.json");
  auto o = obs_file(m, "flipflop_obs.json");
  auto state = fd::forward_predict(m, o);
  std::vector<std::tuple<std::string, int, Labels>> want{
      {"inv1", 1, {"inv1"}},
      {"nand2", 1, {"nand2"}},
      {"nand3", 1, {"nand3"}},
      {"nand4", 1, {"nand4", "output(nand5)=0"}},
      {"nand4", 0, {"nand2", "nand4", "output(nand5)=1"}},
      {"nand5", 0, {"output(nand5)=0"}},
      {"nand5", 1, {"output(nand5)=1"}},
      {"and6", 1, {"and6", "nand4", "output(nand5)=0"}},
      {"and6", 0, {"and6", "nand2", "nand4", "output(nand5)=1"}},
      {"and7", 0, {"and7", "output(nand5)=0"}},
      {"and7", 1, {"and7", "output(nand5)=1"}}};
  std::vector<std::tuple<std::string, int, Labels>> got;
  for (const auto* p : state.all())
    if (p->origin != fd::Origin::Loopback)
      got.emplace_back(m.components[p->owner.component].id, p->value.as_bool() ? 1 : 0, labels(m, p->deps.focused));
  std::sort(want.begin(), want.end());
  std::sort(got.begin(), got.end());
  c.expect(got == want, "prediction table differs (" + std::to_string(got.size()) + " rows)");

  auto r2 = fd::focus_rule2(fd::classify(m, state));
  c.equal(focus_sets(m, r2.focuses), LabelSets{{"output(nand5)=0"}, {"output(nand5)=1"}},
          "Rule 2 focuses " + show(focus_sets(m, r2.focuses)));

  fd::DiagnosisConfig cfg;
  auto d = fd::diagnose(m, o, cfg);
  c.expect(d.advice && m.member_label(d.advice->probe) == "nand5", "first advice is not nand5");
  o.push_back({m.index("nand5"), 0, fd::Value::boolean(true)});
  auto after = fd::diagnose(m, o, cfg);
  c.equal(focus_sets(m, after.focus.focuses), LabelSets{{"and7"}},
          "after nand5=1: " + show(focus_sets(m, after.focus.focuses)));
  return "";
}

std::string delay(Check& c) {
  auto m = load("delay.json");
  std::string base;
  for (int t = 0; t < 3; ++t)
    base += R"({"component":"sa","time":)" + std::to_string(t) + R"(,"value":1},{"component":"sb","time":)" +
            std::to_string(t) + R"(,"value":2},)";
  auto a = m.index("a");
  auto evidence = [&](const std::string& extra) {
    return fd::classify(m, fd::forward_predict(m, obs(m, "[" + base + extra + "]")));
  };
  auto split = [](const std::vector<fd::Evidence>& ev, fd::Evidence& k, std::vector<fd::Evidence>& b) {
    int conflicts = 0;
    for (const auto& e : ev) {
      if (e.is_conflict()) {
        k = e;
        ++conflicts;
      } else {
        b.push_back(e);
      }
    }
    return conflicts == 1;
  };

  // Conflict on d at 1, confirmation on c at 2 (which reads a at 1).
  fd::Evidence k;
  std::vector<fd::Evidence> b;
  c.expect(split(evidence(R"({"component":"d","time":1,"value":7},{"component":"c","time":2,"value":1})"), k, b),
           "expected one conflict");
  c.equal(labels(m, k.focused), Labels{"a@1", "b@1", "d@1"}, "K^f(d@1) = " + show(labels(m, k.focused)));
  c.expect(fd::cancelled(a, k, b, fd::CancelMode::NonIntermittent), "a not cancelled (nonint)");
  c.expect(fd::cancelled(a, k, b, fd::CancelMode::Intermittent), "a not cancelled (int)");
  c.expect(!fd::cancelled(m.index("b"), k, b, fd::CancelMode::NonIntermittent), "b cancelled");
  auto r3 = fd::focus_rule3(evidence(R"({"component":"d","time":1,"value":7},{"component":"c","time":2,"value":1})"),
                            fd::CancelMode::NonIntermittent);
  c.equal(focus_sets(m, r3.focuses), LabelSets{{"b@1", "d@1"}}, "Rule 3 focus " + show(focus_sets(m, r3.focuses)));

  // Shifted: a is confirmed only one step later than it occurs in the conflict.
  fd::Evidence k2;
  std::vector<fd::Evidence> b2;
  c.expect(split(evidence(R"({"component":"d","time":1,"value":7},{"component":"a","time":2,"value":1})"), k2, b2),
           "expected one conflict (shifted)");
  c.expect(fd::cancelled(a, k2, b2, fd::CancelMode::NonIntermittent), "shifted: a not cancelled (nonint)");
  c.expect(!fd::cancelled(a, k2, b2, fd::CancelMode::Intermittent), "shifted: a cancelled (int)");
  // And one step earlier cancels in neither mode.
  fd::Evidence k3;
  std::vector<fd::Evidence> b3;
  c.expect(split(evidence(R"({"component":"d","time":1,"value":7},{"component":"a","time":0,"value":1})"), k3, b3),
           "expected one conflict (earlier)");
  c.expect(!fd::cancelled(a, k3, b3, fd::CancelMode::NonIntermittent), "earlier: a cancelled (nonint)");
  c.expect(!fd::cancelled(a, k3, b3, fd::CancelMode::Intermittent), "earlier: a cancelled (int)");
  return "";
}

std::string bulbs(Check& c) {
  auto m = load("bulbs.json");
  auto faults = fd::faults_from_json(m, fd::parse_json(fd::read_file(models_dir() + "/bulbs_faults.json"), "faults"));
  auto faulty = fd::inject(m, faults);
  auto src = obs_file(m, "bulbs_obs.json");
  auto o = fd::observe_outputs(m, fd::simulate(faulty, src, 1), src);
  auto ev = fd::classify(m, fd::forward_predict(m, o));
  auto r1 = fd::focus_rule1(ev);
  c.equal(focus_sets(m, r1.focuses), LabelSets{{"bulb1"}, {"bulb2"}}, "Rule 1 focuses " + show(focus_sets(m, r1.focuses)));
  std::vector<fd::MemberSet> k;
  for (const auto& e : ev)
    if (e.is_conflict()) k.push_back(e.members);
  auto all = fd::all_minimal_hitting_sets(k);
  c.expect(all.size() > 1, "only " + std::to_string(all.size()) + " minimal diagnosis");
  LabelSets shown;
  for (const auto& s : all) shown.push_back(labels(m, s));
  return "focus count " + std::to_string(r1.focuses.size()) + ", " + std::to_string(all.size()) +
         " minimal diagnoses without confirmations: " + show(shown);
}

std::string hitting_bound(Check& c) {
  BoundCounts counts;
  for (std::uint64_t seed = 1; counts.instances < 300 && seed < 10000; ++seed)
    fdtest::check_hitting_bound(fdtest::random_bound_instance(seed), counts);
  c.expect(counts.instances >= 200, "only " + std::to_string(counts.instances) + " instances");
  c.expect(counts.rule_violations == 0, std::to_string(counts.rule_violations) + " Rule 1 bound violations");
  c.expect(counts.chain_violations == 0, std::to_string(counts.chain_violations) + " chain violations");
  info("hitting-set chain read literally (all focused sets without c vs conflict sets without c): " +
       std::to_string(counts.literal_right_violations) + " of " + std::to_string(counts.checks) +
       " checks have more focused sets" +
       (counts.first_literal_example.empty() ? "" : ", e.g. " + counts.first_literal_example));
  return std::to_string(counts.instances) + " instances, " + std::to_string(counts.checks) + " checks";
}

std::string soundness(Check& c) {
  std::size_t runs = 0, worst_probes = 0;
  fd::SweepConfig sc;
  sc.generator.family = fd::ModelFamily::Dag;
  sc.generator.function = fd::FunctionKind::Sum;
  sc.generator.n = 50;
  sc.generator.k = 3;
  sc.runs = 500;
  struct Cfg {
    fd::Rule rule;
    fd::Strategy strategy;
  };
  for (auto [rule, strategy] : {Cfg{fd::Rule::R1, fd::Strategy::EntropySplit}, Cfg{fd::Rule::R2, fd::Strategy::EntropySplit},
                                Cfg{fd::Rule::R1, fd::Strategy::Halving}, Cfg{fd::Rule::R2, fd::Strategy::Bounds},
                                Cfg{fd::Rule::R3, fd::Strategy::EntropySplit}, Cfg{fd::Rule::R4, fd::Strategy::Halving}}) {
    sc.diagnosis.rule = rule;
    sc.diagnosis.strategy = strategy;
    std::size_t wrong = 0;
    for (const auto& row : fd::sweep(sc, 1000)) {
      ++runs;
      worst_probes = std::max(worst_probes, row.probes);
      if (!row.correct) ++wrong;
      c.expect(row.probes <= sc.generator.n, "seed " + std::to_string(row.seed) + " used " +
                                                 std::to_string(row.probes) + " probes");
    }
    c.expect(wrong == 0, std::string(fd::rule_name(rule)) + "/" + fd::strategy_name(strategy) + ": " +
                             std::to_string(wrong) + " of " + std::to_string(sc.runs) + " runs not diagnosed correctly");
  }
  // Double faults: informational miss rate.
  sc.faults_per_run = 2;
  for (auto rule : {fd::Rule::R1, fd::Rule::R2}) {
    sc.diagnosis.rule = rule;
    sc.diagnosis.strategy = fd::Strategy::EntropySplit;
    std::map<fd::Outcome, std::size_t> outcomes;
    std::size_t missed = 0;
    auto rows = fd::sweep(sc, 5000);
    for (const auto& row : rows) {
      ++outcomes[row.outcome];
      if (!row.correct) ++missed;
    }
    std::ostringstream s;
    s << "double-fault miss rate " << fd::rule_name(rule) << ": " << missed << "/" << rows.size() << " ("
      << outcomes[fd::Outcome::Diagnosed] << " diagnosed, " << outcomes[fd::Outcome::Exhausted] << " exhausted, "
      << outcomes[fd::Outcome::Inconsistent] << " inconsistent)";
    info(s.str());
  }
  return std::to_string(runs) + " single-fault runs, max probes " + std::to_string(worst_probes);
}

// ---------------------------------------------------------------------------
// Scaling

double min_time_us(const std::function<void()>& f, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = Clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::micro>(Clock::now() - t0).count());
  }
  return best;
}

double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  double n = static_cast<double>(x.size()), mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return syy == 0 ? 1.0 : (sxy * sxy) / (sxx * syy);
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double n = static_cast<double>(x.size()), mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

/// Evidence from a sparse random DAG with 1% stuck faults and 60% of outputs
/// measured. Xor gates: sums overflow on deep 8k-node DAGs.
std::vector<fd::Evidence> sparse_evidence(std::size_t n, std::uint64_t seed) {
  fd::GeneratorConfig gc;
  gc.family = fd::ModelFamily::Dag;
  gc.function = fd::FunctionKind::Xor;
  gc.n = n;
  gc.k = 2;
  gc.window = 16;
  gc.seed = seed;
  auto g = fd::generate_model(gc);
  std::mt19937_64 rng(seed);
  auto clean = fd::simulate(fd::inject(g.model, {}), g.inputs, 1);
  std::vector<fd::Fault> faults;
  for (std::size_t c = 0; c < g.model.size(); ++c) {
    if (g.model.components[c].is_source || rng() % 100 != 0) continue;
    fd::Fault f;
    f.component = c;
    f.value = fd::wrong_value(g.model.components[c].domain, clean.at(c, 0), rng);
    faults.push_back(f);
  }
  auto truth = fd::simulate(fd::inject(g.model, faults), g.inputs, 1);
  auto o = g.inputs;
  for (std::size_t c = 0; c < g.model.size(); ++c)
    if (!g.model.components[c].is_source && rng() % 10 < 6) o.push_back({c, 0, truth.at(c, 0)});
  return fd::classify(g.model, fd::forward_predict(g.model, o));
}

/// ~n/2 conflict sets of ~n/2 members each, plus n/8 confirmations of n/4 members.
std::vector<fd::Evidence> dense_evidence(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> universe(n);
  for (std::size_t i = 0; i < n; ++i) universe[i] = i;
  auto draw = [&](std::size_t size) {
    std::shuffle(universe.begin(), universe.end(), rng);
    fd::MemberSet s;
    for (std::size_t i = 0; i < size; ++i) s.push_back(fd::Member::of(universe[i], 0));
    fd::normalize(s);
    return s;
  };
  std::vector<fd::Evidence> ev;
  for (std::size_t i = 0; i < n / 2; ++i) {
    fd::Evidence e;
    e.kind = fd::EvidenceKind::Conflict;
    e.origin = fd::Member::of(n + i, 0);
    e.members = e.focused = draw(n / 2);
    ev.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < n / 8; ++i) {
    fd::Evidence e;
    e.kind = fd::EvidenceKind::Confirmation;
    e.origin = fd::Member::of(2 * n + i, 0);
    e.members = e.focused = draw(n / 4);
    ev.push_back(std::move(e));
  }
  return ev;
}

std::string scaling(Check& c) {
  const std::vector<fd::Rule> rules{fd::Rule::R1, fd::Rule::R2, fd::Rule::R3, fd::Rule::R4};
  std::ostringstream detail;
  detail.precision(3);

  std::vector<double> xs;
  std::map<fd::Rule, std::vector<double>> ys;
  std::size_t conflicts_at_max = 0;
  // Average over several random instances per size.
  constexpr int kInstances = 8;
  for (std::size_t n : {1000, 2000, 4000, 8000}) {
    xs.push_back(static_cast<double>(n));
    std::map<fd::Rule, double> total;
    conflicts_at_max = 0;
    for (int i = 0; i < kInstances; ++i) {
      auto ev = sparse_evidence(n, 42 + n + static_cast<std::uint64_t>(i));
      for (const auto& e : ev) conflicts_at_max += e.is_conflict();
      for (auto r : rules) {
        double us = min_time_us([&] { fd::apply_rule(r, ev, fd::CancelMode::NonIntermittent); }, 5);
        total[r] += us;
        c.expect(us < 5e6, "sparse n=" + std::to_string(n) + " took " + std::to_string(us / 1e6) + " s");
      }
    }
    for (auto r : rules) ys[r].push_back(total[r] / kInstances);
    conflicts_at_max /= kInstances;
  }
  std::ostringstream row;
  row << "sparse k=2 mean rule time (us) at n=1k..8k, ~" << conflicts_at_max << " conflicts at 8k:";
  for (auto r : rules) {
    double r2 = r_squared(xs, ys[r]);
    row << ' ' << fd::rule_name(r) << " [";
    for (std::size_t i = 0; i < ys[r].size(); ++i) row << (i ? " " : "") << static_cast<long>(ys[r][i]);
    row << "] R2=" << r2 << ';';
    c.expect(r2 >= 0.95, std::string("sparse ") + fd::rule_name(r) + " linear fit R2=" + std::to_string(r2));
    detail << fd::rule_name(r) << " R2=" << r2 << ' ';
  }
  info(row.str());

  std::vector<double> lx;
  std::map<fd::Rule, std::vector<double>> ly;
  for (std::size_t n : {250, 500, 1000, 2000}) {
    auto ev = dense_evidence(n, 7 + n);
    lx.push_back(std::log(static_cast<double>(n)));
    for (auto r : rules) {
      double us = min_time_us([&] { fd::apply_rule(r, ev, fd::CancelMode::NonIntermittent); }, 5);
      ly[r].push_back(std::log(us));
      c.expect(us < 5e6, "dense n=" + std::to_string(n) + " took " + std::to_string(us / 1e6) + " s");
    }
  }
  std::ostringstream drow;
  drow << "dense family rule time (us) at n=250..2000:";
  for (auto r : rules) {
    double s = slope(lx, ly[r]);
    drow << ' ' << fd::rule_name(r) << " [";
    for (std::size_t i = 0; i < ly[r].size(); ++i) drow << (i ? " " : "") << static_cast<long>(std::exp(ly[r][i]));
    drow << "] slope=" << s << ';';
    c.expect(s <= 2.2, std::string("dense ") + fd::rule_name(r) + " log-log slope " + std::to_string(s));
    detail << fd::rule_name(r) << " slope=" << s << ' ';
  }
  info(drow.str());
  auto text = detail.str();
  if (!text.empty()) text.pop_back();
  return text;
}

// ---------------------------------------------------------------------------
// Property suites

std::string properties(Check& c) {
  std::size_t checks = 0;

  // Dependency chain and forward Dep^f against enumeration on small models.
  for (std::uint64_t seed = 1; seed <= 400; ++seed) {
    fd::GeneratorConfig gc;
    gc.function = fd::FunctionKind::Gates;
    gc.n = 3 + seed % 4;
    gc.k = 1 + seed % 3;
    gc.sources = 2;
    gc.seed = seed;
    auto g = fd::generate_model(gc);
    std::mt19937_64 rng(seed);
    auto o = g.inputs;
    auto truth = fd::simulate(fd::inject(g.model, {}), g.inputs, 1);
    for (std::size_t comp = 0; comp < g.model.size(); ++comp) {
      auto& cc = g.model.components[comp];
      if (cc.is_source) continue;
      for (std::size_t p = 0; p < cc.function.masking.size(); ++p) cc.function.masking[p] = rng() % 5 == 0;
      if (g.model.observable[comp] && rng() % 3 == 0) o.push_back({comp, 0, truth.at(comp, 0)});
    }
    auto s = fd::forward_predict(g.model, o);
    for (const auto* p : s.all()) {
      ++checks;
      c.expect(fd::is_subset(p->deps.mask_free, p->deps.focused) && fd::is_subset(p->deps.focused, p->deps.dep) &&
                   fd::contains(p->deps.mask_free, p->owner),
               "dep chain broken, seed " + std::to_string(seed));
      auto e = fd::enumerate_dep_sets(g.model, o, p->owner.component);
      if (e.truncated || e.sets.empty()) {
        c.expect(false, "enumeration failed, seed " + std::to_string(seed));
        continue;
      }
      fd::MemberSet meet = e.sets.front();
      for (const auto& set : e.sets) meet = fd::set_intersection(meet, set);
      c.expect(meet == p->deps.focused, "Dep^f differs from enumerated intersection, seed " + std::to_string(seed));
    }
  }

  // Pr(X): empty set and monotonicity.
  {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> prior(1e-9, 0.9);
    c.expect(fd::prob_any_broken(std::span<const double>{}) == 0.0, "Pr(empty) != 0");
    for (int round = 0; round < 2000; ++round) {
      std::vector<double> xs(rng() % 12);
      for (auto& x : xs) x = prior(rng);
      double prev = 0.0;
      for (std::size_t k = 0; k <= xs.size(); ++k) {
        double v = fd::prob_any_broken(std::span<const double>(xs.data(), k));
        c.expect(v >= prev && v <= 1.0, "Pr not monotone");
        prev = v;
        ++checks;
      }
    }
  }

  // Intermittent cancellation implies non-intermittent cancellation.
  {
    std::mt19937_64 rng(9);
    auto random_set = [&]() {
      fd::MemberSet s;
      for (int i = 0, size = 1 + static_cast<int>(rng() % 4); i < size; ++i)
        s.push_back(fd::Member::of(rng() % 5, static_cast<int>(rng() % 3)));
      fd::normalize(s);
      return s;
    };
    for (int round = 0; round < 3000; ++round) {
      fd::Evidence k;
      k.kind = fd::EvidenceKind::Conflict;
      k.members = k.focused = random_set();
      std::vector<fd::Evidence> bs(rng() % 4);
      for (auto& b : bs) {
        b.kind = fd::EvidenceKind::Confirmation;
        b.members = b.focused = random_set();
      }
      for (std::size_t comp = 0; comp < 5; ++comp) {
        ++checks;
        if (fd::cancelled(comp, k, bs, fd::CancelMode::Intermittent))
          c.expect(fd::cancelled(comp, k, bs, fd::CancelMode::NonIntermittent), "cancellation modes not nested");
      }
    }
  }

  // Strict split of every returned probe.
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    fd::GeneratorConfig gc;
    gc.n = 15;
    gc.k = 3;
    gc.seed = seed;
    auto g = fd::generate_model(gc);
    std::mt19937_64 rng(seed);
    auto clean = fd::simulate(fd::inject(g.model, {}), g.inputs, 1);
    std::vector<std::size_t> pool;
    for (std::size_t comp = 0; comp < g.model.size(); ++comp)
      if (!g.model.components[comp].is_source) pool.push_back(comp);
    fd::Fault f;
    f.component = pool[rng() % pool.size()];
    f.value = fd::wrong_value(g.model.components[f.component].domain, clean.at(f.component, 0), rng);
    auto truth = fd::simulate(fd::inject(g.model, {f}), g.inputs, 1);
    auto o = fd::observe_outputs(g.model, truth, g.inputs);
    for (auto rule : {fd::Rule::R1, fd::Rule::R2}) {
      fd::DiagnosisConfig cfg;
      cfg.rule = rule;
      auto d = fd::diagnose(g.model, o, cfg);
      for (const auto& focus : d.focus.focuses)
        for (auto s : {fd::Strategy::EntropySplit, fd::Strategy::Bounds, fd::Strategy::Halving}) {
          auto a = fd::select_probe(s, focus.members, d.state, g.model);
          if (!a.ok()) continue;
          ++checks;
          const auto& dep = d.state.unique(a.probe.component, a.probe.time)->deps.focused;
          c.expect(!fd::set_intersection(focus.members, dep).empty() &&
                       !fd::set_difference(focus.members, dep).empty(),
                   "probe does not split its focus, seed " + std::to_string(seed));
        }
    }
  }

  // Loop fixed point: stateful evaluation on the NAND latch is stable under re-evaluation.
  {
    auto m = fd::parse_model(R"js({"components":[
      {"id":"sbar","type":"source"},{"id":"rbar","type":"source"},
      {"id":"q","inputs":["in1","in2"],"function":{"branches":[{"expr":"not (in1 and in2)"}]}},
      {"id":"qbar","inputs":["in1","in2"],"function":{"branches":[{"expr":"not (in1 and in2)"}]}}],
      "connections":[{"from":"sbar","to":"q.in1"},{"from":"qbar","to":"q.in2"},
                     {"from":"rbar","to":"qbar.in1"},{"from":"q","to":"qbar.in2"}],
      "observables":["q","qbar"]})js");
    auto q = m.index("q"), qbar = m.index("qbar");
    for (int sbar = 0; sbar < 2; ++sbar)
      for (int rbar = 0; rbar < 2; ++rbar)
        for (int prev = 0; prev < 2; ++prev) {
          if (!sbar && !rbar) continue;
          std::vector<fd::Observation> known{{m.index("sbar"), 0, fd::Value::boolean(sbar)},
                                             {m.index("rbar"), 0, fd::Value::boolean(rbar)}};
          auto rows = fd::loop_predict_stateful(
              m, {q, qbar}, {{q, fd::Value::boolean(prev)}, {qbar, fd::Value::boolean(!prev)}}, known);
          std::map<std::size_t, fd::Value> v;
          for (const auto& p : rows) v[p.owner.component] = p.value;
          std::vector<std::optional<fd::Value>> qin{fd::Value::boolean(sbar), v[qbar]};
          std::vector<std::optional<fd::Value>> qbin{fd::Value::boolean(rbar), v[q]};
          ++checks;
          c.expect(*fd::fire(m.components[q].function, qin) == v[q] &&
                       *fd::fire(m.components[qbar].function, qbin) == v[qbar],
                   "latch state is not a fixed point");
        }
  }

  // Transcript determinism: identical seeds give byte-identical transcripts.
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    fd::GeneratorConfig gc;
    gc.n = 30;
    gc.k = 3;
    gc.seed = seed;
    auto run = [&] {
      auto g = fd::generate_model(gc);
      std::mt19937_64 rng(seed);
      auto clean = fd::simulate(fd::inject(g.model, {}), g.inputs, 1);
      std::vector<std::size_t> pool;
      for (std::size_t comp = 0; comp < g.model.size(); ++comp)
        if (!g.model.components[comp].is_source) pool.push_back(comp);
      fd::Fault f;
      f.component = pool[rng() % pool.size()];
      f.value = fd::wrong_value(g.model.components[f.component].domain, clean.at(f.component, 0), rng);
      auto faulty = fd::inject(g.model, {f});
      auto o = fd::observe_outputs(g.model, fd::simulate(faulty, g.inputs, 1), g.inputs);
      return fd::transcript_to_json(g.model, fd::run_session(g.model, faulty, {}, o)).dump();
    };
    ++checks;
    c.expect(run() == run(), "transcript differs between runs, seed " + std::to_string(seed));
  }
  return std::to_string(checks) + " checks";
}

}  // namespace

int main() {
  criterion("full-adder regression", full_adder);
  criterion("generator scenarios", generators);
  criterion("flipflop loop", flipflop);
  criterion("delay cancellation", delay);
  criterion("bulb-circuit plausibility", bulbs);
  criterion("hitting-set bound", hitting_bound);
  criterion("single-fault soundness sweep", soundness);
  criterion("complexity scaling", scaling);
  criterion("property suites", properties);
  return failures;
}
