#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace fdtest;

namespace {

/// s -> c0 -> c1 -> ... -> c{n-1}, all buffers and all observable.
SystemModel chain_model(std::size_t n, double prior = 1e-4) {
  nlohmann::json comps = nlohmann::json::array(), conns = nlohmann::json::array(), observables = nlohmann::json::array();
  comps.push_back({{"id", "s"}, {"type", "source"}});
  for (std::size_t i = 0; i < n; ++i) {
    std::string id = "c" + std::to_string(i);
    comps.push_back({{"id", id},
                     {"inputs", {"in"}},
                     {"prior", prior},
                     {"function", {{"branches", {{{"expr", "in"}}}}}}});
    conns.push_back({{"from", i == 0 ? std::string("s") : "c" + std::to_string(i - 1)}, {"to", id + ".in"}});
    observables.push_back(id);
  }
  return parse_model(nlohmann::json{{"components", comps}, {"connections", conns}, {"observables", observables}}.dump());
}

/// Source high, last chain element measured low: one conflict over the whole chain.
PredictionState broken_chain(const SystemModel& m, std::size_t n) {
  std::vector<Observation> o{{m.index("s"), 0, Value::boolean(true)},
                             {m.index("c" + std::to_string(n - 1)), 0, Value::boolean(false)}};
  PredictOptions po;
  po.allow_partial = true;
  return forward_predict(m, o, po);
}

MemberSet chain_focus(const SystemModel& m, std::size_t n) {
  MemberSet f;
  for (std::size_t i = 0; i < n; ++i) f.push_back(Member::of(m.index("c" + std::to_string(i)), 0));
  normalize(f);
  return f;
}

double pr(double p, std::size_t k) { return 1.0 - std::pow(1.0 - p, static_cast<double>(k)); }

}  // namespace

TEST(Probability, EmptyAndSingle) {
  EXPECT_EQ(prob_any_broken(std::span<const double>{}), 0.0);
  std::vector<double> one{0.3};
  EXPECT_DOUBLE_EQ(prob_any_broken(one), 0.3);
  std::vector<double> two{0.5, 0.5};
  EXPECT_DOUBLE_EQ(prob_any_broken(two), 0.75);
}

TEST(Probability, MonotoneUnderInclusion) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> prior(1e-6, 0.9);
  for (int round = 0; round < 2000; ++round) {
    std::vector<double> xs;
    int n = static_cast<int>(rng() % 10);
    for (int i = 0; i < n; ++i) xs.push_back(prior(rng));
    double prev = 0.0;
    for (std::size_t k = 0; k <= xs.size(); ++k) {
      double v = prob_any_broken(std::span<const double>(xs.data(), k));
      EXPECT_GE(v, prev);
      EXPECT_LE(v, 1.0);
      prev = v;
    }
  }
}

TEST(Probability, AssumptionPriorFromDomain) {
  auto m = load("flipflop.json");
  Member a = Member::of(m.index("nand5"), 0);
  a.assumed = 1;
  EXPECT_DOUBLE_EQ(member_prior(m, a), 0.5);
}

TEST(Entropy, FullAdderSelectsAnd2) {
  auto m = load("fulladder.json");
  auto d = diagnose(m, obs_file(m, "fulladder_obs.json"));
  auto focus = members(m, {"and2", "or1"});
  auto a = select_probe_entropy(focus, d.state, m);
  ASSERT_TRUE(a.ok());
  EXPECT_EQ(a.probe, Member::of(m.index("and2"), 0));
  double p_or1 = m.components[m.index("or1")].prior, p_and2 = m.components[m.index("and2")].prior;
  double expected = p_or1 / (1.0 - (1.0 - p_or1) * (1.0 - p_and2));
  EXPECT_NEAR(a.criterion, expected, 1e-12);
  EXPECT_NEAR(a.criterion, 0.5, 1e-3);
}

TEST(Halving, FullAdderSelectsAnd2) {
  auto m = load("fulladder.json");
  auto d = diagnose(m, obs_file(m, "fulladder_obs.json"));
  auto a = select_probe_halving(members(m, {"and2", "or1"}), d.state, m);
  ASSERT_TRUE(a.ok());
  EXPECT_EQ(a.probe, Member::of(m.index("and2"), 0));
  EXPECT_DOUBLE_EQ(a.criterion, 0.5);
}

TEST(Entropy, FourChainSelectsSecond) {
  auto m = chain_model(4);
  auto state = broken_chain(m, 4);
  auto focus = chain_focus(m, 4);
  auto a = select_probe_entropy(focus, state, m);
  ASSERT_TRUE(a.ok());
  EXPECT_EQ(m.member_label(a.probe), "c1");
  // Hand-enumerated ratios: probing c0, c1, c2 leaves 3, 2, 1 members.
  const double p = 1e-4;
  EXPECT_NEAR(a.criterion, pr(p, 2) / pr(p, 4), 1e-12);
  EXPECT_GT(std::fabs(pr(p, 3) / pr(p, 4) - 0.5), std::fabs(a.criterion - 0.5));
}

TEST(Entropy, SingletonFocusIsExhausted) {
  auto m = chain_model(4);
  auto state = broken_chain(m, 4);
  auto a = select_probe(Strategy::EntropySplit, members(m, {"c2"}), state, m);
  EXPECT_FALSE(a.ok());
  EXPECT_EQ(a.status, ProbeStatus::FocusExhausted);
  EXPECT_FALSE(select_probe_halving(members(m, {"c2"}), state, m).ok());
}

TEST(Bounds, MaskingCandidateNeedsBounds) {
  // Only e is measured: focus {b, e}; d depends on b through a masking port.
  auto m = load("generators.json");
  auto d = diagnose(m, obs(m, R"([{"component":"sa","value":1},{"component":"sb","value":1},
                                  {"component":"e","value":0}])"),
                    DiagnosisConfig{});
  auto focus = members(m, {"b", "e"});
  EXPECT_EQ(select_probe_entropy(focus, d.state, m).status, ProbeStatus::NeedsBounds);
  auto a = select_probe(Strategy::EntropySplit, focus, d.state, m);
  ASSERT_TRUE(a.ok());
  EXPECT_EQ(a.strategy, Strategy::Bounds);
  EXPECT_EQ(m.member_label(a.probe), "d");
  ASSERT_TRUE(a.bounds);
  double pb = m.components[m.index("b")].prior, pe = m.components[m.index("e")].prior;
  double pf = 1.0 - (1.0 - pb) * (1.0 - pe);
  EXPECT_NEAR(a.bounds->first, pe / pf, 1e-12);
  EXPECT_NEAR(a.bounds->second, 1.0, 1e-12);
  EXPECT_NEAR(a.criterion, 0.5 * (pe / pf + 1.0), 1e-12);
  EXPECT_LE(a.bounds->first, a.criterion);
  EXPECT_LE(a.criterion, a.bounds->second);
}

TEST(Bounds, CollapseWhenMaskFreeEqualsFocused) {
  auto m = load("fulladder.json");
  auto d = diagnose(m, obs_file(m, "fulladder_obs.json"));
  auto focus = members(m, {"and2", "or1"});
  auto [lo, hi] = probe_bounds(single(d.state, m, "and2"), focus, m);
  EXPECT_DOUBLE_EQ(lo, hi);
  EXPECT_NEAR(lo, select_probe_entropy(focus, d.state, m).criterion, 1e-15);
}

TEST(Bounds, DisjointCandidateIsUseless) {
  auto m = load("fulladder.json");
  auto d = diagnose(m, obs_file(m, "fulladder_obs.json"));
  auto [lo, hi] = probe_bounds(single(d.state, m, "and1"), members(m, {"and2", "or1"}), m);
  EXPECT_DOUBLE_EQ(lo, 1.0);
  EXPECT_DOUBLE_EQ(hi, 1.0);
}

TEST(Bounds, ZeroProbabilityFocus) {
  auto m = chain_model(3, 0.0);
  auto state = broken_chain(m, 3);
  try {
    probe_bounds(single(state, m, "c0"), chain_focus(m, 3), m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateFocus);
  }
}

TEST(Property, EntropyAgreesWithHalvingOnChains) {
  std::mt19937_64 rng(29);
  for (int round = 0; round < 100; ++round) {
    std::size_t n = 2 + rng() % 30;
    auto m = chain_model(n);
    auto state = broken_chain(m, n);
    auto focus = chain_focus(m, n);
    auto e = select_probe_entropy(focus, state, m);
    auto h = select_probe_halving(focus, state, m);
    ASSERT_TRUE(e.ok());
    ASSERT_TRUE(h.ok());
    // Under odd |F| two candidates tie for halving; entropy must pick one of them.
    auto left = [&](const ProbeAdvice& a) {
      return set_difference(focus, state.unique(a.probe.component, 0)->deps.focused).size();
    };
    double half = static_cast<double>(n) / 2.0;
    EXPECT_DOUBLE_EQ(std::fabs(static_cast<double>(left(e)) - half), std::fabs(static_cast<double>(left(h)) - half))
        << "n = " << n;
  }
}

TEST(Property, ProbesSplitStrictly) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 150; ++seed) {
    GeneratorConfig gc;
    gc.n = 12;
    gc.k = 3;
    gc.seed = seed;
    auto g = generate_model(gc);
    // A stuck sink-side fault, all sinks observed.
    auto clean = simulate(inject(g.model, {}), g.inputs, 1);
    Fault f;
    f.component = g.model.index("g0" + std::to_string(seed % 10));
    f.value = Value::integer(clean.at(f.component, 0).as_int() + 1);
    auto truth = simulate(inject(g.model, {f}), g.inputs, 1);
    auto o = observe_outputs(g.model, truth, g.inputs);
    for (auto rule : {Rule::R1, Rule::R2}) {
      DiagnosisConfig cfg;
      cfg.rule = rule;
      auto d = diagnose(g.model, o, cfg);
      for (const auto& focus : d.focus.focuses)
        for (auto s : {Strategy::EntropySplit, Strategy::Bounds, Strategy::Halving}) {
          auto a = select_probe(s, focus.members, d.state, g.model);
          if (!a.ok()) continue;
          ++checked;
          const auto& dep = d.state.unique(a.probe.component, a.probe.time)->deps.focused;
          auto kept = set_intersection(focus.members, dep);
          auto rest = set_difference(focus.members, dep);
          EXPECT_FALSE(kept.empty());
          EXPECT_FALSE(rest.empty());
          EXPECT_FALSE(d.state.measured(a.probe.component, a.probe.time));
          EXPECT_GE(a.criterion, 0.0);
          EXPECT_LE(a.criterion, 1.0);
        }
    }
  }
  EXPECT_GT(checked, 100u);
}
