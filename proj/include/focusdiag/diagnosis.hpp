#pragma once

#include <algorithm>
#include <chrono>
#include <optional>
#include <vector>

#include "focusing.hpp"
#include "model.hpp"
#include "probing.hpp"
#include "propagation.hpp"

namespace focusdiag {

enum class SessionStatus { Active, Diagnosed, Exhausted, Inconsistent };

inline const char* status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::Active: return "active";
    case SessionStatus::Diagnosed: return "diagnosed";
    case SessionStatus::Exhausted: return "exhausted";
    case SessionStatus::Inconsistent: return "inconsistent";
  }
  return "?";
}

struct DiagnosisConfig {
  Rule rule = Rule::R2;
  CancelMode mode = CancelMode::NonIntermittent;
  Strategy strategy = Strategy::EntropySplit;
  PredictOptions predict;
};

struct Diagnosis {
  PredictionState state;
  std::vector<Evidence> evidence;
  FocusResult focus;
  std::optional<ProbeAdvice> advice;
  SessionStatus status = SessionStatus::Active;
  std::size_t conflicts = 0;
  std::size_t confirmations = 0;
  double rule_micros = 0.0;

  /// Members of singleton focuses (the diagnosis once status is Diagnosed).
  MemberSet diagnosed() const {
    MemberSet out;
    for (const auto& f : focus.focuses)
      if (f.members.size() == 1) out.push_back(f.members.front());
    normalize(out);
    return out;
  }
};

/// Focuses ordered by probability of holding a broken member, highest first.
inline std::vector<const Focus*> focuses_by_probability(const std::vector<Focus>& focuses, const SystemModel& model) {
  std::vector<std::pair<double, const Focus*>> ranked;
  for (const auto& f : focuses) ranked.emplace_back(prob_any_broken(f.members, model), &f);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<const Focus*> out;
  for (const auto& r : ranked) out.push_back(r.second);
  return out;
}

/// One pass of predict, classify, focus and advise over the observations so far.
inline Diagnosis diagnose(const SystemModel& model, const std::vector<Observation>& observations,
                          const DiagnosisConfig& config = {}) {
  Diagnosis d;
  PredictOptions po = config.predict;
  po.allow_partial = true;
  d.state = forward_predict(model, observations, po);
  d.evidence = classify(model, d.state);
  for (const auto& e : d.evidence) (e.is_conflict() ? d.conflicts : d.confirmations)++;
  if (d.conflicts == 0) return d;

  auto start = std::chrono::steady_clock::now();
  d.focus = apply_rule(config.rule, d.evidence, config.mode);
  d.rule_micros = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  if (d.focus.inconsistent) {
    d.status = SessionStatus::Inconsistent;
    return d;
  }

  // An assumption in a focus is checked by measuring the assumed wire itself.
  for (const auto& f : d.focus.focuses) {
    for (const auto& m : f.members) {
      if (!m.is_assumption()) continue;
      if (!model.observable[m.component] || d.state.measured(m.component, m.time)) continue;
      ProbeAdvice a;
      a.status = ProbeStatus::Ok;
      a.probe = Member::of(m.component, m.time);
      a.strategy = Strategy::AssumptionCheck;
      a.criterion = 1.0 / static_cast<double>(model.components[m.component].domain.size());
      d.advice = a;
      return d;
    }
  }

  bool all_single = std::all_of(d.focus.focuses.begin(), d.focus.focuses.end(), [](const Focus& f) {
    return f.members.size() == 1 && !f.members.front().is_assumption();
  });
  if (all_single) {
    d.status = SessionStatus::Diagnosed;
    return d;
  }
  for (const Focus* f : focuses_by_probability(d.focus.focuses, model)) {
    if (f->members.size() < 2) continue;
    auto advice = select_probe(config.strategy, f->members, d.state, model);
    if (advice.ok()) {
      d.advice = advice;
      return d;
    }
  }
  d.status = SessionStatus::Exhausted;
  return d;
}

}  // namespace focusdiag
