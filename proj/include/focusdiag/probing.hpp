#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "error.hpp"
#include "member.hpp"
#include "model.hpp"
#include "propagation.hpp"

namespace focusdiag {

enum class Strategy { EntropySplit, Bounds, Halving, AssumptionCheck };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::EntropySplit: return "entropy";
    case Strategy::Bounds: return "bounds";
    case Strategy::Halving: return "halving";
    case Strategy::AssumptionCheck: return "assumption";
  }
  return "?";
}

enum class ProbeStatus { Ok, FocusExhausted, NeedsBounds };

struct ProbeAdvice {
  ProbeStatus status = ProbeStatus::FocusExhausted;
  Member probe;
  Strategy strategy = Strategy::EntropySplit;
  double criterion = 0.0;
  std::optional<std::pair<double, double>> bounds;

  bool ok() const { return status == ProbeStatus::Ok; }
};

/// 1 - prod(1 - p) over the given fault probabilities; 0 for none.
inline double prob_any_broken(std::span<const double> priors) {
  if (priors.empty()) return 0.0;
  double intact = 1.0;
  for (double p : priors) intact *= 1.0 - p;
  return 1.0 - intact;
}

/// Prior of a member: the component's fault probability, or for an
/// assumption the chance that a uniformly guessed value is wrong.
inline double member_prior(const SystemModel& model, const Member& m) {
  const Component& c = model.components.at(m.component);
  if (m.is_assumption()) return 1.0 - 1.0 / static_cast<double>(c.domain.size());
  return c.prior;
}

/// Probability that X holds a broken element. A component listed at several
/// time points counts once.
inline double prob_any_broken(const MemberSet& x, const SystemModel& model) {
  std::vector<double> priors;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& m : x) {
    Member key{m.component, 0, m.assumed};
    if (seen.insert(key.key()).second) priors.push_back(member_prior(model, m));
  }
  return prob_any_broken(priors);
}

struct ProbeCandidate {
  Member probe;
  const Prediction* prediction = nullptr;
};

/// Unmeasured observable outputs with a single evaluated prediction whose
/// focused dependency set splits F strictly. Ordered by component, then time.
inline std::vector<ProbeCandidate> probe_candidates(const MemberSet& focus, const PredictionState& state,
                                                    const SystemModel& model) {
  std::vector<ProbeCandidate> out;
  for (std::size_t c = 0; c < model.size(); ++c) {
    if (model.components[c].is_source || !model.observable[c]) continue;
    for (int t = 0; t < state.horizon(); ++t) {
      if (state.measured(c, t)) continue;
      const Prediction* p = state.unique(c, t);
      if (!p) continue;
      std::size_t shared = set_intersection(p->deps.focused, focus).size();
      if (shared == 0 || shared == focus.size()) continue;
      out.push_back({Member::of(c, t), p});
    }
  }
  return out;
}

namespace detail {

inline constexpr double kTieEpsilon = 1e-12;

inline double focus_probability(const MemberSet& focus, const SystemModel& model) {
  double pf = prob_any_broken(focus, model);
  if (!(pf > 0.0)) throw Error(ErrorCode::DegenerateFocus, "focus has zero probability of a broken member");
  return pf;
}

}  // namespace detail

/// [Pr(F - Dep^f(c)) / Pr(F), Pr(F - Dep^mf(c)) / Pr(F)].
inline std::pair<double, double> probe_bounds(const Prediction& candidate, const MemberSet& focus,
                                              const SystemModel& model) {
  double pf = detail::focus_probability(focus, model);
  double lower = prob_any_broken(set_difference(focus, candidate.deps.focused), model) / pf;
  double upper = prob_any_broken(set_difference(focus, candidate.deps.mask_free), model) / pf;
  return {lower, upper};
}

inline ProbeAdvice probe_bounds_advice(const MemberSet& focus, const PredictionState& state, const SystemModel& model) {
  ProbeAdvice best;
  best.strategy = Strategy::Bounds;
  double best_dist = 0.0;
  for (const auto& cand : probe_candidates(focus, state, model)) {
    auto [lo, hi] = probe_bounds(*cand.prediction, focus, model);
    double mid = 0.5 * (lo + hi);
    double dist = std::fabs(mid - 0.5);
    if (!best.ok() || dist < best_dist - detail::kTieEpsilon) {
      best.status = ProbeStatus::Ok;
      best.probe = cand.probe;
      best.criterion = mid;
      best.bounds = std::make_pair(lo, hi);
      best_dist = dist;
    }
  }
  return best;
}

/// Candidate whose confirmation leaves Pr(F')/Pr(F) closest to one half.
/// Only candidates with Dep^mf = Dep^f qualify; if none do, the status is
/// NeedsBounds.
inline ProbeAdvice select_probe_entropy(const MemberSet& focus, const PredictionState& state, const SystemModel& model) {
  ProbeAdvice best;
  best.strategy = Strategy::EntropySplit;
  auto candidates = probe_candidates(focus, state, model);
  if (candidates.empty()) return best;
  double pf = detail::focus_probability(focus, model);
  double best_dist = 0.0;
  for (const auto& cand : candidates) {
    if (cand.prediction->deps.mask_free != cand.prediction->deps.focused) continue;
    double ratio = prob_any_broken(set_difference(focus, cand.prediction->deps.focused), model) / pf;
    double dist = std::fabs(ratio - 0.5);
    if (!best.ok() || dist < best_dist - detail::kTieEpsilon) {
      best.status = ProbeStatus::Ok;
      best.probe = cand.probe;
      best.criterion = ratio;
      best_dist = dist;
    }
  }
  if (!best.ok()) best.status = ProbeStatus::NeedsBounds;
  return best;
}

/// Candidate leaving |F - Dep^f(c)| closest to |F| / 2.
inline ProbeAdvice select_probe_halving(const MemberSet& focus, const PredictionState& state, const SystemModel& model) {
  ProbeAdvice best;
  best.strategy = Strategy::Halving;
  if (focus.size() < 2) return best;
  double half = static_cast<double>(focus.size()) / 2.0;
  double best_dist = 0.0;
  for (const auto& cand : probe_candidates(focus, state, model)) {
    double left = static_cast<double>(set_difference(focus, cand.prediction->deps.focused).size());
    double dist = std::fabs(left - half);
    if (!best.ok() || dist < best_dist - detail::kTieEpsilon) {
      best.status = ProbeStatus::Ok;
      best.probe = cand.probe;
      best.criterion = left / static_cast<double>(focus.size());
      best_dist = dist;
    }
  }
  return best;
}

/// Dispatches on strategy; entropy falls back to bounds when no candidate has
/// equal focused and mask-free sets.
inline ProbeAdvice select_probe(Strategy strategy, const MemberSet& focus, const PredictionState& state,
                                const SystemModel& model) {
  switch (strategy) {
    case Strategy::Halving: return select_probe_halving(focus, state, model);
    case Strategy::Bounds: return probe_bounds_advice(focus, state, model);
    case Strategy::EntropySplit:
    case Strategy::AssumptionCheck: {
      auto advice = select_probe_entropy(focus, state, model);
      if (advice.status == ProbeStatus::NeedsBounds) return probe_bounds_advice(focus, state, model);
      return advice;
    }
  }
  return {};
}

}  // namespace focusdiag
