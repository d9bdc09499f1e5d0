#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "member.hpp"
#include "model.hpp"
#include "propagation.hpp"

namespace focusdiag {

enum class EvidenceKind { Conflict, Confirmation };

/// A conflict set (members = K, focused = K^f) or a confirmation set
/// (members = focused = B) derived from one measurement or one looped-back
/// assumption.
struct Evidence {
  EvidenceKind kind = EvidenceKind::Conflict;
  Member origin;
  Origin source = Origin::Evaluated;
  MemberSet members;
  MemberSet focused;
  MemberSet assumptions;
  Value predicted;
  Value observed;

  bool is_conflict() const { return kind == EvidenceKind::Conflict; }
};

inline bool evidence_order(const Evidence& a, const Evidence& b) {
  return std::tie(a.origin.time, a.origin.component, a.source, a.kind, a.focused, a.members) <
         std::tie(b.origin.time, b.origin.component, b.source, b.kind, b.focused, b.members);
}

/// Compares every measurement with the predictions of its owner, and every
/// looped-back prediction with the assumption it was made under.
inline std::vector<Evidence> classify(const SystemModel& model, const PredictionState& state) {
  std::vector<Evidence> out;
  for (int t = 0; t < state.horizon(); ++t) {
    for (std::size_t c = 0; c < model.size(); ++c) {
      const Component& k = model.components[c];
      const auto& measured = state.measurement(c, t);
      if (measured && !k.is_source) {
        if (!model.observable[c])
          throw Error(ErrorCode::NonObservable, "output of '" + k.id + "' is not observable");
        for (const auto& p : state.at(c, t)) {
          if (p.origin != Origin::Evaluated) continue;
          Evidence e;
          e.origin = p.owner;
          e.source = Origin::Evaluated;
          e.predicted = p.value;
          e.observed = *measured;
          e.assumptions = p.deps.assumptions;
          if (k.domain.equal(p.value, *measured)) {
            e.kind = EvidenceKind::Confirmation;
            e.members = e.focused = p.deps.mask_free;
          } else {
            e.kind = EvidenceKind::Conflict;
            e.members = p.deps.dep;
            e.focused = p.deps.focused;
          }
          out.push_back(std::move(e));
        }
      }
      for (const auto& p : state.at(c, t)) {
        if (p.origin != Origin::Loopback) continue;
        auto a = std::find_if(p.deps.assumptions.begin(), p.deps.assumptions.end(), [&](const Member& m) {
          return m.component == c && m.time == t;
        });
        if (a == p.deps.assumptions.end()) continue;
        Value assumed = k.domain.at(static_cast<std::size_t>(a->assumed));
        Evidence e;
        e.origin = p.owner;
        e.source = Origin::Loopback;
        e.predicted = p.value;
        e.observed = assumed;
        e.assumptions = p.deps.assumptions;
        if (k.domain.equal(p.value, assumed)) {
          e.kind = EvidenceKind::Confirmation;
          e.members = e.focused = p.deps.mask_free;
        } else {
          e.kind = EvidenceKind::Conflict;
          e.members = p.deps.dep;
          e.focused = p.deps.focused;
        }
        out.push_back(std::move(e));
      }
    }
  }
  std::sort(out.begin(), out.end(), evidence_order);
  return out;
}

// ---------------------------------------------------------------------------
// Focuses

struct Focus {
  MemberSet members;
  long score = 0;
  std::optional<Member> under_assumed_broken;

  bool operator==(const Focus&) const = default;
};

struct FocusResult {
  std::vector<Focus> focuses;
  bool inconsistent = false;
  std::vector<Member> inconsistent_origins;  // conflicts whose members were all confirmed or cancelled
};

enum class Rule { R1, R2, R3, R4 };
enum class CancelMode { NonIntermittent, Intermittent };

inline const char* rule_name(Rule r) {
  switch (r) {
    case Rule::R1: return "R1";
    case Rule::R2: return "R2";
    case Rule::R3: return "R3";
    case Rule::R4: return "R4";
  }
  return "?";
}

inline const char* mode_name(CancelMode m) { return m == CancelMode::Intermittent ? "int" : "nonint"; }

/// Removes duplicates and every focus that strictly contains another; the
/// result is ordered by member list.
inline std::vector<Focus> minimize(std::vector<Focus> focuses) {
  std::sort(focuses.begin(), focuses.end(), [](const Focus& a, const Focus& b) {
    if (a.members.size() != b.members.size()) return a.members.size() < b.members.size();
    if (a.members != b.members) return a.members < b.members;
    return a.score > b.score;
  });
  std::vector<Focus> kept;
  std::unordered_map<Member, std::vector<std::size_t>, MemberHash> postings;
  std::vector<std::size_t> hits;
  std::vector<std::size_t> touched;
  for (auto& f : focuses) {
    if (!kept.empty() && kept.back().members == f.members) continue;
    bool dominated = false;
    touched.clear();
    for (const auto& m : f.members) {
      auto it = postings.find(m);
      if (it == postings.end()) continue;
      for (auto g : it->second) {
        if (hits.size() <= g) hits.resize(g + 1, 0);
        if (hits[g] == 0) touched.push_back(g);
        if (++hits[g] == kept[g].members.size()) dominated = true;
      }
      if (dominated) break;
    }
    for (auto g : touched) hits[g] = 0;
    if (dominated) continue;
    for (const auto& m : f.members) postings[m].push_back(kept.size());
    kept.push_back(std::move(f));
  }
  std::sort(kept.begin(), kept.end(), [](const Focus& a, const Focus& b) { return a.members < b.members; });
  return kept;
}

namespace detail {

/// Member identity ignoring time: the unit Rules 3 and 4 reason about.
inline Member timeless(const Member& m) { return {m.component, 0, m.assumed}; }

using MemberCount = std::unordered_map<Member, long, MemberHash>;

inline void split(const std::vector<Evidence>& evidence, std::vector<const MemberSet*>& conflicts,
                  std::vector<const MemberSet*>& confirmations, std::vector<Member>* origins = nullptr) {
  for (const auto& e : evidence) {
    if (e.is_conflict()) {
      conflicts.push_back(&e.focused);
      if (origins) origins->push_back(e.origin);
    } else {
      confirmations.push_back(&e.focused);
    }
  }
}

inline FocusResult argmax_focuses(const std::vector<const MemberSet*>& conflicts, const std::vector<Member>& origins,
                                  const auto& candidate, const auto& score) {
  FocusResult r;
  std::vector<Focus> raw;
  for (std::size_t s = 0; s < conflicts.size(); ++s) {
    Focus f;
    bool any = false;
    for (const auto& m : *conflicts[s]) {
      if (!candidate(s, m)) continue;
      long v = score(s, m);
      if (!any || v > f.score) {
        f.members.clear();
        f.score = v;
        any = true;
      }
      if (v == f.score) f.members.push_back(m);
    }
    if (!any) {
      r.inconsistent = true;
      if (s < origins.size()) r.inconsistent_origins.push_back(origins[s]);
      continue;
    }
    raw.push_back(std::move(f));
  }
  r.focuses = minimize(std::move(raw));
  return r;
}

/// Timeless-key focus: scores keys, then emits every timed occurrence of the winners.
inline FocusResult argmax_keyed(const std::vector<const MemberSet*>& conflicts, const std::vector<Member>& origins,
                                const auto& candidate, const auto& score) {
  FocusResult r;
  std::vector<Focus> raw;
  for (std::size_t s = 0; s < conflicts.size(); ++s) {
    MemberSet keys;
    keys.reserve(conflicts[s]->size());
    for (const auto& m : *conflicts[s]) keys.push_back(timeless(m));
    // Already ordered unless a component occurs at several times.
    if (!std::is_sorted(keys.begin(), keys.end())) std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    MemberSet best;
    long top = 0;
    bool any = false;
    for (const auto& key : keys) {
      if (!candidate(s, key)) continue;
      long v = score(s, key);
      if (!any || v > top) {
        best.clear();
        top = v;
        any = true;
      }
      if (v == top) best.push_back(key);
    }
    if (!any) {
      r.inconsistent = true;
      if (s < origins.size()) r.inconsistent_origins.push_back(origins[s]);
      continue;
    }
    Focus f;
    f.score = top;
    for (const auto& m : *conflicts[s])
      if (std::binary_search(best.begin(), best.end(), timeless(m))) f.members.push_back(m);
    raw.push_back(std::move(f));
  }
  r.focuses = minimize(std::move(raw));
  return r;
}

/// Occurrence times of each timeless key, over a collection of sets.
struct TimeIndex {
  std::unordered_map<Member, std::vector<int>, MemberHash> max_times;  // per key: max time in each set containing it
  std::unordered_map<Member, std::vector<std::size_t>, MemberHash> postings;  // exact member -> set indices
  MemberCount key_sets;  // number of sets containing the key at any time

  explicit TimeIndex(const std::vector<const MemberSet*>& sets) {
    for (std::size_t i = 0; i < sets.size(); ++i) {
      std::unordered_map<Member, int, MemberHash> local;
      for (const auto& m : *sets[i]) {
        postings[m].push_back(i);
        auto key = timeless(m);
        auto [it, fresh] = local.emplace(key, m.time);
        if (!fresh) it->second = std::max(it->second, static_cast<int>(m.time));
      }
      for (const auto& [key, t] : local) {
        max_times[key].push_back(t);
        ++key_sets[key];
      }
    }
    for (auto& [key, times] : max_times) std::sort(times.begin(), times.end());
  }

  long sets_reaching(const Member& key, int t) const {
    auto it = max_times.find(key);
    if (it == max_times.end()) return 0;
    return static_cast<long>(it->second.end() - std::lower_bound(it->second.begin(), it->second.end(), t));
  }

  /// Number of sets containing every listed exact member.
  long sets_containing_all(const std::vector<Member>& members) const {
    if (members.empty()) return 0;
    auto it = postings.find(members.front());
    if (it == postings.end()) return 0;
    if (members.size() == 1) return static_cast<long>(it->second.size());
    std::vector<std::size_t> common = it->second;
    for (std::size_t i = 1; i < members.size() && !common.empty(); ++i) {
      auto jt = postings.find(members[i]);
      if (jt == postings.end()) return 0;
      std::vector<std::size_t> next;
      std::set_intersection(common.begin(), common.end(), jt->second.begin(), jt->second.end(),
                            std::back_inserter(next));
      common.swap(next);
    }
    return static_cast<long>(common.size());
  }
};

/// Members of a normalized set sharing `key`'s component and assumption.
/// Sets are ordered by component first, so the scan stays within one run.
inline std::vector<Member> occurrences(const MemberSet& set, const Member& key) {
  std::vector<Member> out;
  auto first = std::lower_bound(set.begin(), set.end(), key.component,
                                [](const Member& m, std::uint32_t c) { return m.component < c; });
  for (auto it = first; it != set.end() && it->component == key.component; ++it)
    if (it->assumed == key.assumed) out.push_back(*it);
  return out;
}

}  // namespace detail

/// Focus on members of each focused conflict set that appear in no
/// confirmation set and in the most other focused conflict sets.
inline FocusResult focus_rule1(const std::vector<Evidence>& evidence) {
  std::vector<const MemberSet*> conflicts, confirmations;
  std::vector<Member> origins;
  detail::split(evidence, conflicts, confirmations, &origins);
  std::unordered_set<Member, MemberHash> confirmed;
  for (const auto* b : confirmations) confirmed.insert(b->begin(), b->end());
  detail::MemberCount count;
  for (const auto* k : conflicts)
    for (const auto& m : *k) ++count[m];
  return detail::argmax_focuses(
      conflicts, origins, [&](std::size_t, const Member& m) { return !confirmed.count(m); },
      [&](std::size_t, const Member& m) { return count[m] - 1; });
}

/// Focus on members maximising (#focused conflict sets containing them) minus
/// (#confirmation sets containing them). Assumptions are not discounted by
/// confirmations: a confirmed assumption is what a loop at equilibrium produces.
inline FocusResult focus_rule2(const std::vector<Evidence>& evidence) {
  std::vector<const MemberSet*> conflicts, confirmations;
  std::vector<Member> origins;
  detail::split(evidence, conflicts, confirmations, &origins);
  detail::MemberCount count, confirmed;
  for (const auto* k : conflicts)
    for (const auto& m : *k) ++count[m];
  for (const auto* b : confirmations)
    for (const auto& m : *b) ++confirmed[m];
  return detail::argmax_focuses(
      conflicts, origins, [](std::size_t, const Member&) { return true; },
      [&](std::size_t, const Member& m) {
        auto it = confirmed.find(m);
        long minus = (m.is_assumption() || it == confirmed.end()) ? 0 : it->second;
        return count[m] - minus;
      });
}

namespace detail {

inline bool cancelled_key(const Member& key, const MemberSet& kf, const TimeIndex& confirmations, CancelMode mode) {
  auto occ = occurrences(kf, key);
  if (occ.empty()) return false;
  if (mode == CancelMode::NonIntermittent) {
    int latest = 0;
    for (const auto& m : occ) latest = std::max(latest, static_cast<int>(m.time));
    return confirmations.sets_reaching(key, latest) > 0;
  }
  for (const auto& m : occ)
    if (!confirmations.postings.count(m)) return false;
  return true;
}

}  // namespace detail

/// Whether component `c` is cancelled for the focused conflict set `kf`.
/// A component that does not occur in `kf` is reported as not cancelled.
inline bool cancelled(std::size_t c, const Evidence& kf, const std::vector<Evidence>& confirmations, CancelMode mode) {
  std::vector<const MemberSet*> sets;
  for (const auto& e : confirmations)
    if (!e.is_conflict()) sets.push_back(&e.focused);
  detail::TimeIndex index(sets);
  return detail::cancelled_key(Member::of(c, 0), kf.focused, index, mode);
}

/// Rule 1 with cancellation in place of confirmation membership.
inline FocusResult focus_rule3(const std::vector<Evidence>& evidence, CancelMode mode) {
  std::vector<const MemberSet*> conflicts, confirmations;
  std::vector<Member> origins;
  detail::split(evidence, conflicts, confirmations, &origins);
  detail::TimeIndex conf(confirmations), conflict_index(conflicts);
  return detail::argmax_keyed(
      conflicts, origins,
      [&](std::size_t s, const Member& key) { return !detail::cancelled_key(key, *conflicts[s], conf, mode); },
      [&](std::size_t, const Member& key) { return conflict_index.key_sets[key] - 1; });
}

/// Rule 2 with the number of confirmation sets that cancel the member for the
/// seeding conflict set as the subtracted count.
inline FocusResult focus_rule4(const std::vector<Evidence>& evidence, CancelMode mode) {
  std::vector<const MemberSet*> conflicts, confirmations;
  std::vector<Member> origins;
  detail::split(evidence, conflicts, confirmations, &origins);
  detail::TimeIndex conf(confirmations), conflict_index(conflicts);
  return detail::argmax_keyed(
      conflicts, origins, [](std::size_t, const Member&) { return true; },
      [&](std::size_t s, const Member& key) {
        long count = conflict_index.key_sets[key];
        if (key.is_assumption()) return count;
        auto occ = detail::occurrences(*conflicts[s], key);
        long cancelling = 0;
        if (mode == CancelMode::NonIntermittent) {
          int latest = 0;
          for (const auto& m : occ) latest = std::max(latest, static_cast<int>(m.time));
          cancelling = conf.sets_reaching(key, latest);
        } else {
          cancelling = conf.sets_containing_all(occ);
        }
        return count - cancelling;
      });
}

inline FocusResult apply_rule(Rule rule, const std::vector<Evidence>& evidence, CancelMode mode = CancelMode::NonIntermittent) {
  switch (rule) {
    case Rule::R1: return focus_rule1(evidence);
    case Rule::R2: return focus_rule2(evidence);
    case Rule::R3: return focus_rule3(evidence, mode);
    case Rule::R4: return focus_rule4(evidence, mode);
  }
  return {};
}

/// Focuses that Rule 2 cannot see while `e` is considered correct: with `e`
/// assumed broken, conflicts containing `e` are explained, and every
/// confirmation containing `e` must hide a second fault outside those conflicts.
inline FocusResult supplementary_focus(const Member& e, const std::vector<Evidence>& evidence) {
  bool confirmed = std::any_of(evidence.begin(), evidence.end(),
                               [&](const Evidence& x) { return !x.is_conflict() && contains(x.focused, e); });
  if (!confirmed) return {};
  MemberSet delta;
  for (const auto& x : evidence)
    if (x.is_conflict() && contains(x.focused, e)) delta = set_union(delta, x.focused);
  std::vector<Evidence> transformed;
  for (const auto& x : evidence) {
    if (x.is_conflict()) {
      if (!contains(x.focused, e)) transformed.push_back(x);
    } else if (contains(x.focused, e)) {
      Evidence k = x;
      k.kind = EvidenceKind::Conflict;
      k.focused = set_difference(x.focused, delta);
      k.members = k.focused;
      if (!k.focused.empty()) transformed.push_back(std::move(k));
    } else {
      transformed.push_back(x);
    }
  }
  bool any_conflict = std::any_of(transformed.begin(), transformed.end(), [](const Evidence& x) { return x.is_conflict(); });
  if (!any_conflict) return {};
  auto r = focus_rule2(transformed);
  for (auto& f : r.focuses) f.under_assumed_broken = e;
  return r;
}

/// Conflict sets with confirmed members removed (K-bar).
inline std::vector<MemberSet> reduce_by_confirmations(const std::vector<MemberSet>& conflicts,
                                                      const std::vector<MemberSet>& confirmations) {
  MemberSet confirmed;
  for (const auto& b : confirmations) confirmed = set_union(confirmed, b);
  std::vector<MemberSet> out;
  out.reserve(conflicts.size());
  for (const auto& k : conflicts) out.push_back(set_difference(k, confirmed));
  return out;
}

/// Number of sets in `sets` that do not contain `c`: Rule 1's bound on the
/// additional broken components needed if `c` is broken.
inline std::size_t uncovered_conflict_count(const Member& c, const std::vector<MemberSet>& sets) {
  return static_cast<std::size_t>(
      std::count_if(sets.begin(), sets.end(), [&](const MemberSet& s) { return !contains(s, c); }));
}

}  // namespace focusdiag
