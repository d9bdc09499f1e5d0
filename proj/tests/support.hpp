#pragma once

#include <string>
#include <vector>

#include <focusdiag/focusdiag.hpp>

namespace fdtest {

using namespace focusdiag;

inline std::string model_path(const std::string& name) { return std::string(FOCUSDIAG_MODELS_DIR) + "/" + name; }

inline SystemModel load(const std::string& name) { return parse_model(read_file(model_path(name))); }

inline std::vector<Observation> obs(const SystemModel& m, const std::string& json) {
  return observations_from_json(m, parse_json(json, "test observations"));
}

inline std::vector<Observation> obs_file(const SystemModel& m, const std::string& name) {
  return obs(m, read_file(model_path(name)));
}

inline std::vector<std::string> labels(const SystemModel& m, const MemberSet& s) {
  auto out = m.labels(s);
  std::sort(out.begin(), out.end());
  return out;
}

/// Members of each focus as sorted label lists, in focus order.
inline std::vector<std::vector<std::string>> focus_labels(const SystemModel& m, const std::vector<Focus>& fs) {
  std::vector<std::vector<std::string>> out;
  for (const auto& f : fs) out.push_back(labels(m, f.members));
  return out;
}

inline std::vector<std::vector<std::string>> sorted(std::vector<std::vector<std::string>> v) {
  std::sort(v.begin(), v.end());
  return v;
}

inline const Prediction& single(const PredictionState& s, const SystemModel& m, const std::string& id, int t = 0) {
  const Prediction* p = s.unique(m.index(id), t);
  if (!p) throw std::runtime_error("no unique prediction for " + id);
  return *p;
}

/// Members by label, e.g. {"a@0", "b@1"} on temporal models or {"and2"} on static ones.
inline MemberSet members(const SystemModel& m, const std::vector<std::string>& ids) {
  MemberSet out;
  for (const auto& id : ids) {
    auto at = id.find('@');
    int t = at == std::string::npos ? 0 : std::stoi(id.substr(at + 1));
    out.push_back(Member::of(m.index(id.substr(0, at)), t));
  }
  normalize(out);
  return out;
}

inline Evidence conflict(const MemberSet& kf, Member origin = {}) {
  Evidence e;
  e.kind = EvidenceKind::Conflict;
  e.origin = origin;
  e.members = e.focused = kf;
  return e;
}

inline Evidence confirmation(const MemberSet& b, Member origin = {}) {
  Evidence e;
  e.kind = EvidenceKind::Confirmation;
  e.origin = origin;
  e.members = e.focused = b;
  return e;
}

/// Plain members 0..n-1 at time 0, used by the abstract focusing tests.
inline MemberSet ids(std::initializer_list<int> xs) {
  MemberSet out;
  for (int x : xs) out.push_back(Member::of(static_cast<std::size_t>(x), 0));
  normalize(out);
  return out;
}

}  // namespace fdtest
