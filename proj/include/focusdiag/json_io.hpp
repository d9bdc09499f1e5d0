#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diagnosis.hpp"
#include "error.hpp"
#include "model.hpp"
#include "simulator.hpp"

namespace focusdiag {

using ojson = nlohmann::ordered_json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << text;
}

inline nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Syntax, what + ": " + e.what());
  }
}

inline Observation observation_from_json(const SystemModel& model, const nlohmann::json& j) {
  try {
    std::string id = j.at("component").get<std::string>();
    auto c = model.find(id);
    if (!c) throw Error(ErrorCode::NotFound, "observation names unknown component '" + id + "'");
    int t = j.value("time", 0);
    if (t < 0) throw Error(ErrorCode::DomainViolation, "negative observation time");
    return {*c, t, value_from_json(j.at("value"), model.components[*c].domain)};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Syntax, std::string("observation: ") + e.what());
  }
}

inline std::vector<Observation> observations_from_json(const SystemModel& model, const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::Syntax, "observations must be an array");
  std::vector<Observation> out;
  for (const auto& o : j) out.push_back(observation_from_json(model, o));
  return out;
}

inline ojson observation_to_json(const SystemModel& model, const Observation& o) {
  return {{"component", model.components[o.component].id}, {"time", o.time}, {"value", value_to_json(o.value)}};
}

inline ojson observations_to_json(const SystemModel& model, const std::vector<Observation>& obs) {
  ojson out = ojson::array();
  for (const auto& o : obs) out.push_back(observation_to_json(model, o));
  return out;
}

inline ojson member_json(const SystemModel& model, const Member& m) { return model.member_label(m); }

inline ojson set_json(const SystemModel& model, const MemberSet& s) {
  ojson out = ojson::array();
  for (const auto& m : s) out.push_back(model.member_label(m));
  return out;
}

inline ojson prediction_to_json(const SystemModel& model, const Prediction& p) {
  return {{"component", model.components[p.owner.component].id},
          {"time", p.owner.time},
          {"value", value_to_json(p.value)},
          {"origin", origin_name(p.origin)},
          {"dep", set_json(model, p.deps.dep)},
          {"focused", set_json(model, p.deps.focused)},
          {"mask_free", set_json(model, p.deps.mask_free)},
          {"assumptions", set_json(model, p.deps.assumptions)}};
}

inline ojson predictions_to_json(const SystemModel& model, const PredictionState& state) {
  ojson out = ojson::array();
  for (const auto* p : state.all()) out.push_back(prediction_to_json(model, *p));
  return out;
}

inline ojson evidence_to_json(const SystemModel& model, const Evidence& e) {
  ojson j{{"kind", e.is_conflict() ? "conflict" : "confirmation"},
          {"origin", model.components[e.origin.component].id},
          {"time", e.origin.time},
          {"source", origin_name(e.source)},
          {"predicted", value_to_json(e.predicted)},
          {"observed", value_to_json(e.observed)},
          {"members", set_json(model, e.members)}};
  if (e.is_conflict()) j["focused"] = set_json(model, e.focused);
  j["assumptions"] = set_json(model, e.assumptions);
  return j;
}

inline ojson evidence_list_json(const SystemModel& model, const std::vector<Evidence>& ev) {
  ojson out = ojson::array();
  for (const auto& e : ev) out.push_back(evidence_to_json(model, e));
  return out;
}

inline ojson focus_to_json(const SystemModel& model, const Focus& f) {
  ojson j{{"members", set_json(model, f.members)}, {"score", f.score}};
  if (f.under_assumed_broken) j["under_assumed_broken"] = model.member_label(*f.under_assumed_broken);
  return j;
}

inline ojson focuses_json(const SystemModel& model, const std::vector<Focus>& fs) {
  ojson out = ojson::array();
  for (const auto& f : fs) out.push_back(focus_to_json(model, f));
  return out;
}

inline ojson advice_to_json(const SystemModel& model, const ProbeAdvice& a) {
  ojson j{{"probe", model.components[a.probe.component].id}};
  if (model.is_temporal()) j["time"] = a.probe.time;
  j["strategy"] = strategy_name(a.strategy);
  j["criterion_value"] = a.criterion;
  if (a.bounds) j["bounds"] = {a.bounds->first, a.bounds->second};
  return j;
}

inline ojson focus_report_json(const SystemModel& model, const Diagnosis& d, const DiagnosisConfig& cfg) {
  ojson j{{"focuses", focuses_json(model, d.focus.focuses)}, {"rule", rule_name(cfg.rule)}};
  if (cfg.rule == Rule::R3 || cfg.rule == Rule::R4) j["mode"] = mode_name(cfg.mode);
  j["status"] = status_name(d.status);
  if (d.focus.inconsistent) {
    ojson origins = ojson::array();
    for (const auto& m : d.focus.inconsistent_origins) origins.push_back(model.member_label(m));
    j["inconsistent_origins"] = origins;
  }
  if (d.advice) j["advice"] = advice_to_json(model, *d.advice);
  return j;
}

inline ojson step_to_json(const SystemModel& model, const TranscriptStep& s) {
  ojson j{{"predictions", s.predictions},
          {"conflicts", s.conflicts},
          {"confirmations", s.confirmations},
          {"evidence", evidence_list_json(model, s.evidence)},
          {"focuses", focuses_json(model, s.focuses)}};
  if (s.advice) j["advice"] = advice_to_json(model, *s.advice);
  if (s.measurement) j["measurement"] = observation_to_json(model, *s.measurement);
  return j;
}

inline ojson transcript_to_json(const SystemModel& model, const Transcript& tr) {
  ojson steps = ojson::array();
  for (const auto& s : tr.steps) steps.push_back(step_to_json(model, s));
  return {{"steps", steps},
          {"outcome", outcome_name(tr.outcome)},
          {"diagnosed", set_json(model, tr.diagnosed)},
          {"probe_count", tr.probe_count}};
}

inline ojson validation_to_json(const ValidationReport& r) {
  ojson v = ojson::array();
  for (const auto& x : r.violations) v.push_back({{"code", x.code}, {"component", x.component}, {"message", x.message}});
  return {{"violations", v}, {"loops", r.loops}};
}

/// Fault file: [{component, behavior: stuck_at|intermittent_stuck_at|function_override,
/// value?, active_times?, function?}].
inline std::vector<Fault> faults_from_json(const SystemModel& model, const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::Syntax, "faults must be an array");
  std::vector<Fault> out;
  try {
    for (const auto& f : j) {
      Fault fault;
      fault.component = model.index(f.at("component").get<std::string>());
      const Component& c = model.components[fault.component];
      std::string behavior = f.value("behavior", std::string("stuck_at"));
      if (behavior == "stuck_at") {
        fault.kind = FaultKind::StuckAt;
        fault.value = value_from_json(f.at("value"), c.domain);
      } else if (behavior == "intermittent_stuck_at") {
        fault.kind = FaultKind::IntermittentStuckAt;
        fault.value = value_from_json(f.at("value"), c.domain);
        for (int t : f.at("active_times").get<std::vector<int>>()) fault.active_times.insert(t);
      } else if (behavior == "function_override") {
        fault.kind = FaultKind::FunctionOverride;
        for (const auto& b : f.at("function").at("branches")) {
          Branch br;
          if (b.contains("guard")) br.guard = Expr::parse(b["guard"].get<std::string>(), c.inputs);
          br.expr = Expr::parse(b.at("expr").get<std::string>(), c.inputs);
          auto g = br.guard.ports(), e = br.expr.ports();
          std::set_union(g.begin(), g.end(), e.begin(), e.end(), std::back_inserter(br.reads));
          fault.function.branches.push_back(std::move(br));
        }
      } else {
        throw Error(ErrorCode::InvalidFault, "unknown fault behavior '" + behavior + "'");
      }
      out.push_back(std::move(fault));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Syntax, std::string("faults: ") + e.what());
  }
  return out;
}

inline Rule parse_rule(const std::string& s) {
  if (s == "r1" || s == "R1") return Rule::R1;
  if (s == "r2" || s == "R2") return Rule::R2;
  if (s == "r3" || s == "R3") return Rule::R3;
  if (s == "r4" || s == "R4") return Rule::R4;
  throw Error(ErrorCode::Syntax, "unknown rule '" + s + "'");
}

inline CancelMode parse_mode(const std::string& s) {
  if (s == "nonint") return CancelMode::NonIntermittent;
  if (s == "int") return CancelMode::Intermittent;
  throw Error(ErrorCode::Syntax, "unknown mode '" + s + "'");
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "entropy") return Strategy::EntropySplit;
  if (s == "bounds") return Strategy::Bounds;
  if (s == "halving") return Strategy::Halving;
  throw Error(ErrorCode::Syntax, "unknown strategy '" + s + "'");
}

}  // namespace focusdiag
