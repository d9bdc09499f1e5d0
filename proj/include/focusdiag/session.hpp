#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diagnosis.hpp"
#include "error.hpp"
#include "json_io.hpp"
#include "model.hpp"

namespace focusdiag {

struct SessionConfig {
  Rule rule = Rule::R2;
  CancelMode mode = CancelMode::NonIntermittent;
  Strategy strategy = Strategy::EntropySplit;

  DiagnosisConfig diagnosis() const {
    DiagnosisConfig d;
    d.rule = rule;
    d.mode = mode;
    d.strategy = strategy;
    return d;
  }
};

inline SessionConfig session_config_from_json(const nlohmann::json& j) {
  SessionConfig cfg;
  if (j.contains("rule")) cfg.rule = parse_rule(j["rule"].get<std::string>());
  if (j.contains("mode")) cfg.mode = parse_mode(j["mode"].get<std::string>());
  if (j.contains("strategy")) cfg.strategy = parse_strategy(j["strategy"].get<std::string>());
  return cfg;
}

inline ojson session_config_to_json(const SessionConfig& cfg) {
  std::string rule = rule_name(cfg.rule);
  for (auto& ch : rule) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return {{"rule", rule}, {"mode", mode_name(cfg.mode)}, {"strategy", strategy_name(cfg.strategy)}};
}

/// One interactive session. Observations are append-only and the derived
/// evidence, focuses and advice always reflect exactly those observations.
class Session {
 public:
  Session(std::string id, std::string model_id, std::shared_ptr<const SystemModel> model, SessionConfig cfg)
      : id_(std::move(id)), model_id_(std::move(model_id)), model_(std::move(model)), cfg_(cfg) {}

  const std::string& id() const { return id_; }
  const std::string& model_id() const { return model_id_; }
  const SystemModel& model() const { return *model_; }
  const SessionConfig& config() const { return cfg_; }
  SessionStatus status() const { return status_; }
  const std::vector<Observation>& observations() const { return observations_; }
  const std::optional<Diagnosis>& current() const { return current_; }
  const std::vector<ojson>& transcript() const { return transcript_; }

  bool terminal() const { return status_ != SessionStatus::Active; }

  /// Appends an observation and re-runs the diagnosis step.
  void submit(const Observation& obs) {
    if (terminal()) throw Error(ErrorCode::SessionTerminal, std::string("session is ") + status_name(status_));
    const Component& c = model_->components.at(obs.component);
    if (!c.is_source && !model_->observable[obs.component])
      throw Error(ErrorCode::NonObservable, "'" + c.id + "' is not observable");
    if (obs.time < 0 || obs.time >= model_->horizon())
      throw Error(ErrorCode::DomainViolation, "time " + std::to_string(obs.time) + " outside the model horizon");
    for (const auto& o : observations_)
      if (o.component == obs.component && o.time == obs.time)
        throw Error(ErrorCode::DuplicateMeasurement, "'" + model_->member_label(Member::of(obs.component, obs.time)) +
                                                         "' already measured");
    auto next = observations_;
    next.push_back(obs);
    Diagnosis d = diagnose(*model_, next, cfg_.diagnosis());

    ojson step{{"measurement", observation_to_json(*model_, obs)}};
    ojson delta = ojson::array();
    // Evidence is recomputed in full; the delta is whatever was not present before.
    for (const auto& e : d.evidence) {
      bool seen = false;
      if (current_)
        for (const auto& old : current_->evidence)
          if (old.origin == e.origin && old.kind == e.kind && old.source == e.source && old.members == e.members &&
              old.focused == e.focused) {
            seen = true;
            break;
          }
      if (!seen) delta.push_back(evidence_to_json(*model_, e));
    }
    step["evidence_delta"] = delta;
    step["focuses"] = focuses_json(*model_, d.focus.focuses);
    if (d.advice) step["advice"] = advice_to_json(*model_, *d.advice);
    step["status"] = status_name(d.status);

    observations_ = std::move(next);
    status_ = d.status;
    current_ = std::move(d);
    transcript_.push_back(std::move(step));
  }

  ojson view() const {
    ojson j{{"id", id_},
            {"model_id", model_id_},
            {"config", session_config_to_json(cfg_)},
            {"status", status_name(status_)},
            {"observations", observations_to_json(*model_, observations_)}};
    if (current_) {
      j["evidence"] = evidence_list_json(*model_, current_->evidence);
      j["focuses"] = focuses_json(*model_, current_->focus.focuses);
      if (current_->advice) j["advice"] = advice_to_json(*model_, *current_->advice);
      if (status_ == SessionStatus::Diagnosed) j["diagnosis"] = set_json(*model_, current_->diagnosed());
    } else {
      j["evidence"] = ojson::array();
      j["focuses"] = ojson::array();
    }
    j["transcript"] = transcript_;
    return j;
  }

 private:
  std::string id_;
  std::string model_id_;
  std::shared_ptr<const SystemModel> model_;
  SessionConfig cfg_;
  SessionStatus status_ = SessionStatus::Active;
  std::vector<Observation> observations_;
  std::optional<Diagnosis> current_;
  std::vector<ojson> transcript_;
};

/// In-memory models and sessions. The store lock guards the maps; each
/// session carries its own mutex so submits to one session are serialized
/// while other sessions proceed. With a journal directory, every model and
/// session event is appended as a JSON line and replayed by `recover()`.
class SessionStore {
 public:
  explicit SessionStore(std::optional<std::filesystem::path> journal_dir = std::nullopt)
      : journal_dir_(std::move(journal_dir)) {
    if (journal_dir_) std::filesystem::create_directories(*journal_dir_);
  }

  std::string add_model(const std::string& text) {
    auto model = std::make_shared<const SystemModel>(parse_model(text));
    auto report = validate(*model);
    if (!report.ok()) throw Error(ErrorCode::InvalidModel, report.violations.front().message);
    std::unique_lock lock(mu_);
    std::string id = "m" + std::to_string(++model_seq_);
    models_[id] = model;
    lock.unlock();
    journal("models.jsonl", ojson{{"model_id", id}, {"model", ojson::parse(text)}});
    return id;
  }

  std::shared_ptr<const SystemModel> model(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = models_.find(id);
    if (it == models_.end()) throw Error(ErrorCode::NotFound, "unknown model '" + id + "'");
    return it->second;
  }

  ojson create_session(const std::string& model_id, const SessionConfig& cfg) {
    auto m = model(model_id);
    std::unique_lock lock(mu_);
    std::string id = "s" + std::to_string(++session_seq_);
    auto entry = std::make_shared<Entry>(Session(id, model_id, m, cfg));
    sessions_[id] = entry;
    lock.unlock();
    journal(id + ".jsonl", ojson{{"event", "create"}, {"model_id", model_id}, {"config", session_config_to_json(cfg)}});
    std::lock_guard guard(entry->mu);
    return entry->session.view();
  }

  ojson submit(const std::string& session_id, const nlohmann::json& measurement) {
    auto entry = find(session_id);
    std::lock_guard guard(entry->mu);
    Observation obs = observation_from_json(entry->session.model(), measurement);
    entry->session.submit(obs);
    journal(session_id + ".jsonl",
            ojson{{"event", "measure"}, {"observation", observation_to_json(entry->session.model(), obs)}});
    return entry->session.view();
  }

  ojson get(const std::string& session_id) const {
    auto entry = find(session_id);
    std::lock_guard guard(entry->mu);
    return entry->session.view();
  }

  std::size_t session_count() const {
    std::shared_lock lock(mu_);
    return sessions_.size();
  }

  /// Rebuilds models and sessions from the journal directory.
  void recover() {
    if (!journal_dir_) return;
    auto models_file = *journal_dir_ / "models.jsonl";
    if (std::filesystem::exists(models_file)) {
      std::ifstream in(models_file);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        std::string id = j.at("model_id");
        models_[id] = std::make_shared<const SystemModel>(parse_model(j.at("model").dump()));
        model_seq_ = std::max(model_seq_, std::stoul(id.substr(1)));
      }
    }
    for (const auto& f : std::filesystem::directory_iterator(*journal_dir_)) {
      std::string name = f.path().filename().string();
      if (name == "models.jsonl" || f.path().extension() != ".jsonl") continue;
      std::string id = f.path().stem().string();
      std::ifstream in(f.path());
      std::string line;
      std::shared_ptr<Entry> entry;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (j.at("event") == "create") {
          auto it = models_.find(j.at("model_id").get<std::string>());
          if (it == models_.end()) break;
          entry = std::make_shared<Entry>(
              Session(id, it->first, it->second, session_config_from_json(j.at("config"))));
        } else if (entry) {
          entry->session.submit(observation_from_json(entry->session.model(), j.at("observation")));
        }
      }
      if (entry) {
        sessions_[id] = entry;
        session_seq_ = std::max(session_seq_, std::stoul(id.substr(1)));
      }
    }
  }

 private:
  struct Entry {
    explicit Entry(Session s) : session(std::move(s)) {}
    mutable std::mutex mu;
    Session session;
  };

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "unknown session '" + id + "'");
    return it->second;
  }

  void journal(const std::string& file, const ojson& record) {
    if (!journal_dir_) return;
    std::lock_guard guard(journal_mu_);
    std::ofstream out(*journal_dir_ / file, std::ios::app);
    out << record.dump() << '\n';
  }

  std::optional<std::filesystem::path> journal_dir_;
  mutable std::shared_mutex mu_;
  std::mutex journal_mu_;
  std::map<std::string, std::shared_ptr<const SystemModel>> models_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  unsigned long model_seq_ = 0;
  unsigned long session_seq_ = 0;
};

}  // namespace focusdiag
