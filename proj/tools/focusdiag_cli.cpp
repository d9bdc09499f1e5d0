// focusdiag command-line front end.
//
// Exit codes: 0 success, 1 domain error (invalid model, inconsistent
// evidence, no probe), 2 usage or I/O error.

#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>
#include <focusdiag/focusdiag.hpp>
#include <focusdiag/service.hpp>

namespace fd = focusdiag;

namespace {

constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

struct CommonFlags {
  std::string model;
  std::string observations;
  std::string rule = "r2";
  std::string mode = "nonint";
  std::string strategy = "entropy";
  std::string loops = "assumption";
};

fd::SystemModel load_model(const std::string& path) { return fd::parse_model(fd::read_file(path)); }

std::vector<fd::Observation> load_observations(const fd::SystemModel& model, const std::string& path) {
  if (path.empty()) return {};
  return fd::observations_from_json(model, fd::parse_json(fd::read_file(path), path));
}

fd::DiagnosisConfig diagnosis_config(const CommonFlags& f) {
  fd::DiagnosisConfig cfg;
  cfg.rule = fd::parse_rule(f.rule);
  cfg.mode = fd::parse_mode(f.mode);
  cfg.strategy = fd::parse_strategy(f.strategy);
  cfg.predict.loops = f.loops == "stateful" ? fd::LoopStrategy::Stateful : fd::LoopStrategy::Assumption;
  return cfg;
}

void print(const fd::ojson& j) { std::cout << j.dump(2) << '\n'; }

int cmd_validate(const CommonFlags& f) {
  auto model = load_model(f.model);
  auto report = fd::validate(model);
  print(fd::validation_to_json(report));
  return report.ok() ? 0 : kDomainError;
}

int cmd_predict(const CommonFlags& f) {
  auto model = load_model(f.model);
  auto obs = load_observations(model, f.observations);
  fd::PredictOptions po = diagnosis_config(f).predict;
  po.allow_partial = true;
  print(fd::predictions_to_json(model, fd::forward_predict(model, obs, po)));
  return 0;
}

int cmd_diagnose(const CommonFlags& f) {
  auto model = load_model(f.model);
  auto obs = load_observations(model, f.observations);
  auto cfg = diagnosis_config(f);
  auto d = fd::diagnose(model, obs, cfg);
  print(fd::focus_report_json(model, d, cfg));
  if (d.status == fd::SessionStatus::Inconsistent) {
    std::cerr << "inconsistent evidence: a focused conflict set is fully confirmed\n";
    return kDomainError;
  }
  return 0;
}

int cmd_probe_advise(const CommonFlags& f, const std::vector<std::string>& focus_ids) {
  auto model = load_model(f.model);
  auto obs = load_observations(model, f.observations);
  auto cfg = diagnosis_config(f);
  std::optional<fd::ProbeAdvice> advice;
  if (focus_ids.empty()) {
    advice = fd::diagnose(model, obs, cfg).advice;
  } else {
    fd::PredictOptions po = cfg.predict;
    po.allow_partial = true;
    auto state = fd::forward_predict(model, obs, po);
    fd::MemberSet focus;
    for (const auto& id : focus_ids) {
      auto at = id.find('@');
      int t = at == std::string::npos ? 0 : std::stoi(id.substr(at + 1));
      focus.push_back(fd::Member::of(model.index(id.substr(0, at)), t));
    }
    fd::normalize(focus);
    auto a = fd::select_probe(cfg.strategy, focus, state, model);
    if (a.ok()) advice = a;
  }
  if (!advice) {
    std::cerr << "no probe splits the current focus\n";
    return kDomainError;
  }
  print(fd::advice_to_json(model, *advice));
  return 0;
}

struct SimulateFlags {
  std::string faults;
  std::string out;
  std::uint64_t seed = 1;
  bool sweep = false;
  std::size_t runs = 100;
  std::size_t n = 20;
  std::size_t k = 2;
  std::size_t window = 0;
  std::size_t faults_per_run = 1;
  std::string family = "dag";
  std::string function = "gates";
};

int cmd_simulate(const CommonFlags& f, const SimulateFlags& s) {
  auto cfg = diagnosis_config(f);
  if (s.sweep) {
    fd::SweepConfig sc;
    sc.generator.family = s.family == "chain" ? fd::ModelFamily::Chain
                          : s.family == "tree" ? fd::ModelFamily::Tree
                                               : fd::ModelFamily::Dag;
    sc.generator.function = s.function == "sum" ? fd::FunctionKind::Sum
                            : s.function == "xor" ? fd::FunctionKind::Xor
                                                  : fd::FunctionKind::Gates;
    sc.generator.n = s.n;
    sc.generator.k = s.k;
    sc.generator.window = s.window;
    sc.diagnosis = cfg;
    sc.runs = s.runs;
    sc.faults_per_run = s.faults_per_run;
    std::string csv = fd::sweep_csv(fd::sweep(sc, s.seed));
    if (s.out.empty())
      std::cout << csv;
    else
      fd::write_file(s.out, csv);
    return 0;
  }
  if (f.model.empty() || s.faults.empty()) throw CLI::ValidationError("simulate", "--model and --faults are required");
  auto model = load_model(f.model);
  auto faults = fd::faults_from_json(model, fd::parse_json(fd::read_file(s.faults), s.faults));
  auto faulty = fd::inject(model, faults);

  // Source values come from the observations file when given, else from the seed.
  std::vector<fd::Observation> sources;
  for (const auto& o : load_observations(model, f.observations))
    if (model.components[o.component].is_source) sources.push_back(o);
  int horizon = model.is_temporal() ? model.horizon() : 1;
  if (sources.empty()) {
    std::mt19937_64 rng(s.seed);
    for (auto c : model.sources()) {
      const auto& dom = model.components[c].domain;
      for (int t = 0; t < horizon; ++t) {
        std::size_t pick = dom.finite() ? std::uniform_int_distribution<std::size_t>(0, dom.size() - 1)(rng) : 0;
        sources.push_back({c, t, dom.finite() ? dom.at(pick) : fd::Value::integer(static_cast<std::int64_t>(rng() % 100))});
      }
    }
  }
  auto truth = fd::simulate(faulty, sources, horizon);
  auto transcript = fd::run_session(model, faulty, cfg, fd::observe_outputs(model, truth, sources));
  auto text = fd::transcript_to_json(model, transcript).dump(2) + "\n";
  if (s.out.empty())
    std::cout << text;
  else
    fd::write_file(s.out, text);
  return transcript.outcome == fd::Outcome::Inconsistent ? kDomainError : 0;
}

int cmd_serve(const std::string& model_path, int port, const std::string& host, const std::string& journal) {
  fd::SessionStore store(journal.empty() ? std::nullopt : std::optional<std::filesystem::path>(journal));
  store.recover();
  if (!model_path.empty()) {
    std::string id = store.add_model(fd::read_file(model_path));
    std::cerr << "loaded " << model_path << " as " << id << '\n';
  }
  httplib::Server server;
  fd::install_routes(server, store);
  std::cerr << "listening on " << host << ':' << port << '\n';
  if (!server.listen(host, port)) {
    std::cerr << "cannot bind " << host << ':' << port << '\n';
    return kUsageError;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-based diagnosis with focused conflict sets"};
  app.require_subcommand(1, 1);

  CommonFlags common;
  auto add_common = [&](CLI::App* sub, bool observations) {
    sub->add_option("--model", common.model, "System model JSON")->required();
    if (observations) sub->add_option("--observations", common.observations, "Observation JSON array");
  };
  auto add_focus_flags = [&](CLI::App* sub) {
    sub->add_option("--rule", common.rule, "Focusing rule")->check(CLI::IsMember({"r1", "r2", "r3", "r4"}));
    sub->add_option("--mode", common.mode, "Cancellation mode")->check(CLI::IsMember({"nonint", "int"}));
    sub->add_option("--strategy", common.strategy, "Probe strategy")
        ->check(CLI::IsMember({"entropy", "bounds", "halving"}));
    sub->add_option("--loops", common.loops, "Loop handling")->check(CLI::IsMember({"assumption", "stateful"}));
  };

  auto* validate = app.add_subcommand("validate", "Check a model and list its loops");
  add_common(validate, false);

  auto* predict = app.add_subcommand("predict", "Dump predictions with dependency sets");
  add_common(predict, true);
  predict->add_option("--loops", common.loops, "Loop handling")->check(CLI::IsMember({"assumption", "stateful"}));

  auto* diagnose = app.add_subcommand("diagnose", "Classify evidence and compute focuses");
  add_common(diagnose, true);
  add_focus_flags(diagnose);

  std::vector<std::string> focus_ids;
  auto* probe = app.add_subcommand("probe-advise", "Recommend the next measurement");
  add_common(probe, true);
  add_focus_flags(probe);
  probe->add_option("--focus", focus_ids, "Focus members (id or id@t); default: current focuses")->delimiter(',');

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Run diagnosis sessions against injected faults");
  simulate->add_option("--model", common.model, "System model JSON");
  simulate->add_option("--observations", common.observations, "Source values (JSON observations)");
  simulate->add_option("--faults", sim.faults, "Fault list JSON");
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--out", sim.out, "Output file (transcript JSON or sweep CSV)");
  simulate->add_flag("--sweep", sim.sweep, "Run a sweep over generated models, CSV output");
  simulate->add_option("--runs", sim.runs, "Sweep runs");
  simulate->add_option("-n,--components", sim.n, "Generated components");
  simulate->add_option("-k,--fan-in", sim.k, "Generated fan-in bound");
  simulate->add_option("--window", sim.window, "DAG locality window (0 = any earlier node)");
  simulate->add_option("--faults-per-run", sim.faults_per_run, "Injected faults per run");
  simulate->add_option("--family", sim.family, "chain|tree|dag")->check(CLI::IsMember({"chain", "tree", "dag"}));
  simulate->add_option("--function", sim.function, "sum|xor|gates")->check(CLI::IsMember({"sum", "xor", "gates"}));
  add_focus_flags(simulate);

  std::string serve_model, host = "127.0.0.1", journal;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Start the HTTP session service");
  serve->add_option("--model", serve_model, "Model to preload");
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--journal", journal, "Directory for session journals");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (*validate) return cmd_validate(common);
    if (*predict) return cmd_predict(common);
    if (*diagnose) return cmd_diagnose(common);
    if (*probe) return cmd_probe_advise(common, focus_ids);
    if (*simulate) return cmd_simulate(common, sim);
    if (*serve) return cmd_serve(serve_model, port, host, journal);
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << '\n';
    return kUsageError;
  } catch (const fd::Error& e) {
    std::cerr << fd::error_code_name(e.code()) << ": " << e.what() << '\n';
    return e.code() == fd::ErrorCode::Io ? kUsageError : kDomainError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainError;
  }
  return kUsageError;
}
