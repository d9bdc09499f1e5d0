#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "expression.hpp"
#include "member.hpp"
#include "value.hpp"

namespace focusdiag {

struct Branch {
  Expr guard;  // empty guard always fires
  Expr expr;
  std::vector<std::size_t> reads;
};

struct FunctionSpec {
  std::vector<Branch> branches;
  std::vector<bool> masking;  // per input port
};

struct StatefulSpec {
  int delay = 1;
  std::optional<Value> initial;
};

struct Component {
  std::string id;
  bool is_source = false;
  std::vector<std::string> inputs;
  FunctionSpec function;
  double prior = 1e-4;
  std::optional<StatefulSpec> stateful;
  Domain domain;
};

struct Connection {
  std::size_t from = 0;
  std::size_t to = 0;
  std::size_t port = 0;

  auto operator<=>(const Connection&) const = default;
};

struct Observation {
  std::size_t component = 0;
  int time = 0;
  Value value;
};

/// Immutable system description. Components are stored in lexicographic id
/// order, so index order and id order coincide.
class SystemModel {
 public:
  std::vector<Component> components;
  std::vector<Connection> connections;
  std::vector<bool> observable;
  double epsilon = 0.05;
  std::optional<int> time_horizon;

  std::size_t size() const { return components.size(); }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = std::lower_bound(components.begin(), components.end(), id,
                               [](const Component& c, const std::string& key) { return c.id < key; });
    if (it == components.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - components.begin());
  }

  std::size_t index(const std::string& id) const {
    auto i = find(id);
    if (!i) throw Error(ErrorCode::NotFound, "unknown component '" + id + "'");
    return *i;
  }

  /// Driver of each input port (first connection wins; duplicates are reported by validate).
  const std::vector<std::vector<std::optional<std::size_t>>>& drivers() const { return drivers_; }
  /// (consumer, port) pairs fed by each component's output.
  const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& consumers() const {
    return consumers_;
  }

  bool is_temporal() const {
    if (time_horizon) return true;
    return std::any_of(components.begin(), components.end(),
                       [](const Component& c) { return c.stateful.has_value(); });
  }

  int horizon() const { return time_horizon.value_or(1); }

  std::vector<std::size_t> sources() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
      if (components[i].is_source) out.push_back(i);
    return out;
  }

  std::string member_label(const Member& m) const {
    const Component& c = components.at(m.component);
    std::string at = is_temporal() ? "@" + std::to_string(m.time) : "";
    if (!m.is_assumption()) return c.id + at;
    return "output(" + c.id + ")" + at + "=" +
           c.domain.at(static_cast<std::size_t>(m.assumed)).to_string();
  }

  std::vector<std::string> labels(const MemberSet& s) const {
    std::vector<std::string> out;
    out.reserve(s.size());
    for (const auto& m : s) out.push_back(member_label(m));
    return out;
  }

  /// Rebuilds the driver/consumer indexes; called after components or connections change.
  void index_connections() {
    drivers_.assign(size(), {});
    consumers_.assign(size(), {});
    for (std::size_t i = 0; i < size(); ++i) drivers_[i].assign(components[i].inputs.size(), std::nullopt);
    for (const auto& c : connections) {
      if (!drivers_[c.to][c.port]) drivers_[c.to][c.port] = c.from;
      consumers_[c.from].emplace_back(c.to, c.port);
    }
    for (auto& list : consumers_) std::sort(list.begin(), list.end());
  }

 private:
  std::vector<std::vector<std::optional<std::size_t>>> drivers_;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> consumers_;
};

// ---------------------------------------------------------------------------
// Strongly connected components

namespace detail {

/// Iterative Tarjan over an adjacency list. Components come out in reverse
/// topological order of the condensation; each is sorted.
inline std::vector<std::vector<std::size_t>> tarjan(const std::vector<std::vector<std::size_t>>& adj) {
  const std::size_t n = adj.size();
  constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, unvisited), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> out;
  std::size_t counter = 0;
  std::vector<std::pair<std::size_t, std::size_t>> frames;  // (node, next edge)

  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != unvisited) continue;
    frames.emplace_back(root, 0);
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      auto& [v, edge] = frames.back();
      if (edge < adj[v].size()) {
        std::size_t w = adj[v][edge++];
        if (index[w] == unvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      std::size_t node = v;
      frames.pop_back();
      if (!frames.empty()) low[frames.back().first] = std::min(low[frames.back().first], low[node]);
      if (low[node] == index[node]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != node);
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
      }
    }
  }
  return out;
}

}  // namespace detail

/// Same-time dependency graph: edges driver -> consumer, minus edges into
/// stateful components and edges out of components flagged in `cut_outgoing`.
inline std::vector<std::vector<std::size_t>> instant_graph(const SystemModel& model,
                                                           const std::vector<bool>& cut_outgoing = {}) {
  std::vector<std::vector<std::size_t>> adj(model.size());
  for (std::size_t d = 0; d < model.size(); ++d) {
    if (!cut_outgoing.empty() && cut_outgoing[d]) continue;
    for (const auto& [consumer, port] : model.consumers()[d]) {
      (void)port;
      if (model.components[consumer].stateful) continue;
      adj[d].push_back(consumer);
    }
    std::sort(adj[d].begin(), adj[d].end());
    adj[d].erase(std::unique(adj[d].begin(), adj[d].end()), adj[d].end());
  }
  return adj;
}

inline bool is_loop(const std::vector<std::size_t>& scc, const std::vector<std::vector<std::size_t>>& adj) {
  if (scc.size() > 1) return true;
  const auto& out = adj[scc.front()];
  return std::find(out.begin(), out.end(), scc.front()) != out.end();
}

/// Components in topological order of the condensation, grouped by SCC.
inline std::vector<std::vector<std::size_t>> condensation_order(const std::vector<std::vector<std::size_t>>& adj) {
  auto sccs = detail::tarjan(adj);
  std::reverse(sccs.begin(), sccs.end());
  return sccs;
}

/// Loops of the model (non-trivial SCCs), each as a sorted list of indices.
inline std::vector<std::vector<std::size_t>> find_loops(const SystemModel& model) {
  auto adj = instant_graph(model);
  std::vector<std::vector<std::size_t>> loops;
  for (auto& scc : detail::tarjan(adj))
    if (is_loop(scc, adj)) loops.push_back(std::move(scc));
  std::sort(loops.begin(), loops.end());
  return loops;
}

// ---------------------------------------------------------------------------
// Document parsing

namespace detail {

inline std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] inline void bad_document(const std::string& what) {
  throw Error(ErrorCode::Syntax, "model document: " + what);
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) bad_document(where + " is missing '" + key + "'");
  return *it;
}

inline Domain parse_domain(const nlohmann::json& j, const std::string& where) {
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s == "bool") return Domain::boolean();
    if (s == "int") return Domain::integer();
    if (s == "real") return Domain::real();
    bad_document(where + ": unknown domain '" + s + "'");
  }
  if (!j.is_object()) bad_document(where + ": domain must be a string or object");
  std::string type = require(j, "type", where + " domain").get<std::string>();
  if (type == "real") return Domain::real(j.value("tolerance", 0.0));
  if (type == "enum") {
    auto symbols = require(j, "values", where + " domain").get<std::vector<std::string>>();
    if (symbols.empty()) bad_document(where + ": enum domain needs values");
    auto sorted = symbols;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      bad_document(where + ": duplicate enum value");
    return Domain::enumeration(std::move(symbols));
  }
  if (type == "bool") return Domain::boolean();
  if (type == "int") return Domain::integer();
  bad_document(where + ": unknown domain type '" + type + "'");
}

inline nlohmann::ordered_json domain_to_json(const Domain& d) {
  switch (d.kind) {
    case ValueKind::Boolean: return "bool";
    case ValueKind::Integer: return "int";
    case ValueKind::Real:
      if (d.tolerance == 0.0) return "real";
      return nlohmann::ordered_json{{"type", "real"}, {"tolerance", d.tolerance}};
    case ValueKind::Enum: return nlohmann::ordered_json{{"type", "enum"}, {"values", d.symbols}};
  }
  return "bool";
}

}  // namespace detail

/// Parses a JSON scalar into `domain` (Booleans also accept 0/1, enums take symbols).
inline Value value_from_json(const nlohmann::json& j, const Domain& domain) {
  Value raw;
  if (j.is_boolean()) raw = Value::boolean(j.get<bool>());
  else if (j.is_number_integer()) raw = Value::integer(j.get<std::int64_t>());
  else if (j.is_number()) raw = Value::real(j.get<double>());
  else if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (domain.kind == ValueKind::Boolean && (s == "true" || s == "1")) raw = Value::boolean(true);
    else if (domain.kind == ValueKind::Boolean && (s == "false" || s == "0")) raw = Value::boolean(false);
    else raw = Value::symbol(s);
  } else {
    throw Error(ErrorCode::DomainViolation, "value " + j.dump() + " is not a scalar");
  }
  if (domain.kind == ValueKind::Boolean && raw.kind() == ValueKind::Integer && raw.as_int() != 0 &&
      raw.as_int() != 1)
    throw Error(ErrorCode::DomainViolation, "value " + j.dump() + " is not a Boolean");
  return domain.coerce(raw);
}

inline nlohmann::ordered_json value_to_json(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Boolean: return v.as_bool() ? 1 : 0;
    case ValueKind::Integer: return v.as_int();
    case ValueKind::Real: return v.as_real();
    case ValueKind::Enum: return v.as_symbol();
  }
  return nullptr;
}

inline SystemModel parse_model(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Syntax, "model document: syntax error at " +
                                       detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1) + ": " +
                                       e.what());
  }
  if (!doc.is_object()) detail::bad_document("top level must be an object");

  SystemModel model;
  try {
    const auto& comps = detail::require(doc, "components", "document");
    if (!comps.is_array()) detail::bad_document("'components' must be an array");
    std::vector<std::pair<std::string, const nlohmann::json*>> order;
    for (const auto& c : comps) {
      if (!c.is_object()) detail::bad_document("component entries must be objects");
      std::string id = detail::require(c, "id", "component").get<std::string>();
      if (id.empty()) detail::bad_document("component id must be non-empty");
      if (id.find('.') != std::string::npos) detail::bad_document("component id '" + id + "' contains '.'");
      order.emplace_back(id, &c);
    }
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < order.size(); ++i)
      if (order[i].first == order[i - 1].first)
        throw Error(ErrorCode::DuplicateComponent, "duplicate component id '" + order[i].first + "'");

    for (const auto& [id, jp] : order) {
      const auto& j = *jp;
      Component comp;
      comp.id = id;
      std::string where = "component '" + id + "'";
      std::string type = j.value("type", std::string("function"));
      if (type != "source" && type != "function") detail::bad_document(where + ": unknown type '" + type + "'");
      comp.is_source = type == "source";
      if (j.contains("domain")) comp.domain = detail::parse_domain(j["domain"], where);
      comp.prior = j.value("prior", 1e-4);
      comp.inputs = j.value("inputs", std::vector<std::string>{});
      for (const auto& p : comp.inputs)
        if (p.empty()) detail::bad_document(where + ": empty port name");
      {
        auto sorted = comp.inputs;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
          detail::bad_document(where + ": duplicate input port");
      }
      comp.function.masking.assign(comp.inputs.size(), false);
      if (j.contains("function")) {
        const auto& f = j["function"];
        for (const auto& b : detail::require(f, "branches", where + " function")) {
          Branch br;
          if (b.contains("guard") && !b["guard"].is_null()) {
            br.guard = b["guard"].is_boolean() ? Expr::constant(Value::boolean(b["guard"].get<bool>()))
                                               : Expr::parse(b["guard"].get<std::string>(), comp.inputs);
          }
          const auto& ej = detail::require(b, "expr", where + " branch");
          if (ej.is_string()) br.expr = Expr::parse(ej.get<std::string>(), comp.inputs);
          else br.expr = Expr::constant(value_from_json(ej, comp.domain));
          if (b.contains("reads")) {
            for (const auto& r : b["reads"].get<std::vector<std::string>>()) {
              auto it = std::find(comp.inputs.begin(), comp.inputs.end(), r);
              if (it == comp.inputs.end()) detail::bad_document(where + ": reads unknown port '" + r + "'");
              br.reads.push_back(static_cast<std::size_t>(it - comp.inputs.begin()));
            }
            std::sort(br.reads.begin(), br.reads.end());
            br.reads.erase(std::unique(br.reads.begin(), br.reads.end()), br.reads.end());
          } else {
            auto g = br.guard.ports(), e = br.expr.ports();
            std::set_union(g.begin(), g.end(), e.begin(), e.end(), std::back_inserter(br.reads));
          }
          // Literal enum outputs must belong to the declared domain.
          if (comp.domain.kind == ValueKind::Enum && br.expr.ports().empty()) {
            auto lit = br.expr.evaluate({});
            if (lit && lit->kind() == ValueKind::Enum) comp.domain.coerce(*lit);
          }
          comp.function.branches.push_back(std::move(br));
        }
        for (const auto& m : f.value("masking", std::vector<std::string>{})) {
          auto it = std::find(comp.inputs.begin(), comp.inputs.end(), m);
          if (it == comp.inputs.end()) detail::bad_document(where + ": masking names unknown port '" + m + "'");
          comp.function.masking[static_cast<std::size_t>(it - comp.inputs.begin())] = true;
        }
      } else if (!comp.is_source) {
        detail::bad_document(where + " has no function");
      }
      if (j.contains("stateful") && !j["stateful"].is_null()) {
        const auto& s = j["stateful"];
        StatefulSpec spec;
        spec.delay = s.value("delay", 1);
        if (s.contains("initial")) spec.initial = value_from_json(s["initial"], comp.domain);
        comp.stateful = spec;
      }
      model.components.push_back(std::move(comp));
    }

    auto endpoint = [&](const std::string& text, bool input) -> std::pair<std::size_t, std::string> {
      auto dot = text.find('.');
      std::string id = text.substr(0, dot);
      std::string port = dot == std::string::npos ? "" : text.substr(dot + 1);
      auto idx = model.find(id);
      if (!idx) throw Error(ErrorCode::DanglingConnection, "connection names missing component '" + id + "'");
      if (input && port.empty())
        throw Error(ErrorCode::DanglingConnection, "connection target '" + text + "' needs a port");
      if (!input && !port.empty() && port != "out")
        throw Error(ErrorCode::DanglingConnection, "connection source '" + text + "' must be an output");
      return {*idx, port};
    };
    for (const auto& c : doc.value("connections", nlohmann::json::array())) {
      auto [from, unused] = endpoint(detail::require(c, "from", "connection").get<std::string>(), false);
      (void)unused;
      auto [to, port] = endpoint(detail::require(c, "to", "connection").get<std::string>(), true);
      const auto& inputs = model.components[to].inputs;
      auto it = std::find(inputs.begin(), inputs.end(), port);
      if (it == inputs.end())
        throw Error(ErrorCode::DanglingConnection,
                    "component '" + model.components[to].id + "' has no input port '" + port + "'");
      model.connections.push_back({from, to, static_cast<std::size_t>(it - inputs.begin())});
    }
    std::sort(model.connections.begin(), model.connections.end(),
              [](const Connection& a, const Connection& b) {
                return std::tie(a.to, a.port, a.from) < std::tie(b.to, b.port, b.from);
              });

    model.observable.assign(model.size(), false);
    for (const auto& o : doc.value("observables", std::vector<std::string>{})) {
      auto idx = model.find(o);
      if (!idx) throw Error(ErrorCode::DanglingConnection, "observable names missing component '" + o + "'");
      model.observable[*idx] = true;
    }
    model.epsilon = doc.value("epsilon", 0.05);
    if (doc.contains("time_horizon") && !doc["time_horizon"].is_null())
      model.time_horizon = doc["time_horizon"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    detail::bad_document(e.what());
  }
  model.index_connections();
  return model;
}

inline nlohmann::ordered_json model_to_json(const SystemModel& model) {
  using oj = nlohmann::ordered_json;
  oj comps = oj::array();
  for (const auto& c : model.components) {
    oj j;
    j["id"] = c.id;
    j["type"] = c.is_source ? "source" : "function";
    j["inputs"] = c.inputs;
    if (!c.is_source) {
      oj branches = oj::array();
      for (const auto& b : c.function.branches) {
        oj bj;
        if (!b.guard.empty()) bj["guard"] = b.guard.text();
        std::vector<std::string> reads;
        for (auto p : b.reads) reads.push_back(c.inputs[p]);
        bj["reads"] = reads;
        bj["expr"] = b.expr.text();
        branches.push_back(bj);
      }
      std::vector<std::string> masking;
      for (std::size_t p = 0; p < c.inputs.size(); ++p)
        if (c.function.masking[p]) masking.push_back(c.inputs[p]);
      j["function"] = {{"branches", branches}, {"masking", masking}};
    }
    j["prior"] = c.prior;
    j["domain"] = detail::domain_to_json(c.domain);
    if (c.stateful) {
      oj s{{"delay", c.stateful->delay}};
      if (c.stateful->initial) s["initial"] = value_to_json(*c.stateful->initial);
      j["stateful"] = s;
    }
    comps.push_back(j);
  }
  oj conns = oj::array();
  auto sorted = model.connections;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& c : sorted)
    conns.push_back({{"from", model.components[c.from].id + ".out"},
                     {"to", model.components[c.to].id + "." + model.components[c.to].inputs[c.port]}});
  std::vector<std::string> obs;
  for (std::size_t i = 0; i < model.size(); ++i)
    if (model.observable[i]) obs.push_back(model.components[i].id);
  oj doc{{"components", comps}, {"connections", conns}, {"observables", obs}, {"epsilon", model.epsilon}};
  if (model.time_horizon) doc["time_horizon"] = *model.time_horizon;
  return doc;
}

inline std::string serialize_model(const SystemModel& model) { return model_to_json(model).dump(2); }

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string code;
  std::string component;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<std::vector<std::string>> loops;

  bool ok() const { return violations.empty(); }
};

inline ValidationReport validate(const SystemModel& model) {
  ValidationReport report;
  auto add = [&](std::string code, const Component& c, std::string msg) {
    report.violations.push_back({std::move(code), c.id, std::move(msg)});
  };
  if (!(model.epsilon > 0.0 && model.epsilon < 1.0))
    report.violations.push_back({"epsilon_range", "", "epsilon must lie in (0, 1)"});
  if (model.time_horizon && *model.time_horizon < 1)
    report.violations.push_back({"time_horizon", "", "time_horizon must be at least 1"});

  for (std::size_t i = 0; i < model.size(); ++i) {
    const Component& c = model.components[i];
    if (!(c.prior > 0.0 && c.prior < 1.0)) add("prior_range", c, "prior must lie in (0, 1)");
    if (c.is_source) {
      if (!c.inputs.empty()) add("source_inputs", c, "sources take no inputs");
      continue;
    }
    if (c.function.branches.empty()) add("no_branches", c, "function has no branches");
    std::vector<std::size_t> fed(c.inputs.size(), 0);
    for (const auto& conn : model.connections)
      if (conn.to == i) ++fed[conn.port];
    for (std::size_t p = 0; p < c.inputs.size(); ++p) {
      if (fed[p] == 0) add("unconnected_port", c, "input '" + c.inputs[p] + "' is not connected");
      if (fed[p] > 1) add("multiply_connected", c, "input '" + c.inputs[p] + "' has several drivers");
    }
    for (std::size_t b = 0; b < c.function.branches.size(); ++b) {
      const auto& br = c.function.branches[b];
      std::vector<std::size_t> mentioned;
      auto g = br.guard.ports(), e = br.expr.ports();
      std::set_union(g.begin(), g.end(), e.begin(), e.end(), std::back_inserter(mentioned));
      if (mentioned != br.reads)
        add("reads_mismatch", c, "branch " + std::to_string(b) + " reads differ from the ports it mentions");
    }
    if (c.stateful) {
      if (c.stateful->delay < 1) add("stateful_delay", c, "delay must be at least 1");
      if (!c.stateful->initial) add("missing_initial", c, "stateful component needs an initial value");
    }
  }

  for (const auto& loop : find_loops(model)) {
    std::vector<std::string> ids;
    bool any_finite = false;
    for (auto i : loop) {
      ids.push_back(model.components[i].id);
      any_finite = any_finite || model.components[i].domain.finite();
    }
    if (!any_finite)
      report.violations.push_back({"non_finite_loop", ids.front(),
                                   "loop has no wire with a finite domain to carry assumptions"});
    report.loops.push_back(std::move(ids));
  }
  return report;
}

}  // namespace focusdiag
