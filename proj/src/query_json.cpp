#include "ocpq/query_json.hpp"

#include "json.hpp"

namespace ocpq {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::ParseError, msg); }

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) fail(where + " must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(where + ": missing '" + key + "'");
  return *it;
}

std::string str(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_string()) fail(where + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

const json& array(const json& obj, const char* key, const std::string& where, bool optional = false) {
  static const json kEmpty = json::array();
  if (optional && (!obj.contains(key) || obj[key].is_null())) return kEmpty;
  const json& v = field(obj, key, where);
  if (!v.is_array()) fail(where + ": '" + key + "' must be an array");
  return v;
}

Qualifier qualifier(const json& obj, const std::string& where) {
  auto it = obj.find("qual");
  if (it == obj.end() || it->is_null()) return kWildcard;
  if (!it->is_string()) fail(where + ": 'qual' must be a string or null");
  return it->get<std::string>();
}

std::optional<Duration> duration(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_number_integer()) return Duration{it->get<std::int64_t>()};
  if (it->is_string()) {
    if (auto d = parse_duration(it->get<std::string>())) return *d;
    fail(where + ": '" + it->get<std::string>() + "' is not a duration");
  }
  fail(where + ": '" + key + "' must be a duration string, integer milliseconds or null");
}

std::uint64_t count(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(where + ": CBS bounds must be non-negative integers");
  return v.get<std::uint64_t>();
}

Predicate predicate(const json& j, const std::string& where) {
  std::string t = str(j, "t", where);
  if (t == "e2o") return E2OPred{str(j, "ev", where), str(j, "ob", where), qualifier(j, where)};
  if (t == "o2o") return O2OPred{str(j, "from", where), str(j, "to", where), qualifier(j, where)};
  if (t == "tbe") {
    TBEPred p{str(j, "from", where), str(j, "to", where), duration(j, "min", where), duration(j, "max", where)};
    if (p.min && p.max && *p.min > *p.max) fail(where + ": TBE min exceeds max");
    return p;
  }
  if (t == "cbs") {
    CBSPred p;
    p.edge = str(j, "edge", where);
    p.min = count(field(j, "min", where), where);
    if (auto it = j.find("max"); it != j.end() && !it->is_null()) p.max = count(*it, where);
    if (p.max && *p.max < p.min) fail(where + ": CBS max is below min");
    return p;
  }
  fail(where + ": unknown predicate type '" + t + "'");
}

VarDecl variable(const json& j, const std::string& where) {
  VarDecl v;
  v.name = str(j, "name", where);
  std::string kind = str(j, "kind", where);
  if (kind == "event") v.kind = VarKind::Event;
  else if (kind == "object") v.kind = VarKind::Object;
  else fail(where + ": kind must be \"event\" or \"object\"");
  for (const auto& t : array(j, "types", where)) {
    if (!t.is_string()) fail(where + ": types must be strings");
    v.types.insert(t.get<std::string>());
  }
  return v;
}

LabelSpec label(const json& j, const std::string& where) {
  LabelSpec l;
  l.name = str(j, "name", where);
  std::string agg = str(j, "agg", where);
  auto a = parse_label_agg(agg);
  if (!a) fail(where + ": unknown aggregation '" + agg + "'");
  l.agg = *a;
  l.edge = str(j, "edge", where);
  if (l.agg != LabelAgg::Count) {
    l.from = str(j, "from", where);
    l.to = str(j, "to", where);
  }
  return l;
}

ordered_json duration_json(const std::optional<Duration>& d) {
  if (!d) return nullptr;
  return format_duration(*d);
}

ordered_json predicate_json(const Predicate& p) {
  return std::visit(
      [](const auto& x) -> ordered_json {
        using T = std::decay_t<decltype(x)>;
        ordered_json j;
        if constexpr (std::is_same_v<T, E2OPred>) {
          j["t"] = "e2o";
          j["ev"] = x.ev;
          j["ob"] = x.ob;
          j["qual"] = x.qual ? ordered_json(*x.qual) : ordered_json(nullptr);
        } else if constexpr (std::is_same_v<T, O2OPred>) {
          j["t"] = "o2o";
          j["from"] = x.from;
          j["to"] = x.to;
          j["qual"] = x.qual ? ordered_json(*x.qual) : ordered_json(nullptr);
        } else if constexpr (std::is_same_v<T, TBEPred>) {
          j["t"] = "tbe";
          j["from"] = x.from;
          j["to"] = x.to;
          j["min"] = duration_json(x.min);
          j["max"] = duration_json(x.max);
        } else {
          j["t"] = "cbs";
          j["edge"] = x.edge;
          j["min"] = x.min;
          j["max"] = x.max ? ordered_json(*x.max) : ordered_json(nullptr);
        }
        return j;
      },
      p);
}

}  // namespace

QueryTree parse_query_json_unchecked(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    fail(std::string("malformed JSON: ") + e.what());
  }
  QueryTree t;
  t.root = str(doc, "root", "query");
  for (const auto& jn : array(doc, "nodes", "query")) {
    QueryNode n;
    n.id = str(jn, "id", "node");
    std::string where = "node '" + n.id + "'";
    for (const auto& jv : array(jn, "vars", where, true)) n.box.vars.push_back(variable(jv, where));
    for (const auto& jp : array(jn, "predicates", where, true)) n.box.predicates.push_back(predicate(jp, where));
    for (const auto& jp : array(jn, "constraints", where, true)) n.box.constraints.push_back(predicate(jp, where));
    for (const auto& jl : array(jn, "labels", where, true)) n.box.labels.push_back(label(jl, where));
    t.nodes.push_back(std::move(n));
  }
  for (const auto& je : array(doc, "edges", "query", true)) {
    t.edges.push_back({str(je, "from", "edge"), str(je, "to", "edge"), str(je, "label", "edge")});
  }
  return t;
}

QueryTree parse_query_json(std::string_view bytes) {
  QueryTree t = parse_query_json_unchecked(bytes);
  auto findings = validate_tree(t);
  if (!findings.empty()) throw QueryInvalidError(std::move(findings));
  return t;
}

std::string serialize_query(const QueryTree& t) {
  ordered_json doc;
  doc["root"] = t.root;
  ordered_json nodes = ordered_json::array();
  for (const auto& n : t.nodes) {
    ordered_json jn;
    jn["id"] = n.id;
    ordered_json vars = ordered_json::array();
    for (const auto& v : n.box.vars) {
      ordered_json jv;
      jv["name"] = v.name;
      jv["kind"] = std::string(to_string(v.kind));
      jv["types"] = v.types;
      vars.push_back(std::move(jv));
    }
    jn["vars"] = std::move(vars);
    jn["predicates"] = ordered_json::array();
    for (const auto& p : n.box.predicates) jn["predicates"].push_back(predicate_json(p));
    jn["constraints"] = ordered_json::array();
    for (const auto& p : n.box.constraints) jn["constraints"].push_back(predicate_json(p));
    jn["labels"] = ordered_json::array();
    for (const auto& l : n.box.labels) {
      ordered_json jl;
      jl["name"] = l.name;
      jl["agg"] = std::string(to_string(l.agg));
      jl["edge"] = l.edge;
      if (l.agg != LabelAgg::Count) {
        jl["from"] = l.from;
        jl["to"] = l.to;
      }
      jn["labels"].push_back(std::move(jl));
    }
    nodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(nodes);
  ordered_json edges = ordered_json::array();
  for (const auto& e : t.edges) edges.push_back({{"from", e.from}, {"to", e.to}, {"label", e.label}});
  doc["edges"] = std::move(edges);
  return doc.dump(2) + "\n";
}

}  // namespace ocpq
