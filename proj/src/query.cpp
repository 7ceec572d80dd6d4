#include "ocpq/query.hpp"

#include <algorithm>
#include <functional>
#include <unordered_set>

namespace ocpq {

std::string_view to_string(VarKind k) { return k == VarKind::Event ? "event" : "object"; }

void Binding::set(VarCode var, VarKind kind, Code entity) {
  std::uint64_t w = pack(var, kind, entity);
  auto it = std::lower_bound(words_.begin(), words_.end(), pack(var, VarKind::Event, 0));
  if (it != words_.end() && var_of(*it) == var) {
    *it = w;
  } else {
    words_.insert(it, w);
  }
}

std::optional<Code> Binding::get(VarCode var) const {
  auto it = std::lower_bound(words_.begin(), words_.end(), pack(var, VarKind::Event, 0));
  if (it == words_.end() || var_of(*it) != var) return std::nullopt;
  return entity_of(*it);
}

std::optional<Code> Binding::get(VarCode var, VarKind kind) const {
  auto it = std::lower_bound(words_.begin(), words_.end(), pack(var, VarKind::Event, 0));
  if (it == words_.end() || var_of(*it) != var || kind_of(*it) != kind) return std::nullopt;
  return entity_of(*it);
}

bool is_child(const Binding& parent, const Binding& child) {
  auto p = parent.words();
  auto c = child.words();
  return std::includes(c.begin(), c.end(), p.begin(), p.end());
}

bool is_basic(const Predicate& p) { return !std::holds_alternative<CBSPred>(p); }

namespace {

std::string qual_string(const Qualifier& q) { return q ? "\"" + *q + "\"" : "*"; }

std::string bound_string(const std::optional<Duration>& d, const char* inf) {
  return d ? format_duration(*d) : inf;
}

}  // namespace

std::string to_string(const Predicate& p) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, E2OPred>) {
          return "E2O(" + x.ev + ", " + x.ob + ", " + qual_string(x.qual) + ")";
        } else if constexpr (std::is_same_v<T, O2OPred>) {
          return "O2O(" + x.from + ", " + x.to + ", " + qual_string(x.qual) + ")";
        } else if constexpr (std::is_same_v<T, TBEPred>) {
          return "TBE(" + x.from + ", " + x.to + ", " + bound_string(x.min, "-inf") + ", " +
                 bound_string(x.max, "inf") + ")";
        } else {
          return "CBS(" + x.edge + ", " + std::to_string(x.min) + ", " +
                 (x.max ? std::to_string(*x.max) : std::string("inf")) + ")";
        }
      },
      p);
}

std::vector<std::string> variables_of(const Predicate& p) {
  return std::visit(
      [](const auto& x) -> std::vector<std::string> {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, E2OPred>) return {x.ev, x.ob};
        else if constexpr (std::is_same_v<T, CBSPred>) return {};
        else return {x.from, x.to};
      },
      p);
}

std::string_view to_string(LabelAgg a) {
  switch (a) {
    case LabelAgg::Count: return "count";
    case LabelAgg::MinDur: return "min_dur";
    case LabelAgg::MaxDur: return "max_dur";
    case LabelAgg::MeanDur: return "mean_dur";
  }
  return "?";
}

std::optional<LabelAgg> parse_label_agg(std::string_view s) {
  for (auto a : {LabelAgg::Count, LabelAgg::MinDur, LabelAgg::MaxDur, LabelAgg::MeanDur}) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

const VarDecl* BindingBox::find_var(std::string_view name) const {
  for (const auto& v : vars) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

bool is_refinement(const BindingBox& a, const BindingBox& b) {
  for (const auto& v : a.vars) {
    const VarDecl* w = b.find_var(v.name);
    if (!w || w->kind != v.kind || w->types != v.types) return false;
  }
  for (const auto& p : a.predicates) {
    if (!is_basic(p)) continue;
    if (std::find(b.predicates.begin(), b.predicates.end(), p) == b.predicates.end()) return false;
  }
  return true;
}

BindingBox restrict_to_basic(const BindingBox& box) {
  BindingBox out;
  out.vars = box.vars;
  for (const auto& p : box.predicates) {
    if (is_basic(p)) out.predicates.push_back(p);
  }
  return out;
}

const QueryNode* QueryTree::find_node(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const QueryEdge* QueryTree::find_edge(std::string_view label) const {
  for (const auto& e : edges) {
    if (e.label == label) return &e;
  }
  return nullptr;
}

const QueryEdge* QueryTree::parent_edge(std::string_view node_id) const {
  for (const auto& e : edges) {
    if (e.to == node_id) return &e;
  }
  return nullptr;
}

std::vector<const QueryEdge*> QueryTree::out_edges(std::string_view node_id) const {
  std::vector<const QueryEdge*> out;
  for (const auto& e : edges) {
    if (e.from == node_id) out.push_back(&e);
  }
  return out;
}

std::vector<std::string> QueryTree::preorder() const {
  std::vector<std::string> order;
  if (!find_node(root)) return order;
  std::unordered_set<std::string> seen;
  std::function<void(const std::string&)> visit = [&](const std::string& id) {
    if (!seen.insert(id).second) return;
    order.push_back(id);
    for (const auto* e : out_edges(id)) visit(e->to);
  };
  visit(root);
  return order;
}

namespace {

class TreeChecker {
 public:
  explicit TreeChecker(const QueryTree& t) : t_(t) {}

  std::vector<Finding> run() {
    if (t_.nodes.empty()) {
      add("EmptyTree", "", "query tree has no nodes");
      return std::move(out_);
    }
    check_shape();
    for (const auto& n : t_.nodes) check_node(n);
    return std::move(out_);
  }

 private:
  void add(std::string code, std::string ref, std::string message) {
    out_.push_back({std::move(code), std::move(ref), std::move(message)});
  }

  void check_shape() {
    std::unordered_set<std::string> ids;
    for (const auto& n : t_.nodes) {
      if (!ids.insert(n.id).second) add("DuplicateNodeId", n.id, "node id '" + n.id + "' is used twice");
    }
    if (!ids.count(t_.root)) add("UnknownRoot", t_.root, "root '" + t_.root + "' is not a node");
    std::unordered_set<std::string> labels;
    std::unordered_map<std::string, int> indegree;
    bool endpoints_ok = true;
    for (const auto& e : t_.edges) {
      if (!labels.insert(e.label).second) {
        add("DuplicateEdgeLabel", e.label, "edge label '" + e.label + "' is used more than once");
      }
      for (const auto* end : {&e.from, &e.to}) {
        if (!ids.count(*end)) {
          add("UnknownEdgeEndpoint", e.label, "edge '" + e.label + "' refers to unknown node '" + *end + "'");
          endpoints_ok = false;
        }
      }
      ++indegree[e.to];
    }
    if (!endpoints_ok || !ids.count(t_.root)) return;
    for (const auto& n : t_.nodes) {
      int in = indegree[n.id];
      if (n.id == t_.root ? in != 0 : in != 1) {
        add("NotATree", n.id, "node '" + n.id + "' has " + std::to_string(in) + " incoming edges");
      }
    }
    auto reached = t_.preorder();
    if (reached.size() != ids.size()) {
      for (const auto& n : t_.nodes) {
        if (std::find(reached.begin(), reached.end(), n.id) == reached.end()) {
          add("NotATree", n.id, "node '" + n.id + "' is not reachable from the root");
        }
      }
    }
  }

  void check_var(const BindingBox& box, const std::string& node, const std::string& name,
                 std::optional<VarKind> expected, const std::string& context) {
    const VarDecl* v = box.find_var(name);
    if (!v) {
      add("UnboundVariable", node, context + " references undeclared variable '" + name + "'");
    } else if (expected && v->kind != *expected) {
      add("KindMismatch", node,
          context + " expects '" + name + "' to be an " + std::string(to_string(*expected)) + " variable");
    }
  }

  void check_predicate(const QueryNode& n, const Predicate& p) {
    const auto& box = n.box;
    std::string ctx = to_string(p);
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, E2OPred>) {
            check_var(box, n.id, x.ev, VarKind::Event, ctx);
            check_var(box, n.id, x.ob, VarKind::Object, ctx);
          } else if constexpr (std::is_same_v<T, O2OPred>) {
            check_var(box, n.id, x.from, VarKind::Object, ctx);
            check_var(box, n.id, x.to, VarKind::Object, ctx);
          } else if constexpr (std::is_same_v<T, TBEPred>) {
            check_var(box, n.id, x.from, VarKind::Event, ctx);
            check_var(box, n.id, x.to, VarKind::Event, ctx);
            if (x.min && x.max && *x.min > *x.max) add("InvalidBounds", n.id, ctx + " has min > max");
          } else {
            if (x.max && x.min > *x.max) add("InvalidBounds", n.id, ctx + " has min > max");
            const QueryEdge* e = t_.find_edge(x.edge);
            if (!e || e->from != n.id) {
              add("UnknownEdge", n.id, ctx + " does not name an outgoing edge of '" + n.id + "'");
            }
          }
        },
        p);
  }

  void check_node(const QueryNode& n) {
    std::unordered_set<std::string> names;
    for (const auto& v : n.box.vars) {
      if (!names.insert(v.name).second) add("DuplicateVariable", n.id, "variable '" + v.name + "' is declared twice");
      if (v.types.empty()) add("EmptyTypeSet", n.id, "variable '" + v.name + "' has no types");
    }
    for (const auto& p : n.box.predicates) check_predicate(n, p);
    for (const auto& p : n.box.constraints) check_predicate(n, p);

    std::unordered_set<std::string> label_names;
    for (const auto& l : n.box.labels) {
      if (!label_names.insert(l.name).second) add("DuplicateLabelName", n.id, "label '" + l.name + "' is defined twice");
      const QueryEdge* e = t_.find_edge(l.edge);
      if (!e || e->from != n.id) {
        add("InvalidLabel", n.id, "label '" + l.name + "' does not use an outgoing edge of '" + n.id + "'");
        continue;
      }
      if (l.agg == LabelAgg::Count) continue;
      const QueryNode* child = t_.find_node(e->to);
      if (!child) continue;
      for (const auto* name : {&l.from, &l.to}) {
        const VarDecl* v = child->box.find_var(*name);
        if (!v || v->kind != VarKind::Event) {
          add("InvalidLabel", n.id, "label '" + l.name + "' needs event variable '" + *name + "' bound in '" + child->id + "'");
        }
      }
    }

    const QueryEdge* in = t_.parent_edge(n.id);
    if (!in || n.id == t_.root) return;
    const QueryNode* parent = t_.find_node(in->from);
    if (!parent) return;
    for (const auto& v : parent->box.vars) {
      const VarDecl* w = n.box.find_var(v.name);
      if (!w || w->kind != v.kind || w->types != v.types) {
        add("RefinementViolation", n.id, "variable '" + v.name + "' of '" + parent->id + "' is missing or retyped");
      }
    }
    for (const auto& p : parent->box.predicates) {
      if (!is_basic(p)) continue;
      if (std::find(n.box.predicates.begin(), n.box.predicates.end(), p) == n.box.predicates.end()) {
        add("RefinementViolation", n.id, "predicate " + to_string(p) + " of '" + parent->id + "' is missing");
      }
    }
  }

  const QueryTree& t_;
  std::vector<Finding> out_;
};

std::string summarize_findings(const std::vector<Finding>& findings) {
  std::string msg;
  for (const auto& f : findings) {
    if (!msg.empty()) msg += "; ";
    msg += f.code;
    if (!f.ref.empty()) msg += " [" + f.ref + "]";
    msg += ": " + f.message;
  }
  return msg;
}

}  // namespace

std::vector<Finding> validate_tree(const QueryTree& t) { return TreeChecker(t).run(); }

QueryInvalidError::QueryInvalidError(std::vector<Finding> findings)
    : Error(ErrorCode::QueryInvalid, summarize_findings(findings)), findings_(std::move(findings)) {}

VariableTable::VariableTable(const QueryTree& t) {
  for (const auto& id : t.preorder()) {
    const QueryNode* n = t.find_node(id);
    auto& scope = scopes_[id];
    auto& cols = columns_[id];
    if (const QueryEdge* in = t.parent_edge(id); in && id != t.root) {
      scope = scopes_[in->from];
      cols = columns_[in->from];
    }
    for (const auto& v : n->box.vars) {
      if (scope.count(v.name)) continue;
      VarCode c = static_cast<VarCode>(entries_.size());
      entries_.push_back({v.name, v.kind, id});
      scope.emplace(v.name, c);
      cols.push_back(c);
    }
  }
}

std::optional<VarCode> VariableTable::find(std::string_view node_id, std::string_view name) const {
  auto s = scopes_.find(std::string(node_id));
  if (s == scopes_.end()) return std::nullopt;
  auto it = s->second.find(std::string(name));
  if (it == s->second.end()) return std::nullopt;
  return it->second;
}

const std::vector<VarCode>& VariableTable::columns(std::string_view node_id) const {
  static const std::vector<VarCode> kNone;
  auto it = columns_.find(std::string(node_id));
  return it == columns_.end() ? kNone : it->second;
}

namespace {

std::optional<Code> entity(const Binding& b, const Scope& scope, const std::string& name, VarKind kind) {
  auto c = scope.code(name);
  if (!c) return std::nullopt;
  return b.get(*c, kind);
}

std::optional<std::optional<Code>> qualifier_code(const IndexedLog& idx, const Qualifier& q) {
  if (!q) return std::optional<Code>{};
  auto c = idx.qualifiers.find(*q);
  if (!c) return std::nullopt;
  return std::optional<Code>{*c};
}

}  // namespace

bool satisfies_basic(const Binding& b, const Predicate& p, const IndexedLog& idx, const Scope& scope) {
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, E2OPred>) {
          auto ev = entity(b, scope, x.ev, VarKind::Event);
          auto ob = entity(b, scope, x.ob, VarKind::Object);
          auto q = qualifier_code(idx, x.qual);
          return ev && ob && q && is_related(idx, *ev, Relation::E2O, *ob, *q);
        } else if constexpr (std::is_same_v<T, O2OPred>) {
          auto from = entity(b, scope, x.from, VarKind::Object);
          auto to = entity(b, scope, x.to, VarKind::Object);
          auto q = qualifier_code(idx, x.qual);
          return from && to && q && is_related(idx, *from, Relation::O2O, *to, *q);
        } else if constexpr (std::is_same_v<T, TBEPred>) {
          auto from = entity(b, scope, x.from, VarKind::Event);
          auto to = entity(b, scope, x.to, VarKind::Event);
          if (!from || !to || *from >= idx.num_events() || *to >= idx.num_events()) return false;
          Duration d = idx.times[*to] - idx.times[*from];
          return (!x.min || *x.min <= d) && (!x.max || d <= *x.max);
        } else {
          return false;
        }
      },
      p);
}

std::string to_string(const Binding& b, const VariableTable& vars, const IndexedLog& idx) {
  std::string out = "{";
  for (auto w : b.words()) {
    if (out.size() > 1) out += ", ";
    VarCode v = Binding::var_of(w);
    out += v < vars.size() ? vars[v].name : "?" + std::to_string(v);
    out += "↦";
    Code e = Binding::entity_of(w);
    if (Binding::kind_of(w) == VarKind::Event) {
      out += e < idx.event_ids.size() ? idx.event_ids.name(e) : "?";
    } else {
      out += e < idx.object_ids.size() ? idx.object_ids.name(e) : "?";
    }
  }
  return out + "}";
}

}  // namespace ocpq
