#include "ocpq/oracle.hpp"

#include <algorithm>
#include <map>

namespace ocpq {

namespace {

using Assignment = std::map<std::string, std::string>;  // variable name -> event / object id

struct OracleRow {
  Assignment assignment;
  std::size_t parent = 0;
  bool excluded = false;
  std::vector<bool> verdicts;
  std::vector<std::optional<std::int64_t>> labels;
};

bool has_ref(const std::vector<QualifiedRef>& refs, const std::string& target, const Qualifier& q) {
  for (const auto& r : refs) {
    if (r.object_id == target && (!q || r.qualifier == *q)) return true;
  }
  return false;
}

class Oracle {
 public:
  Oracle(const QueryTree& t, const Oced& log, const OracleOptions& opts) : t_(t), log_(log), opts_(opts), vars_(t) {}

  EvaluationResult run() {
    auto t0 = std::chrono::steady_clock::now();
    evaluate(t_.root, Assignment{}, 0);
    EvaluationResult result;
    std::map<std::string, std::vector<std::uint32_t>> final_index;  // node -> temp row -> sorted row
    std::map<std::string, NodeResult> built;
    for (const auto& id : t_.preorder()) built[id] = assemble(id, final_index, built);
    for (const auto& n : t_.nodes) result.nodes.push_back(std::move(built[n.id]));
    result.wall_time = std::chrono::steady_clock::now() - t0;
    return result;
  }

 private:
  bool basic_holds(const Predicate& p, const Assignment& a) const {
    auto id = [&](const std::string& name) { return a.at(name); };
    if (const auto* e = std::get_if<E2OPred>(&p)) {
      const Event* ev = log_.find_event(id(e->ev));
      return ev && log_.find_object(id(e->ob)) && has_ref(ev->e2o, id(e->ob), e->qual);
    }
    if (const auto* o = std::get_if<O2OPred>(&p)) {
      const Object* from = log_.find_object(id(o->from));
      return from && log_.find_object(id(o->to)) && has_ref(from->o2o, id(o->to), o->qual);
    }
    const auto& tbe = std::get<TBEPred>(p);
    Duration d = time_of(log_, id(tbe.to)) - time_of(log_, id(tbe.from));
    return (!tbe.min || *tbe.min <= d) && (!tbe.max || d <= *tbe.max);
  }

  static bool bound(const Predicate& p, const Assignment& a) {
    for (const auto& v : variables_of(p)) {
      if (!a.count(v)) return false;
    }
    return true;
  }

  static bool mentions(const Predicate& p, const std::string& name) {
    auto vs = variables_of(p);
    return std::find(vs.begin(), vs.end(), name) != vs.end();
  }

  void charge() {
    if (++work_ > opts_.max_work) {
      throw Error(ErrorCode::TooLargeForOracle, "brute-force enumeration exceeds " + std::to_string(opts_.max_work) + " steps");
    }
  }

  /// Appends the rows of `node_id` under one parent binding (and, recursively,
  /// their descendants). Returns how many of them satisfy the full box.
  std::uint64_t evaluate(const std::string& node_id, const Assignment& parent, std::size_t parent_row) {
    const BindingBox& box = t_.find_node(node_id)->box;
    std::vector<const VarDecl*> fresh;
    for (const auto& v : box.vars) {
      if (!parent.count(v.name)) fresh.push_back(&v);
    }
    std::uint64_t satisfied = 0;
    Assignment a = parent;
    enumerate(node_id, box, fresh, 0, a, parent_row, satisfied);
    return satisfied;
  }

  void enumerate(const std::string& node_id, const BindingBox& box, const std::vector<const VarDecl*>& fresh,
                 std::size_t k, Assignment& a, std::size_t parent_row, std::uint64_t& satisfied) {
    if (k == fresh.size()) {
      for (const auto& p : box.predicates) {
        if (is_basic(p) && !basic_holds(p, a)) return;
      }
      if (candidate(node_id, box, a, parent_row)) ++satisfied;
      return;
    }
    const VarDecl& v = *fresh[k];
    auto try_value = [&](const std::string& id) {
      charge();
      a[v.name] = id;
      for (const auto& p : box.predicates) {
        if (is_basic(p) && mentions(p, v.name) && bound(p, a) && !basic_holds(p, a)) return;
      }
      enumerate(node_id, box, fresh, k + 1, a, parent_row, satisfied);
    };
    if (v.kind == VarKind::Event) {
      for (const auto& e : log_.events()) {
        if (v.types.count(e.activity)) try_value(e.id);
      }
    } else {
      for (const auto& o : log_.objects()) {
        if (v.types.count(o.otype)) try_value(o.id);
      }
    }
    a.erase(v.name);
  }

  bool candidate(const std::string& node_id, const BindingBox& box, const Assignment& a, std::size_t parent_row) {
    auto& rows = rows_[node_id];
    std::size_t me = rows.size();
    rows.push_back({a, parent_row, false, {}, {}});

    std::map<std::string, std::uint64_t> counts;
    std::map<std::string, std::pair<std::size_t, std::size_t>> ranges;
    for (const auto* e : t_.out_edges(node_id)) {
      std::size_t before = rows_[e->to].size();
      counts[e->label] = evaluate(e->to, a, me);
      ranges[e->label] = {before, rows_[e->to].size()};
    }
    auto cbs_holds = [&](const CBSPred& c) {
      std::uint64_t n = counts[c.edge];
      return c.min <= n && (!c.max || n <= *c.max);
    };

    bool excluded = false;
    for (const auto& p : box.predicates) {
      if (const auto* c = std::get_if<CBSPred>(&p); c && !cbs_holds(*c)) excluded = true;
    }
    std::vector<bool> verdicts;
    for (const auto& p : box.constraints) {
      bool ok = false;
      if (!excluded) {
        const auto* c = std::get_if<CBSPred>(&p);
        ok = c ? cbs_holds(*c) : basic_holds(p, a);
      }
      verdicts.push_back(ok);
    }
    std::vector<std::optional<std::int64_t>> labels;
    for (const auto& l : box.labels) {
      const std::string& child = t_.find_edge(l.edge)->to;
      auto [lo, hi] = ranges[l.edge];
      std::vector<std::int64_t> ds;
      std::uint64_t n = 0;
      for (std::size_t j = lo; j < hi; ++j) {
        const OracleRow& r = rows_[child][j];
        if (r.excluded) continue;
        ++n;
        if (l.agg != LabelAgg::Count) {
          ds.push_back((time_of(log_, r.assignment.at(l.to)) - time_of(log_, r.assignment.at(l.from))).count());
        }
      }
      std::optional<std::int64_t> value;
      if (l.agg == LabelAgg::Count) {
        value = static_cast<std::int64_t>(n);
      } else if (!ds.empty()) {
        if (l.agg == LabelAgg::MinDur) value = *std::min_element(ds.begin(), ds.end());
        if (l.agg == LabelAgg::MaxDur) value = *std::max_element(ds.begin(), ds.end());
        if (l.agg == LabelAgg::MeanDur) {
          __int128 exact = 0;
          for (auto d : ds) exact += d;
          value = static_cast<std::int64_t>(exact / static_cast<__int128>(ds.size()));
        }
      }
      labels.push_back(value);
    }
    OracleRow& row = rows_[node_id][me];
    row.excluded = excluded;
    row.verdicts = std::move(verdicts);
    row.labels = std::move(labels);
    return !excluded;
  }

  NodeResult assemble(const std::string& id, std::map<std::string, std::vector<std::uint32_t>>& final_index,
                      const std::map<std::string, NodeResult>& built) {
    const QueryNode* node = t_.find_node(id);
    NodeResult r;
    r.node_id = id;
    r.columns = vars_.columns(id);
    for (VarCode c : r.columns) r.kinds.push_back(vars_[c].kind);
    r.constraint_count = node->box.constraints.size();
    r.label_count = node->box.labels.size();

    const auto& rows = rows_[id];
    const QueryEdge* in = t_.parent_edge(id);
    std::vector<std::pair<std::vector<Code>, std::size_t>> keyed;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::vector<Code> cells;
      for (VarCode c : r.columns) {
        const std::string& entity = rows[i].assignment.at(vars_[c].name);
        auto pos = vars_[c].kind == VarKind::Event ? log_.event_position(entity) : log_.object_position(entity);
        cells.push_back(static_cast<Code>(*pos));
      }
      keyed.emplace_back(std::move(cells), i);
    }
    std::sort(keyed.begin(), keyed.end());
    auto& index = final_index[id];
    index.assign(rows.size(), 0);
    for (std::size_t k = 0; k < keyed.size(); ++k) {
      const OracleRow& row = rows[keyed[k].second];
      index[keyed[k].second] = static_cast<std::uint32_t>(k);
      r.cells.insert(r.cells.end(), keyed[k].first.begin(), keyed[k].first.end());
      if (in) {
        std::uint32_t p = final_index[in->from][row.parent];
        const NodeResult& pr = built.at(in->from);
        r.parent.push_back(p);
        r.ancestor_excluded.push_back(pr.cbs_excluded[p] | pr.ancestor_excluded[p]);
      } else {
        r.parent.push_back(NodeResult::kNoParent);
        r.ancestor_excluded.push_back(0);
      }
      r.cbs_excluded.push_back(row.excluded);
      for (bool v : row.verdicts) r.verdicts.push_back(v);
      for (const auto& l : row.labels) r.labels.push_back(l);
    }
    return r;
  }

  const QueryTree& t_;
  const Oced& log_;
  OracleOptions opts_;
  VariableTable vars_;
  std::uint64_t work_ = 0;
  std::map<std::string, std::vector<OracleRow>> rows_;
};

}  // namespace

EvaluationResult brute_force_evaluate(const QueryTree& tree, const Oced& log, const OracleOptions& options) {
  auto findings = validate_tree(tree);
  if (!findings.empty()) throw QueryInvalidError(std::move(findings));
  return Oracle(tree, log, options).run();
}

}  // namespace ocpq
