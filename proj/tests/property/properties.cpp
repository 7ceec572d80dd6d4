#include "properties.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "ocpq/engine.hpp"
#include "ocpq/export.hpp"
#include "ocpq/index.hpp"
#include "ocpq/ingestion.hpp"
#include "test_support.hpp"

namespace ocpq::testing {

namespace {

struct Case {
  Oced log;
  IndexedLog idx;
  QueryTree tree;
};

Case random_case(std::mt19937_64& rng) {
  Case c;
  c.log = random_log(rng);
  c.idx = build_index(c.log);
  c.tree = random_tree(rng);
  return c;
}

using RowSet = std::set<std::vector<Code>>;

RowSet rows_where(const NodeResult& n, bool only_unexcluded) {
  RowSet out;
  for (std::size_t i = 0; i < n.rows(); ++i) {
    if (only_unexcluded && n.cbs_excluded[i]) continue;
    out.emplace(n.row(i).begin(), n.row(i).end());
  }
  return out;
}

bool subset(const RowSet& a, const RowSet& b) { return std::includes(b.begin(), b.end(), a.begin(), a.end()); }

std::string at_case(std::size_t i, const std::string& what) { return "case " + std::to_string(i) + ": " + what; }

Binding random_binding(std::mt19937_64& rng) {
  Binding b;
  std::uniform_int_distribution<int> vars(0, 4);
  std::uniform_int_distribution<Code> entity(0, 2);
  for (int v = 0; v < 5; ++v) {
    if (vars(rng) < 2) b.set(v, v % 2 ? VarKind::Object : VarKind::Event, entity(rng));
  }
  return b;
}

Binding extend(std::mt19937_64& rng, Binding b) {
  std::uniform_int_distribution<int> coin(0, 2);
  std::uniform_int_distribution<Code> entity(0, 2);
  for (VarCode v = 0; v < 7; ++v) {
    if (!b.contains(v) && coin(rng) == 0) b.set(v, v % 2 ? VarKind::Object : VarKind::Event, entity(rng));
  }
  return b;
}

/// One-node tree declaring the given variables over every generated type.
QueryTree flat_tree(const std::vector<std::pair<std::string, VarKind>>& vars) {
  QueryTree t;
  t.root = "n";
  QueryNode n{"n", {}};
  for (const auto& [name, kind] : vars) {
    const char* prefix = kind == VarKind::Event ? "ev" : "ot";
    n.box.vars.push_back({name, kind, {std::string(prefix) + "0", std::string(prefix) + "1", std::string(prefix) + "2"}});
  }
  t.nodes.push_back(std::move(n));
  return t;
}

const NodeResult& node_of(const EvaluationResult& r, const std::string& id) { return *r.find(id); }

}  // namespace

PropertyOutcome child_relation_is_partial_order(std::uint64_t seed, std::size_t cases) {
  PropertyOutcome out{"child_relation_is_partial_order", cases, {}};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    Binding a = random_binding(rng);
    Binding b = extend(rng, a);
    Binding c = extend(rng, b);
    Binding x = random_binding(rng);
    if (!is_child(a, a)) return out.failure = at_case(i, "not reflexive"), out;
    if (!is_child(Binding{}, x)) return out.failure = at_case(i, "empty binding is not below every binding"), out;
    if (!is_child(a, b) || !is_child(b, c)) return out.failure = at_case(i, "extension is not a child"), out;
    if (!is_child(a, c)) return out.failure = at_case(i, "not transitive"), out;
    if (is_child(a, x) && is_child(x, a) && !(a == x)) return out.failure = at_case(i, "not antisymmetric"), out;
    if (is_child(b, a) && !(a == b)) return out.failure = at_case(i, "strict extension below its parent"), out;
  }
  return out;
}

PropertyOutcome refinement_is_reflexive_and_transitive(std::uint64_t seed, std::size_t cases) {
  PropertyOutcome out{"refinement_is_reflexive_and_transitive", cases, {}};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    QueryTree t = random_tree(rng);
    for (const auto& n : t.nodes) {
      if (!is_refinement(n.box, n.box)) return out.failure = at_case(i, "not reflexive at " + n.id), out;
    }
    for (const auto& e : t.edges) {
      const BindingBox& a = t.find_node(e.from)->box;
      const BindingBox& b = t.find_node(e.to)->box;
      if (!is_refinement(a, b)) return out.failure = at_case(i, "edge " + e.label + " is not a refinement"), out;
      for (const auto* g : t.out_edges(e.to)) {
        if (!is_refinement(a, t.find_node(g->to)->box)) return out.failure = at_case(i, "not transitive"), out;
      }
      BindingBox wider = b;
      wider.vars.push_back({"extra", VarKind::Object, {"ot0"}});
      wider.predicates.push_back(O2OPred{"extra", "extra", kWildcard});
      wider.predicates.push_back(CBSPred{"unrelated", 5, 1});
      if (!is_refinement(a, wider)) return out.failure = at_case(i, "adding to the child broke refinement"), out;
      BindingBox basic_only = restrict_to_basic(a);
      if (!is_refinement(basic_only, a) || !is_refinement(a, basic_only)) {
        return out.failure = at_case(i, "CBS predicates affect refinement"), out;
      }
    }
  }
  return out;
}

PropertyOutcome cbs_widening_is_monotone(std::uint64_t seed, std::size_t cases) {
  PropertyOutcome out{"cbs_widening_is_monotone", cases, {}};
  std::mt19937_64 rng(seed);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < cases; ++i) {
    Case c = random_case(rng);
    EvaluationResult before = evaluate_tree(c.tree, c.idx, {.threads = 1});
    for (std::size_t n = 0; n < c.tree.nodes.size(); ++n) {
      auto& preds = c.tree.nodes[n].box.predicates;
      for (std::size_t p = 0; p < preds.size(); ++p) {
        auto* cbs = std::get_if<CBSPred>(&preds[p]);
        if (!cbs) continue;
        QueryTree wider = c.tree;
        auto& w = std::get<CBSPred>(wider.nodes[n].box.predicates[p]);
        if (w.min > 0) --w.min;
        if (w.max) w.max = *w.max + 1 < 4 ? std::optional<std::uint64_t>(*w.max + 1) : std::nullopt;
        EvaluationResult after = evaluate_tree(wider, c.idx, {.threads = 1});
        const std::string& id = c.tree.nodes[n].id;
        if (!subset(rows_where(node_of(before, id), true), rows_where(node_of(after, id), true))) {
          return out.failure = at_case(i, "widening " + to_string(preds[p]) + " shrank node " + id), out;
        }
        ++checked;
      }
    }
  }
  if (checked == 0) out.failure = "no CBS predicate was generated";
  return out;
}

PropertyOutcome plan_order_is_neutral(std::uint64_t seed, std::size_t cases) {
  PropertyOutcome out{"plan_order_is_neutral", cases, {}};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    Case c = random_case(rng);
    EvaluationResult result = evaluate_tree(c.tree, c.idx, {.threads = 1});
    VariableTable table(c.tree);
    for (const auto& node : c.tree.nodes) {
      const QueryEdge* in = c.tree.parent_edge(node.id);
      const BindingBox* parent_box = in ? &c.tree.find_node(in->from)->box : nullptr;
      std::set<std::string> bound;
      std::vector<VarDecl> delta_vars;
      std::vector<Predicate> delta_preds;
      for (const auto& v : node.box.vars) {
        if (parent_box && parent_box->find_var(v.name)) bound.insert(v.name);
        else delta_vars.push_back(v);
      }
      for (const auto& p : node.box.predicates) {
        bool inherited = parent_box && std::find(parent_box->predicates.begin(), parent_box->predicates.end(), p) !=
                                           parent_box->predicates.end();
        if (is_basic(p) && !inherited) delta_preds.push_back(p);
      }

      std::vector<Binding> parents;
      if (in) {
        const NodeResult& pr = node_of(result, in->from);
        for (std::size_t r = 0; r < pr.rows(); ++r) parents.push_back(pr.binding(r));
      } else {
        parents.emplace_back();
      }
      Scope scope{&table, node.id};
      auto reference_steps = plan(delta_vars, delta_preds, bound, c.idx);
      std::vector<std::vector<Binding>> reference;
      for (const auto& p : parents) reference.push_back(expand(p, reference_steps, c.idx, scope));

      std::vector<std::string> order;
      for (const auto& v : delta_vars) order.push_back(v.name);
      std::sort(order.begin(), order.end());
      do {
        auto steps = plan_with_order(delta_vars, delta_preds, bound, order);
        for (std::size_t p = 0; p < parents.size(); ++p) {
          if (expand(parents[p], steps, c.idx, scope) != reference[p]) {
            std::string o;
            for (const auto& n : order) o += n + " ";
            return out.failure = at_case(i, "node " + node.id + ": order [ " + o + "] changes the output"), out;
          }
        }
      } while (std::next_permutation(order.begin(), order.end()));

      // The node table is the union of the per-parent expansions.
      RowSet expanded;
      for (const auto& rows : reference) {
        for (const auto& b : rows) {
          std::vector<Code> cells;
          for (auto w : b.words()) cells.push_back(Binding::entity_of(w));
          expanded.insert(std::move(cells));
        }
      }
      if (expanded != rows_where(node_of(result, node.id), false)) {
        return out.failure = at_case(i, "node " + node.id + ": table differs from the expansions"), out;
      }
    }
  }
  return out;
}

PropertyOutcome csv_rows_are_conserved(std::uint64_t seed, std::size_t cases) {
  PropertyOutcome out{"csv_rows_are_conserved", cases, {}};
  std::mt19937_64 rng(seed);
  auto records = [](const std::string& csv) {
    std::size_t n = 0;
    for (std::size_t pos = 0; (pos = csv.find("\r\n", pos)) != std::string::npos; pos += 2) ++n;
    return n - 1;  // header
  };
  for (std::size_t i = 0; i < cases; ++i) {
    Case c = random_case(rng);
    EvaluationResult result = evaluate_tree(c.tree, c.idx, {.threads = 1});
    for (const auto& n : result.nodes) {
      std::size_t visible = 0;
      for (std::size_t r = 0; r < n.rows(); ++r) visible += !n.cbs_excluded[r] && !n.ancestor_excluded[r];
      std::size_t filtered = records(export_csv(result, c.tree, c.idx, n.node_id));
      std::size_t full = records(export_csv(result, c.tree, c.idx, n.node_id, {.include_basic_only = true}));
      if (filtered != visible || filtered != visible_rows(n, false).size()) {
        return out.failure = at_case(i, "node " + n.node_id + ": filtered CSV has " + std::to_string(filtered) +
                                            " rows, expected " + std::to_string(visible)),
               out;
      }
      if (full != n.rows()) return out.failure = at_case(i, "node " + n.node_id + ": full CSV row count"), out;
    }
  }
  return out;
}

PropertyOutcome tbe_strict_order_is_antisymmetric(std::uint64_t seed, std::size_t cases) {
  PropertyOutcome out{"tbe_strict_order_is_antisymmetric", cases, {}};
  std::mt19937_64 rng(seed);
  QueryTree t = flat_tree({{"v", VarKind::Event}, {"w", VarKind::Event}});
  VariableTable table(t);
  Scope scope{&table, "n"};
  static const std::vector<Duration> gaps = {Duration{1}, std::chrono::minutes(30), std::chrono::hours(1)};
  for (std::size_t i = 0; i < cases; ++i) {
    Oced log = random_log(rng);
    IndexedLog idx = build_index(log);
    std::uniform_int_distribution<Code> ev(0, static_cast<Code>(idx.num_events() - 1));
    std::uniform_int_distribution<std::size_t> g(0, gaps.size() - 1);
    Binding b;
    b.set(*scope.code("v"), VarKind::Event, ev(rng));
    b.set(*scope.code("w"), VarKind::Event, ev(rng));
    TBEPred forward{"v", "w", gaps[g(rng)], std::nullopt};
    TBEPred backward{"w", "v", gaps[g(rng)], std::nullopt};
    if (satisfies_basic(b, forward, idx, scope) && satisfies_basic(b, backward, idx, scope)) {
      return out.failure = at_case(i, "both strict directions hold"), out;
    }
    TBEPred zero{"v", "v", Duration{0}, Duration{0}};
    if (!satisfies_basic(b, zero, idx, scope)) return out.failure = at_case(i, "TBE(x,x,0,0) fails"), out;
  }
  return out;
}

PropertyOutcome wildcard_subsumes_qualifiers(std::uint64_t seed, std::size_t cases) {
  PropertyOutcome out{"wildcard_subsumes_qualifiers", cases, {}};
  std::mt19937_64 rng(seed);
  QueryTree t = flat_tree({{"e", VarKind::Event}, {"o", VarKind::Object}, {"p", VarKind::Object}});
  VariableTable table(t);
  Scope scope{&table, "n"};
  for (std::size_t i = 0; i < cases; ++i) {
    Oced log = random_log(rng);
    IndexedLog idx = build_index(log);
    for (Code e = 0; e < idx.num_events(); ++e) {
      for (Code o = 0; o < idx.num_objects(); ++o) {
        Binding b;
        b.set(*scope.code("e"), VarKind::Event, e);
        b.set(*scope.code("o"), VarKind::Object, o);
        b.set(*scope.code("p"), VarKind::Object, static_cast<Code>((o * 7 + e) % idx.num_objects()));
        bool any_e2o = satisfies_basic(b, E2OPred{"e", "o", kWildcard}, idx, scope);
        bool any_o2o = satisfies_basic(b, O2OPred{"o", "p", kWildcard}, idx, scope);
        for (Code q = 0; q < idx.qualifiers.size(); ++q) {
          Qualifier qual = idx.qualifiers.name(q);
          if (satisfies_basic(b, E2OPred{"e", "o", qual}, idx, scope) && !any_e2o) {
            return out.failure = at_case(i, "E2O with a qualifier holds but not with the wildcard"), out;
          }
          if (satisfies_basic(b, O2OPred{"o", "p", qual}, idx, scope) && !any_o2o) {
            return out.failure = at_case(i, "O2O with a qualifier holds but not with the wildcard"), out;
          }
        }
      }
    }
  }
  return out;
}

PropertyOutcome basic_predicate_never_grows_node(std::uint64_t seed, std::size_t cases) {
  PropertyOutcome out{"basic_predicate_never_grows_node", cases, {}};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    Case c = random_case(rng);
    EvaluationResult before = evaluate_tree(c.tree, c.idx, {.threads = 1});
    const QueryNode& target = c.tree.nodes[std::uniform_int_distribution<std::size_t>(0, c.tree.nodes.size() - 1)(rng)];
    const auto& vars = target.box.vars;
    const VarDecl& a = vars[std::uniform_int_distribution<std::size_t>(0, vars.size() - 1)(rng)];
    const VarDecl& b = vars[std::uniform_int_distribution<std::size_t>(0, vars.size() - 1)(rng)];
    Predicate extra;
    if (a.kind == VarKind::Event && b.kind == VarKind::Event) extra = TBEPred{a.name, b.name, Duration{0}, std::nullopt};
    else if (a.kind == VarKind::Event) extra = E2OPred{a.name, b.name, kWildcard};
    else if (b.kind == VarKind::Event) extra = E2OPred{b.name, a.name, kWildcard};
    else extra = O2OPred{a.name, b.name, kWildcard};

    // The predicate goes into the whole subtree so that refinement still holds.
    QueryTree stricter = c.tree;
    std::vector<std::string> pending = {target.id};
    while (!pending.empty()) {
      std::string id = pending.back();
      pending.pop_back();
      for (auto& n : stricter.nodes) {
        if (n.id == id) n.box.predicates.push_back(extra);
      }
      for (const auto* e : c.tree.out_edges(id)) pending.push_back(e->to);
    }
    EvaluationResult after = evaluate_tree(stricter, c.idx, {.threads = 1});
    if (!subset(rows_where(node_of(after, target.id), false), rows_where(node_of(before, target.id), false))) {
      return out.failure = at_case(i, "adding " + to_string(extra) + " grew node " + target.id), out;
    }
  }
  return out;
}

PropertyOutcome parent_links_are_sound(std::uint64_t seed, std::size_t cases) {
  PropertyOutcome out{"parent_links_are_sound", cases, {}};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    Case c = random_case(rng);
    EvaluationResult result = evaluate_tree(c.tree, c.idx, {.threads = 1});
    for (const auto& e : c.tree.edges) {
      const NodeResult& parent = node_of(result, e.from);
      const NodeResult& child = node_of(result, e.to);
      for (std::size_t r = 0; r < child.rows(); ++r) {
        std::uint32_t p = child.parent[r];
        if (p >= parent.rows() || !is_child(parent.binding(p), child.binding(r))) {
          return out.failure = at_case(i, "row " + std::to_string(r) + " of " + e.to + " is not below its parent"), out;
        }
        bool hidden = parent.cbs_excluded[p] || parent.ancestor_excluded[p];
        if (child.ancestor_excluded[r] != hidden) return out.failure = at_case(i, "ancestor_excluded is wrong"), out;
      }
    }
  }
  return out;
}

PropertyOutcome thread_count_is_invariant(std::uint64_t seed, std::size_t cases) {
  PropertyOutcome out{"thread_count_is_invariant", cases, {}};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    Case c = random_case(rng);
    EvaluationResult one = evaluate_tree(c.tree, c.idx, {.threads = 1});
    for (unsigned threads : {2u, 8u}) {
      std::string d = diff(one, evaluate_tree(c.tree, c.idx, {.threads = threads}));
      if (!d.empty()) return out.failure = at_case(i, std::to_string(threads) + " threads: " + d), out;
    }
  }
  return out;
}

PropertyOutcome index_is_transposed(std::uint64_t seed, std::size_t cases) {
  PropertyOutcome out{"index_is_transposed", cases, {}};
  std::mt19937_64 rng(seed);
  auto transposed = [](const Csr& fwd, const Csr& rev, std::size_t sources) {
    if (fwd.entries.size() != rev.entries.size()) return false;
    for (Code s = 0; s < sources; ++s) {
      for (const auto& a : fwd.of(s)) {
        auto back = rev.of(a.neighbor);
        if (std::find(back.begin(), back.end(), Adjacent{s, a.qualifier}) == back.end()) return false;
      }
    }
    return true;
  };
  for (std::size_t i = 0; i < cases; ++i) {
    Oced log = random_log(rng);
    IndexedLog idx = build_index(log);
    if (!transposed(idx.e2o, idx.e2o_rev, idx.num_events())) return out.failure = at_case(i, "E2O transpose"), out;
    if (!transposed(idx.o2o, idx.o2o_rev, idx.num_objects())) return out.failure = at_case(i, "O2O transpose"), out;
    std::size_t distinct = 0;
    for (const auto& e : log.events()) {
      std::set<std::pair<std::string, std::string>> refs;
      for (const auto& r : e.e2o) refs.emplace(r.qualifier, r.object_id);
      distinct += refs.size();
    }
    if (distinct != idx.e2o.entries.size()) return out.failure = at_case(i, "E2O entry count"), out;
    for (const auto& bucket : idx.events_by_type) {
      if (!std::is_sorted(bucket.begin(), bucket.end(),
                          [&](Code a, Code b) { return idx.times[a] < idx.times[b]; })) {
        return out.failure = at_case(i, "type bucket not sorted by time"), out;
      }
    }
  }
  return out;
}

PropertyOutcome ocel_round_trip_is_fixpoint(std::uint64_t seed, std::size_t cases) {
  PropertyOutcome out{"ocel_round_trip_is_fixpoint", cases, {}};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    Oced log;
    if (i % 3 == 0) {
      SyntheticConfig cfg;
      cfg.num_customers = 1 + i % 4;
      cfg.seed = rng();
      log = generate_synthetic(cfg);
    } else {
      log = random_log(rng);
    }
    Oced once = import_ocel2_json(export_ocel2_json(log));
    if (!(once == log)) return out.failure = at_case(i, "import(export(log)) differs from log"), out;
    if (!(import_ocel2_json(export_ocel2_json(once)) == once)) return out.failure = at_case(i, "not a fixpoint"), out;
  }
  return out;
}

const std::vector<Property>& all_properties() {
  static const std::vector<Property> props = {
      {"child_relation_is_partial_order", child_relation_is_partial_order, 2000},
      {"refinement_is_reflexive_and_transitive", refinement_is_reflexive_and_transitive, 300},
      {"cbs_widening_is_monotone", cbs_widening_is_monotone, 200},
      {"plan_order_is_neutral", plan_order_is_neutral, 150},
      {"csv_rows_are_conserved", csv_rows_are_conserved, 200},
      {"tbe_strict_order_is_antisymmetric", tbe_strict_order_is_antisymmetric, 500},
      {"wildcard_subsumes_qualifiers", wildcard_subsumes_qualifiers, 30},
      {"basic_predicate_never_grows_node", basic_predicate_never_grows_node, 200},
      {"parent_links_are_sound", parent_links_are_sound, 200},
      {"thread_count_is_invariant", thread_count_is_invariant, 100},
      {"index_is_transposed", index_is_transposed, 200},
      {"ocel_round_trip_is_fixpoint", ocel_round_trip_is_fixpoint, 60},
  };
  return props;
}

}  // namespace ocpq::testing
