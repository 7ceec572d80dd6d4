#include "ocpq/engine.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace ocpq {

std::string to_string(const BindingStep& s) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, BindFromType>) {
          return "BindFromType(" + x.var + ")";
        } else if constexpr (std::is_same_v<T, BindFromRelation>) {
          return "BindFromRelation(" + x.var + ", " + std::string(to_string(x.relation)) + ", " +
                 (x.qual ? "\"" + *x.qual + "\"" : std::string("*")) + ", " + x.source + ")";
        } else {
          return "Filter(" + to_string(x.predicate) + ")";
        }
      },
      s);
}

namespace {

double mean_degree(const IndexedLog& idx, Relation r) {
  std::size_t n = idx.domain_size(r);
  return n == 0 ? 0.0 : static_cast<double>(idx.adjacency(r).entries.size()) / static_cast<double>(n);
}

std::size_t bucket_size(const IndexedLog& idx, const VarDecl& v) {
  std::size_t total = 0;
  for (const auto& t : v.types) {
    if (v.kind == VarKind::Event) {
      if (auto c = idx.event_types.find(t)) total += idx.events_by_type[*c].size();
    } else {
      if (auto c = idx.object_types.find(t)) total += idx.objects_by_type[*c].size();
    }
  }
  return total;
}

class Planner {
 public:
  Planner(const std::vector<VarDecl>& vars, const std::vector<Predicate>& preds, const std::set<std::string>& bound)
      : vars_(vars), bound_(bound) {
    std::set<std::string> known = bound;
    for (const auto& v : vars) known.insert(v.name);
    for (const auto& p : preds) {
      if (!is_basic(p)) continue;
      for (const auto& name : variables_of(p)) {
        if (!known.count(name)) {
          throw Error(ErrorCode::UnboundVariableInPredicate,
                      to_string(p) + " references '" + name + "', which is neither bound nor declared");
        }
      }
      preds_.push_back(p);
    }
    consumed_.assign(preds_.size(), false);
    flush_filters();
  }

  std::vector<const VarDecl*> remaining() const {
    std::vector<const VarDecl*> out;
    for (const auto& v : vars_) {
      if (!bound_.count(v.name)) out.push_back(&v);
    }
    return out;
  }

  struct Link {
    std::size_t pred;
    Relation relation;
    Qualifier qual;
    std::string source;
  };

  /// First unconsumed E2O / O2O predicate that reaches v from a bound variable.
  std::optional<Link> link(const VarDecl& v, std::size_t from_pred = 0) const {
    for (std::size_t i = from_pred; i < preds_.size(); ++i) {
      if (consumed_[i]) continue;
      if (const auto* e = std::get_if<E2OPred>(&preds_[i])) {
        if (v.name == e->ob && e->ev != v.name && bound_.count(e->ev)) return Link{i, Relation::E2O, e->qual, e->ev};
        if (v.name == e->ev && e->ob != v.name && bound_.count(e->ob)) return Link{i, Relation::E2O_REV, e->qual, e->ob};
      } else if (const auto* o = std::get_if<O2OPred>(&preds_[i])) {
        if (v.name == o->to && o->from != v.name && bound_.count(o->from)) return Link{i, Relation::O2O, o->qual, o->from};
        if (v.name == o->from && o->to != v.name && bound_.count(o->to)) return Link{i, Relation::O2O_REV, o->qual, o->to};
      }
    }
    return std::nullopt;
  }

  std::vector<Link> links(const VarDecl& v) const {
    std::vector<Link> out;
    for (std::size_t i = 0; i < preds_.size(); ++i) {
      if (auto l = link(v, i); l && l->pred == i) out.push_back(*l);
    }
    return out;
  }

  void bind_from_relation(const VarDecl& v, const Link& l) {
    steps_.push_back(BindFromRelation{v.name, v.kind, v.types, l.relation, l.qual, l.source});
    consumed_[l.pred] = true;
    bound_.insert(v.name);
    flush_filters();
  }

  void bind_from_type(const VarDecl& v) {
    steps_.push_back(BindFromType{v.name, v.kind, v.types});
    bound_.insert(v.name);
    flush_filters();
  }

  std::vector<BindingStep> take() { return std::move(steps_); }

 private:
  void flush_filters() {
    for (std::size_t i = 0; i < preds_.size(); ++i) {
      if (consumed_[i]) continue;
      auto names = variables_of(preds_[i]);
      if (std::all_of(names.begin(), names.end(), [&](const std::string& n) { return bound_.count(n) > 0; })) {
        steps_.push_back(Filter{preds_[i]});
        consumed_[i] = true;
      }
    }
  }

  const std::vector<VarDecl>& vars_;
  std::set<std::string> bound_;
  std::vector<Predicate> preds_;
  std::vector<bool> consumed_;
  std::vector<BindingStep> steps_;
};

}  // namespace

std::vector<BindingStep> plan(const std::vector<VarDecl>& delta_vars, const std::vector<Predicate>& delta_preds,
                              const std::set<std::string>& bound, const IndexedLog& idx) {
  Planner p(delta_vars, delta_preds, bound);
  for (auto rest = p.remaining(); !rest.empty(); rest = p.remaining()) {
    const VarDecl* best_var = nullptr;
    std::optional<Planner::Link> best_link;
    double best_cost = 0;
    for (const VarDecl* v : rest) {
      for (const auto& l : p.links(*v)) {
        double cost = mean_degree(idx, l.relation);
        bool better = !best_link || cost < best_cost ||
                      (cost == best_cost && (v->name < best_var->name || (v->name == best_var->name && l.pred < best_link->pred)));
        if (better) {
          best_var = v;
          best_link = l;
          best_cost = cost;
        }
      }
    }
    if (best_link) {
      p.bind_from_relation(*best_var, *best_link);
      continue;
    }
    const VarDecl* scan = nullptr;
    std::size_t scan_size = 0;
    for (const VarDecl* v : rest) {
      std::size_t n = bucket_size(idx, *v);
      if (!scan || n < scan_size || (n == scan_size && v->name < scan->name)) {
        scan = v;
        scan_size = n;
      }
    }
    p.bind_from_type(*scan);
  }
  return p.take();
}

std::vector<BindingStep> plan_with_order(const std::vector<VarDecl>& delta_vars,
                                         const std::vector<Predicate>& delta_preds,
                                         const std::set<std::string>& bound, const std::vector<std::string>& order) {
  Planner p(delta_vars, delta_preds, bound);
  for (const auto& name : order) {
    auto it = std::find_if(delta_vars.begin(), delta_vars.end(), [&](const VarDecl& v) { return v.name == name; });
    if (it == delta_vars.end()) throw std::invalid_argument("'" + name + "' is not a delta variable");
    if (bound.count(name)) continue;
    if (auto l = p.link(*it)) p.bind_from_relation(*it, *l);
    else p.bind_from_type(*it);
  }
  if (!p.remaining().empty()) throw std::invalid_argument("order does not cover every delta variable");
  return p.take();
}

namespace {

constexpr std::int64_t kMinInf = std::numeric_limits<std::int64_t>::min();
constexpr std::int64_t kMaxInf = std::numeric_limits<std::int64_t>::max();

struct CompiledPred {
  enum class Kind : std::uint8_t { E2O, O2O, TBE };
  Kind kind = Kind::E2O;
  VarCode a = 0;
  VarCode b = 0;
  std::optional<Code> qual;
  bool impossible = false;
  std::int64_t min = kMinInf;
  std::int64_t max = kMaxInf;

  bool holds(const Code* slots, const IndexedLog& idx) const {
    if (impossible) return false;
    switch (kind) {
      case Kind::E2O: return is_related(idx, slots[a], Relation::E2O, slots[b], qual);
      case Kind::O2O: return is_related(idx, slots[a], Relation::O2O, slots[b], qual);
      case Kind::TBE: {
        std::int64_t d = (idx.times[slots[b]] - idx.times[slots[a]]).count();
        return min <= d && d <= max;
      }
    }
    return false;
  }
};

VarCode resolve(const Scope& scope, const std::string& name) {
  auto c = scope.code(name);
  if (!c) throw Error(ErrorCode::UnboundVariableInPredicate, "variable '" + name + "' is not in scope of '" + scope.node + "'");
  return *c;
}

/// Qualifier code; `impossible` when the log never uses the qualifier.
std::optional<Code> qualifier_code(const IndexedLog& idx, const Qualifier& q, bool& impossible) {
  impossible = false;
  if (!q) return std::nullopt;
  auto c = idx.qualifiers.find(*q);
  if (!c) impossible = true;
  return c;
}

CompiledPred compile_pred(const Predicate& p, const Scope& scope, const IndexedLog& idx) {
  CompiledPred c;
  if (const auto* e = std::get_if<E2OPred>(&p)) {
    c.kind = CompiledPred::Kind::E2O;
    c.a = resolve(scope, e->ev);
    c.b = resolve(scope, e->ob);
    c.qual = qualifier_code(idx, e->qual, c.impossible);
  } else if (const auto* o = std::get_if<O2OPred>(&p)) {
    c.kind = CompiledPred::Kind::O2O;
    c.a = resolve(scope, o->from);
    c.b = resolve(scope, o->to);
    c.qual = qualifier_code(idx, o->qual, c.impossible);
  } else if (const auto* t = std::get_if<TBEPred>(&p)) {
    c.kind = CompiledPred::Kind::TBE;
    c.a = resolve(scope, t->from);
    c.b = resolve(scope, t->to);
    if (t->min) c.min = t->min->count();
    if (t->max) c.max = t->max->count();
  } else {
    throw std::invalid_argument("CBS predicates are not binding filters");
  }
  return c;
}

struct ExecStep {
  enum class Op : std::uint8_t { Scan, Expand, Check };
  Op op = Op::Scan;
  VarCode var = 0;
  std::vector<Code> candidates;  // Scan
  Relation relation = Relation::E2O;
  std::optional<Code> qual;
  bool impossible = false;
  VarCode source = 0;
  std::vector<std::uint8_t> type_ok;  // Expand, indexed by type code
  CompiledPred pred;                  // Check
};

std::vector<std::uint8_t> type_mask(const IndexedLog& idx, VarKind kind, const std::set<std::string>& types) {
  const Interner& names = kind == VarKind::Event ? idx.event_types : idx.object_types;
  std::vector<std::uint8_t> mask(names.size(), 0);
  for (const auto& t : types) {
    if (auto c = names.find(t)) mask[*c] = 1;
  }
  return mask;
}

std::vector<ExecStep> compile_steps(const std::vector<BindingStep>& steps, const IndexedLog& idx, const Scope& scope) {
  std::vector<ExecStep> out;
  for (const auto& s : steps) {
    ExecStep x;
    if (const auto* t = std::get_if<BindFromType>(&s)) {
      x.op = ExecStep::Op::Scan;
      x.var = resolve(scope, t->var);
      for (const auto& type : t->types) {
        if (t->kind == VarKind::Event) {
          if (auto c = idx.event_types.find(type)) {
            const auto& b = idx.events_by_type[*c];
            x.candidates.insert(x.candidates.end(), b.begin(), b.end());
          }
        } else if (auto c = idx.object_types.find(type)) {
          const auto& b = idx.objects_by_type[*c];
          x.candidates.insert(x.candidates.end(), b.begin(), b.end());
        }
      }
    } else if (const auto* r = std::get_if<BindFromRelation>(&s)) {
      x.op = ExecStep::Op::Expand;
      x.var = resolve(scope, r->var);
      x.source = resolve(scope, r->source);
      x.relation = r->relation;
      x.qual = qualifier_code(idx, r->qual, x.impossible);
      x.type_ok = type_mask(idx, r->kind, r->types);
    } else {
      x.op = ExecStep::Op::Check;
      x.pred = compile_pred(std::get<Filter>(s).predicate, scope, idx);
    }
    out.push_back(std::move(x));
  }
  return out;
}

class Executor {
 public:
  Executor(const std::vector<ExecStep>& steps, const IndexedLog& idx) : steps_(steps), idx_(idx) {}

  /// Calls emit() for every complete extension of slots. When the first step
  /// is a scan, only its candidates in [lo, hi) are tried.
  template <class Emit>
  void run(Code* slots, Emit& emit, std::size_t lo = 0, std::size_t hi = std::numeric_limits<std::size_t>::max()) const {
    step(0, slots, emit, lo, hi);
  }

 private:
  template <class Emit>
  void step(std::size_t i, Code* slots, Emit& emit, std::size_t lo, std::size_t hi) const {
    if (i == steps_.size()) {
      emit();
      return;
    }
    const ExecStep& s = steps_[i];
    constexpr std::size_t kAll = std::numeric_limits<std::size_t>::max();
    switch (s.op) {
      case ExecStep::Op::Scan: {
        std::size_t end = std::min(hi, s.candidates.size());
        for (std::size_t k = lo; k < end; ++k) {
          slots[s.var] = s.candidates[k];
          step(i + 1, slots, emit, 0, kAll);
        }
        break;
      }
      case ExecStep::Op::Expand: {
        if (s.impossible) return;
        bool to_events = s.relation == Relation::E2O_REV;
        const auto& types = to_events ? idx_.event_type_of : idx_.object_type_of;
        Code last = 0;
        bool any = false;
        for (const auto& a : idx_.adjacency(s.relation).of(slots[s.source])) {
          if (s.qual && a.qualifier != *s.qual) continue;
          if (any && a.neighbor == last) continue;
          if (!s.type_ok[types[a.neighbor]]) continue;
          any = true;
          last = a.neighbor;
          slots[s.var] = a.neighbor;
          step(i + 1, slots, emit, 0, kAll);
        }
        break;
      }
      case ExecStep::Op::Check:
        if (s.pred.holds(slots, idx_)) step(i + 1, slots, emit, 0, kAll);
        break;
    }
  }

  const std::vector<ExecStep>& steps_;
  const IndexedLog& idx_;
};

/// Sorts rows [begin, end) of a row-major table lexicographically.
void sort_rows(std::vector<Code>& cells, std::size_t width, std::size_t begin, std::size_t end) {
  if (end - begin < 2 || width == 0) return;
  auto* base = cells.data() + begin * width;
  if (width == 1) {
    std::sort(base, base + (end - begin));
    return;
  }
  std::vector<std::uint32_t> perm(end - begin);
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](std::uint32_t a, std::uint32_t b) {
    return std::lexicographical_compare(base + a * width, base + (a + 1) * width, base + b * width,
                                        base + (b + 1) * width);
  });
  std::vector<Code> sorted(perm.size() * width);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::copy_n(base + perm[i] * width, width, sorted.data() + i * width);
  }
  std::copy(sorted.begin(), sorted.end(), base);
}

/// Runs fn(unit) for unit in [0, n) on up to `threads` workers. The first
/// exception thrown by any unit is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      if (stop.load(std::memory_order_relaxed)) return;
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };
  std::vector<std::jthread> pool;
  unsigned count = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

struct CompiledNode {
  const QueryNode* node = nullptr;
  std::size_t tree_position = 0;
  int parent = -1;
  std::vector<int> children;
  std::vector<std::string> child_labels;
  std::vector<VarCode> columns;
  std::vector<VarKind> kinds;
  std::size_t parent_width = 0;
  std::vector<ExecStep> steps;

  struct Cbs {
    std::size_t child;  // position in children
    std::uint64_t min;
    std::uint64_t max;
  };
  std::vector<Cbs> pred_cbs;

  struct Constraint {
    bool is_cbs;
    Cbs cbs;
    CompiledPred basic;
  };
  std::vector<Constraint> constraints;

  struct Label {
    LabelAgg agg;
    std::size_t child;
    std::size_t from_col;
    std::size_t to_col;
  };
  std::vector<Label> labels;
};

struct CompiledTree {
  std::vector<CompiledNode> nodes;  // preorder
  std::size_t var_count = 0;
};

std::size_t child_position(const CompiledNode& n, const std::string& edge) {
  auto it = std::find(n.child_labels.begin(), n.child_labels.end(), edge);
  if (it == n.child_labels.end()) throw Error(ErrorCode::QueryInvalid, "edge '" + edge + "' is not an outgoing edge");
  return static_cast<std::size_t>(it - n.child_labels.begin());
}

CompiledNode::Cbs compile_cbs(const CompiledNode& n, const CBSPred& p) {
  return {child_position(n, p.edge), p.min, p.max.value_or(std::numeric_limits<std::uint64_t>::max())};
}

CompiledTree compile(const QueryTree& tree, const IndexedLog& idx) {
  auto findings = validate_tree(tree);
  if (!findings.empty()) throw QueryInvalidError(std::move(findings));
  VariableTable vars(tree);
  CompiledTree ct;
  ct.var_count = vars.size();
  auto order = tree.preorder();
  std::unordered_map<std::string, int> position;
  for (const auto& id : order) position[id] = static_cast<int>(position.size());

  for (const auto& id : order) {
    CompiledNode c;
    c.node = tree.find_node(id);
    c.tree_position = static_cast<std::size_t>(c.node - tree.nodes.data());
    Scope scope{&vars, id};
    c.columns = vars.columns(id);
    for (VarCode v : c.columns) c.kinds.push_back(vars[v].kind);
    for (const auto* e : tree.out_edges(id)) {
      c.children.push_back(position.at(e->to));
      c.child_labels.push_back(e->label);
    }

    const QueryNode* parent = nullptr;
    if (const QueryEdge* in = tree.parent_edge(id)) {
      c.parent = position.at(in->from);
      parent = tree.find_node(in->from);
      c.parent_width = vars.columns(in->from).size();
    }
    std::vector<VarDecl> delta_vars;
    std::set<std::string> bound;
    for (const auto& v : c.node->box.vars) {
      if (parent && parent->box.find_var(v.name)) bound.insert(v.name);
      else delta_vars.push_back(v);
    }
    std::vector<Predicate> delta_preds;
    for (const auto& p : c.node->box.predicates) {
      if (!is_basic(p)) continue;
      if (parent && std::find(parent->box.predicates.begin(), parent->box.predicates.end(), p) !=
                        parent->box.predicates.end()) {
        continue;
      }
      delta_preds.push_back(p);
    }
    c.steps = compile_steps(plan(delta_vars, delta_preds, bound, idx), idx, scope);
    ct.nodes.push_back(std::move(c));
  }

  // CBS, constraints and labels refer to children, which are compiled now.
  for (auto& c : ct.nodes) {
    Scope scope{&vars, c.node->id};
    for (const auto& p : c.node->box.predicates) {
      if (const auto* cbs = std::get_if<CBSPred>(&p)) c.pred_cbs.push_back(compile_cbs(c, *cbs));
    }
    for (const auto& p : c.node->box.constraints) {
      CompiledNode::Constraint k{};
      if (const auto* cbs = std::get_if<CBSPred>(&p)) {
        k.is_cbs = true;
        k.cbs = compile_cbs(c, *cbs);
      } else {
        k.basic = compile_pred(p, scope, idx);
      }
      c.constraints.push_back(k);
    }
    for (const auto& l : c.node->box.labels) {
      CompiledNode::Label k{l.agg, child_position(c, l.edge), 0, 0};
      if (l.agg != LabelAgg::Count) {
        const CompiledNode& child = ct.nodes[static_cast<std::size_t>(c.children[k.child])];
        Scope child_scope{&vars, child.node->id};
        auto col = [&](const std::string& name) {
          VarCode v = resolve(child_scope, name);
          return static_cast<std::size_t>(std::find(child.columns.begin(), child.columns.end(), v) - child.columns.begin());
        };
        k.from_col = col(l.from);
        k.to_col = col(l.to);
      }
      c.labels.push_back(k);
    }
  }
  return ct;
}

class TreeEvaluator {
 public:
  TreeEvaluator(const CompiledTree& ct, const IndexedLog& idx, const EvaluationOptions& opts)
      : ct_(ct), idx_(idx), opts_(opts) {
    threads_ = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  }

  /// Evaluates the subtree under `start` given its parent's cells.
  std::vector<NodeResult> run(std::size_t start, const std::vector<Code>& initial) {
    std::vector<NodeResult> results(ct_.nodes.size());
    std::vector<std::size_t> order;
    for (std::size_t i = start; i < ct_.nodes.size(); ++i) {
      if (i == start || in_subtree(i, start)) order.push_back(i);
    }
    for (std::size_t i : order) expand_node(i, i == start, initial, results);
    for (auto it = order.rbegin(); it != order.rend(); ++it) annotate(*it, results);
    for (std::size_t i : order) {
      auto& r = results[i];
      r.ancestor_excluded.assign(r.rows(), 0);
      if (i == start) continue;
      const auto& p = results[static_cast<std::size_t>(ct_.nodes[i].parent)];
      for (std::size_t row = 0; row < r.rows(); ++row) {
        std::uint32_t pr = r.parent[row];
        r.ancestor_excluded[row] = p.cbs_excluded[pr] | p.ancestor_excluded[pr];
      }
    }
    return results;
  }

 private:
  bool in_subtree(std::size_t i, std::size_t start) const {
    for (int p = ct_.nodes[i].parent; p >= 0; p = ct_.nodes[static_cast<std::size_t>(p)].parent) {
      if (static_cast<std::size_t>(p) == start) return true;
    }
    return false;
  }

  void check_deadline() const {
    if (opts_.deadline && std::chrono::steady_clock::now() > *opts_.deadline) {
      throw Error(ErrorCode::Timeout, "evaluation exceeded its deadline");
    }
  }

  [[noreturn]] void too_large(const CompiledNode& c) const {
    throw Error(ErrorCode::ResultTooLarge, "node '" + c.node->id + "' exceeds " +
                                               std::to_string(opts_.max_rows_per_node) + " rows");
  }

  void expand_node(std::size_t i, bool is_start, const std::vector<Code>& initial, std::vector<NodeResult>& results) {
    check_deadline();
    auto t0 = std::chrono::steady_clock::now();
    const CompiledNode& c = ct_.nodes[i];
    NodeResult& out = results[i];
    out.node_id = c.node->id;
    out.columns = c.columns;
    out.kinds = c.kinds;
    out.constraint_count = c.constraints.size();
    out.label_count = c.labels.size();

    const std::size_t width = c.columns.size();
    const std::size_t pw = c.parent_width;
    const NodeResult* parent = is_start ? nullptr : &results[static_cast<std::size_t>(c.parent)];
    const std::size_t n_parents = parent ? parent->rows() : 1;
    const bool split_scan = n_parents == 1 && !c.steps.empty() && c.steps[0].op == ExecStep::Op::Scan;
    const std::size_t n_items = split_scan ? c.steps[0].candidates.size() : n_parents;

    std::size_t n_units = 0;
    if (n_items > 0) n_units = threads_ <= 1 ? 1 : std::min<std::size_t>(n_items, std::size_t{threads_} * 8);
    struct Buffer {
      std::vector<Code> cells;
      std::vector<std::uint32_t> parent;
    };
    std::vector<Buffer> buffers(n_units);
    std::atomic<std::size_t> emitted{0};
    Executor exec(c.steps, idx_);

    parallel_for(n_units, threads_, [&](std::size_t unit) {
      std::size_t lo = n_items * unit / n_units;
      std::size_t hi = n_items * (unit + 1) / n_units;
      Buffer& buf = buffers[unit];
      std::vector<Code> slots(ct_.var_count, 0);
      std::size_t local = 0;
      std::uint32_t current_parent = NodeResult::kNoParent;
      auto emit = [&] {
        for (VarCode v : c.columns) buf.cells.push_back(slots[v]);
        buf.parent.push_back(current_parent);
        if (++local % 4096 == 0) {
          if (emitted.fetch_add(4096) + 4096 > opts_.max_rows_per_node) too_large(c);
          check_deadline();
        }
      };
      auto load_parent = [&](const Code* cells) {
        for (std::size_t k = 0; k < pw; ++k) slots[c.columns[k]] = cells[k];
      };
      if (split_scan) {
        if (parent) {
          load_parent(parent->row(0).data());
          current_parent = 0;
        } else {
          load_parent(initial.data());
        }
        exec.run(slots.data(), emit, lo, hi);
      } else {
        for (std::size_t p = lo; p < hi; ++p) {
          if (parent) {
            load_parent(parent->row(p).data());
            current_parent = static_cast<std::uint32_t>(p);
          } else {
            load_parent(initial.data());
          }
          std::size_t first = buf.parent.size();
          exec.run(slots.data(), emit);
          if (n_parents > 1) sort_rows(buf.cells, width, first, buf.parent.size());
          if ((p & 255) == 0) check_deadline();
        }
      }
      if (emitted.fetch_add(local % 4096) + local % 4096 > opts_.max_rows_per_node) too_large(c);
    });

    std::size_t total = 0;
    for (const auto& b : buffers) total += b.parent.size();
    if (total > opts_.max_rows_per_node) too_large(c);
    out.cells.reserve(total * width);
    out.parent.reserve(total);
    for (auto& b : buffers) {
      out.cells.insert(out.cells.end(), b.cells.begin(), b.cells.end());
      out.parent.insert(out.parent.end(), b.parent.begin(), b.parent.end());
      b = Buffer{};
    }
    if (n_parents == 1) sort_rows(out.cells, width, 0, total);
    out.elapsed = std::chrono::steady_clock::now() - t0;
  }

  void annotate(std::size_t i, std::vector<NodeResult>& results) {
    auto t0 = std::chrono::steady_clock::now();
    const CompiledNode& c = ct_.nodes[i];
    NodeResult& r = results[i];
    const std::size_t rows = r.rows();
    const std::size_t k_children = c.children.size();

    // Per child edge: non-excluded child count and child row range per row.
    std::vector<std::vector<std::uint64_t>> counts(k_children, std::vector<std::uint64_t>(rows, 0));
    std::vector<std::vector<std::size_t>> offsets(k_children, std::vector<std::size_t>(rows + 1, 0));
    for (std::size_t k = 0; k < k_children; ++k) {
      const NodeResult& ch = results[static_cast<std::size_t>(c.children[k])];
      for (std::size_t j = 0; j < ch.rows(); ++j) {
        std::uint32_t p = ch.parent[j];
        ++offsets[k][p + 1];
        if (!ch.cbs_excluded[j]) ++counts[k][p];
      }
      std::partial_sum(offsets[k].begin(), offsets[k].end(), offsets[k].begin());
    }

    auto cbs_holds = [&](const CompiledNode::Cbs& cbs, std::size_t row) {
      std::uint64_t n = counts[cbs.child][row];
      return cbs.min <= n && n <= cbs.max;
    };

    r.cbs_excluded.assign(rows, 0);
    r.verdicts.assign(rows * c.constraints.size(), 0);
    r.labels.assign(rows * c.labels.size(), std::nullopt);
    std::vector<Code> slots(ct_.var_count, 0);
    std::vector<Duration> durations;
    for (std::size_t row = 0; row < rows; ++row) {
      bool excluded = false;
      for (const auto& cbs : c.pred_cbs) excluded = excluded || !cbs_holds(cbs, row);
      r.cbs_excluded[row] = excluded;
      if (!excluded && !c.constraints.empty()) {
        auto cells = r.row(row);
        for (std::size_t k = 0; k < cells.size(); ++k) slots[c.columns[k]] = cells[k];
        for (std::size_t k = 0; k < c.constraints.size(); ++k) {
          const auto& con = c.constraints[k];
          bool ok = con.is_cbs ? cbs_holds(con.cbs, row) : con.basic.holds(slots.data(), idx_);
          r.verdicts[row * c.constraints.size() + k] = ok;
        }
      }
      for (std::size_t k = 0; k < c.labels.size(); ++k) {
        const auto& l = c.labels[k];
        durations.clear();
        if (l.agg != LabelAgg::Count) {
          const NodeResult& ch = results[static_cast<std::size_t>(c.children[l.child])];
          for (std::size_t j = offsets[l.child][row]; j < offsets[l.child][row + 1]; ++j) {
            if (ch.cbs_excluded[j]) continue;
            auto cells = ch.row(j);
            durations.push_back(idx_.times[cells[l.to_col]] - idx_.times[cells[l.from_col]]);
          }
        }
        r.labels[row * c.labels.size() + k] = compute_label(l.agg, durations, counts[l.child][row]);
      }
    }
    r.elapsed += std::chrono::steady_clock::now() - t0;
  }

  const CompiledTree& ct_;
  const IndexedLog& idx_;
  const EvaluationOptions& opts_;
  unsigned threads_ = 1;
};

}  // namespace

std::vector<Binding> expand(const Binding& parent, const std::vector<BindingStep>& steps, const IndexedLog& idx,
                            const Scope& scope) {
  auto exec_steps = compile_steps(steps, idx, scope);
  std::vector<VarCode> new_vars;
  std::vector<VarKind> new_kinds;
  std::size_t max_var = 0;
  for (auto w : parent.words()) max_var = std::max<std::size_t>(max_var, Binding::var_of(w));
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (exec_steps[i].op == ExecStep::Op::Check) continue;
    new_vars.push_back(exec_steps[i].var);
    const auto* t = std::get_if<BindFromType>(&steps[i]);
    new_kinds.push_back(t ? t->kind : std::get<BindFromRelation>(steps[i]).kind);
    max_var = std::max<std::size_t>(max_var, exec_steps[i].var);
  }
  std::vector<Code> slots(max_var + 1, 0);
  for (auto w : parent.words()) slots[Binding::var_of(w)] = Binding::entity_of(w);
  std::vector<Binding> out;
  auto emit = [&] {
    Binding b = parent;
    for (std::size_t k = 0; k < new_vars.size(); ++k) b.set(new_vars[k], new_kinds[k], slots[new_vars[k]]);
    out.push_back(std::move(b));
  };
  Executor(exec_steps, idx).run(slots.data(), emit);
  std::sort(out.begin(), out.end());
  return out;
}

Binding NodeResult::binding(std::size_t i) const {
  Binding b;
  auto cells = row(i);
  for (std::size_t k = 0; k < columns.size(); ++k) b.set(columns[k], kinds[k], cells[k]);
  return b;
}

bool NodeResult::satisfied(std::size_t i) const {
  if (cbs_excluded[i]) return false;
  auto v = row_verdicts(i);
  return std::all_of(v.begin(), v.end(), [](std::uint8_t x) { return x != 0; });
}

NodeCounts NodeResult::counts() const {
  NodeCounts c;
  c.total_basic = rows();
  for (std::size_t i = 0; i < rows(); ++i) {
    if (cbs_excluded[i]) continue;
    if (satisfied(i)) ++c.satisfied;
    else ++c.violated;
  }
  return c;
}

bool NodeResult::operator==(const NodeResult& o) const {
  return node_id == o.node_id && columns == o.columns && kinds == o.kinds && constraint_count == o.constraint_count &&
         label_count == o.label_count && cells == o.cells && parent == o.parent && cbs_excluded == o.cbs_excluded &&
         ancestor_excluded == o.ancestor_excluded && verdicts == o.verdicts && labels == o.labels;
}

const NodeResult* EvaluationResult::find(std::string_view node_id) const {
  for (const auto& n : nodes) {
    if (n.node_id == node_id) return &n;
  }
  return nullptr;
}

EvaluationResult evaluate_tree(const QueryTree& tree, const IndexedLog& idx, const EvaluationOptions& options) {
  auto t0 = std::chrono::steady_clock::now();
  CompiledTree ct = compile(tree, idx);
  auto by_preorder = TreeEvaluator(ct, idx, options).run(0, {});
  EvaluationResult result;
  result.nodes.resize(tree.nodes.size());
  for (std::size_t i = 0; i < ct.nodes.size(); ++i) {
    result.nodes[ct.nodes[i].tree_position] = std::move(by_preorder[i]);
  }
  result.wall_time = std::chrono::steady_clock::now() - t0;
  return result;
}

NodeEvaluation evaluate_node(const QueryTree& tree, std::string_view node_id, const Binding& parent,
                             const IndexedLog& idx, const EvaluationOptions& options) {
  CompiledTree ct = compile(tree, idx);
  std::size_t start = ct.nodes.size();
  for (std::size_t i = 0; i < ct.nodes.size(); ++i) {
    if (ct.nodes[i].node->id == node_id) start = i;
  }
  if (start == ct.nodes.size()) throw Error(ErrorCode::UnknownNode, "no node '" + std::string(node_id) + "'");
  const CompiledNode& c = ct.nodes[start];
  std::vector<Code> initial;
  for (std::size_t k = 0; k < c.parent_width; ++k) {
    auto v = parent.get(c.columns[k], c.kinds[k]);
    if (!v) throw Error(ErrorCode::UnknownRef, "parent binding does not bind every variable of the parent node");
    initial.push_back(*v);
  }
  auto results = TreeEvaluator(ct, idx, options).run(start, initial);
  const NodeResult& r = results[start];
  NodeEvaluation out;
  for (std::size_t i = 0; i < r.rows(); ++i) {
    (r.cbs_excluded[i] ? out.basic_only : out.satisfied).push_back(r.binding(i));
  }
  return out;
}

std::vector<bool> evaluate_constraints(const BindingBox& box, const Binding& row,
                                       const std::unordered_map<std::string, std::uint64_t>& child_counts,
                                       const IndexedLog& idx, const Scope& scope) {
  std::vector<bool> out;
  for (const auto& p : box.constraints) {
    if (const auto* cbs = std::get_if<CBSPred>(&p)) {
      auto it = child_counts.find(cbs->edge);
      std::uint64_t n = it == child_counts.end() ? 0 : it->second;
      out.push_back(cbs->min <= n && (!cbs->max || n <= *cbs->max));
    } else {
      out.push_back(satisfies_basic(row, p, idx, scope));
    }
  }
  return out;
}

std::optional<std::int64_t> compute_label(LabelAgg agg, std::span<const Duration> durations,
                                          std::uint64_t child_count) {
  if (agg == LabelAgg::Count) return static_cast<std::int64_t>(child_count);
  if (durations.empty()) return std::nullopt;
  switch (agg) {
    case LabelAgg::MinDur: return std::min_element(durations.begin(), durations.end())->count();
    case LabelAgg::MaxDur: return std::max_element(durations.begin(), durations.end())->count();
    case LabelAgg::MeanDur: {
      __int128 sum = 0;
      for (auto d : durations) sum += d.count();
      return static_cast<std::int64_t>(sum / static_cast<__int128>(durations.size()));
    }
    case LabelAgg::Count: break;
  }
  return std::nullopt;
}

}  // namespace ocpq
