#include "test_support.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ocpq/query_json.hpp"

namespace ocpq::testing {

namespace {

template <class T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::size_t below(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool chance(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

std::string name(const char* prefix, std::size_t i) { return prefix + std::to_string(i); }

class TreeBuilder {
 public:
  TreeBuilder(std::mt19937_64& rng, const RandomTreeParams& p) : rng_(rng), p_(p) {}

  QueryTree build() {
    tree_.root = "n0";
    grow(BindingBox{}, 1);
    return std::move(tree_);
  }

 private:
  Qualifier qualifier() {
    double r = std::uniform_real_distribution<double>(0, 1)(rng_);
    if (r < 0.5) return kWildcard;
    if (r < 0.95) return name("q", below(rng_, 2));
    return std::string("absent");
  }

  TBEPred tbe(const std::string& from, const std::string& to) {
    static const std::vector<std::optional<std::int64_t>> mins = {std::nullopt, -2, 0, 0, 1};
    static const std::vector<std::optional<std::int64_t>> maxs = {std::nullopt, 0, 2, 8, 8};
    auto lo = pick(rng_, mins);
    auto hi = pick(rng_, maxs);
    if (lo && hi && *lo > *hi) std::swap(lo, hi);
    TBEPred t{from, to, std::nullopt, std::nullopt};
    if (lo) t.min = std::chrono::hours(*lo);
    if (hi) t.max = std::chrono::hours(*hi);
    return t;
  }

  std::vector<const VarDecl*> of_kind(const BindingBox& box, VarKind k) {
    std::vector<const VarDecl*> out;
    for (const auto& v : box.vars) {
      if (v.kind == k) out.push_back(&v);
    }
    return out;
  }

  /// Some BASIC predicate over `v` and a variable already in the box, if any fits.
  std::optional<Predicate> connect(const BindingBox& box, const VarDecl& v) {
    auto events = of_kind(box, VarKind::Event);
    auto objects = of_kind(box, VarKind::Object);
    std::vector<Predicate> options;
    if (v.kind == VarKind::Event) {
      for (const auto* o : objects) options.push_back(E2OPred{v.name, o->name, qualifier()});
      if (!events.empty() && chance(rng_, 0.3)) {
        const auto* e = pick(rng_, events);
        options.push_back(chance(rng_, 0.5) ? tbe(e->name, v.name) : tbe(v.name, e->name));
      }
    } else {
      for (const auto* e : events) options.push_back(E2OPred{e->name, v.name, qualifier()});
      for (const auto* o : objects) {
        options.push_back(chance(rng_, 0.5) ? Predicate{O2OPred{o->name, v.name, qualifier()}}
                                            : Predicate{O2OPred{v.name, o->name, qualifier()}});
      }
    }
    if (options.empty()) return std::nullopt;
    return pick(rng_, options);
  }

  std::optional<Predicate> any_basic(const BindingBox& box) {
    if (box.vars.empty()) return std::nullopt;
    const VarDecl& a = pick(rng_, box.vars);
    const VarDecl& b = pick(rng_, box.vars);
    if (a.kind == VarKind::Event && b.kind == VarKind::Event) return tbe(a.name, b.name);
    if (a.kind == VarKind::Event) return E2OPred{a.name, b.name, qualifier()};
    if (b.kind == VarKind::Event) return E2OPred{b.name, a.name, qualifier()};
    return O2OPred{a.name, b.name, qualifier()};
  }

  CBSPred cbs(const std::string& edge) {
    CBSPred c{edge, below(rng_, 3), std::nullopt};
    if (chance(rng_, 0.6)) c.max = c.min + below(rng_, 3);
    return c;
  }

  void add_var(BindingBox& box) {
    VarDecl v;
    v.kind = chance(rng_, 0.5) ? VarKind::Event : VarKind::Object;
    v.name = name(v.kind == VarKind::Event ? "e" : "o", next_var_++);
    const char* prefix = v.kind == VarKind::Event ? "ev" : "ot";
    v.types.insert(name(prefix, below(rng_, 3)));
    if (chance(rng_, 0.4)) v.types.insert(name(prefix, below(rng_, 3)));
    std::optional<Predicate> link = chance(rng_, 0.8) ? connect(box, v) : std::nullopt;
    box.vars.push_back(std::move(v));
    if (link) box.predicates.push_back(*link);
  }

  std::size_t grow(const BindingBox& parent, std::size_t depth) {
    BindingBox box = restrict_to_basic(parent);
    std::size_t room = p_.max_vars - std::min(p_.max_vars, box.vars.size());
    std::size_t fresh = room == 0 ? 0 : below(rng_, room + 1);
    if (depth == 1 && fresh == 0) fresh = 1;
    for (std::size_t i = 0; i < fresh; ++i) add_var(box);
    if (chance(rng_, 0.25)) {
      if (auto p = any_basic(box)) box.predicates.push_back(*p);
    }

    std::size_t me = tree_.nodes.size();
    std::string id = name("n", me);
    tree_.nodes.push_back({id, box});

    std::vector<std::pair<std::string, std::size_t>> children;  // edge label, node position
    if (depth < p_.max_depth) {
      std::size_t n = below(rng_, p_.max_children + 1);
      for (std::size_t i = 0; i < n; ++i) {
        std::string label = name("E", next_edge_++);
        tree_.edges.push_back({id, "", label});
        std::size_t edge_pos = tree_.edges.size() - 1;
        std::size_t child = grow(box, depth + 1);
        tree_.edges[edge_pos].to = tree_.nodes[child].id;
        children.emplace_back(label, child);
      }
    }

    BindingBox& self = tree_.nodes[me].box;
    for (const auto& [label, child] : children) {
      if (chance(rng_, 0.4)) self.predicates.push_back(cbs(label));
      if (chance(rng_, 0.4)) self.constraints.push_back(cbs(label));
      if (chance(rng_, 0.3)) self.labels.push_back({name("count_", self.labels.size()), LabelAgg::Count, label, "", ""});
      auto events = of_kind(tree_.nodes[child].box, VarKind::Event);
      if (!events.empty() && chance(rng_, 0.4)) {
        static const std::vector<LabelAgg> aggs = {LabelAgg::MinDur, LabelAgg::MaxDur, LabelAgg::MeanDur};
        self.labels.push_back({name("dur_", self.labels.size()), pick(rng_, aggs), label, pick(rng_, events)->name,
                               pick(rng_, events)->name});
      }
    }
    if (chance(rng_, 0.3)) {
      if (auto p = any_basic(self)) self.constraints.push_back(*p);
    }
    return me;
  }

  std::mt19937_64& rng_;
  RandomTreeParams p_;
  QueryTree tree_;
  std::size_t next_var_ = 0;
  std::size_t next_edge_ = 0;
};

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fixture_path(const std::string& relative) { return std::string(OCPQ_FIXTURE_DIR) + "/" + relative; }

Oced load_log(const std::string& name) { return import_ocel2_json(read_text(fixture_path("logs/" + name + ".json"))); }

QueryTree load_query(const std::string& name) {
  return parse_query_json(read_text(fixture_path("queries/" + name + ".json")));
}

Timestamp at(const char* rfc3339) {
  auto t = parse_rfc3339(rfc3339);
  if (!t) throw std::invalid_argument(rfc3339);
  return *t;
}

Oced random_log(std::mt19937_64& rng, const RandomLogParams& p) {
  const Timestamp base = at("2024-01-01T00:00:00Z");
  std::size_t n_objects = 1 + below(rng, p.max_objects);
  std::size_t n_events = 1 + below(rng, p.max_events);
  std::vector<Object> objects;
  for (std::size_t i = 0; i < n_objects; ++i) {
    Object o;
    o.id = name("o", i);
    o.otype = name("ot", below(rng, p.object_types));
    std::size_t refs = below(rng, 3);
    for (std::size_t r = 0; r < refs; ++r) {
      o.o2o.push_back({name("q", below(rng, p.qualifiers)), name("o", below(rng, n_objects))});
    }
    objects.push_back(std::move(o));
  }
  std::vector<Event> events;
  for (std::size_t i = 0; i < n_events; ++i) {
    Event e;
    e.id = name("e", i);
    e.activity = name("ev", below(rng, p.event_types));
    e.time = base + std::chrono::minutes(30 * below(rng, 40));
    std::size_t refs = 1 + below(rng, 3);
    for (std::size_t r = 0; r < refs; ++r) {
      e.e2o.push_back({name("q", below(rng, p.qualifiers)), name("o", below(rng, n_objects))});
    }
    events.push_back(std::move(e));
  }
  return Oced(std::move(events), std::move(objects));
}

QueryTree random_tree(std::mt19937_64& rng, const RandomTreeParams& p) { return TreeBuilder(rng, p).build(); }

std::string diff(const EvaluationResult& expected, const EvaluationResult& actual) {
  if (expected.nodes.size() != actual.nodes.size()) return "node count differs";
  for (std::size_t n = 0; n < expected.nodes.size(); ++n) {
    const NodeResult& a = expected.nodes[n];
    const NodeResult& b = actual.nodes[n];
    std::string where = "node " + a.node_id + ": ";
    if (a.node_id != b.node_id) return where + "id differs (" + b.node_id + ")";
    if (a.columns != b.columns || a.kinds != b.kinds) return where + "columns differ";
    if (a.rows() != b.rows()) {
      return where + "expected " + std::to_string(a.rows()) + " rows, got " + std::to_string(b.rows());
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
      std::string row = where + "row " + std::to_string(i) + ": ";
      if (!std::equal(a.row(i).begin(), a.row(i).end(), b.row(i).begin())) return row + "binding differs";
      if (a.parent[i] != b.parent[i]) return row + "parent link differs";
      if (a.cbs_excluded[i] != b.cbs_excluded[i]) return row + "cbs_excluded differs";
      if (a.ancestor_excluded[i] != b.ancestor_excluded[i]) return row + "ancestor_excluded differs";
      if (!std::equal(a.row_verdicts(i).begin(), a.row_verdicts(i).end(), b.row_verdicts(i).begin(),
                      b.row_verdicts(i).end())) {
        return row + "verdicts differ";
      }
      if (!std::equal(a.row_labels(i).begin(), a.row_labels(i).end(), b.row_labels(i).begin(),
                      b.row_labels(i).end())) {
        return row + "labels differ";
      }
    }
    if (!(a == b)) return where + "tables differ";
  }
  return {};
}

Oced query_suite_log() {
  LoanConfig cfg;
  cfg.applications = 100;
  cfg.seed = 2017;
  return generate_loan_log(cfg);
}

std::vector<std::string> query_suite_names() { return {"q1", "q2", "q3", "q4", "q5", "q6", "q7"}; }

}  // namespace ocpq::testing
