#include "ocpq/query.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include "ocpq/index.hpp"
#include "test_support.hpp"

namespace ocpq {
namespace {

std::vector<std::string> codes(const std::vector<Finding>& fs) {
  std::vector<std::string> out;
  for (const auto& f : fs) out.push_back(f.code);
  return out;
}

bool has(const std::vector<Finding>& fs, const std::string& code) {
  auto c = codes(fs);
  return std::find(c.begin(), c.end(), code) != c.end();
}

// Variables e1=0, e2=1, o1=2, o2=3, o3=4 as in the nested-query example bindings.
Binding make(std::initializer_list<std::tuple<VarCode, VarKind, Code>> entries) {
  Binding b;
  for (auto [v, k, e] : entries) b.set(v, k, e);
  return b;
}
constexpr auto E = VarKind::Event;
constexpr auto O = VarKind::Object;

TEST(ChildRelation, ExamplesFromNestedQueries) {
  Binding b2 = make({{2, O, 1}});
  Binding b3 = make({{3, O, 1}});
  Binding b4 = make({{0, E, 1}, {1, E, 3}, {2, O, 1}, {4, O, 3}});
  EXPECT_TRUE(is_child(b2, b4));
  EXPECT_FALSE(is_child(b3, b4));
  EXPECT_TRUE(is_child(Binding{}, b4));
  EXPECT_FALSE(is_child(b4, b2));
  EXPECT_FALSE(is_child(make({{2, O, 2}}), b4));
}

TEST(Binding, SetGetAndOrder) {
  Binding b;
  b.set(5, O, 7);
  b.set(1, E, 3);
  b.set(5, O, 8);
  EXPECT_EQ(b.size(), 2u);
  EXPECT_EQ(b.get(5), 8u);
  EXPECT_EQ(b.get(5, O), 8u);
  EXPECT_FALSE(b.get(5, E));
  EXPECT_FALSE(b.get(2));
  EXPECT_TRUE(std::is_sorted(b.words().begin(), b.words().end()));
  EXPECT_EQ(Binding::var_of(b.words()[0]), 1u);
  EXPECT_EQ(Binding::kind_of(b.words()[1]), O);
}

class ExScope : public ::testing::Test {
 protected:
  static QueryTree make_tree() {
    QueryTree tree;
    tree.root = "n";
    tree.nodes.push_back({"n",
                          {{{"e1", E, {"payment reminder"}},
                            {"o1", O, {"orders", "customers"}},
                            {"o2", O, {"orders", "customers"}},
                            {"x", E, {"pack item"}},
                            {"y", E, {"pack item"}}},
                           {},
                           {},
                           {}}});
    return tree;
  }
  Binding bind(std::initializer_list<std::pair<const char*, const char*>> entries) {
    Binding b;
    for (auto [var, id] : entries) {
      auto v = *scope.code(var);
      if (table[v].kind == E) b.set(v, E, *idx.event_ids.find(id));
      else b.set(v, O, *idx.object_ids.find(id));
    }
    return b;
  }

  Oced log = testing::load_log("l_ex");
  IndexedLog idx = build_index(log);
  QueryTree tree = make_tree();
  VariableTable table{tree};
  Scope scope{&table, "n"};
};

TEST_F(ExScope, SatisfiesBasic) {
  EXPECT_TRUE(satisfies_basic(bind({{"e1", "e5"}, {"o1", "o2"}}), E2OPred{"e1", "o1", "order"}, idx, scope));
  EXPECT_FALSE(satisfies_basic(bind({{"e1", "e5"}, {"o1", "o2"}}), E2OPred{"e1", "o1", "recipient"}, idx, scope));
  EXPECT_FALSE(satisfies_basic(bind({{"e1", "e5"}, {"o1", "o2"}}), E2OPred{"e1", "o1", "unseen"}, idx, scope));
  EXPECT_FALSE(satisfies_basic(bind({{"o1", "o1"}}), O2OPred{"o1", "o2", kWildcard}, idx, scope));
  EXPECT_TRUE(satisfies_basic(bind({{"o1", "o1"}, {"o2", "o2"}}), O2OPred{"o1", "o2", "places"}, idx, scope));
  EXPECT_FALSE(satisfies_basic(bind({{"o1", "o1"}, {"o2", "o2"}}), O2OPred{"o2", "o1", kWildcard}, idx, scope));
  for (const char* e : {"e2", "e3"}) {
    EXPECT_TRUE(satisfies_basic(bind({{"x", e}, {"y", e}}), TBEPred{"x", "y", Duration{0}, Duration{0}}, idx, scope));
  }
  EXPECT_FALSE(satisfies_basic(bind({{"x", "e2"}, {"y", "e3"}}), CBSPred{"A", 0, std::nullopt}, idx, scope));
}

TEST_F(ExScope, TimeBetweenEventsIsSignedAndInclusive) {
  Binding b = bind({{"x", "e2"}, {"y", "e3"}});  // one hour apart
  auto hour = std::chrono::hours(1);
  EXPECT_TRUE(satisfies_basic(b, TBEPred{"x", "y", hour, hour}, idx, scope));
  EXPECT_FALSE(satisfies_basic(b, TBEPred{"y", "x", Duration{0}, std::nullopt}, idx, scope));
  EXPECT_TRUE(satisfies_basic(b, TBEPred{"y", "x", -hour, -hour}, idx, scope));
  EXPECT_TRUE(satisfies_basic(b, TBEPred{"y", "x", std::nullopt, std::nullopt}, idx, scope));
  EXPECT_FALSE(satisfies_basic(b, TBEPred{"x", "y", hour + Duration{1}, std::nullopt}, idx, scope));
}

TEST_F(ExScope, BindingToString) {
  EXPECT_EQ(to_string(bind({{"o1", "o1"}, {"e1", "e5"}}), table, idx), "{e1↦e5, o1↦o1}");
}

BindingBox box_a() {
  return {{{"o1", O, {"orders"}}, {"e1", E, {"place order", "confirm order"}}},
          {E2OPred{"e1", "o1", "order"}},
          {},
          {}};
}

TEST(Refinement, Examples) {
  BindingBox b{{{"o1", O, {"orders"}}}, {}, {}, {}};
  EXPECT_TRUE(is_refinement(b, box_a()));
  EXPECT_FALSE(is_refinement(box_a(), b));
  EXPECT_TRUE(is_refinement(box_a(), box_a()));

  BindingBox with_cbs = box_a();
  with_cbs.predicates.push_back(CBSPred{"A", 1, 1});
  EXPECT_TRUE(is_refinement(with_cbs, box_a()));
  EXPECT_TRUE(is_refinement(box_a(), with_cbs));
  EXPECT_EQ(restrict_to_basic(with_cbs), box_a());

  BindingBox other_types = box_a();
  other_types.vars[1].types = {"place order"};
  EXPECT_FALSE(is_refinement(box_a(), other_types));
}

TEST(ValidateTree, PaperTreeIsWellFormed) {
  for (const char* q : {"fig3", "fig4", "fig5", "box_example", "q1", "q2", "q3", "q4", "q5", "q6", "q7"}) {
    EXPECT_TRUE(validate_tree(testing::load_query(q)).empty()) << q;
  }
}

TEST(ValidateTree, DuplicateEdgeLabel) {
  QueryTree t = testing::load_query("fig3");
  t.edges[1].label = "A";
  EXPECT_TRUE(has(validate_tree(t), "DuplicateEdgeLabel"));
}

TEST(ValidateTree, ChildDropsParentVariable) {
  QueryTree t = testing::load_query("fig3");
  auto& vars = t.nodes[1].box.vars;
  vars.erase(std::find_if(vars.begin(), vars.end(), [](const VarDecl& v) { return v.name == "o1"; }));
  EXPECT_TRUE(has(validate_tree(t), "RefinementViolation"));
}

TEST(ValidateTree, ChildChangesTypesOrDropsPredicate) {
  QueryTree t = testing::load_query("fig3");
  t.nodes[2].box.vars[0].types.insert("items");
  EXPECT_TRUE(has(validate_tree(t), "RefinementViolation"));
  t = testing::load_query("fig3");
  t.nodes[2].box.predicates.erase(t.nodes[2].box.predicates.begin());
  EXPECT_TRUE(has(validate_tree(t), "RefinementViolation"));
}

TEST(ValidateTree, StructuralFindings) {
  QueryTree t = testing::load_query("fig3");
  t.root = "nowhere";
  EXPECT_TRUE(has(validate_tree(t), "UnknownRoot"));

  t = testing::load_query("fig3");
  t.edges.push_back({"v1", "v0", "C"});
  EXPECT_TRUE(has(validate_tree(t), "NotATree"));

  t = testing::load_query("fig3");
  t.edges.push_back({"v1", "v9", "C"});
  EXPECT_TRUE(has(validate_tree(t), "UnknownEdgeEndpoint"));

  t = testing::load_query("fig3");
  t.nodes[0].box.predicates.push_back(CBSPred{"Z", 0, std::nullopt});
  EXPECT_TRUE(has(validate_tree(t), "UnknownEdge"));

  t = testing::load_query("fig3");
  t.nodes[1].box.predicates.push_back(CBSPred{"A", 0, 0});  // A leaves v0, not v1
  EXPECT_TRUE(has(validate_tree(t), "UnknownEdge"));

  t = testing::load_query("fig3");
  t.nodes[0].box.constraints.push_back(E2OPred{"e2", "o1", kWildcard});
  EXPECT_TRUE(has(validate_tree(t), "UnboundVariable"));

  t = testing::load_query("fig3");
  t.nodes[0].box.predicates.push_back(E2OPred{"o1", "e1", kWildcard});
  EXPECT_TRUE(has(validate_tree(t), "KindMismatch"));

  t = testing::load_query("fig3");
  t.nodes[0].box.vars[0].types.clear();
  EXPECT_TRUE(has(validate_tree(t), "EmptyTypeSet"));

  t = testing::load_query("fig3");
  t.nodes[0].box.predicates.push_back(CBSPred{"A", 3, 1});
  EXPECT_TRUE(has(validate_tree(t), "InvalidBounds"));

  t = testing::load_query("fig3");
  t.nodes[0].box.labels.push_back({"late", LabelAgg::MaxDur, "A", "e1", "o1"});
  EXPECT_TRUE(has(validate_tree(t), "InvalidLabel"));

  EXPECT_TRUE(has(validate_tree(QueryTree{}), "EmptyTree"));
}

TEST(VariableTable, ParentColumnsArePrefixes) {
  QueryTree t = testing::load_query("fig3");
  VariableTable vars(t);
  const auto& root = vars.columns("v0");
  for (const char* child : {"v1", "v2"}) {
    const auto& cols = vars.columns(child);
    ASSERT_EQ(cols.size(), root.size() + 1);
    EXPECT_TRUE(std::equal(root.begin(), root.end(), cols.begin()));
  }
  // Sibling subtrees may reuse a name; each declaration gets its own code.
  EXPECT_NE(vars.find("v1", "e2"), vars.find("v2", "e2"));
  EXPECT_EQ(vars.find("v1", "o1"), vars.find("v0", "o1"));
  EXPECT_FALSE(vars.find("v0", "e2"));
}

}  // namespace
}  // namespace ocpq
