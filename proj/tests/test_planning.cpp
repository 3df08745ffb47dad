#include <algorithm>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "forge/error.hpp"
#include "forge/planning.hpp"
#include "support.hpp"

using namespace forge;
using namespace forge::planning;
using forge::ir::ChildRef;

namespace {

ir::DesignArchitectureGraph graph(const std::map<std::string, std::vector<ChildRef>>& children, const std::string& root) {
  ir::DesignArchitectureGraph g;
  g.design_name = root;
  for (const auto& [name, kids] : children) {
    auto m = forge::test::leaf_ir(name);
    m.children_modules = kids;
    g.module_irs[name] = m;
  }
  return g;
}

/// Reference post-order over module types, first visit wins.
std::vector<std::string> reference_order(const ir::DesignArchitectureGraph& g, const std::string& root) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::function<void(const std::string&)> visit = [&](const std::string& m) {
    if (seen.count(m)) return;
    seen.insert(m);
    for (const auto& c : g.module_irs.at(m).children_modules) visit(c.module_name);
    out.push_back(m);
  };
  visit(root);
  return out;
}

std::size_t index_of(const std::vector<std::string>& v, const std::string& x) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), x) - v.begin());
}

}  // namespace

TEST(CanonicalKey, StripsSuffixesAndCase) {
  EXPECT_EQ(canonical_key("Adder"), "adder");
  EXPECT_EQ(canonical_key("adder_0"), "adder");
  EXPECT_EQ(canonical_key("ADDER_12"), "adder");
  EXPECT_EQ(canonical_key("pe[3]"), "pe");
  EXPECT_EQ(canonical_key("pe_1[2]"), "pe");
  EXPECT_EQ(canonical_key("fifo_a"), "fifo_a");
  EXPECT_EQ(canonical_key("_7"), "_7");
}

TEST(NormalizeChildren, FirstOfEachKeyKept) {
  const std::vector<ChildRef> in{{"adder_0", "Adder"}, {"adder_1", "Adder"}, {"multi", "Multi"}};
  const std::vector<ChildRef> expected{{"adder_0", "Adder"}, {"multi", "Multi"}};
  EXPECT_EQ(normalize_children(in), expected);
  EXPECT_TRUE(normalize_children({}).empty());
  const std::vector<ChildRef> unique{{"a", "Adder"}, {"m", "Multi"}};
  EXPECT_EQ(normalize_children(unique), unique);
}

TEST(NormalizeChildren, MatchesGroupByOracle) {
  std::mt19937 rng(11);
  const std::vector<std::string> names{"Adder", "adder_1", "ADDER_2", "Multi", "multi[0]", "Pe", "pe_3", "Fifo"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ChildRef> in;
    const int n = std::uniform_int_distribution<int>(0, 10)(rng);
    for (int i = 0; i < n; ++i)
      in.push_back({"i" + std::to_string(i), names[std::uniform_int_distribution<std::size_t>(0, names.size() - 1)(rng)]});
    std::map<std::string, std::size_t> first;
    for (std::size_t i = 0; i < in.size(); ++i) first.emplace(canonical_key(in[i].module_name), i);
    std::vector<std::size_t> keep;
    for (const auto& [_, i] : first) keep.push_back(i);
    std::sort(keep.begin(), keep.end());
    std::vector<ChildRef> expected;
    for (auto i : keep) expected.push_back(in[i]);
    EXPECT_EQ(normalize_children(in), expected);
  }
}

TEST(BuildSeq, Conv2D) {
  const auto tree = ir::extract_parent_child_pairs(forge::test::conv2d_dag());
  std::set<std::string> visited;
  EXPECT_EQ(build_seq(tree, tree.root, visited), (std::vector<std::string>{"Adder", "Multi", "Conv2D"}));
}

TEST(BuildSeq, LeafAndRepeatedChildren) {
  const auto leaf = ir::extract_parent_child_pairs(graph({{"Leaf", {}}}, "Leaf"));
  std::set<std::string> visited;
  EXPECT_EQ(build_seq(leaf, "Leaf", visited), std::vector<std::string>{"Leaf"});
  EXPECT_TRUE(build_seq(leaf, "Leaf", visited).empty());

  const auto dup = ir::extract_parent_child_pairs(graph({{"Top", {{"X_0", "X"}, {"X_1", "X"}}}, {"X", {}}}, "Top"));
  std::set<std::string> v2;
  EXPECT_EQ(build_seq(dup, "Top", v2), (std::vector<std::string>{"X", "Top"}));
}

TEST(HapPlan, Conv2DGoldenPath) {
  const auto plan = hap_plan(forge::test::conv2d_dag());
  EXPECT_EQ(plan.tasks, (std::vector<std::string>{"Adder", "Multi", "Conv2D"}));
  EXPECT_EQ(plan.provenance.at("Adder"), std::vector<std::string>{"Conv2D/adder_inst"});
  EXPECT_EQ(plan.provenance.at("Multi"), std::vector<std::string>{"Conv2D/multi_inst"});
  EXPECT_EQ(plan.provenance.at("Conv2D"), std::vector<std::string>{"Conv2D"});
}

TEST(HapPlan, SingleModuleAndThreeLevels) {
  EXPECT_EQ(hap_plan(graph({{"Solo", {}}}, "Solo")).tasks, std::vector<std::string>{"Solo"});
  const auto g = graph({{"Top", {{"mid", "Mid"}, {"leaf2", "Leaf2"}}}, {"Mid", {{"leaf", "Leaf"}}}, {"Leaf", {}}, {"Leaf2", {}}},
                       "Top");
  EXPECT_EQ(hap_plan(g).tasks, reference_order(g, "Top"));
  EXPECT_EQ(hap_plan(g).tasks, (std::vector<std::string>{"Leaf", "Mid", "Leaf2", "Top"}));
}

TEST(HapPlan, PropagatesStructureErrors) {
  EXPECT_THROW(hap_plan(graph({{"A", {{"b", "B"}}}, {"B", {{"a", "A"}}}}, "A")), CycleError);
  EXPECT_THROW(hap_plan(graph({{"A", {}}, {"B", {}}}, "A")), MultiRootError);
}

TEST(HapPlan, RandomTreeProperties) {
  std::mt19937 rng(31337);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = forge::test::random_design(rng, std::uniform_int_distribution<int>(1, 50)(rng));
    const auto plan = hap_plan(g);
    const auto& tasks = plan.tasks;

    EXPECT_EQ(tasks, reference_order(g, "M0"));
    EXPECT_EQ(tasks.back(), "M0");
    EXPECT_EQ(std::set<std::string>(tasks.begin(), tasks.end()).size(), tasks.size());

    std::set<std::string> keys;
    for (const auto& [name, _] : g.module_irs) keys.insert(canonical_key(name));
    EXPECT_EQ(tasks.size(), keys.size());

    for (const auto& [name, m] : g.module_irs) {
      for (const auto& c : m.children_modules) EXPECT_LT(index_of(tasks, c.module_name), index_of(tasks, name));
      const auto instances = ir::instance_paths_of(g, "M0", name);
      EXPECT_EQ(plan.provenance.at(name).size(), instances.size());
    }
    EXPECT_EQ(hap_plan(g), plan);
  }
}

TEST(PlanJson, RoundTripAndRejects) {
  const auto plan = hap_plan(forge::test::conv2d_dag());
  EXPECT_EQ(plan_from_json(nlohmann::json::parse(to_json(plan).dump())), plan);
  EXPECT_THROW(plan_from_json(nlohmann::json::parse(R"({"tasks": []})")), SchemaError);
  EXPECT_THROW(plan_from_json(nlohmann::json::parse(R"({"tasks": ["A", "A"], "provenance": {"A": []}})")), SchemaError);
  EXPECT_THROW(plan_from_json(nlohmann::json::parse(R"({"tasks": ["A"], "provenance": {}})")), SchemaError);
}
