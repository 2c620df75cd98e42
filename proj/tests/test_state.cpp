#include <gtest/gtest.h>

#include <set>

#include "nlmilp/error.hpp"
#include "nlmilp/state.hpp"
#include "oracles.hpp"

using namespace nlmilp;

namespace {

std::set<std::string> names(const ClauseContext& c) {
  std::set<std::string> out;
  for (const auto& p : c.parameters) out.insert(p.symbol);
  for (const auto& v : c.variables) out.insert(v.symbol);
  return out;
}

}  // namespace

TEST(StateProperties, ThousandGeneratedStates) {
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    SCOPED_TRACE(seed);
    State s = oracle::random_state(seed);
    if (seed % 2 == 0) oracle::mutate_state(s, seed * 7919);
    ASSERT_NO_THROW(s.validate());

    std::set<std::string> clause_ids, symbols;
    for (const auto& c : s.clauses()) ASSERT_TRUE(clause_ids.insert(c.id).second) << "duplicate clause " << c.id;
    for (const auto& p : s.parameters()) ASSERT_TRUE(symbols.insert(p.symbol).second) << p.symbol;
    for (const auto& v : s.variables()) ASSERT_TRUE(symbols.insert(v.symbol).second) << v.symbol;

    // Bipartite: clause on one side, symbol on the other, no repeats.
    std::set<Edge> seen;
    for (const auto& [c, sym] : s.graph().edges()) {
      EXPECT_TRUE(clause_ids.count(c)) << c;
      EXPECT_TRUE(symbols.count(sym)) << sym;
      EXPECT_FALSE(symbols.count(c));
      EXPECT_FALSE(clause_ids.count(sym));
      EXPECT_TRUE(seen.insert({c, sym}).second);
    }

    State back = state_from_json(state_to_json(s));
    EXPECT_EQ(back, s);
    EXPECT_EQ(state_from_json(nlohmann::json::parse(state_to_json(s).dump())), s);

    for (const auto& c : s.clauses()) {
      std::set<std::string> scan;
      for (const auto& [cid, sym] : s.graph().edges()) {
        if (cid == c.id) scan.insert(sym);
      }
      ClauseContext ctx = s.context_for(c.id);
      EXPECT_EQ(names(ctx), scan);
      for (const auto& p : ctx.parameters) EXPECT_EQ(p, *s.find_parameter(p.symbol));
      for (const auto& v : ctx.variables) EXPECT_EQ(v, *s.find_variable(v.symbol));
    }
  }
}

TEST(State, DuplicateSymbolRejected) {
  State s;
  s.add_parameter({"K", {}, ""});
  EXPECT_THROW(s.add_variable({"K", {}, "", VarType::kContinuous, std::nullopt}), Error);
  EXPECT_THROW(s.add_parameter({"K", {}, ""}), Error);
}

TEST(State, ConnectNeedsBothEndpoints) {
  State s;
  s.add_parameter({"K", {}, ""});
  Clause c;
  c.id = "c1";
  s.add_clause(c);
  EXPECT_THROW(s.connect("c1", "nope"), Error);
  EXPECT_THROW(s.connect("c9", "K"), Error);
  s.connect("c1", "K");
  s.connect("c1", "K");
  EXPECT_EQ(s.graph().edge_count(), 1u);
}

TEST(State, RemoveSymbolDropsEdges) {
  State s;
  s.add_parameter({"K", {}, ""});
  s.add_variable({"x", {std::string("K")}, "", VarType::kContinuous, std::nullopt});
  Clause c;
  c.id = s.next_clause_id();
  s.add_clause(c);
  s.connect(c.id, "x");
  s.connect(c.id, "K");
  s.remove_symbol("x");
  EXPECT_EQ(s.graph().edge_count(), 1u);
  EXPECT_TRUE(s.context_for(c.id).variables.empty());
  s.validate();
}

TEST(State, ParameterToVariableKeepsEdges) {
  State s;
  s.add_parameter({"a", {}, "unknown amount"});
  Clause c;
  c.id = "c1";
  s.add_clause(c);
  s.connect("c1", "a");
  s.parameter_to_variable("a", VarType::kInteger);
  ASSERT_NE(s.find_variable("a"), nullptr);
  EXPECT_EQ(s.find_variable("a")->type, VarType::kInteger);
  EXPECT_TRUE(s.graph().contains("c1", "a"));
  s.variable_to_parameter("a");
  EXPECT_NE(s.find_parameter("a"), nullptr);
  s.validate();
}

TEST(State, NextClauseIdSkipsUsed) {
  State s;
  EXPECT_EQ(s.next_clause_id(), "c1");
  Clause c;
  c.id = "c1";
  s.add_clause(c);
  c.id = "c3";
  s.add_clause(c);
  std::string next = s.next_clause_id();
  EXPECT_NE(next, "c1");
  EXPECT_NE(next, "c3");
}

TEST(State, ResolveDimFromScalarParameter) {
  State s;
  s.add_parameter({"K", {}, ""});
  s.bind_data("K", Tensor::scalar(4));
  EXPECT_EQ(s.resolve_dim("K"), 4);
  auto shape = s.resolve_shape({std::string("K"), std::int64_t{2}});
  ASSERT_TRUE(shape);
  EXPECT_EQ(*shape, (std::vector<std::int64_t>{4, 2}));
}

TEST(State, BindDataShapeMismatch) {
  State s;
  s.add_parameter({"K", {}, ""});
  s.bind_data("K", Tensor::scalar(3));
  s.add_parameter({"v", {std::string("K")}, ""});
  EXPECT_THROW(s.bind_data("v", Tensor{{2}, {1, 2}}), Error);
  s.bind_data("v", Tensor{{3}, {1, 2, 3}});
}

TEST(State, JsonRejectsUnknownSchemaVersion) {
  State s = oracle::random_state(3);
  auto j = state_to_json(s);
  j["version"] = 99;
  EXPECT_THROW(state_from_json(j), Error);
}
