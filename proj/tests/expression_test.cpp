#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "curvlab/errors.hpp"
#include "curvlab/expression.hpp"
#include "json.hpp"

namespace {

using curvlab::Error;
using curvlab::ErrorCode;
using curvlab::Expression;
using curvlab::Quad;

nlohmann::json corpus() {
  std::ifstream in(CURVLAB_TEST_DATA "/expression_corpus.json");
  return nlohmann::json::parse(in);
}

struct Env {
  std::vector<std::string> names;
  std::vector<double> values;
  std::map<std::string, double> params;
};

Env env_of(const nlohmann::json& c) {
  Env e;
  for (const auto& [k, v] : c["variables"].items()) {
    e.names.push_back(k);
    e.values.push_back(v.get<double>());
  }
  for (const auto& [k, v] : c["params"].items()) e.params[k] = v.get<double>();
  return e;
}

TEST(ExpressionCorpus, Values) {
  const auto c = corpus();
  ASSERT_EQ(c["grammar"], Expression::grammar_version);
  const Env e = env_of(c);
  std::vector<Quad> qv(e.values.begin(), e.values.end());
  for (const auto& item : c["values"]) {
    const std::string src = item["expr"];
    const double want = item["value"];
    const Expression ex = Expression::compile(src, e.names, e.params);
    const double tol = 1e-15 * std::max(1.0, std::abs(want));
    EXPECT_NEAR(ex.eval<double>(e.values), want, 4 * tol) << src;
    EXPECT_NEAR(static_cast<double>(ex.eval<Quad>(qv)), want, 4 * tol) << src;
  }
}

TEST(ExpressionCorpus, ErrorsReportLineAndColumn) {
  const auto c = corpus();
  const Env e = env_of(c);
  for (const auto& item : c["errors"]) {
    const std::string src = item["expr"];
    const std::string where = item["where"];
    try {
      Expression::compile(src, e.names, e.params);
      ADD_FAILURE() << "accepted: " << src;
    } catch (const Error& err) {
      EXPECT_EQ(err.code(), ErrorCode::ParseError);
      EXPECT_NE(std::string(err.what()).find(where + ":"), std::string::npos) << src << " -> " << err.what();
    }
  }
}

TEST(Expression, QuadEvaluationKeepsExtraDigits) {
  const Expression ex = Expression::compile("(1 + x1) - 1", {"x1"});
  const Quad tiny("1e-20");
  EXPECT_EQ(ex.eval<double>(std::vector<double>{1e-20}), 0.0);
  EXPECT_NEAR(static_cast<double>(ex.eval<Quad>(std::vector<Quad>{tiny}) / tiny), 1.0, 1e-12);
}

TEST(Expression, ConstantDetection) {
  EXPECT_TRUE(Expression::compile("2 * pi", {"x1"}).is_constant());
  EXPECT_FALSE(Expression::compile("2 * x1", {"x1"}).is_constant());
}

TEST(Expression, VariablesShadowParameters) {
  const Expression ex = Expression::compile("a", {"a"}, {{"a", 5.0}});
  EXPECT_EQ(ex.eval<double>(std::vector<double>{2.0}), 2.0);
}

TEST(Expression, DeepNestingUsesHeapStack) {
  std::string s;
  for (int i = 0; i < 100; ++i) s += "(1+";
  s += "0";
  for (int i = 0; i < 100; ++i) s += ")";
  EXPECT_EQ(Expression::compile(s, {}).eval<double>(std::vector<double>{}), 100.0);
}

}  // namespace
