#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <thread>

#include "nbm/expr.hpp"

using nbm::Vec3;
using namespace nbm::expr;

TEST(Expr, DiffusionCoefficientFormula) {
  const auto e = parse("y^2*log(x+2)+4");
  EXPECT_EQ(e.evaluate({0, 0, 0}), 4.0);
  EXPECT_NEAR(e.evaluate({0.5, 2.0, 0}), 4.0 * std::log(2.5) + 4.0, 1e-15);
}

TEST(Expr, Precedence) {
  EXPECT_EQ(parse("2+3*4").evaluate({}), 14.0);
  EXPECT_EQ(parse("2*3+4").evaluate({}), 10.0);
  EXPECT_EQ(parse("8-3-2").evaluate({}), 3.0);
  EXPECT_EQ(parse("8/4/2").evaluate({}), 1.0);
  EXPECT_EQ(parse("2^3^2").evaluate({}), 512.0);
  EXPECT_EQ(parse("-2^2").evaluate({}), -4.0);
  EXPECT_EQ(parse("2^-1").evaluate({}), 0.5);
  EXPECT_EQ(parse("(2+3)*4").evaluate({}), 20.0);
  EXPECT_EQ(parse("--3").evaluate({}), 3.0);
  EXPECT_EQ(parse("1.5e2 + .5").evaluate({}), 150.5);
}

TEST(Expr, ConstantsAndFunctions) {
  EXPECT_NEAR(parse("cos(x)*sin(y)").evaluate({0, 1.5707963267948966, 0}), 1.0, 1e-12);
  EXPECT_EQ(parse("exp(z)").evaluate({0, 0, 0}), 1.0);
  EXPECT_EQ(parse("pi").evaluate({}), M_PI);
  EXPECT_EQ(parse("e").evaluate({}), M_E);
  EXPECT_EQ(parse("abs(x)").evaluate({-2, 0, 0}), 2.0);
  EXPECT_EQ(parse("sqrt(x)").evaluate({9, 0, 0}), 3.0);
  EXPECT_EQ(parse("tanh(0)").evaluate({}), 0.0);
  EXPECT_EQ(parse("log(e)").evaluate({}), 1.0);
}

TEST(Expr, ParseErrorsCarryOffsets) {
  auto offset_of = [](const char* src) -> long {
    try {
      parse(src);
    } catch (const ParseError& e) {
      return static_cast<long>(e.offset());
    }
    return -1;
  };
  EXPECT_EQ(offset_of("2*+"), 2);
  EXPECT_EQ(offset_of("foo+1"), 0);
  EXPECT_EQ(offset_of("1+w"), 2);
  EXPECT_EQ(offset_of("(1+2"), 4);
  EXPECT_EQ(offset_of("1+2)"), 3);
  EXPECT_EQ(offset_of("sin 1"), 4);
  EXPECT_EQ(offset_of(""), 0);
  EXPECT_EQ(offset_of("3 4"), 2);
  EXPECT_EQ(offset_of("log10(x)"), 0);
}

TEST(Expr, DomainViolationsAreErrors) {
  EXPECT_THROW(parse("log(x+2)").evaluate({-2, 0, 0}), EvalError);
  EXPECT_THROW(parse("log(x)").evaluate({-1, 0, 0}), EvalError);
  EXPECT_THROW(parse("1/x").evaluate({0, 0, 0}), EvalError);
  EXPECT_THROW(parse("0^(-1)").evaluate({}), EvalError);
  EXPECT_THROW(parse("(-2)^0.5").evaluate({}), EvalError);
  EXPECT_THROW(parse("sqrt(x)").evaluate({-1, 0, 0}), EvalError);
  EXPECT_EQ(parse("(-2)^3").evaluate({}), -8.0);
  EXPECT_EQ(parse("0^0").evaluate({}), 1.0);
}

TEST(Expr, ErrorMessageNamesPoint) {
  try {
    parse("1 + log(x+2)").evaluate({-2, 0.5, 0});
    FAIL();
  } catch (const EvalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("log"), std::string::npos);
    EXPECT_NE(msg.find("offset 4"), std::string::npos);
    EXPECT_NE(msg.find("0.5"), std::string::npos);
  }
}

namespace {

Expression random_expression(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 9);
  std::uniform_real_distribution<double> val(-5.0, 5.0);
  switch (pick(rng)) {
    case 0: return Expression::constant(val(rng));
    case 1: return Expression::variable(std::uniform_int_distribution<int>(0, 2)(rng));
    case 2: return Expression::negate(random_expression(rng, depth - 1));
    case 3: {
      const Func fs[] = {Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt, Func::Tanh, Func::Abs};
      return Expression::call(fs[std::uniform_int_distribution<int>(0, 6)(rng)], random_expression(rng, depth - 1));
    }
    default: {
      const Op ops[] = {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Pow};
      const Op op = ops[std::uniform_int_distribution<int>(0, 4)(rng)];
      return Expression::binary(op, random_expression(rng, depth - 1), random_expression(rng, depth - 1));
    }
  }
}

// Evaluation outcome: value bits, or "threw".
struct Outcome {
  bool threw = false;
  double value = 0.0;
};

Outcome run(const Expression& e, const Vec3& p) {
  try {
    return {false, e.evaluate(p)};
  } catch (const EvalError&) {
    return {true, 0.0};
  }
}

}  // namespace

TEST(ExprProperty, PrintParseRoundTripIsBitExact) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Expression e = random_expression(rng, 6);
    const Expression back = parse(e.to_string());
    for (int k = 0; k < 10; ++k) {
      const Vec3 p{coord(rng), coord(rng), coord(rng)};
      const Outcome a = run(e, p);
      const Outcome b = run(back, p);
      ASSERT_EQ(a.threw, b.threw) << e.to_string();
      if (!a.threw) {
        if (std::isnan(a.value)) {
          ASSERT_TRUE(std::isnan(b.value)) << e.to_string();
        } else {
          ASSERT_EQ(std::memcmp(&a.value, &b.value, sizeof(double)), 0) << e.to_string();
        }
      }
    }
  }
}

TEST(ExprProperty, ConcurrentEvaluationIsPure) {
  const auto e = parse("sin(3*x)*exp(-y^2)+log(z+2)/(1+x^2)");
  std::vector<double> serial(1000);
  for (int i = 0; i < 1000; ++i) serial[i] = e.evaluate({i * 1e-3, -i * 5e-4, 0.25});
  std::vector<std::vector<double>> par(4, std::vector<double>(1000));
  {
    std::vector<std::jthread> ts;
    for (int t = 0; t < 4; ++t) {
      ts.emplace_back([&, t] {
        for (int i = 0; i < 1000; ++i) par[t][i] = e.evaluate({i * 1e-3, -i * 5e-4, 0.25});
      });
    }
  }
  for (const auto& v : par) EXPECT_EQ(v, serial);
}
