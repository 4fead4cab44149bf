#include <doctest.h>

#include <cmath>

#include "metapop/exprlang.hpp"

using namespace metapop;
using namespace metapop::expr;

namespace {

double eval(const std::string& s, double x = 0.0, double y = 0.0, double r = 0.0, double rp = 0.0) {
  const double xs[] = {x};
  const double ys[] = {y};
  return parse(s).evaluate({r, rp, xs, ys});
}

// Random expression over the full grammar.
std::string random_expr(Rng& rng, int depth) {
  if (depth == 0 || rng.uniform() < 0.25) {
    switch (rng.index(6)) {
      case 0: return "x";
      case 1: return "y[0]";
      case 2: return "r";
      case 3: return "pi";
      case 4: return "rp";
      default: return std::to_string(rng.index(100)) + "." + std::to_string(rng.index(1000));
    }
  }
  static const char* ops[] = {"+", "-", "*", "/", "^"};
  static const char* unary[] = {"sin", "cos", "exp", "log", "abs", "sqrt"};
  switch (rng.index(4)) {
    case 0: return random_expr(rng, depth - 1) + ops[rng.index(5)] + random_expr(rng, depth - 1);
    case 1: return "-" + random_expr(rng, depth - 1);
    case 2: return std::string(unary[rng.index(6)]) + "(" + random_expr(rng, depth - 1) + ")";
    default: {
      static const char* binary[] = {"min", "max", "pow"};
      return std::string(binary[rng.index(3)]) + "(" + random_expr(rng, depth - 1) + ", " +
             random_expr(rng, depth - 1) + ")";
    }
  }
}

}  // namespace

TEST_CASE("parses the minimal grammar") {
  const auto e = parse("x - y");
  REQUIRE(e.ast().kind == Node::Kind::binary);
  CHECK(e.ast().op == BinOp::sub);
  CHECK(e.ast().children[0].var == Var::x);
  CHECK(e.ast().children[0].index == 0);
  CHECK(e.ast().children[1].var == Var::y);
}

TEST_CASE("evaluation") {
  CHECK(eval("x*(1+y)", 0.2, 0.5) == doctest::Approx(0.3));
  CHECK(eval("min(1, exp(r))") == 1.0);
  CHECK(eval("2*sin(2*pi*(x-y))", 0.25, 0.0) == doctest::Approx(2.0));
  CHECK(eval("1+2*3^2") == 19.0);
  CHECK(eval("-2*3") == -6.0);
  CHECK(eval("2^3^2") == 512.0);
  CHECK(eval("pow(2, 10) - max(3, 4)") == 1020.0);
  CHECK(eval("r + rp", 0, 0, 0.25, 0.5) == 0.75);
}

TEST_CASE("syntax errors carry the offset") {
  try {
    parse("x +");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
    REQUIRE_FALSE(e.expected().empty());
    CHECK(e.expected().front() == "atom");
    CHECK(std::string(e.what()).find("offset 4") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("foo(1)"), ParseError);
  CHECK_THROWS_AS(parse("sin(1, 2)"), ParseError);
  CHECK_THROWS_AS(parse("(1 + 2"), ParseError);
  CHECK_THROWS_AS(parse("1 2"), ParseError);
  CHECK_THROWS_AS(parse("z"), ParseError);
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(eval("log(x)", 0.0), DomainError);
  CHECK_THROWS_AS(eval("sqrt(x)", -1.0), DomainError);
  CHECK_THROWS_AS(eval("1/x", 0.0), DomainError);
  CHECK(eval("sqrt(x)", 4.0) == 2.0);
}

TEST_CASE("variable checks") {
  CHECK_THROWS_AS(check_variables(parse("x + rp"), {Var::r, Var::x}, 1), ParseError);
  CHECK_THROWS_AS(check_variables(parse("x[2]"), {Var::x}, 2), ParseError);
  CHECK_NOTHROW(check_variables(parse("x[1] + pi"), {Var::x}, 2));
}

TEST_CASE("print and parse round trip on generated expressions") {
  Rng rng(2024);
  for (int k = 0; k < 200; ++k) {
    const std::string src = random_expr(rng, 4);
    const auto first = parse(src);
    const auto second = parse(print(first));
    CHECK_MESSAGE(first.ast() == second.ast(), src);
    CHECK(print(second) == print(first));
  }
}

TEST_CASE("evaluation is bit-reproducible") {
  const auto e = parse("exp(sin(x*y)) / (1 + r^2)");
  const double xs[] = {0.3};
  const double ys[] = {1.7};
  const double a = e.evaluate({0.4, 0.0, xs, ys});
  for (int k = 0; k < 100; ++k) CHECK(e.evaluate({0.4, 0.0, xs, ys}) == a);
}

TEST_CASE("kernel adapters") {
  const auto lam = migration_kernel(parse("x*(1+y)*rp"));
  CHECK(lam(0.1, Trait{0.2}, 0.5, Trait{0.5}) == doctest::Approx(0.15));
  const auto c = selection_kernel(parse("exp(y-x)"));
  CHECK(c(0.0, Trait{0.0}, Trait{1.0}) == doctest::Approx(std::exp(1.0)));
}
