#pragma once

// A small arithmetic language for rate kernels given in configuration files.
//
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := unary ('^' factor)?          '^' is right-associative
//   unary  := '-'? atom
//   atom   := number | ident | ident '[' index ']' | func '(' expr (',' expr)* ')' | '(' expr ')'
//
// Identifiers: r, rp (patch positions), x, y (traits; bare x means x[0]), pi.
// Functions: sin cos exp log abs sqrt (1 argument), min max pow (2 arguments).

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "metapop/errors.hpp"
#include "metapop/kernels.hpp"
#include "metapop/trait.hpp"

namespace metapop::expr {

enum class Var : std::uint8_t { r, rp, x, y, pi };
enum class Func : std::uint8_t { sin, cos, exp, log, abs, sqrt, min, max, pow };
enum class BinOp : std::uint8_t { add, sub, mul, div, pow };

struct Node {
  enum class Kind : std::uint8_t { number, variable, negate, binary, call };
  Kind kind = Kind::number;
  double value = 0.0;
  Var var = Var::r;
  std::size_t index = 0;
  BinOp op = BinOp::add;
  Func func = Func::sin;
  std::vector<Node> children;
  std::size_t offset = 0;  // 1-based byte offset of the node's first token

  // Structural equality; source offsets are ignored.
  friend bool operator==(const Node& a, const Node& b);
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset, std::vector<std::string> expected = {})
      : Error(what), offset_(offset), expected_(std::move(expected)) {}
  std::size_t offset() const { return offset_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

struct Bindings {
  double r = 0.0;
  double rp = 0.0;
  TraitView x;
  TraitView y;
};

class RateExpr {
 public:
  const std::string& source() const { return source_; }
  const Node& ast() const { return root_; }

  bool uses(Var v) const;
  // Largest index used on a trait variable, or -1 if it does not appear.
  long max_index(Var v) const;

  double evaluate(const Bindings& b) const;

 private:
  friend RateExpr parse(std::string_view source);

  struct Instr {
    enum class Op : std::uint8_t { push, load_r, load_rp, load_x, load_y, neg, add, sub, mul, div, pow, call };
    Op op;
    Func func = Func::sin;
    std::uint32_t index = 0;
    double value = 0.0;
    std::size_t offset = 0;
  };
  void compile(const Node& n);

  std::string source_;
  Node root_;
  std::vector<Instr> program_;
  std::size_t max_depth_ = 0;
};

RateExpr parse(std::string_view source);

// Fully parenthesized text that parses back to the same tree.
std::string print(const Node& n);
inline std::string print(const RateExpr& e) { return print(e.ast()); }

inline double evaluate(const RateExpr& e, const Bindings& b) { return e.evaluate(b); }

// Throws ParseError (pointing at the first offending use) if the expression
// reads a variable outside `allowed` or indexes a trait beyond `dim`.
void check_variables(const RateExpr& e, std::initializer_list<Var> allowed, std::size_t dim);

// Adapters from parsed expressions to the kernel signatures.
SelectionKernel selection_kernel(RateExpr e);      // c(r, x, y)
MutationRateKernel mutation_rate_kernel(RateExpr e);  // theta(r, x)
MigrationKernel migration_kernel(RateExpr e);      // lambda((r, x), (rp, y))

}  // namespace metapop::expr
