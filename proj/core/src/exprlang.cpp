#include "metapop/exprlang.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace metapop::expr {

bool operator==(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Node::Kind::number:
      return std::bit_cast<std::uint64_t>(a.value) == std::bit_cast<std::uint64_t>(b.value);
    case Node::Kind::variable:
      return a.var == b.var && a.index == b.index;
    case Node::Kind::negate:
      return a.children == b.children;
    case Node::Kind::binary:
      return a.op == b.op && a.children == b.children;
    case Node::Kind::call:
      return a.func == b.func && a.children == b.children;
  }
  return false;
}

namespace {

struct FuncInfo {
  std::string_view name;
  Func func;
  std::size_t arity;
};

constexpr std::array<FuncInfo, 9> kFuncs{{{"sin", Func::sin, 1},
                                          {"cos", Func::cos, 1},
                                          {"exp", Func::exp, 1},
                                          {"log", Func::log, 1},
                                          {"abs", Func::abs, 1},
                                          {"sqrt", Func::sqrt, 1},
                                          {"min", Func::min, 2},
                                          {"max", Func::max, 2},
                                          {"pow", Func::pow, 2}}};

const FuncInfo* find_func(std::string_view name) {
  for (const auto& f : kFuncs)
    if (f.name == name) return &f;
  return nullptr;
}

std::string_view func_name(Func f) {
  for (const auto& info : kFuncs)
    if (info.func == f) return info.name;
  return "?";
}

const std::vector<std::string> kAtom{"atom"};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Node parse_all() {
    skip_ws();
    if (pos_ >= src_.size()) fail("empty expression", kAtom);
    Node n = parse_expr();
    skip_ws();
    if (pos_ < src_.size()) fail("unexpected trailing input", {"operator", "end of input"});
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg, const std::vector<std::string>& expected) const {
    std::ostringstream os;
    os << "syntax error at offset " << pos_ + 1 << ": " << msg;
    if (!expected.empty()) {
      os << "; expected ";
      for (std::size_t i = 0; i < expected.size(); ++i) os << (i ? " or " : "") << expected[i];
    }
    throw ParseError(os.str(), pos_ + 1, expected);
  }

  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
      ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) fail(std::string("missing '") + c + "'", {std::string("'") + c + "'"});
    ++pos_;
  }

  Node parse_expr() {
    Node lhs = parse_term();
    for (;;) {
      skip_ws();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
        const BinOp op = src_[pos_] == '+' ? BinOp::add : BinOp::sub;
        ++pos_;
        lhs = binary(op, std::move(lhs), parse_term());
      } else {
        return lhs;
      }
    }
  }

  Node parse_term() {
    Node lhs = parse_factor();
    for (;;) {
      skip_ws();
      if (pos_ < src_.size() && (src_[pos_] == '*' || src_[pos_] == '/')) {
        const BinOp op = src_[pos_] == '*' ? BinOp::mul : BinOp::div;
        ++pos_;
        lhs = binary(op, std::move(lhs), parse_factor());
      } else {
        return lhs;
      }
    }
  }

  Node parse_factor() {
    Node base = parse_unary();
    if (peek('^')) {
      ++pos_;
      return binary(BinOp::pow, std::move(base), parse_factor());
    }
    return base;
  }

  Node parse_unary() {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == '-') {
      Node n;
      n.kind = Node::Kind::negate;
      n.offset = pos_ + 1;
      ++pos_;
      n.children.push_back(parse_unary());
      return n;
    }
    return parse_atom();
  }

  Node parse_atom() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input", kAtom);
    const char ch = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') return parse_identifier();
    if (ch == '(') {
      ++pos_;
      Node inner = parse_expr();
      expect(')');
      return inner;
    }
    fail(std::string("unexpected character '") + ch + "'", kAtom);
  }

  Node parse_number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
        while (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) ++p;
        pos_ = p;
      }
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, value);
    if (ec != std::errc() || ptr != src_.data() + pos_ || !std::isfinite(value)) {
      pos_ = start;
      fail("malformed or out-of-range number", {"number"});
    }
    Node n;
    n.kind = Node::Kind::number;
    n.value = value;
    n.offset = start + 1;
    return n;
  }

  Node parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    const std::string_view name = src_.substr(start, pos_ - start);
    Node n;
    n.offset = start + 1;

    if (const FuncInfo* f = find_func(name)) {
      if (!peek('(')) fail("function '" + std::string(name) + "' must be called", {"'('"});
      ++pos_;
      n.kind = Node::Kind::call;
      n.func = f->func;
      n.children.push_back(parse_expr());
      while (peek(',')) {
        ++pos_;
        n.children.push_back(parse_expr());
      }
      expect(')');
      if (n.children.size() != f->arity) {
        std::ostringstream os;
        os << "function '" << name << "' takes " << f->arity << " argument" << (f->arity == 1 ? "" : "s") << ", got "
           << n.children.size();
        throw ParseError("arity error at offset " + std::to_string(start + 1) + ": " + os.str(), start + 1);
      }
      return n;
    }

    n.kind = Node::Kind::variable;
    if (name == "r") {
      n.var = Var::r;
    } else if (name == "rp") {
      n.var = Var::rp;
    } else if (name == "pi") {
      n.var = Var::pi;
    } else if (name == "x" || name == "y") {
      n.var = name == "x" ? Var::x : Var::y;
      if (peek('[')) {
        ++pos_;
        skip_ws();
        const std::size_t idx_start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (idx_start == pos_) fail("trait index must be a nonnegative integer", {"index"});
        std::size_t idx = 0;
        const auto [ptr, ec] = std::from_chars(src_.data() + idx_start, src_.data() + pos_, idx);
        if (ec != std::errc()) {
          pos_ = idx_start;
          fail("trait index out of range", {"index"});
        }
        n.index = idx;
        expect(']');
      }
    } else {
      throw ParseError("unknown identifier '" + std::string(name) + "' at offset " + std::to_string(start + 1) +
                           " (known: r, rp, x, y, pi, sin, cos, exp, log, abs, sqrt, min, max, pow)",
                       start + 1, {"identifier"});
    }
    if (n.var != Var::x && n.var != Var::y && peek('[')) fail("'" + std::string(name) + "' is a scalar", {});
    return n;
  }

  static Node binary(BinOp op, Node lhs, Node rhs) {
    Node n;
    n.kind = Node::Kind::binary;
    n.op = op;
    n.offset = lhs.offset;
    n.children.push_back(std::move(lhs));
    n.children.push_back(std::move(rhs));
    return n;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

void collect(const Node& n, auto&& fn) {
  fn(n);
  for (const auto& c : n.children) collect(c, fn);
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

[[noreturn]] void domain_fail(const char* what, std::size_t offset) {
  throw DomainError(std::string("domain error at offset ") + std::to_string(offset) + ": " + what);
}

}  // namespace

RateExpr parse(std::string_view source) {
  RateExpr e;
  e.source_ = std::string(source);
  e.root_ = Parser(e.source_).parse_all();
  e.compile(e.root_);
  // Stack depth of the postfix program.
  std::size_t depth = 0;
  for (const auto& ins : e.program_) {
    using Op = RateExpr::Instr::Op;
    switch (ins.op) {
      case Op::push:
      case Op::load_r:
      case Op::load_rp:
      case Op::load_x:
      case Op::load_y:
        ++depth;
        break;
      case Op::neg:
        break;
      case Op::call:
        if (ins.func == Func::min || ins.func == Func::max || ins.func == Func::pow) --depth;
        break;
      default:
        --depth;
        break;
    }
    e.max_depth_ = std::max(e.max_depth_, depth);
  }
  return e;
}

void RateExpr::compile(const Node& n) {
  using Op = Instr::Op;
  switch (n.kind) {
    case Node::Kind::number:
      program_.push_back({Op::push, Func::sin, 0, n.value, n.offset});
      return;
    case Node::Kind::variable:
      switch (n.var) {
        case Var::r: program_.push_back({Op::load_r, Func::sin, 0, 0.0, n.offset}); return;
        case Var::rp: program_.push_back({Op::load_rp, Func::sin, 0, 0.0, n.offset}); return;
        case Var::pi: program_.push_back({Op::push, Func::sin, 0, std::numbers::pi, n.offset}); return;
        case Var::x:
          program_.push_back({Op::load_x, Func::sin, static_cast<std::uint32_t>(n.index), 0.0, n.offset});
          return;
        case Var::y:
          program_.push_back({Op::load_y, Func::sin, static_cast<std::uint32_t>(n.index), 0.0, n.offset});
          return;
      }
      return;
    case Node::Kind::negate:
      compile(n.children[0]);
      program_.push_back({Op::neg, Func::sin, 0, 0.0, n.offset});
      return;
    case Node::Kind::binary: {
      compile(n.children[0]);
      compile(n.children[1]);
      static constexpr std::array<Op, 5> ops{Op::add, Op::sub, Op::mul, Op::div, Op::pow};
      program_.push_back({ops[static_cast<std::size_t>(n.op)], Func::sin, 0, 0.0, n.children[1].offset});
      return;
    }
    case Node::Kind::call:
      for (const auto& c : n.children) compile(c);
      program_.push_back({Op::call, n.func, 0, 0.0, n.offset});
      return;
  }
}

bool RateExpr::uses(Var v) const {
  bool found = false;
  collect(root_, [&](const Node& n) { found = found || (n.kind == Node::Kind::variable && n.var == v); });
  return found;
}

long RateExpr::max_index(Var v) const {
  long best = -1;
  collect(root_, [&](const Node& n) {
    if (n.kind == Node::Kind::variable && n.var == v) best = std::max(best, static_cast<long>(n.index));
  });
  return best;
}

double RateExpr::evaluate(const Bindings& b) const {
  std::array<double, 64> small{};
  std::vector<double> large;
  double* stack = small.data();
  if (max_depth_ > small.size()) {
    large.resize(max_depth_);
    stack = large.data();
  }
  std::size_t top = 0;
  using Op = Instr::Op;
  for (const auto& ins : program_) {
    switch (ins.op) {
      case Op::push: stack[top++] = ins.value; continue;
      case Op::load_r: stack[top++] = b.r; continue;
      case Op::load_rp: stack[top++] = b.rp; continue;
      case Op::load_x:
        if (ins.index >= b.x.size()) domain_fail("trait x is unbound or index exceeds its dimension", ins.offset);
        stack[top++] = b.x[ins.index];
        continue;
      case Op::load_y:
        if (ins.index >= b.y.size()) domain_fail("trait y is unbound or index exceeds its dimension", ins.offset);
        stack[top++] = b.y[ins.index];
        continue;
      case Op::neg: stack[top - 1] = -stack[top - 1]; continue;
      default: break;
    }
    double result = 0.0;
    if (ins.op == Op::call) {
      const double a = stack[top - 1];
      switch (ins.func) {
        case Func::sin: result = std::sin(a); break;
        case Func::cos: result = std::cos(a); break;
        case Func::exp: result = std::exp(a); break;
        case Func::log:
          if (!(a > 0.0)) domain_fail("log of nonpositive value", ins.offset);
          result = std::log(a);
          break;
        case Func::abs: result = std::abs(a); break;
        case Func::sqrt:
          if (a < 0.0) domain_fail("sqrt of negative value", ins.offset);
          result = std::sqrt(a);
          break;
        case Func::min:
        case Func::max:
        case Func::pow: {
          const double lhs = stack[top - 2];
          --top;
          if (ins.func == Func::min) {
            result = std::min(lhs, a);
          } else if (ins.func == Func::max) {
            result = std::max(lhs, a);
          } else {
            result = std::pow(lhs, a);
          }
          break;
        }
      }
      stack[top - 1] = result;
    } else {
      const double rhs = stack[--top];
      const double lhs = stack[top - 1];
      switch (ins.op) {
        case Op::add: result = lhs + rhs; break;
        case Op::sub: result = lhs - rhs; break;
        case Op::mul: result = lhs * rhs; break;
        case Op::div:
          if (rhs == 0.0) domain_fail("division by zero", ins.offset);
          result = lhs / rhs;
          break;
        case Op::pow: result = std::pow(lhs, rhs); break;
        default: break;
      }
      stack[top - 1] = result;
    }
    if (!std::isfinite(result)) domain_fail("non-finite intermediate result", ins.offset);
  }
  return stack[0];
}

std::string print(const Node& n) {
  switch (n.kind) {
    case Node::Kind::number:
      return format_number(n.value);
    case Node::Kind::variable:
      switch (n.var) {
        case Var::r: return "r";
        case Var::rp: return "rp";
        case Var::pi: return "pi";
        case Var::x: return "x[" + std::to_string(n.index) + "]";
        case Var::y: return "y[" + std::to_string(n.index) + "]";
      }
      return "?";
    case Node::Kind::negate:
      return "(-" + print(n.children[0]) + ")";
    case Node::Kind::binary: {
      static constexpr std::array<const char*, 5> ops{" + ", " - ", " * ", " / ", " ^ "};
      return "(" + print(n.children[0]) + ops[static_cast<std::size_t>(n.op)] + print(n.children[1]) + ")";
    }
    case Node::Kind::call: {
      std::string s(func_name(n.func));
      s += "(";
      for (std::size_t i = 0; i < n.children.size(); ++i) s += (i ? ", " : "") + print(n.children[i]);
      return s + ")";
    }
  }
  return "?";
}

void check_variables(const RateExpr& e, std::initializer_list<Var> allowed, std::size_t dim) {
  static constexpr std::array<const char*, 5> names{"r", "rp", "x", "y", "pi"};
  collect(e.ast(), [&](const Node& n) {
    if (n.kind != Node::Kind::variable || n.var == Var::pi) return;
    bool ok = false;
    for (Var v : allowed) ok = ok || v == n.var;
    const char* name = names[static_cast<std::size_t>(n.var)];
    if (!ok) {
      throw ParseError("unknown identifier '" + std::string(name) + "' at offset " + std::to_string(n.offset) +
                           " (not available in this kernel)",
                       n.offset, {"identifier"});
    }
    if ((n.var == Var::x || n.var == Var::y) && n.index >= dim) {
      throw ParseError("index " + std::to_string(n.index) + " of '" + name + "' at offset " +
                           std::to_string(n.offset) + " exceeds trait dimension " + std::to_string(dim),
                       n.offset, {"index"});
    }
  });
}

SelectionKernel selection_kernel(RateExpr e) {
  return [e = std::move(e)](double r, TraitView x, TraitView y) { return e.evaluate({r, 0.0, x, y}); };
}

MutationRateKernel mutation_rate_kernel(RateExpr e) {
  return [e = std::move(e)](double r, TraitView x) { return e.evaluate({r, 0.0, x, {}}); };
}

MigrationKernel migration_kernel(RateExpr e) {
  return [e = std::move(e)](double r, TraitView x, double rp, TraitView y) { return e.evaluate({r, rp, x, y}); };
}

}  // namespace metapop::expr
