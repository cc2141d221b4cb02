#include "curvlab/expression.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include <boost/math/constants/constants.hpp>

#include "curvlab/errors.hpp"

namespace curvlab {

class ExpressionParser {
 public:
  ExpressionParser(std::string_view text, const std::vector<std::string>& vars,
                   const std::map<std::string, double>& params)
      : text_(text), vars_(vars), params_(params) {}

  Expression run() {
    out_.source_ = std::string(text_);
    skip_ws();
    if (at_end()) fail(pos_, "empty expression");
    expr();
    skip_ws();
    if (!at_end()) fail(pos_, std::string("unexpected '") + text_[pos_] + "'");
    return std::move(out_);
  }

 private:
  using Op = Expression::Op;

  [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < at && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << "line " << line << ", column " << col << ": " << msg;
    throw Error(ErrorCode::ParseError, os.str());
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }
  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_ws();
    if (peek() != c) return false;
    ++pos_;
    return true;
  }
  void emit(Op op, int index = 0) { out_.code_.push_back({op, index}); }
  void emit_const(double d, Quad q) {
    out_.const_d_.push_back(d);
    out_.const_q_.push_back(q);
    emit(Op::Const, static_cast<int>(out_.const_d_.size()) - 1);
  }

  void expr() {
    term();
    for (;;) {
      if (accept('+')) {
        term();
        emit(Op::Add);
      } else if (accept('-')) {
        term();
        emit(Op::Sub);
      } else {
        return;
      }
    }
  }

  void term() {
    unary();
    for (;;) {
      if (accept('*')) {
        unary();
        emit(Op::Mul);
      } else if (accept('/')) {
        unary();
        emit(Op::Div);
      } else {
        return;
      }
    }
  }

  void unary() {
    if (accept('-')) {
      unary();
      emit(Op::Neg);
    } else if (accept('+')) {
      unary();
    } else {
      power();
    }
  }

  void power() {
    primary();
    if (accept('^')) {
      unary();
      emit(Op::Pow);
    }
  }

  void primary() {
    skip_ws();
    if (at_end()) fail(pos_, "unexpected end of expression");
    const char c = peek();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    if (c == '(') {
      const std::size_t open = pos_++;
      expr();
      if (!accept(')')) fail(at_end() ? open : pos_, "expected ')'");
      return;
    }
    fail(pos_, std::string("unexpected '") + c + "'");
  }

  void number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t k = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_, ++k;
      return k;
    };
    std::size_t nd = digits();
    if (peek() == '.') {
      ++pos_;
      nd += digits();
    }
    if (nd == 0) fail(start, "malformed number");
    if (peek() == 'e' || peek() == 'E') {
      const std::size_t epos = pos_++;
      if (peek() == '+' || peek() == '-') ++pos_;
      if (digits() == 0) fail(epos, "malformed exponent");
    }
    const std::string lit(text_.substr(start, pos_ - start));
    emit_const(std::stod(lit), Quad(lit));
  }

  void name() {
    const std::size_t start = pos_;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') ++pos_;
    const std::string id(text_.substr(start, pos_ - start));
    skip_ws();
    if (peek() == '(') return call(id, start);
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i] == id) return emit(Op::Var, static_cast<int>(i));
    if (auto it = params_.find(id); it != params_.end()) return emit_const(it->second, Quad(it->second));
    if (id == "pi") return emit_const(M_PI, boost::math::constants::pi<Quad>());
    if (id == "e") return emit_const(M_E, boost::math::constants::e<Quad>());
    fail(start, "unknown name '" + id + "'");
  }

  void call(const std::string& fn, std::size_t at) {
    static const std::map<std::string, Op> unary_fns = {
        {"exp", Op::Exp},   {"log", Op::Log},   {"sqrt", Op::Sqrt}, {"abs", Op::Abs},   {"sin", Op::Sin},
        {"cos", Op::Cos},   {"tan", Op::Tan},   {"asin", Op::Asin}, {"acos", Op::Acos}, {"atan", Op::Atan},
        {"sinh", Op::Sinh}, {"cosh", Op::Cosh}, {"tanh", Op::Tanh},
    };
    int arity;
    Op op;
    if (fn == "pow") {
      arity = 2;
      op = Op::Pow;
    } else if (auto it = unary_fns.find(fn); it != unary_fns.end()) {
      arity = 1;
      op = it->second;
    } else {
      fail(at, "unknown function '" + fn + "'");
    }
    accept('(');
    int got = 0;
    if (!accept(')')) {
      do {
        expr();
        ++got;
      } while (accept(','));
      if (!accept(')')) fail(pos_, "expected ')' or ','");
    }
    if (got != arity)
      fail(at, fn + " takes " + std::to_string(arity) + " argument" + (arity == 1 ? "" : "s") + ", got " +
                   std::to_string(got));
    emit(op);
  }

  std::string_view text_;
  const std::vector<std::string>& vars_;
  const std::map<std::string, double>& params_;
  std::size_t pos_ = 0;
  Expression out_;
};

Expression Expression::compile(std::string_view text, const std::vector<std::string>& variables,
                               const std::map<std::string, double>& params) {
  return ExpressionParser(text, variables, params).run();
}

bool Expression::is_constant() const {
  for (const Instr& in : code_)
    if (in.op == Op::Var) return false;
  return true;
}

template <class Real>
Real Expression::eval(std::span<const Real> vars) const {
  using std::abs, std::acos, std::asin, std::atan, std::cos, std::cosh, std::exp, std::log, std::pow, std::sin,
      std::sinh, std::sqrt, std::tan, std::tanh;
  Real stack[64];
  std::vector<Real> spill;
  // Expression stacks are shallow in practice; fall back to the heap for deep nesting.
  Real* st = stack;
  if (code_.size() > 64) {
    spill.resize(code_.size());
    st = spill.data();
  }
  int sp = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Const:
        if constexpr (std::is_same_v<Real, Quad>)
          st[sp++] = const_q_[in.index];
        else
          st[sp++] = static_cast<Real>(const_d_[in.index]);
        break;
      case Op::Var: st[sp++] = vars[in.index]; break;
      case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
      case Op::Add: --sp; st[sp - 1] = st[sp - 1] + st[sp]; break;
      case Op::Sub: --sp; st[sp - 1] = st[sp - 1] - st[sp]; break;
      case Op::Mul: --sp; st[sp - 1] = st[sp - 1] * st[sp]; break;
      case Op::Div: --sp; st[sp - 1] = st[sp - 1] / st[sp]; break;
      case Op::Pow: --sp; st[sp - 1] = pow(st[sp - 1], st[sp]); break;
      case Op::Exp: st[sp - 1] = exp(st[sp - 1]); break;
      case Op::Log: st[sp - 1] = log(st[sp - 1]); break;
      case Op::Sqrt: st[sp - 1] = sqrt(st[sp - 1]); break;
      case Op::Abs: st[sp - 1] = abs(st[sp - 1]); break;
      case Op::Sin: st[sp - 1] = sin(st[sp - 1]); break;
      case Op::Cos: st[sp - 1] = cos(st[sp - 1]); break;
      case Op::Tan: st[sp - 1] = tan(st[sp - 1]); break;
      case Op::Asin: st[sp - 1] = asin(st[sp - 1]); break;
      case Op::Acos: st[sp - 1] = acos(st[sp - 1]); break;
      case Op::Atan: st[sp - 1] = atan(st[sp - 1]); break;
      case Op::Sinh: st[sp - 1] = sinh(st[sp - 1]); break;
      case Op::Cosh: st[sp - 1] = cosh(st[sp - 1]); break;
      case Op::Tanh: st[sp - 1] = tanh(st[sp - 1]); break;
    }
  }
  return st[0];
}

template double Expression::eval<double>(std::span<const double>) const;
template Quad Expression::eval<Quad>(std::span<const Quad>) const;

}  // namespace curvlab
