#include "swizzle/dsl.hpp"

#include <cctype>

#include "swizzle/error.hpp"
#include "swizzle/simd/kernels.hpp"

namespace swz {

namespace {

constexpr std::string_view kIdentNames[kNumIdents] = {
    "pid", "pid_m", "pid_n", "num_xcds", "num_blocks", "num_blocks_m", "num_blocks_n"};

}  // namespace

std::string_view ident_name(Ident id) { return kIdentNames[static_cast<std::size_t>(id)]; }

std::optional<Ident> ident_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumIdents; ++i)
    if (kIdentNames[i] == name) return static_cast<Ident>(i);
  return std::nullopt;
}

std::string_view binop_symbol(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::FloorDiv: return "//";
    case BinOp::Mod: return "%";
    case BinOp::Shl: return "<<";
    case BinOp::Shr: return ">>";
    case BinOp::BitAnd: return "&";
    case BinOp::BitOr: return "|";
    case BinOp::Min: return "min";
    case BinOp::Max: return "max";
  }
  return "?";
}

// ---- construction ----------------------------------------------------------

SwizzleExpr SwizzleExpr::literal(std::int64_t v) {
  if (v < 0) throw Error(ErrorKind::NegativeIntermediate, "negative literal " + std::to_string(v));
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Literal;
  n->value = v;
  return SwizzleExpr(std::move(n));
}

SwizzleExpr SwizzleExpr::ident(Ident id) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Identifier;
  n->ident = id;
  return SwizzleExpr(std::move(n));
}

SwizzleExpr SwizzleExpr::binary(BinOp op, const SwizzleExpr& lhs, const SwizzleExpr& rhs) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Binary;
  n->op = op;
  n->lhs = lhs.root_;
  n->rhs = rhs.root_;
  return SwizzleExpr(std::move(n));
}

namespace {

std::size_t count_nodes(const ExprNode& n) {
  if (n.kind != ExprNode::Kind::Binary) return 1;
  return 1 + count_nodes(*n.lhs) + count_nodes(*n.rhs);
}

bool nodes_equal(const ExprNode& a, const ExprNode& b) {
  if (&a == &b) return true;
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ExprNode::Kind::Literal: return a.value == b.value;
    case ExprNode::Kind::Identifier: return a.ident == b.ident;
    case ExprNode::Kind::Binary:
      return a.op == b.op && nodes_equal(*a.lhs, *b.lhs) && nodes_equal(*a.rhs, *b.rhs);
  }
  return false;
}

}  // namespace

std::size_t SwizzleExpr::node_count() const { return root_ ? count_nodes(*root_) : 0; }

bool operator==(const SwizzleExpr& a, const SwizzleExpr& b) {
  if (!a.root_ || !b.root_) return a.root_ == b.root_;
  return nodes_equal(*a.root_, *b.root_);
}

SwizzleExpr operator+(const SwizzleExpr& a, const SwizzleExpr& b) { return SwizzleExpr::binary(BinOp::Add, a, b); }
SwizzleExpr operator-(const SwizzleExpr& a, const SwizzleExpr& b) { return SwizzleExpr::binary(BinOp::Sub, a, b); }
SwizzleExpr operator*(const SwizzleExpr& a, const SwizzleExpr& b) { return SwizzleExpr::binary(BinOp::Mul, a, b); }
SwizzleExpr operator/(const SwizzleExpr& a, const SwizzleExpr& b) { return SwizzleExpr::binary(BinOp::FloorDiv, a, b); }
SwizzleExpr operator%(const SwizzleExpr& a, const SwizzleExpr& b) { return SwizzleExpr::binary(BinOp::Mod, a, b); }
SwizzleExpr operator&(const SwizzleExpr& a, const SwizzleExpr& b) { return SwizzleExpr::binary(BinOp::BitAnd, a, b); }
SwizzleExpr operator|(const SwizzleExpr& a, const SwizzleExpr& b) { return SwizzleExpr::binary(BinOp::BitOr, a, b); }
SwizzleExpr operator<<(const SwizzleExpr& a, const SwizzleExpr& b) { return SwizzleExpr::binary(BinOp::Shl, a, b); }
SwizzleExpr operator>>(const SwizzleExpr& a, const SwizzleExpr& b) { return SwizzleExpr::binary(BinOp::Shr, a, b); }
SwizzleExpr min(const SwizzleExpr& a, const SwizzleExpr& b) { return SwizzleExpr::binary(BinOp::Min, a, b); }
SwizzleExpr max(const SwizzleExpr& a, const SwizzleExpr& b) { return SwizzleExpr::binary(BinOp::Max, a, b); }

// ---- parser ----------------------------------------------------------------

namespace {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  SwizzleExpr parse() {
    skip_ws();
    if (pos_ >= src_.size()) throw SyntaxError("empty expression", pos_);
    SwizzleExpr e = parse_bitor();
    skip_ws();
    if (pos_ < src_.size()) throw SyntaxError("unexpected '" + std::string(1, src_[pos_]) + "'", pos_);
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(std::string_view tok) {
    skip_ws();
    if (src_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  // Peeks an operator, refusing prefixes of longer tokens ("/" vs "//").
  bool accept_op(std::string_view tok, std::string_view not_followed_by = {}) {
    skip_ws();
    if (src_.substr(pos_, tok.size()) != tok) return false;
    if (!not_followed_by.empty() && pos_ + tok.size() < src_.size() &&
        not_followed_by.find(src_[pos_ + tok.size()]) != std::string_view::npos)
      return false;
    pos_ += tok.size();
    return true;
  }

  SwizzleExpr parse_bitor() {
    SwizzleExpr lhs = parse_bitand();
    while (accept_op("|")) lhs = lhs | parse_bitand();
    return lhs;
  }

  SwizzleExpr parse_bitand() {
    SwizzleExpr lhs = parse_shift();
    while (accept_op("&")) lhs = lhs & parse_shift();
    return lhs;
  }

  SwizzleExpr parse_shift() {
    SwizzleExpr lhs = parse_additive();
    for (;;) {
      if (accept_op("<<")) lhs = lhs << parse_additive();
      else if (accept_op(">>")) lhs = lhs >> parse_additive();
      else return lhs;
    }
  }

  SwizzleExpr parse_additive() {
    SwizzleExpr lhs = parse_term();
    for (;;) {
      if (accept_op("+")) lhs = lhs + parse_term();
      else if (accept_op("-")) lhs = lhs - parse_term();
      else return lhs;
    }
  }

  SwizzleExpr parse_term() {
    SwizzleExpr lhs = parse_primary();
    for (;;) {
      if (accept_op("*")) {
        lhs = lhs * parse_primary();
      } else if (accept_op("//")) {
        lhs = lhs / parse_primary();
      } else if (accept_op("%")) {
        lhs = lhs % parse_primary();
      } else {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '/')
          throw SyntaxError("true division '/' is not supported, use '//'", pos_);
        return lhs;
      }
    }
  }

  SwizzleExpr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw SyntaxError("expected operand, found end of input", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      SwizzleExpr e = parse_bitor();
      if (!accept(")")) throw SyntaxError("expected ')'", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      const std::string_view word = src_.substr(start, pos_ - start);
      if (word == "min" || word == "max") {
        if (!accept("(")) throw SyntaxError("expected '(' after " + std::string(word), pos_);
        SwizzleExpr a = parse_bitor();
        if (!accept(",")) throw SyntaxError("expected ','", pos_);
        SwizzleExpr b = parse_bitor();
        if (!accept(")")) throw SyntaxError("expected ')'", pos_);
        return word == "min" ? min(a, b) : max(a, b);
      }
      if (auto id = ident_from_name(word)) return SwizzleExpr::ident(*id);
      throw Error(ErrorKind::UnknownIdentifier, "unknown identifier '" + std::string(word) +
                                                    "' at position " + std::to_string(start));
    }
    throw SyntaxError("unexpected '" + std::string(1, c) + "'", pos_);
  }

  SwizzleExpr parse_number() {
    const std::size_t start = pos_;
    int base = 10;
    if (src_.substr(pos_, 2) == "0x" || src_.substr(pos_, 2) == "0X") {
      base = 16;
      pos_ += 2;
    }
    std::int64_t v = 0;
    std::size_t digits = 0;
    while (pos_ < src_.size()) {
      const char ch = src_[pos_];
      int d;
      if (std::isdigit(static_cast<unsigned char>(ch))) d = ch - '0';
      else if (base == 16 && std::isxdigit(static_cast<unsigned char>(ch))) d = std::tolower(ch) - 'a' + 10;
      else break;
      if (__builtin_mul_overflow(v, base, &v) || __builtin_add_overflow(v, d, &v))
        throw SyntaxError("integer literal too large", start);
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw SyntaxError("malformed integer literal", start);
    if (pos_ < src_.size() && (std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      throw SyntaxError("malformed integer literal", start);
    return SwizzleExpr::literal(v);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

void format_into(const ExprNode& n, std::string& out) {
  switch (n.kind) {
    case ExprNode::Kind::Literal: out += std::to_string(n.value); return;
    case ExprNode::Kind::Identifier: out += ident_name(n.ident); return;
    case ExprNode::Kind::Binary:
      if (n.op == BinOp::Min || n.op == BinOp::Max) {
        out += binop_symbol(n.op);
        out += '(';
        format_into(*n.lhs, out);
        out += ", ";
        format_into(*n.rhs, out);
        out += ')';
      } else {
        out += '(';
        format_into(*n.lhs, out);
        out += ' ';
        out += binop_symbol(n.op);
        out += ' ';
        format_into(*n.rhs, out);
        out += ')';
      }
      return;
  }
}

std::uint32_t collect_idents(const ExprNode& n) {
  switch (n.kind) {
    case ExprNode::Kind::Literal: return 0;
    case ExprNode::Kind::Identifier: return 1u << static_cast<unsigned>(n.ident);
    case ExprNode::Kind::Binary: return collect_idents(*n.lhs) | collect_idents(*n.rhs);
  }
  return 0;
}

}  // namespace

SwizzleExpr parse_expr(std::string_view text) { return Parser(text).parse(); }

std::string format_expr(const SwizzleExpr& expr) {
  std::string out;
  if (!expr.empty()) format_into(expr.root(), out);
  return out;
}

std::uint32_t referenced_idents(const SwizzleExpr& expr) {
  return expr.empty() ? 0 : collect_idents(expr.root());
}

// ---- evaluation -------------------------------------------------------------

EvalEnv& EvalEnv::set(Ident id, std::int64_t value) {
  if (value < 0)
    throw Error(ErrorKind::NegativeIntermediate,
                "identifier '" + std::string(ident_name(id)) + "' bound to negative value");
  values_[static_cast<std::size_t>(id)] = value;
  mask_ |= 1u << static_cast<unsigned>(id);
  return *this;
}

std::int64_t EvalEnv::get(Ident id) const {
  if (!bound(id))
    throw Error(ErrorKind::UnboundIdentifier, "unbound identifier '" + std::string(ident_name(id)) + "'");
  return values_[static_cast<std::size_t>(id)];
}

namespace {

std::int64_t apply_checked(BinOp op, std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  switch (op) {
    case BinOp::Add:
      if (__builtin_add_overflow(a, b, &r)) throw Error(ErrorKind::Overflow, "integer overflow in '+'");
      return r;
    case BinOp::Sub:
      r = a - b;
      if (r < 0)
        throw Error(ErrorKind::NegativeIntermediate,
                    "negative intermediate " + std::to_string(a) + " - " + std::to_string(b));
      return r;
    case BinOp::Mul:
      if (__builtin_mul_overflow(a, b, &r)) throw Error(ErrorKind::Overflow, "integer overflow in '*'");
      return r;
    case BinOp::FloorDiv:
      if (b == 0) throw Error(ErrorKind::DivisionByZero, "division by zero in '//'");
      return a / b;
    case BinOp::Mod:
      if (b == 0) throw Error(ErrorKind::DivisionByZero, "division by zero in '%'");
      return a % b;
    case BinOp::Shl:
      if (b > 62 || (a >> (62 - b)) != 0) throw Error(ErrorKind::Overflow, "integer overflow in '<<'");
      return a << b;
    case BinOp::Shr: return b >= 63 ? 0 : a >> b;
    case BinOp::BitAnd: return a & b;
    case BinOp::BitOr: return a | b;
    case BinOp::Min: return a < b ? a : b;
    case BinOp::Max: return a > b ? a : b;
  }
  return r;
}

std::int64_t eval_node(const ExprNode& n, const EvalEnv& env) {
  switch (n.kind) {
    case ExprNode::Kind::Literal: return n.value;
    case ExprNode::Kind::Identifier: return env.get(n.ident);
    case ExprNode::Kind::Binary: {
      const std::int64_t a = eval_node(*n.lhs, env);
      const std::int64_t b = eval_node(*n.rhs, env);
      return apply_checked(n.op, a, b);
    }
  }
  return 0;
}

simd::BinaryLaneFn lane_fn(const simd::KernelTable& k, BinOp op) {
  switch (op) {
    case BinOp::Add: return k.add;
    case BinOp::Sub: return k.sub;
    case BinOp::Mul: return k.mul;
    case BinOp::FloorDiv: return k.floordiv;
    case BinOp::Mod: return k.mod;
    case BinOp::Shl: return k.shl;
    case BinOp::Shr: return k.shr;
    case BinOp::BitAnd: return k.bit_and;
    case BinOp::BitOr: return k.bit_or;
    case BinOp::Min: return k.min;
    case BinOp::Max: return k.max;
  }
  return nullptr;
}

struct BatchCtx {
  const EvalEnv& constants;
  const std::array<std::span<const std::int64_t>, kNumIdents>& columns;
  std::size_t lanes;
  const simd::KernelTable& kernels;
  bool clean = true;
};

std::vector<std::int64_t> eval_column(const ExprNode& n, BatchCtx& ctx) {
  switch (n.kind) {
    case ExprNode::Kind::Literal: return std::vector<std::int64_t>(ctx.lanes, n.value);
    case ExprNode::Kind::Identifier: {
      const auto& col = ctx.columns[static_cast<std::size_t>(n.ident)];
      if (!col.empty()) return {col.begin(), col.begin() + static_cast<std::ptrdiff_t>(ctx.lanes)};
      return std::vector<std::int64_t>(ctx.lanes, ctx.constants.get(n.ident));
    }
    case ExprNode::Kind::Binary: {
      std::vector<std::int64_t> a = eval_column(*n.lhs, ctx);
      std::vector<std::int64_t> b = eval_column(*n.rhs, ctx);
      // Lanes that went bad upstream may hold garbage (possibly negative);
      // the fast path is only trusted while every lane is clean.
      if (!lane_fn(ctx.kernels, n.op)(a.data(), b.data(), a.data(), ctx.lanes)) ctx.clean = false;
      return a;
    }
  }
  return {};
}

}  // namespace

std::int64_t eval_expr(const SwizzleExpr& expr, const EvalEnv& env) {
  if (expr.empty()) throw Error(ErrorKind::InvalidArgument, "empty expression");
  return eval_node(expr.root(), env);
}

BatchEval eval_expr_batch(const SwizzleExpr& expr, const EvalEnv& constants,
                          const std::array<std::span<const std::int64_t>, kNumIdents>& columns,
                          std::size_t lanes) {
  if (expr.empty()) throw Error(ErrorKind::InvalidArgument, "empty expression");
  BatchCtx ctx{constants, columns, lanes, simd::active_kernels()};
  BatchEval result;
  result.out = eval_column(expr.root(), ctx);
  if (ctx.clean) return result;

  // Some lane failed or left the fast path: redo every lane with the checked
  // scalar evaluator and record which ones raise.
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    EvalEnv env = constants;
    for (std::size_t id = 0; id < kNumIdents; ++id)
      if (!columns[id].empty()) env.set(static_cast<Ident>(id), columns[id][lane]);
    try {
      result.out[lane] = eval_node(expr.root(), env);
    } catch (const Error&) {
      result.failed.push_back(static_cast<std::uint32_t>(lane));
      result.out[lane] = -1;
    }
  }
  return result;
}

}  // namespace swz
