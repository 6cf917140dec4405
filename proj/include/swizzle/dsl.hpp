#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace swz {

// Fixed identifier vocabulary of the swizzle language.
enum class Ident : std::uint8_t { Pid, PidM, PidN, NumXcds, NumBlocks, NumBlocksM, NumBlocksN };
inline constexpr std::size_t kNumIdents = 7;

std::string_view ident_name(Ident id);
std::optional<Ident> ident_from_name(std::string_view name);

enum class BinOp : std::uint8_t { Add, Sub, Mul, FloorDiv, Mod, Shl, Shr, BitAnd, BitOr, Min, Max };

std::string_view binop_symbol(BinOp op);

struct ExprNode {
  enum class Kind : std::uint8_t { Literal, Identifier, Binary };
  Kind kind = Kind::Literal;
  std::int64_t value = 0;
  Ident ident = Ident::Pid;
  BinOp op = BinOp::Add;
  std::shared_ptr<const ExprNode> lhs;
  std::shared_ptr<const ExprNode> rhs;
};

// Immutable expression tree. Copies share structure.
class SwizzleExpr {
 public:
  SwizzleExpr() = default;
  explicit SwizzleExpr(std::shared_ptr<const ExprNode> root) : root_(std::move(root)) {}

  static SwizzleExpr literal(std::int64_t v);
  static SwizzleExpr ident(Ident id);
  static SwizzleExpr binary(BinOp op, const SwizzleExpr& lhs, const SwizzleExpr& rhs);

  const ExprNode& root() const { return *root_; }
  bool empty() const { return root_ == nullptr; }
  std::size_t node_count() const;

  friend bool operator==(const SwizzleExpr& a, const SwizzleExpr& b);

 private:
  std::shared_ptr<const ExprNode> root_;
};

// Operator sugar for building expressions in C++.
SwizzleExpr operator+(const SwizzleExpr& a, const SwizzleExpr& b);
SwizzleExpr operator-(const SwizzleExpr& a, const SwizzleExpr& b);
SwizzleExpr operator*(const SwizzleExpr& a, const SwizzleExpr& b);
SwizzleExpr operator/(const SwizzleExpr& a, const SwizzleExpr& b);  // floor division
SwizzleExpr operator%(const SwizzleExpr& a, const SwizzleExpr& b);
SwizzleExpr operator&(const SwizzleExpr& a, const SwizzleExpr& b);
SwizzleExpr operator|(const SwizzleExpr& a, const SwizzleExpr& b);
SwizzleExpr operator<<(const SwizzleExpr& a, const SwizzleExpr& b);
SwizzleExpr operator>>(const SwizzleExpr& a, const SwizzleExpr& b);
SwizzleExpr min(const SwizzleExpr& a, const SwizzleExpr& b);
SwizzleExpr max(const SwizzleExpr& a, const SwizzleExpr& b);

// Precedence, loosest first: |  &  << >>  + -  * // %.  All left-associative.
// Throws SyntaxError (with position) or Error(UnknownIdentifier).
SwizzleExpr parse_expr(std::string_view text);

// Fully parenthesized, deterministic; parse_expr(format_expr(e)) == e.
std::string format_expr(const SwizzleExpr& expr);

// Identifiers referenced by the expression, as a bitmask over Ident.
std::uint32_t referenced_idents(const SwizzleExpr& expr);

class EvalEnv {
 public:
  EvalEnv& set(Ident id, std::int64_t value);
  bool bound(Ident id) const { return (mask_ >> static_cast<unsigned>(id)) & 1u; }
  std::int64_t get(Ident id) const;  // throws UnboundIdentifier

 private:
  std::array<std::int64_t, kNumIdents> values_{};
  std::uint32_t mask_ = 0;
};

// Integer evaluation over the nonnegative domain. Throws DivisionByZero,
// UnboundIdentifier, NegativeIntermediate, or Overflow.
std::int64_t eval_expr(const SwizzleExpr& expr, const EvalEnv& env);

// Column-wise evaluation over many environments at once. `columns[id]` holds
// one value per lane for identifiers that vary (pid, pid_m, pid_n); constant
// identifiers are taken from `constants`. Lanes whose evaluation fails are
// reported in `failed` (out[lane] is then unspecified).
struct BatchEval {
  std::vector<std::int64_t> out;
  std::vector<std::uint32_t> failed;
};
BatchEval eval_expr_batch(const SwizzleExpr& expr, const EvalEnv& constants,
                          const std::array<std::span<const std::int64_t>, kNumIdents>& columns,
                          std::size_t lanes);

}  // namespace swz
