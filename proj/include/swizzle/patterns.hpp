#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "swizzle/arch.hpp"
#include "swizzle/dsl.hpp"

namespace swz {

// Workgroup grid. Rank-1 grids have num_blocks_n == 1. Launch pids are the
// row-major linearization pid = pid_m * num_blocks_n + pid_n.
struct GridSpec {
  int rank = 1;
  std::int64_t num_blocks_m = 1;
  std::int64_t num_blocks_n = 1;
  std::int64_t block_dims[2] = {1, 1};
  std::int64_t problem_dims[2] = {1, 1};

  std::int64_t total() const { return num_blocks_m * num_blocks_n; }
  bool operator==(const GridSpec&) const = default;

  static GridSpec from_problem_1d(std::int64_t problem, std::int64_t block);
  static GridSpec from_problem_2d(std::int64_t problem_m, std::int64_t problem_n, std::int64_t block_m,
                                  std::int64_t block_n);
  // Unit-sized blocks: the grid is exactly blocks_m x blocks_n.
  static GridSpec blocks(std::int64_t blocks_m, std::int64_t blocks_n = 1);
};

void validate(const GridSpec& grid);

enum class Fallback { RejectGrid, IdentityOnGrid };

enum class BuiltinPattern {
  Identity,
  GemmContiguous,
  LayernormRowgroup,
  SoftmaxRowgroup,
  FdtdStripe,
  StencilGroup,
  TransposeBand,
  NaiveRowmajor,
  BitwiseLowbit,
};

std::string_view builtin_name(BuiltinPattern p);
BuiltinPattern builtin_from_name(std::string_view name);  // throws UnknownPattern
const std::vector<BuiltinPattern>& all_builtins();

// A launch-pid -> logical-pid remapping. Linear form evaluates one
// expression for the logical pid; pair form evaluates (pid_m, pid_n) of the
// logical tile and linearizes row-major.
struct SwizzlePattern {
  enum class Form { Linear, Pair };

  std::string name;
  Form form = Form::Linear;
  SwizzleExpr linear;
  SwizzleExpr row;
  SwizzleExpr col;
  std::map<std::string, std::int64_t> params;
  Fallback fallback = Fallback::IdentityOnGrid;

  static SwizzlePattern from_expr(std::string name, SwizzleExpr e);
  static SwizzlePattern from_pair(std::string name, SwizzleExpr row, SwizzleExpr col);
  // Accepts expression_text() output or a bare expression for the linear
  // form. Parse errors propagate as SyntaxError / UnknownIdentifier.
  static SwizzlePattern from_text(std::string name, std::string_view text);

  // Structural equality of the expressions (names and params ignored).
  bool same_mapping_as(const SwizzlePattern& other) const;
  std::string expression_text() const;
};

// Environment for one launch pid on `grid`.
EvalEnv launch_env(std::int64_t launch_pid, const GridSpec& grid, const ArchSpec& arch);

// Builds the canonical pattern. Applies the fallback policy: patterns with
// RejectGrid throw Error(GridRejected) on grids they cannot permute.
SwizzlePattern builtin_pattern(BuiltinPattern which, const GridSpec& grid, const ArchSpec& arch);
SwizzlePattern builtin_pattern(std::string_view name, const GridSpec& grid, const ArchSpec& arch);
// Same construction without the grid acceptance check (for demonstrating
// failures with check_bijectivity).
SwizzlePattern builtin_pattern_unchecked(BuiltinPattern which, const GridSpec& grid, const ArchSpec& arch);

// Throws Error(InvalidArgument) for pids outside the grid; evaluation errors propagate.
std::int64_t remap(const SwizzlePattern& pattern, std::int64_t launch_pid, const GridSpec& grid,
                   const ArchSpec& arch);

struct ValidationResult {
  bool bijective = false;
  std::vector<std::int64_t> out_of_range;  // includes pids whose evaluation raised
  struct Collision {
    std::int64_t pid_a;
    std::int64_t pid_b;
    std::int64_t image;
  };
  std::vector<Collision> collisions;
  bool coverage_ok = false;
  std::int64_t total_blocks = 0;
};

inline constexpr std::int64_t kDefaultEnumerationCap = std::int64_t{1} << 24;

// Exhaustive over all launch pids. Throws Error(GridTooLarge) above the cap.
ValidationResult check_bijectivity(const SwizzlePattern& pattern, const GridSpec& grid, const ArchSpec& arch,
                                   std::int64_t cap = kDefaultEnumerationCap);

// Materialized forward and inverse tables for a bijective pattern.
class PatternMap {
 public:
  // Throws Error(NotBijective) with a summary of the validation failure.
  PatternMap(const SwizzlePattern& pattern, const GridSpec& grid, const ArchSpec& arch,
             std::int64_t cap = kDefaultEnumerationCap);

  std::int64_t logical_of(std::int64_t launch_pid) const { return forward_.at(static_cast<std::size_t>(launch_pid)); }
  std::int64_t launch_of(std::int64_t logical_pid) const { return inverse_.at(static_cast<std::size_t>(logical_pid)); }
  std::uint32_t xcd_of_logical(std::int64_t logical_pid) const {
    return static_cast<std::uint32_t>(launch_of(logical_pid) % num_xcds_);
  }
  const std::vector<std::int64_t>& forward() const { return forward_; }
  std::int64_t total() const { return static_cast<std::int64_t>(forward_.size()); }

 private:
  std::vector<std::int64_t> forward_;
  std::vector<std::int64_t> inverse_;
  std::uint32_t num_xcds_;
};

std::uint32_t xcd_of_logical(const SwizzlePattern& pattern, std::int64_t logical_pid, const GridSpec& grid,
                             const ArchSpec& arch);

struct ColocationStats {
  std::vector<std::int64_t> per_xcd_counts;
  // For each group, the largest fraction of its tiles sharing one XCD.
  std::vector<double> row_ratios;  // groups = grid rows (same pid_m)
  std::vector<double> col_ratios;  // groups = grid columns (same pid_n)
  std::vector<double> run_ratios;  // groups = runs of ceil(total/X) consecutive logical pids
};

ColocationStats colocation_stats(const SwizzlePattern& pattern, const GridSpec& grid, const ArchSpec& arch);
ColocationStats colocation_stats(const PatternMap& map, const GridSpec& grid, const ArchSpec& arch);

// ---- canonical constructions ----------------------------------------------
// Building blocks used by the built-ins and the search proposer. All of them
// are grid-generic expressions over the identifier vocabulary.
namespace construct {

// Position of a launch pid in XCD-major order: pids sorted by
// (pid mod X, pid div X). Equals (pid % X) * (T / X) + pid // X on grids with
// T divisible by X, and stays a bijection otherwise.
SwizzleExpr xcd_major_rank();

// Inverse of the ordering that sorts G equal groups of S items by
// (group mod X, group div X, item): maps a position k to group*S + item.
SwizzleExpr interleave_inverse(const SwizzleExpr& k, const SwizzleExpr& groups, const SwizzleExpr& group_size);

enum class Axis { Linear, Row, Column };

// Groups of `chunk` units along `axis` (tiles, rows, or columns). With
// stride 1 groups are dealt round-robin across XCDs; with stride X each XCD
// receives one contiguous run of the axis order. Returns nullopt when chunk
// does not divide the axis extent.
std::optional<SwizzlePattern> grouped(Axis axis, std::int64_t chunk, std::int64_t stride, const GridSpec& grid,
                                      const ArchSpec& arch);

}  // namespace construct

}  // namespace swz
