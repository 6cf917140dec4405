#include "swizzle/patterns.hpp"

#include <algorithm>
#include <bit>
#include <cctype>

#include "swizzle/error.hpp"

namespace swz {

namespace {

SwizzleExpr id(Ident i) { return SwizzleExpr::ident(i); }
SwizzleExpr lit(std::int64_t v) { return SwizzleExpr::literal(v); }

bool is_literal(const SwizzleExpr& e, std::int64_t v) {
  return e.root().kind == ExprNode::Kind::Literal && e.root().value == v;
}

// Folding of the trivial unit cases keeps the canonical forms readable.
SwizzleExpr mul1(const SwizzleExpr& a, const SwizzleExpr& b) {
  if (is_literal(a, 1)) return b;
  if (is_literal(b, 1)) return a;
  return a * b;
}
SwizzleExpr div1(const SwizzleExpr& a, const SwizzleExpr& b) { return is_literal(b, 1) ? a : a / b; }

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

constexpr std::int64_t kBatch = 8192;

// Logical pid per launch pid; -1 marks lanes that failed or fell outside.
std::vector<std::int64_t> forward_table(const SwizzlePattern& p, const GridSpec& grid, const ArchSpec& arch,
                                        std::vector<std::int64_t>& bad) {
  const std::int64_t total = grid.total();
  EvalEnv constants;
  constants.set(Ident::NumXcds, arch.num_xcds)
      .set(Ident::NumBlocks, total)
      .set(Ident::NumBlocksM, grid.num_blocks_m)
      .set(Ident::NumBlocksN, grid.num_blocks_n);

  std::vector<std::int64_t> table(static_cast<std::size_t>(total));
  std::vector<std::int64_t> pid(kBatch), pm(kBatch), pn(kBatch);
  for (std::int64_t base = 0; base < total; base += kBatch) {
    const std::size_t lanes = static_cast<std::size_t>(std::min(kBatch, total - base));
    for (std::size_t l = 0; l < lanes; ++l) {
      const std::int64_t i = base + static_cast<std::int64_t>(l);
      pid[l] = i;
      pm[l] = i / grid.num_blocks_n;
      pn[l] = i % grid.num_blocks_n;
    }
    std::array<std::span<const std::int64_t>, kNumIdents> cols{};
    cols[static_cast<std::size_t>(Ident::Pid)] = pid;
    cols[static_cast<std::size_t>(Ident::PidM)] = pm;
    cols[static_cast<std::size_t>(Ident::PidN)] = pn;

    if (p.form == SwizzlePattern::Form::Linear) {
      BatchEval r = eval_expr_batch(p.linear, constants, cols, lanes);
      for (auto f : r.failed) r.out[f] = -1;
      for (std::size_t l = 0; l < lanes; ++l) {
        const std::int64_t v = r.out[l];
        table[static_cast<std::size_t>(base) + l] = (v >= 0 && v < total) ? v : -1;
      }
    } else {
      BatchEval rm = eval_expr_batch(p.row, constants, cols, lanes);
      BatchEval rn = eval_expr_batch(p.col, constants, cols, lanes);
      for (auto f : rm.failed) rm.out[f] = -1;
      for (auto f : rn.failed) rn.out[f] = -1;
      for (std::size_t l = 0; l < lanes; ++l) {
        const std::int64_t m = rm.out[l], n = rn.out[l];
        const bool ok = m >= 0 && n >= 0 && m < grid.num_blocks_m && n < grid.num_blocks_n;
        table[static_cast<std::size_t>(base) + l] = ok ? m * grid.num_blocks_n + n : -1;
      }
    }
  }
  for (std::int64_t i = 0; i < total; ++i)
    if (table[static_cast<std::size_t>(i)] < 0) bad.push_back(i);
  return table;
}

}  // namespace

// ---- grid -----------------------------------------------------------------

GridSpec GridSpec::from_problem_1d(std::int64_t problem, std::int64_t block) {
  if (problem <= 0 || block <= 0) throw Error(ErrorKind::InvalidArgument, "grid dims must be positive");
  GridSpec g;
  g.rank = 1;
  g.num_blocks_m = ceil_div(problem, block);
  g.num_blocks_n = 1;
  g.block_dims[0] = block;
  g.problem_dims[0] = problem;
  return g;
}

GridSpec GridSpec::from_problem_2d(std::int64_t problem_m, std::int64_t problem_n, std::int64_t block_m,
                                   std::int64_t block_n) {
  if (problem_m <= 0 || problem_n <= 0 || block_m <= 0 || block_n <= 0)
    throw Error(ErrorKind::InvalidArgument, "grid dims must be positive");
  GridSpec g;
  g.rank = 2;
  g.num_blocks_m = ceil_div(problem_m, block_m);
  g.num_blocks_n = ceil_div(problem_n, block_n);
  g.block_dims[0] = block_m;
  g.block_dims[1] = block_n;
  g.problem_dims[0] = problem_m;
  g.problem_dims[1] = problem_n;
  return g;
}

GridSpec GridSpec::blocks(std::int64_t blocks_m, std::int64_t blocks_n) {
  return blocks_n == 1 ? from_problem_1d(blocks_m, 1) : from_problem_2d(blocks_m, blocks_n, 1, 1);
}

void validate(const GridSpec& g) {
  if (g.rank != 1 && g.rank != 2) throw Error(ErrorKind::InvariantViolation, "grid rank must be 1 or 2");
  if (g.num_blocks_m <= 0 || g.num_blocks_n <= 0)
    throw Error(ErrorKind::InvariantViolation, "grid block counts must be positive");
  if (g.rank == 1 && g.num_blocks_n != 1)
    throw Error(ErrorKind::InvariantViolation, "rank-1 grid must have num_blocks_n == 1");
  for (int a = 0; a < g.rank; ++a) {
    if (g.block_dims[a] <= 0 || g.problem_dims[a] <= 0)
      throw Error(ErrorKind::InvariantViolation, "grid dims must be positive");
    const std::int64_t expect = ceil_div(g.problem_dims[a], g.block_dims[a]);
    if ((a == 0 ? g.num_blocks_m : g.num_blocks_n) != expect)
      throw Error(ErrorKind::InvariantViolation, "grid block count must equal ceil(problem / block)");
  }
}

// ---- names ----------------------------------------------------------------

namespace {
constexpr std::pair<BuiltinPattern, std::string_view> kNames[] = {
    {BuiltinPattern::Identity, "identity"},
    {BuiltinPattern::GemmContiguous, "gemm_contiguous"},
    {BuiltinPattern::LayernormRowgroup, "layernorm_rowgroup"},
    {BuiltinPattern::SoftmaxRowgroup, "softmax_rowgroup"},
    {BuiltinPattern::FdtdStripe, "fdtd_stripe"},
    {BuiltinPattern::StencilGroup, "stencil_group"},
    {BuiltinPattern::TransposeBand, "transpose_band"},
    {BuiltinPattern::NaiveRowmajor, "naive_rowmajor"},
    {BuiltinPattern::BitwiseLowbit, "bitwise_lowbit"},
};
}  // namespace

std::string_view builtin_name(BuiltinPattern p) {
  for (const auto& [k, v] : kNames)
    if (k == p) return v;
  return "unknown";
}

BuiltinPattern builtin_from_name(std::string_view name) {
  for (const auto& [k, v] : kNames)
    if (v == name) return k;
  throw Error(ErrorKind::UnknownPattern, "unknown pattern '" + std::string(name) + "'");
}

const std::vector<BuiltinPattern>& all_builtins() {
  static const std::vector<BuiltinPattern> all = [] {
    std::vector<BuiltinPattern> v;
    for (const auto& [k, _] : kNames) v.push_back(k);
    return v;
  }();
  return all;
}

// ---- pattern ----------------------------------------------------------------

SwizzlePattern SwizzlePattern::from_expr(std::string name, SwizzleExpr e) {
  SwizzlePattern p;
  p.name = std::move(name);
  p.form = Form::Linear;
  p.linear = std::move(e);
  return p;
}

SwizzlePattern SwizzlePattern::from_pair(std::string name, SwizzleExpr row, SwizzleExpr col) {
  SwizzlePattern p;
  p.name = std::move(name);
  p.form = Form::Pair;
  p.row = std::move(row);
  p.col = std::move(col);
  return p;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Splits "lhs = rhs" when lhs is the expected target name.
std::optional<std::string_view> assignment(std::string_view part, std::string_view target) {
  part = trim(part);
  const auto eq = part.find('=');
  if (eq == std::string_view::npos || trim(part.substr(0, eq)) != target) return std::nullopt;
  return part.substr(eq + 1);
}

}  // namespace

SwizzlePattern SwizzlePattern::from_text(std::string name, std::string_view text) {
  text = trim(text);
  const auto semi = text.find(';');
  if (semi != std::string_view::npos) {
    auto m = assignment(text.substr(0, semi), "pid_m");
    auto n = assignment(text.substr(semi + 1), "pid_n");
    if (!m || !n) throw Error(ErrorKind::Syntax, "pair form must read 'pid_m = ...; pid_n = ...'");
    return from_pair(std::move(name), parse_expr(*m), parse_expr(*n));
  }
  if (auto rhs = assignment(text, "pid")) return from_expr(std::move(name), parse_expr(*rhs));
  return from_expr(std::move(name), parse_expr(text));
}

bool SwizzlePattern::same_mapping_as(const SwizzlePattern& o) const {
  if (form != o.form) return false;
  if (form == Form::Linear) return linear == o.linear;
  return row == o.row && col == o.col;
}

std::string SwizzlePattern::expression_text() const {
  if (form == Form::Linear) return "pid = " + format_expr(linear);
  return "pid_m = " + format_expr(row) + "; pid_n = " + format_expr(col);
}

EvalEnv launch_env(std::int64_t launch_pid, const GridSpec& grid, const ArchSpec& arch) {
  EvalEnv env;
  env.set(Ident::Pid, launch_pid)
      .set(Ident::PidM, launch_pid / grid.num_blocks_n)
      .set(Ident::PidN, launch_pid % grid.num_blocks_n)
      .set(Ident::NumXcds, arch.num_xcds)
      .set(Ident::NumBlocks, grid.total())
      .set(Ident::NumBlocksM, grid.num_blocks_m)
      .set(Ident::NumBlocksN, grid.num_blocks_n);
  return env;
}

// ---- constructions ------------------------------------------------------------

namespace construct {

SwizzleExpr xcd_major_rank() {
  const auto pid = id(Ident::Pid), X = id(Ident::NumXcds), T = id(Ident::NumBlocks);
  return (pid % X) * (T / X) + min(pid % X, T % X) + pid / X;
}

SwizzleExpr interleave_inverse(const SwizzleExpr& k, const SwizzleExpr& groups, const SwizzleExpr& group_size) {
  const auto X = id(Ident::NumXcds);
  const auto one = lit(1);
  const auto rank = div1(k, group_size);  // group position in residue-sorted order
  const auto item = k % group_size;
  const auto full = groups / X;           // groups per residue class, floor
  const auto extra = groups % X;          // residue classes holding one more
  const auto split = extra * (full + one);
  // Residue class of `rank`: the first `extra` classes hold full+1 groups.
  const auto residue = min(rank / (full + one), extra) + (max(rank, split) - split) / max(full, one);
  const auto within = rank - (residue * full + min(residue, extra));
  const auto group = within * X + residue;
  if (is_literal(group_size, 1)) return group;
  return group * group_size + item;
}

std::optional<SwizzlePattern> grouped(Axis axis, std::int64_t chunk, std::int64_t stride, const GridSpec& grid,
                                      const ArchSpec& arch) {
  if (chunk < 1) return std::nullopt;
  const std::int64_t X = arch.num_xcds;
  if (stride != 1 && stride != X) return std::nullopt;
  const auto M = id(Ident::NumBlocksM), N = id(Ident::NumBlocksN), T = id(Ident::NumBlocks);
  const auto C = lit(chunk);
  const auto R = xcd_major_rank();

  std::string axis_name;
  SwizzleExpr logical;
  switch (axis) {
    case Axis::Linear:
      if (grid.total() % chunk != 0) return std::nullopt;
      axis_name = "linear";
      logical = stride == 1 ? interleave_inverse(R, div1(T, C), C) : R;
      break;
    case Axis::Row:
      if (grid.num_blocks_m % chunk != 0) return std::nullopt;
      axis_name = "row";
      logical = stride == 1 ? interleave_inverse(R, div1(M, C), mul1(C, N)) : R;
      break;
    case Axis::Column: {
      if (grid.num_blocks_n % chunk != 0) return std::nullopt;
      axis_name = "column";
      const SwizzleExpr pos = stride == 1 ? interleave_inverse(R, div1(N, C), mul1(C, M)) : R;
      logical = (pos % M) * N + pos / M;  // column-major position back to a row-major pid
      break;
    }
  }
  SwizzlePattern p = SwizzlePattern::from_expr(
      axis_name + "_c" + std::to_string(chunk) + "_s" + std::to_string(stride), logical);
  p.params["axis"] = static_cast<std::int64_t>(axis);
  p.params["chunk"] = chunk;
  p.params["stride"] = stride;
  return p;
}

}  // namespace construct

// ---- built-ins --------------------------------------------------------------

SwizzlePattern builtin_pattern_unchecked(BuiltinPattern which, const GridSpec& grid, const ArchSpec& arch) {
  validate(grid);
  validate(arch);
  using construct::Axis;
  const auto pid = id(Ident::Pid), N = id(Ident::NumBlocksN);
  const std::string name(builtin_name(which));
  SwizzlePattern p;

  switch (which) {
    case BuiltinPattern::Identity:
      p = SwizzlePattern::from_expr(name, pid);
      break;

    case BuiltinPattern::GemmContiguous:
      // Contiguous logical runs per XCD: (pid % X) * (T // X) + pid // X on
      // divisible grids; the min() term absorbs the remainder otherwise.
      p = SwizzlePattern::from_expr(name, construct::xcd_major_rank());
      break;

    case BuiltinPattern::SoftmaxRowgroup:
      // All chunks of a row on one XCD, rows dealt round-robin over XCDs.
      p = *construct::grouped(Axis::Row, 1, 1, grid, arch);
      p.name = name;
      break;

    case BuiltinPattern::LayernormRowgroup: {
      // Same row routing as softmax, expressed as a (pid_m, pid_n) pair.
      const SwizzleExpr logical = construct::grouped(Axis::Row, 1, 1, grid, arch)->linear;
      p = SwizzlePattern::from_pair(name, logical / N, logical % N);
      break;
    }

    case BuiltinPattern::FdtdStripe:
      // Blocks sharing an x-range (a grid column) on one XCD, stripes dealt
      // round-robin over XCDs.
      p = *construct::grouped(Axis::Column, 1, 1, grid, arch);
      p.name = name;
      break;

    case BuiltinPattern::StencilGroup: {
      // Bands of consecutive rows kept together so both horizontal and
      // vertical neighbours share an L2; bands dealt round-robin.
      std::int64_t band = 4;
      while (grid.num_blocks_m % band != 0) band /= 2;
      p = *construct::grouped(Axis::Row, band, 1, grid, arch);
      p.name = name;
      p.params = {{"band_rows", band}};
      break;
    }

    case BuiltinPattern::TransposeBand: {
      // Row-major index modulo X picks the XCD, the rest is reassembled
      // contiguously: each XCD owns whole bands of input rows.
      const SwizzleExpr logical = construct::xcd_major_rank();
      p = SwizzlePattern::from_pair(name, logical / N, logical % N);
      break;
    }

    case BuiltinPattern::NaiveRowmajor:
      // Hardware-unaware: plain row-major delinearization.
      p = SwizzlePattern::from_pair(name, pid / N, pid % N);
      break;

    case BuiltinPattern::BitwiseLowbit: {
      // Swap adjacent bit pairs below the grid's bit width; an odd top bit
      // is carried through unchanged.
      const std::int64_t total = grid.total();
      const int width = total <= 1 ? 0 : static_cast<int>(std::bit_width(static_cast<std::uint64_t>(total - 1)));
      std::int64_t pair_mask = 0;
      for (int b = 0; b + 1 < width; b += 2) pair_mask |= std::int64_t{1} << b;
      const auto M = lit(pair_mask);
      SwizzleExpr e = ((pid >> lit(1)) & M) | ((pid & M) << lit(1));
      std::int64_t high_mask = 0;
      if (width % 2 == 1) {
        high_mask = std::int64_t{1} << (width - 1);
        e = e | (pid & lit(high_mask));
      }
      p = SwizzlePattern::from_expr(name, e);
      p.params = {{"pair_mask", pair_mask}, {"high_mask", high_mask}};
      p.fallback = Fallback::RejectGrid;
      return p;
    }
  }
  p.fallback = Fallback::IdentityOnGrid;
  return p;
}

SwizzlePattern builtin_pattern(BuiltinPattern which, const GridSpec& grid, const ArchSpec& arch) {
  SwizzlePattern p = builtin_pattern_unchecked(which, grid, arch);
  if (p.fallback == Fallback::RejectGrid) {
    const std::int64_t total = grid.total();
    if ((total & (total - 1)) != 0)
      throw Error(ErrorKind::GridRejected, std::string(builtin_name(which)) + " rejects grid of " +
                                               std::to_string(total) +
                                               " blocks: not a permutation on a non-power-of-two domain");
  }
  return p;
}

SwizzlePattern builtin_pattern(std::string_view name, const GridSpec& grid, const ArchSpec& arch) {
  return builtin_pattern(builtin_from_name(name), grid, arch);
}

// ---- evaluation and validation ---------------------------------------------

std::int64_t remap(const SwizzlePattern& p, std::int64_t launch_pid, const GridSpec& grid, const ArchSpec& arch) {
  if (launch_pid < 0 || launch_pid >= grid.total())
    throw Error(ErrorKind::InvalidArgument, "launch pid " + std::to_string(launch_pid) + " outside grid of " +
                                                std::to_string(grid.total()) + " blocks");
  const EvalEnv env = launch_env(launch_pid, grid, arch);
  std::int64_t logical;
  if (p.form == SwizzlePattern::Form::Linear) {
    logical = eval_expr(p.linear, env);
  } else {
    const std::int64_t m = eval_expr(p.row, env), n = eval_expr(p.col, env);
    if (m >= grid.num_blocks_m || n >= grid.num_blocks_n)
      throw Error(ErrorKind::InvalidArgument, "pattern maps pid " + std::to_string(launch_pid) +
                                                  " outside the grid");
    logical = m * grid.num_blocks_n + n;
  }
  if (logical >= grid.total())
    throw Error(ErrorKind::InvalidArgument,
                "pattern maps pid " + std::to_string(launch_pid) + " to " + std::to_string(logical) +
                    ", outside grid of " + std::to_string(grid.total()));
  return logical;
}

ValidationResult check_bijectivity(const SwizzlePattern& p, const GridSpec& grid, const ArchSpec& arch,
                                   std::int64_t cap) {
  const std::int64_t total = grid.total();
  if (total > cap)
    throw Error(ErrorKind::GridTooLarge, "grid of " + std::to_string(total) +
                                             " blocks exceeds enumeration cap " + std::to_string(cap));
  ValidationResult r;
  r.total_blocks = total;
  const std::vector<std::int64_t> table = forward_table(p, grid, arch, r.out_of_range);

  std::vector<std::int64_t> first_owner(static_cast<std::size_t>(total), -1);
  for (std::int64_t i = 0; i < total; ++i) {
    const std::int64_t img = table[static_cast<std::size_t>(i)];
    if (img < 0) continue;
    auto& owner = first_owner[static_cast<std::size_t>(img)];
    if (owner >= 0) r.collisions.push_back({owner, i, img});
    else owner = i;
  }
  r.coverage_ok = std::all_of(first_owner.begin(), first_owner.end(), [](std::int64_t o) { return o >= 0; });
  r.bijective = r.out_of_range.empty() && r.collisions.empty() && r.coverage_ok;
  return r;
}

PatternMap::PatternMap(const SwizzlePattern& p, const GridSpec& grid, const ArchSpec& arch, std::int64_t cap)
    : num_xcds_(arch.num_xcds) {
  const std::int64_t total = grid.total();
  if (total > cap)
    throw Error(ErrorKind::GridTooLarge, "grid of " + std::to_string(total) +
                                             " blocks exceeds enumeration cap " + std::to_string(cap));
  std::vector<std::int64_t> bad;
  forward_ = forward_table(p, grid, arch, bad);
  if (!bad.empty())
    throw Error(ErrorKind::NotBijective, "pattern '" + p.name + "' is not bijective: launch pid " +
                                             std::to_string(bad.front()) + " maps outside the grid (" +
                                             std::to_string(bad.size()) + " offending pids)");
  inverse_.assign(static_cast<std::size_t>(total), -1);
  for (std::int64_t i = 0; i < total; ++i) {
    auto& slot = inverse_[static_cast<std::size_t>(forward_[static_cast<std::size_t>(i)])];
    if (slot >= 0)
      throw Error(ErrorKind::NotBijective, "pattern '" + p.name + "' is not bijective: pids " +
                                               std::to_string(slot) + " and " + std::to_string(i) +
                                               " both map to " + std::to_string(forward_[static_cast<std::size_t>(i)]));
    slot = i;
  }
}

std::uint32_t xcd_of_logical(const SwizzlePattern& p, std::int64_t logical_pid, const GridSpec& grid,
                             const ArchSpec& arch) {
  if (logical_pid < 0 || logical_pid >= grid.total())
    throw Error(ErrorKind::InvalidArgument, "logical pid outside grid");
  return PatternMap(p, grid, arch).xcd_of_logical(logical_pid);
}

namespace {

// Largest share of one XCD among the members of each group.
template <class GroupOf>
std::vector<double> group_ratios(const PatternMap& map, std::int64_t groups, std::uint32_t num_xcds,
                                 GroupOf group_of) {
  std::vector<std::vector<std::int64_t>> counts(static_cast<std::size_t>(groups),
                                                std::vector<std::int64_t>(num_xcds, 0));
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(groups), 0);
  for (std::int64_t l = 0; l < map.total(); ++l) {
    const auto g = static_cast<std::size_t>(group_of(l));
    ++counts[g][map.xcd_of_logical(l)];
    ++sizes[g];
  }
  std::vector<double> ratios;
  ratios.reserve(counts.size());
  for (std::size_t g = 0; g < counts.size(); ++g) {
    const auto best = *std::max_element(counts[g].begin(), counts[g].end());
    ratios.push_back(sizes[g] == 0 ? 1.0 : static_cast<double>(best) / static_cast<double>(sizes[g]));
  }
  return ratios;
}

}  // namespace

ColocationStats colocation_stats(const PatternMap& map, const GridSpec& grid, const ArchSpec& arch) {
  ColocationStats s;
  s.per_xcd_counts.assign(arch.num_xcds, 0);
  for (std::int64_t l = 0; l < map.total(); ++l) ++s.per_xcd_counts[map.xcd_of_logical(l)];
  const std::int64_t n = grid.num_blocks_n;
  s.row_ratios = group_ratios(map, grid.num_blocks_m, arch.num_xcds, [n](std::int64_t l) { return l / n; });
  s.col_ratios = group_ratios(map, n, arch.num_xcds, [n](std::int64_t l) { return l % n; });
  const std::int64_t run = ceil_div(grid.total(), arch.num_xcds);
  s.run_ratios = group_ratios(map, ceil_div(grid.total(), run), arch.num_xcds,
                              [run](std::int64_t l) { return l / run; });
  return s;
}

ColocationStats colocation_stats(const SwizzlePattern& p, const GridSpec& grid, const ArchSpec& arch) {
  return colocation_stats(PatternMap(p, grid, arch), grid, arch);
}

}  // namespace swz
