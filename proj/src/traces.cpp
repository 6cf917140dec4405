#include "swizzle/traces.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <ostream>
#include <sstream>

#include "swizzle/error.hpp"

namespace swz {

namespace {

constexpr std::array<std::string_view, 10> kKernelNames = {
    "gemm",      "fused_elementwise", "layernorm", "softmax", "spmv_naive",
    "transpose", "black_scholes",     "fdtd2d",    "smith_waterman", "stencil2d",
};

std::uint64_t u(std::int64_t v) { return static_cast<std::uint64_t>(v); }

struct Expected {
  std::size_t problem;
  std::size_t block;
};

Expected expected_dims(KernelKind k) {
  switch (k) {
    case KernelKind::Gemm: return {3, 3};
    case KernelKind::Transpose:
    case KernelKind::Stencil2d:
    case KernelKind::Fdtd2d:
    case KernelKind::SmithWaterman: return {2, 2};
    case KernelKind::Softmax:
    case KernelKind::Layernorm: return {2, 1};
    case KernelKind::SpmvNaive:
    case KernelKind::BlackScholes:
    case KernelKind::FusedElementwise: return {1, 1};
  }
  return {0, 0};
}

std::pair<std::int64_t, std::int64_t> gemm_tile(std::int64_t pid, std::int64_t nm, std::int64_t nn,
                                                std::int64_t group_m) {
  const std::int64_t in_group = group_m * nn;
  const std::int64_t first_m = (pid / in_group) * group_m;
  const std::int64_t size_m = std::min(nm - first_m, group_m);
  return {first_m + (pid % in_group) % size_m, (pid % in_group) / size_m};
}

// The 2-D kinds share the same row/column extent arithmetic.
struct Tile {
  std::int64_t y0, y1, x0, x1;
  std::int64_t h() const { return y1 - y0; }
  std::int64_t w() const { return x1 - x0; }
};

Tile tile_extent(std::int64_t tm, std::int64_t tn, std::int64_t ny, std::int64_t nx, std::int64_t by,
                 std::int64_t bx) {
  return {tm * by, std::min(ny, (tm + 1) * by), tn * bx, std::min(nx, (tn + 1) * bx)};
}

AccessTrace gen_gemm(const KernelSpec& s) {
  const std::int64_t M = s.problem[0], N = s.problem[1], K = s.problem[2];
  const std::int64_t BM = s.block[0], BN = s.block[1], BK = s.block[2], dt = s.dtype_bytes;
  const GridSpec grid = total_blocks(s);
  TraceBuilder b("gemm", grid, 1);
  const auto A = b.add_buffer("A", u(M * K * dt), false);
  const auto B = b.add_buffer("B", u(K * N * dt), false);
  const auto C = b.add_buffer("C", u(M * N * dt), true);
  for (std::int64_t pid = 0; pid < grid.total(); ++pid) {
    const auto [tm, tn] = gemm_tile(pid, grid.num_blocks_m, grid.num_blocks_n, s.group_m);
    const Tile t = tile_extent(tm, tn, M, N, BM, BN);
    b.open(0, pid);
    for (std::int64_t k0 = 0; k0 < K; k0 += BK) {
      const std::int64_t k1 = std::min(K, k0 + BK);
      for (std::int64_t r = t.y0; r < t.y1; ++r) b.read(A, u((r * K + k0) * dt), u((k1 - k0) * dt));
      for (std::int64_t k = k0; k < k1; ++k) b.read(B, u((k * N + t.x0) * dt), u(t.w() * dt));
    }
    for (std::int64_t r = t.y0; r < t.y1; ++r) b.write(C, u((r * N + t.x0) * dt), u(t.w() * dt));
  }
  return b.finish();
}

AccessTrace gen_transpose(const KernelSpec& s) {
  const std::int64_t M = s.problem[0], N = s.problem[1], dt = s.dtype_bytes;
  const GridSpec grid = total_blocks(s);
  TraceBuilder b("transpose", grid, 1);
  const auto in = b.add_buffer("in", u(M * N * dt), false);
  const auto out = b.add_buffer("out", u(M * N * dt), true);
  for (std::int64_t pid = 0; pid < grid.total(); ++pid) {
    const Tile t = tile_extent(pid / grid.num_blocks_n, pid % grid.num_blocks_n, M, N, s.block[0], s.block[1]);
    b.open(0, pid);
    for (std::int64_t r = t.y0; r < t.y1; ++r) b.read(in, u((r * N + t.x0) * dt), u(t.w() * dt));
    for (std::int64_t c = t.x0; c < t.x1; ++c) b.write(out, u((c * M + t.y0) * dt), u(t.h() * dt));
  }
  return b.finish();
}

// Two-phase row reduction: every chunk scans its whole row for the max and
// sum, then after the barrier normalizes its own chunk.
AccessTrace gen_softmax(const KernelSpec& s) {
  const std::int64_t R = s.problem[0], C = s.problem[1], CH = s.block[0], dt = s.dtype_bytes;
  const GridSpec grid = total_blocks(s);
  TraceBuilder b("softmax", grid, 2);
  const auto X = b.add_buffer("x", u(R * C * dt), false);
  const auto Y = b.add_buffer("y", u(R * C * dt), true);
  const std::int64_t chunks = grid.num_blocks_n;
  for (std::int64_t pid = 0; pid < grid.total(); ++pid) {
    b.open(0, pid);
    b.read(X, u(pid / chunks * C * dt), u(C * dt));
  }
  for (std::int64_t pid = 0; pid < grid.total(); ++pid) {
    const std::int64_t row = pid / chunks, c0 = pid % chunks * CH, c1 = std::min(C, c0 + CH);
    b.open(1, pid);
    b.read(X, u((row * C + c0) * dt), u((c1 - c0) * dt));
    b.write(Y, u((row * C + c0) * dt), u((c1 - c0) * dt));
  }
  return b.finish();
}

AccessTrace gen_layernorm(const KernelSpec& s) {
  const std::int64_t R = s.problem[0], C = s.problem[1], CH = s.block[0], dt = s.dtype_bytes;
  const GridSpec grid = total_blocks(s);
  TraceBuilder b("layernorm", grid, 1);
  const auto X = b.add_buffer("x", u(R * C * dt), false);
  const auto W = b.add_buffer("weight", u(C * dt), false);
  const auto Bi = b.add_buffer("bias", u(C * dt), false);
  const auto Y = b.add_buffer("y", u(R * C * dt), true);
  const std::int64_t chunks = grid.num_blocks_n;
  for (std::int64_t pid = 0; pid < grid.total(); ++pid) {
    const std::int64_t row = pid / chunks, c0 = pid % chunks * CH, c1 = std::min(C, c0 + CH);
    const std::uint64_t len = u((c1 - c0) * dt);
    b.open(0, pid);
    b.read(X, u(row * C * dt), u(C * dt));  // mean and variance
    b.read(X, u((row * C + c0) * dt), len);
    b.read(W, u(c0 * dt), len);
    b.read(Bi, u(c0 * dt), len);
    b.write(Y, u((row * C + c0) * dt), len);
  }
  return b.finish();
}

AccessTrace gen_stencil(const KernelSpec& s) {
  const std::int64_t ny = s.problem[0], nx = s.problem[1], dt = s.dtype_bytes;
  const GridSpec grid = total_blocks(s);
  TraceBuilder b("stencil2d", grid, 1);
  const auto in = b.add_buffer("in", u(ny * nx * dt), false);
  const auto out = b.add_buffer("out", u(ny * nx * dt), true);
  for (std::int64_t pid = 0; pid < grid.total(); ++pid) {
    const Tile t = tile_extent(pid / grid.num_blocks_n, pid % grid.num_blocks_n, ny, nx, s.block[0], s.block[1]);
    auto row = [&](std::int64_t y) { return u((y * nx + t.x0) * dt); };
    b.open(0, pid);
    if (t.y0 > 0) b.read(in, row(t.y0 - 1), u(t.w() * dt));
    for (std::int64_t y = t.y0; y < t.y1; ++y) b.read(in, row(y), u(t.w() * dt));
    if (t.y1 < ny) b.read(in, row(t.y1), u(t.w() * dt));
    if (t.x0 > 0)
      for (std::int64_t y = t.y0; y < t.y1; ++y) b.read(in, u((y * nx + t.x0 - 1) * dt), u(dt));
    if (t.x1 < nx)
      for (std::int64_t y = t.y0; y < t.y1; ++y) b.read(in, u((y * nx + t.x1) * dt), u(dt));
    for (std::int64_t y = t.y0; y < t.y1; ++y) b.write(out, row(y), u(t.w() * dt));
  }
  return b.finish();
}

// Yee-grid updates: the E phase needs hz from the tile above and to the
// left, the H phase needs ex from the right and ey from below.
AccessTrace gen_fdtd(const KernelSpec& s) {
  const std::int64_t ny = s.problem[0], nx = s.problem[1], dt = s.dtype_bytes;
  const GridSpec grid = total_blocks(s);
  TraceBuilder b("fdtd2d", grid, static_cast<std::size_t>(2 * s.steps));
  const auto ex = b.add_buffer("ex", u(ny * nx * dt), true);
  const auto ey = b.add_buffer("ey", u(ny * nx * dt), true);
  const auto hz = b.add_buffer("hz", u(ny * nx * dt), true);
  for (std::int64_t step = 0; step < s.steps; ++step) {
    for (int half = 0; half < 2; ++half) {
      for (std::int64_t pid = 0; pid < grid.total(); ++pid) {
        const Tile t = tile_extent(pid / grid.num_blocks_n, pid % grid.num_blocks_n, ny, nx, s.block[0], s.block[1]);
        auto row = [&](std::int64_t y) { return u((y * nx + t.x0) * dt); };
        const std::uint64_t w = u(t.w() * dt);
        b.open(static_cast<std::size_t>(2 * step + half), pid);
        if (half == 0) {
          if (t.y0 > 0) b.read(hz, row(t.y0 - 1), w);
          for (std::int64_t y = t.y0; y < t.y1; ++y) b.read(hz, row(y), w);
          if (t.x0 > 0)
            for (std::int64_t y = t.y0; y < t.y1; ++y) b.read(hz, u((y * nx + t.x0 - 1) * dt), u(dt));
          for (std::int64_t y = t.y0; y < t.y1; ++y) {
            b.read(ey, row(y), w);
            b.write(ey, row(y), w);
            b.read(ex, row(y), w);
            b.write(ex, row(y), w);
          }
        } else {
          for (std::int64_t y = t.y0; y < t.y1; ++y) b.read(ex, row(y), w);
          if (t.x1 < nx)
            for (std::int64_t y = t.y0; y < t.y1; ++y) b.read(ex, u((y * nx + t.x1) * dt), u(dt));
          for (std::int64_t y = t.y0; y < t.y1; ++y) b.read(ey, row(y), w);
          if (t.y1 < ny) b.read(ey, row(t.y1), w);
          for (std::int64_t y = t.y0; y < t.y1; ++y) {
            b.read(hz, row(y), w);
            b.write(hz, row(y), w);
          }
        }
      }
    }
  }
  return b.finish();
}

// Block wavefront: tiles on anti-diagonal d run in phase d.
AccessTrace gen_smith_waterman(const KernelSpec& s) {
  const std::int64_t ny = s.problem[0], nx = s.problem[1], dt = s.dtype_bytes;
  const GridSpec grid = total_blocks(s);
  const std::int64_t nm = grid.num_blocks_m, nn = grid.num_blocks_n;
  TraceBuilder b("smith_waterman", grid, static_cast<std::size_t>(nm + nn - 1));
  const auto sa = b.add_buffer("seq_a", u(ny), false);
  const auto sb = b.add_buffer("seq_b", u(nx), false);
  const auto H = b.add_buffer("H", u(ny * nx * dt), true);
  for (std::int64_t d = 0; d < nm + nn - 1; ++d) {
    for (std::int64_t tm = std::max<std::int64_t>(0, d - nn + 1); tm <= std::min(d, nm - 1); ++tm) {
      const std::int64_t tn = d - tm;
      const Tile t = tile_extent(tm, tn, ny, nx, s.block[0], s.block[1]);
      b.open(static_cast<std::size_t>(d), tm * nn + tn);
      b.read(sa, u(t.y0), u(t.h()));
      b.read(sb, u(t.x0), u(t.w()));
      if (t.y0 > 0) {
        const std::int64_t xs = std::max<std::int64_t>(0, t.x0 - 1);
        b.read(H, u(((t.y0 - 1) * nx + xs) * dt), u((t.x1 - xs) * dt));
      }
      if (t.x0 > 0)
        for (std::int64_t y = t.y0; y < t.y1; ++y) b.read(H, u((y * nx + t.x0 - 1) * dt), u(dt));
      for (std::int64_t y = t.y0; y < t.y1; ++y) b.write(H, u((y * nx + t.x0) * dt), u(t.w() * dt));
    }
  }
  return b.finish();
}

// Square banded CSR: row r holds columns [r - hw, r + hw] clipped to the
// matrix, so the structure follows from the dimensions alone.
AccessTrace gen_spmv(const KernelSpec& s) {
  const std::int64_t n = s.problem[0], rows_per = s.block[0], hw = s.band_half_width, dt = s.dtype_bytes;
  auto lo = [&](std::int64_t r) { return std::max<std::int64_t>(0, r - hw); };
  auto hi = [&](std::int64_t r) { return std::min(n - 1, r + hw); };
  std::int64_t nnz = 0;
  for (std::int64_t r = 0; r < n; ++r) nnz += hi(r) - lo(r) + 1;

  const GridSpec grid = total_blocks(s);
  TraceBuilder b("spmv_naive", grid, 1);
  const auto rp = b.add_buffer("row_ptr", u((n + 1) * 4), false);
  const auto ci = b.add_buffer("col_idx", u(nnz * 4), false);
  const auto va = b.add_buffer("vals", u(nnz * dt), false);
  const auto x = b.add_buffer("x", u(n * dt), false);
  const auto y = b.add_buffer("y", u(n * dt), true);
  std::int64_t start = 0;
  for (std::int64_t pid = 0; pid < grid.total(); ++pid) {
    b.open(0, pid);
    for (std::int64_t r = pid * rows_per; r < std::min(n, (pid + 1) * rows_per); ++r) {
      const std::int64_t cnt = hi(r) - lo(r) + 1;
      b.read(rp, u(r * 4), 8);
      b.read(ci, u(start * 4), u(cnt * 4));
      b.read(va, u(start * dt), u(cnt * dt));
      for (std::int64_t c = lo(r); c <= hi(r); ++c) b.read(x, u(c * dt), u(dt));
      b.write(y, u(r * dt), u(dt));
      start += cnt;
    }
  }
  return b.finish();
}

AccessTrace gen_streaming(const KernelSpec& s, std::string_view kernel, std::initializer_list<std::string_view> ins,
                          std::initializer_list<std::string_view> outs) {
  const std::int64_t n = s.problem[0], blk = s.block[0], dt = s.dtype_bytes;
  const GridSpec grid = total_blocks(s);
  TraceBuilder b(std::string(kernel), grid, 1);
  std::vector<std::uint16_t> in_ids, out_ids;
  for (auto name : ins) in_ids.push_back(b.add_buffer(std::string(name), u(n * dt), false));
  for (auto name : outs) out_ids.push_back(b.add_buffer(std::string(name), u(n * dt), true));
  for (std::int64_t pid = 0; pid < grid.total(); ++pid) {
    const std::int64_t e0 = pid * blk, e1 = std::min(n, e0 + blk);
    b.open(0, pid);
    for (auto id : in_ids) b.read(id, u(e0 * dt), u((e1 - e0) * dt));
    for (auto id : out_ids) b.write(id, u(e0 * dt), u((e1 - e0) * dt));
  }
  return b.finish();
}

}  // namespace

std::string_view kernel_name(KernelKind kind) { return kKernelNames[static_cast<std::size_t>(kind)]; }

KernelKind kernel_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kKernelNames.size(); ++i)
    if (kKernelNames[i] == name) return static_cast<KernelKind>(i);
  throw Error(ErrorKind::InvalidArgument, "unknown kernel '" + std::string(name) + "'");
}

const std::vector<KernelKind>& all_kernels() {
  static const std::vector<KernelKind> kinds = [] {
    std::vector<KernelKind> v;
    for (std::size_t i = 0; i < kKernelNames.size(); ++i) v.push_back(static_cast<KernelKind>(i));
    return v;
  }();
  return kinds;
}

void validate(const KernelSpec& s) {
  const std::string k(kernel_name(s.kind));
  const Expected e = expected_dims(s.kind);
  if (s.problem.size() != e.problem || s.block.size() != e.block)
    throw Error(ErrorKind::InvalidArgument, k + ": expected " + std::to_string(e.problem) + " problem and " +
                                                std::to_string(e.block) + " block dims");
  for (auto v : s.problem)
    if (v <= 0) throw Error(ErrorKind::InvalidArgument, k + ": problem dims must be positive");
  for (auto v : s.block)
    if (v <= 0) throw Error(ErrorKind::InvalidArgument, k + ": block dims must be positive");
  // Block i bounds problem i, except for the row-chunked kinds whose single
  // block dim bounds the column count.
  const std::size_t shift = (s.kind == KernelKind::Softmax || s.kind == KernelKind::Layernorm) ? 1 : 0;
  for (std::size_t i = 0; i < s.block.size(); ++i)
    if (s.block[i] > s.problem[i + shift]) throw Error(ErrorKind::InvalidArgument, k + ": block larger than problem");
  if (s.dtype_bytes != 1 && s.dtype_bytes != 2 && s.dtype_bytes != 4 && s.dtype_bytes != 8)
    throw Error(ErrorKind::InvalidArgument, k + ": dtype_bytes must be 1, 2, 4 or 8");
  if (s.group_m < 1) throw Error(ErrorKind::InvalidArgument, k + ": group_m must be >= 1");
  if (s.steps < 1) throw Error(ErrorKind::InvalidArgument, k + ": steps must be >= 1");
  if (s.band_half_width < 0) throw Error(ErrorKind::InvalidArgument, k + ": band half-width must be >= 0");
}

KernelSpec default_spec(KernelKind kind) {
  KernelSpec s;
  s.kind = kind;
  switch (kind) {
    case KernelKind::Gemm: s.problem = {1024, 1024, 1024}; s.block = {64, 64, 64}; break;
    case KernelKind::Transpose: s.problem = {4096, 4096}; s.block = {64, 64}; s.dtype_bytes = 1; break;
    case KernelKind::Softmax: s.problem = {4096, 4096}; s.block = {1024}; break;
    case KernelKind::Layernorm: s.problem = {512, 8192}; s.block = {1024}; break;
    case KernelKind::Stencil2d: s.problem = {2048, 2048}; s.block = {64, 64}; break;
    case KernelKind::Fdtd2d: s.problem = {1024, 1024}; s.block = {64, 64}; break;
    case KernelKind::SmithWaterman: s.problem = {2048, 2048}; s.block = {128, 128}; break;
    case KernelKind::SpmvNaive: s.problem = {65536}; s.block = {64}; break;
    case KernelKind::BlackScholes:
    case KernelKind::FusedElementwise: s.problem = {std::int64_t{1} << 22}; s.block = {1024}; break;
  }
  return s;
}

KernelSpec spec_with_size(KernelKind kind, std::int64_t size) {
  KernelSpec s = default_spec(kind);
  switch (kind) {
    case KernelKind::Gemm: s.problem = {size, size, size}; break;
    case KernelKind::SpmvNaive:
    case KernelKind::BlackScholes:
    case KernelKind::FusedElementwise: s.problem = {size}; break;
    default: s.problem = {size, size}; break;
  }
  return s;
}

std::string describe(const KernelSpec& s) {
  auto join = [](const std::vector<std::int64_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "x" : "") + std::to_string(v[i]);
    return out;
  };
  std::string d = std::string(kernel_name(s.kind)) + " problem=" + join(s.problem) + " block=" + join(s.block) +
                  " dtype=" + std::to_string(s.dtype_bytes) + "B";
  if (s.kind == KernelKind::Gemm) d += " group_m=" + std::to_string(s.group_m);
  if (s.kind == KernelKind::Fdtd2d) d += " steps=" + std::to_string(s.steps);
  if (s.kind == KernelKind::SpmvNaive) d += " band=" + std::to_string(s.band_half_width);
  return d;
}

BuiltinPattern intended_pattern(KernelKind kind) {
  switch (kind) {
    case KernelKind::Transpose: return BuiltinPattern::TransposeBand;
    case KernelKind::Softmax: return BuiltinPattern::SoftmaxRowgroup;
    case KernelKind::Layernorm: return BuiltinPattern::LayernormRowgroup;
    case KernelKind::Stencil2d: return BuiltinPattern::StencilGroup;
    case KernelKind::Fdtd2d: return BuiltinPattern::FdtdStripe;
    default: return BuiltinPattern::GemmContiguous;
  }
}

GridSpec total_blocks(const KernelSpec& s) {
  validate(s);
  switch (s.kind) {
    case KernelKind::Softmax:
    case KernelKind::Layernorm: return GridSpec::from_problem_2d(s.problem[0], s.problem[1], 1, s.block[0]);
    case KernelKind::SpmvNaive:
    case KernelKind::BlackScholes:
    case KernelKind::FusedElementwise: return GridSpec::from_problem_1d(s.problem[0], s.block[0]);
    default: return GridSpec::from_problem_2d(s.problem[0], s.problem[1], s.block[0], s.block[1]);
  }
}

std::pair<std::int64_t, std::int64_t> logical_tile(const KernelSpec& s, std::int64_t pid) {
  const GridSpec g = total_blocks(s);
  if (pid < 0 || pid >= g.total()) throw Error(ErrorKind::InvalidArgument, "pid outside grid");
  if (s.kind == KernelKind::Gemm) return gemm_tile(pid, g.num_blocks_m, g.num_blocks_n, s.group_m);
  return {pid / g.num_blocks_n, pid % g.num_blocks_n};
}

AccessTrace generate_trace(const KernelSpec& s) {
  validate(s);
  switch (s.kind) {
    case KernelKind::Gemm: return gen_gemm(s);
    case KernelKind::Transpose: return gen_transpose(s);
    case KernelKind::Softmax: return gen_softmax(s);
    case KernelKind::Layernorm: return gen_layernorm(s);
    case KernelKind::Stencil2d: return gen_stencil(s);
    case KernelKind::Fdtd2d: return gen_fdtd(s);
    case KernelKind::SmithWaterman: return gen_smith_waterman(s);
    case KernelKind::SpmvNaive: return gen_spmv(s);
    case KernelKind::BlackScholes:
      return gen_streaming(s, "black_scholes", {"price", "strike", "years"}, {"call", "put"});
    case KernelKind::FusedElementwise: return gen_streaming(s, "fused_elementwise", {"x", "y"}, {"z"});
  }
  throw Error(ErrorKind::InvalidArgument, "unsupported kernel kind");
}

// ---- AccessTrace / TraceBuilder -------------------------------------------

std::span<const AccessRecord> AccessTrace::stream(std::size_t phase, std::int64_t pid) const {
  const std::size_t s = phase * static_cast<std::size_t>(grid.total()) + static_cast<std::size_t>(pid);
  return {records_.data() + index_.at(s), records_.data() + index_.at(s + 1)};
}

std::vector<std::int64_t> AccessTrace::participants(std::size_t phase) const {
  std::vector<std::int64_t> out;
  for (std::int64_t pid = 0; pid < grid.total(); ++pid)
    if (!stream(phase, pid).empty()) out.push_back(pid);
  return out;
}

std::uint64_t AccessTrace::footprint_bytes() const {
  std::uint64_t total = 0;
  for (const auto& b : buffers) total += b.length;
  return total;
}

TraceBuilder::TraceBuilder(std::string kernel, GridSpec grid, std::size_t phases) {
  validate(grid);
  if (phases == 0) throw Error(ErrorKind::InvalidArgument, "trace needs at least one phase");
  trace_.kernel = std::move(kernel);
  trace_.grid = grid;
  trace_.phases_ = phases;
  trace_.index_.assign(phases * static_cast<std::size_t>(grid.total()) + 1, 0);
}

std::uint16_t TraceBuilder::add_buffer(std::string name, std::uint64_t length, bool output) {
  if (trace_.buffers.size() >= std::numeric_limits<std::uint16_t>::max())
    throw Error(ErrorKind::InvalidArgument, "too many buffers");
  trace_.buffers.push_back({std::move(name), length, next_base_, output});
  next_base_ += (length + kBufferAlignment - 1) / kBufferAlignment * kBufferAlignment;
  return static_cast<std::uint16_t>(trace_.buffers.size() - 1);
}

void TraceBuilder::open(std::size_t phase, std::int64_t pid) {
  if (phase >= trace_.phases_ || pid < 0 || pid >= trace_.grid.total())
    throw Error(ErrorKind::InvalidArgument, "stream outside trace");
  const std::size_t slot = phase * static_cast<std::size_t>(trace_.grid.total()) + static_cast<std::size_t>(pid);
  // cursor_ counts streams already started; the open one is cursor_ - 1.
  if (slot + 1 <= cursor_) throw Error(ErrorKind::InvalidArgument, "streams must be opened in ascending order");
  const auto here = static_cast<std::uint64_t>(trace_.records_.size());
  for (std::size_t t = cursor_; t <= slot; ++t) trace_.index_[t] = here;
  cursor_ = slot + 1;
}

void TraceBuilder::emit(std::uint16_t buffer, std::uint64_t offset, std::uint64_t length, AccessMode mode) {
  if (cursor_ == 0) throw Error(ErrorKind::InvalidArgument, "no open stream");
  if (length == 0) return;
  if (buffer >= trace_.buffers.size()) throw Error(ErrorKind::InvalidArgument, "unknown buffer");
  if (length > std::numeric_limits<std::uint32_t>::max())
    throw Error(ErrorKind::InvalidArgument, "record longer than 4 GiB");
  trace_.records_.push_back({offset, static_cast<std::uint32_t>(length), buffer, mode});
}

void TraceBuilder::read(std::uint16_t buffer, std::uint64_t offset, std::uint64_t length) {
  emit(buffer, offset, length, AccessMode::Read);
}

void TraceBuilder::write(std::uint16_t buffer, std::uint64_t offset, std::uint64_t length) {
  emit(buffer, offset, length, AccessMode::Write);
}

AccessTrace TraceBuilder::finish() {
  const auto end = static_cast<std::uint64_t>(trace_.records_.size());
  for (std::size_t t = cursor_; t < trace_.index_.size(); ++t) trace_.index_[t] = end;
  cursor_ = trace_.index_.size();
  for (const auto& r : trace_.records_) {
    const auto& b = trace_.buffers[r.buffer];
    if (r.offset + r.length > b.length)
      throw Error(ErrorKind::InvariantViolation, "access outside buffer '" + b.name + "' at offset " +
                                                     std::to_string(r.offset));
  }
  return std::move(trace_);
}

// ---- coverage -------------------------------------------------------------

CoverageResult check_coverage(const AccessTrace& trace) {
  using Interval = std::pair<std::uint64_t, std::uint64_t>;
  const std::size_t nb = trace.buffers.size();
  std::vector<std::vector<Interval>> all(nb);
  for (std::size_t p = 0; p < trace.num_phases(); ++p) {
    std::vector<std::vector<Interval>> phase(nb);
    for (std::int64_t pid = 0; pid < trace.num_workgroups(); ++pid)
      for (const auto& r : trace.stream(p, pid))
        if (r.mode == AccessMode::Write) {
          if (!trace.buffers[r.buffer].output)
            return {false, "write to input buffer '" + trace.buffers[r.buffer].name + "'"};
          phase[r.buffer].push_back({r.offset, r.offset + r.length});
        }
    for (std::size_t b = 0; b < nb; ++b) {
      auto& v = phase[b];
      std::sort(v.begin(), v.end());
      for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i].first < v[i - 1].second)
          return {false, "overlapping writes to '" + trace.buffers[b].name + "' in phase " + std::to_string(p)};
      all[b].insert(all[b].end(), v.begin(), v.end());
    }
  }
  for (std::size_t b = 0; b < nb; ++b) {
    if (!trace.buffers[b].output) continue;
    const std::string& name = trace.buffers[b].name;
    std::vector<std::pair<std::uint64_t, int>> ev;
    for (auto [s, e] : all[b]) {
      ev.push_back({s, +1});
      ev.push_back({e, -1});
    }
    std::sort(ev.begin(), ev.end());
    int depth = 0, want = -1;
    std::uint64_t pos = 0;
    for (std::size_t i = 0; i < ev.size();) {
      const std::uint64_t at = ev[i].first;
      if (at > pos) {
        if (want < 0) want = depth;
        if (depth != want || depth == 0) return {false, "output '" + name + "' not covered uniformly"};
      }
      while (i < ev.size() && ev[i].first == at) depth += ev[i++].second;
      pos = at;
    }
    if (pos != trace.buffers[b].length || want <= 0)
      return {false, "output '" + name + "' not covered to its end"};
  }
  return {true, {}};
}

void dump_trace(const AccessTrace& trace, std::ostream& os) {
  for (std::size_t p = 0; p < trace.num_phases(); ++p) {
    os << "# phase " << p << '\n';
    for (std::int64_t pid = 0; pid < trace.num_workgroups(); ++pid)
      for (const auto& r : trace.stream(p, pid))
        os << pid << ',' << trace.buffers[r.buffer].name << ',' << r.offset << ',' << r.length << ','
           << (r.mode == AccessMode::Read ? "read" : "write") << '\n';
  }
}

}  // namespace swz
