#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "swizzle/error.hpp"
#include "swizzle/traces.hpp"

using namespace swz;

namespace {

using ByteSet = std::set<std::pair<std::uint64_t, std::uint64_t>>;

// Sorted, merged byte intervals a workgroup touches in one buffer.
std::vector<std::pair<std::uint64_t, std::uint64_t>> touched(const AccessTrace& t, std::int64_t pid,
                                                             const std::string& buffer,
                                                             std::optional<AccessMode> mode = std::nullopt) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> v;
  for (std::size_t p = 0; p < t.num_phases(); ++p)
    for (const auto& r : t.stream(p, pid))
      if (t.buffers[r.buffer].name == buffer && (!mode || r.mode == *mode)) v.push_back({r.offset, r.offset + r.length});
  std::sort(v.begin(), v.end());
  std::vector<std::pair<std::uint64_t, std::uint64_t>> m;
  for (auto iv : v) {
    if (!m.empty() && iv.first <= m.back().second)
      m.back().second = std::max(m.back().second, iv.second);
    else
      m.push_back(iv);
  }
  return m;
}

std::uint64_t intersection_bytes(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& a,
                                 const std::vector<std::pair<std::uint64_t, std::uint64_t>>& b) {
  std::uint64_t total = 0;
  for (auto x : a)
    for (auto y : b) {
      const auto lo = std::max(x.first, y.first), hi = std::min(x.second, y.second);
      if (hi > lo) total += hi - lo;
    }
  return total;
}

std::int64_t pid_of_tile(const KernelSpec& s, std::int64_t tm, std::int64_t tn) {
  for (std::int64_t pid = 0; pid < total_blocks(s).total(); ++pid)
    if (logical_tile(s, pid) == std::make_pair(tm, tn)) return pid;
  return -1;
}

std::vector<KernelSpec> small_specs() {
  std::vector<KernelSpec> v;
  for (auto k : all_kernels()) {
    for (std::int64_t size : {256, 300}) {
      KernelSpec s = spec_with_size(k, size);
      switch (k) {
        case KernelKind::Gemm: s.block = {64, 32, 64}; break;
        case KernelKind::Softmax:
        case KernelKind::Layernorm: s.block = {64}; break;
        case KernelKind::SpmvNaive: s.block = {16}; break;
        case KernelKind::BlackScholes:
        case KernelKind::FusedElementwise: s.block = {64}; break;
        case KernelKind::SmithWaterman: s.block = {32, 48}; break;
        default: s.block = {32, 32}; break;
      }
      v.push_back(s);
    }
  }
  return v;
}

}  // namespace

TEST_CASE("kernel names") {
  for (auto k : all_kernels()) CHECK(kernel_from_name(kernel_name(k)) == k);
  CHECK(all_kernels().size() == 10);
  CHECK_THROWS_AS(kernel_from_name("attention"), Error);
}

TEST_CASE("total_blocks uses ceiling division") {
  auto st = default_spec(KernelKind::Stencil2d);
  auto g = total_blocks(st);
  CHECK(g.num_blocks_m == 32);
  CHECK(g.num_blocks_n == 32);

  auto ln = default_spec(KernelKind::Layernorm);
  g = total_blocks(ln);
  CHECK(g.num_blocks_m == 512);
  CHECK(g.num_blocks_n == 8);

  KernelSpec gm = default_spec(KernelKind::Gemm);
  gm.problem = {100, 128, 64};
  CHECK(total_blocks(gm).num_blocks_m == 2);
}

TEST_CASE("spec validation") {
  KernelSpec s = default_spec(KernelKind::Gemm);
  s.problem = {64, 64};
  CHECK_THROWS_AS(validate(s), Error);
  s = default_spec(KernelKind::Transpose);
  s.block = {8192, 64};
  CHECK_THROWS_AS(validate(s), Error);
  s = default_spec(KernelKind::Softmax);
  s.problem = {0, 16};
  CHECK_THROWS_AS(generate_trace(s), Error);
  s = default_spec(KernelKind::Stencil2d);
  s.dtype_bytes = 3;
  CHECK_THROWS_AS(validate(s), Error);
}

TEST_CASE("transpose tile (0,1) reads its tile and writes the mirrored one") {
  KernelSpec s = default_spec(KernelKind::Transpose);
  s.problem = {128, 128};
  s.dtype_bytes = 4;
  const auto t = generate_trace(s);
  const std::int64_t pid = 1;  // row-major (0, 1)
  std::vector<std::pair<std::uint64_t, std::uint64_t>> want_in, want_out;
  for (std::uint64_t r = 0; r < 64; ++r) want_in.push_back({(r * 128 + 64) * 4, (r * 128 + 128) * 4});
  for (std::uint64_t r = 64; r < 128; ++r) want_out.push_back({(r * 128) * 4, (r * 128 + 64) * 4});
  CHECK(touched(t, pid, "in", AccessMode::Read) == want_in);
  CHECK(touched(t, pid, "out", AccessMode::Write) == want_out);
}

TEST_CASE("transpose of (M,N) mirrors (N,M) with buffers exchanged") {
  KernelSpec a = default_spec(KernelKind::Transpose);
  a.problem = {192, 320};
  KernelSpec b = a;
  b.problem = {320, 192};
  const auto ta = generate_trace(a), tb = generate_trace(b);
  const auto ga = total_blocks(a), gb = total_blocks(b);
  for (std::int64_t pid = 0; pid < ga.total(); ++pid) {
    const std::int64_t tm = pid / ga.num_blocks_n, tn = pid % ga.num_blocks_n;
    const std::int64_t mirror = tn * gb.num_blocks_n + tm;
    CHECK(touched(ta, pid, "in", AccessMode::Read).size() == touched(tb, mirror, "out", AccessMode::Write).size());
    CHECK(intersection_bytes(touched(ta, pid, "in"), touched(tb, mirror, "out")) == 64 * 64);
  }
}

TEST_CASE("gemm tiles in one row share all of their A bytes") {
  KernelSpec s = default_spec(KernelKind::Gemm);
  s.problem = {128, 128, 128};
  const auto t = generate_trace(s);
  const auto p00 = pid_of_tile(s, 0, 0), p01 = pid_of_tile(s, 0, 1), p10 = pid_of_tile(s, 1, 0);
  CHECK(intersection_bytes(touched(t, p00, "A"), touched(t, p01, "A")) == 32 * 1024);
  CHECK(intersection_bytes(touched(t, p00, "A"), touched(t, p10, "A")) == 0);
  CHECK(intersection_bytes(touched(t, p00, "B"), touched(t, p10, "B")) == 32 * 1024);
}

TEST_CASE("gemm grouped tile order") {
  KernelSpec s = default_spec(KernelKind::Gemm);
  s.problem = {64 * 10, 64 * 3, 64};
  // Groups of 8 rows walk down the rows first; the last group has 2 rows.
  CHECK(logical_tile(s, 0) == std::make_pair<std::int64_t, std::int64_t>(0, 0));
  CHECK(logical_tile(s, 1) == std::make_pair<std::int64_t, std::int64_t>(1, 0));
  CHECK(logical_tile(s, 8) == std::make_pair<std::int64_t, std::int64_t>(0, 1));
  CHECK(logical_tile(s, 24) == std::make_pair<std::int64_t, std::int64_t>(8, 0));
  CHECK(logical_tile(s, 25) == std::make_pair<std::int64_t, std::int64_t>(9, 0));
  CHECK(logical_tile(s, 26) == std::make_pair<std::int64_t, std::int64_t>(8, 1));
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  for (std::int64_t pid = 0; pid < 30; ++pid) seen.insert(logical_tile(s, pid));
  CHECK(seen.size() == 30);
  s.group_m = 1;
  CHECK(logical_tile(s, 4) == std::make_pair<std::int64_t, std::int64_t>(1, 1));
}

TEST_CASE("elementwise kernels never share bytes") {
  for (auto k : {KernelKind::BlackScholes, KernelKind::FusedElementwise}) {
    KernelSpec s = spec_with_size(k, 5000);
    s.block = {256};
    const auto t = generate_trace(s);
    for (std::int64_t a = 0; a < t.num_workgroups(); ++a)
      for (std::int64_t b = a + 1; b < t.num_workgroups(); ++b)
        for (const auto& buf : t.buffers) REQUIRE(intersection_bytes(touched(t, a, buf.name), touched(t, b, buf.name)) == 0);
    CHECK(locality_summary(t, 1).groups.empty());
  }
}

TEST_CASE("coverage holds for every kernel on a size sweep") {
  for (const auto& s : small_specs()) {
    INFO(describe(s));
    const auto t = generate_trace(s);
    const auto c = check_coverage(t);
    CHECK_MESSAGE(c.ok, c.problem);
    for (const auto& b : t.buffers) CHECK(b.base % kBufferAlignment == 0);
  }
}

TEST_CASE("coverage holds at default sizes and traces are deterministic") {
  for (auto k : all_kernels()) {
    INFO(kernel_name(k));
    const auto t = generate_trace(default_spec(k));
    CHECK(check_coverage(t).ok);
    CHECK(t == generate_trace(default_spec(k)));
  }
}

TEST_CASE("coverage checker rejects overlaps and holes") {
  TraceBuilder b("toy", GridSpec::blocks(2), 1);
  const auto out = b.add_buffer("out", 100, true);
  b.open(0, 0);
  b.write(out, 0, 60);
  b.open(0, 1);
  b.write(out, 50, 50);
  CHECK_FALSE(check_coverage(b.finish()).ok);

  TraceBuilder h("toy", GridSpec::blocks(2), 1);
  const auto o2 = h.add_buffer("out", 100, true);
  h.open(0, 0);
  h.write(o2, 0, 40);
  h.open(0, 1);
  h.write(o2, 50, 50);
  CHECK_FALSE(check_coverage(h.finish()).ok);

  TraceBuilder oob("toy", GridSpec::blocks(1), 1);
  const auto o3 = oob.add_buffer("out", 100, true);
  oob.open(0, 0);
  oob.write(o3, 90, 20);
  CHECK_THROWS_AS(oob.finish(), Error);
}

TEST_CASE("wave structure") {
  KernelSpec sw = default_spec(KernelKind::SmithWaterman);
  sw.problem = {512, 384};
  const auto t = generate_trace(sw);
  CHECK(t.num_phases() == 4 + 3 - 1);
  CHECK(t.participants(0) == std::vector<std::int64_t>{0});
  CHECK(t.participants(1) == std::vector<std::int64_t>{1, 3});
  CHECK(t.participants(5) == std::vector<std::int64_t>{11});

  KernelSpec sm = default_spec(KernelKind::Softmax);
  sm.problem = {8, 4096};
  CHECK(generate_trace(sm).num_phases() == 2);

  KernelSpec fd = default_spec(KernelKind::Fdtd2d);
  fd.problem = {128, 128};
  fd.steps = 3;
  CHECK(generate_trace(fd).num_phases() == 6);
}

TEST_CASE("spmv band follows from the dimensions") {
  KernelSpec s = default_spec(KernelKind::SpmvNaive);
  s.problem = {100};
  s.block = {10};
  const auto t = generate_trace(s);
  // Row r has min(r, hw) + min(n - 1 - r, hw) + 1 nonzeros.
  std::uint64_t nnz = 0;
  for (int r = 0; r < 100; ++r) nnz += std::min(r, 16) + std::min(99 - r, 16) + 1;
  CHECK(t.buffers[1].length == nnz * 4);
  // Block 0 gathers x[0 .. 9 + 16].
  CHECK(touched(t, 0, "x") == std::vector<std::pair<std::uint64_t, std::uint64_t>>{{0, 26 * 4}});
}

TEST_CASE("locality summary: gemm 2x2 tiles") {
  KernelSpec s = default_spec(KernelKind::Gemm);
  s.problem = {128, 128, 128};
  const auto t = generate_trace(s);
  const auto sum = locality_summary(t);
  std::set<std::pair<std::string, std::vector<std::int64_t>>> got;
  for (const auto& g : sum.groups) got.insert({sum.buffer_names[g.buffer], g.pids});
  std::set<std::pair<std::string, std::vector<std::int64_t>>> want;
  for (std::int64_t a = 0; a < 4; ++a)
    for (std::int64_t b = a + 1; b < 4; ++b) {
      const auto ta = logical_tile(s, a), tb = logical_tile(s, b);
      if (ta.first == tb.first) want.insert({"A", {a, b}});
      if (ta.second == tb.second) want.insert({"B", {a, b}});
    }
  CHECK(got == want);
  for (const auto& g : sum.groups) CHECK(g.shared_bytes == 32 * 1024);
  CHECK(render_locality(sum).find("2 groups of 2 workgroups share 32 KiB each") != std::string::npos);
}

TEST_CASE("locality summary: softmax chunks share their row across phases") {
  KernelSpec s = default_spec(KernelKind::Softmax);
  s.problem = {4, 2048};
  const auto t = generate_trace(s);
  const auto sum = locality_summary(t);
  REQUIRE(sum.groups.size() == 4);
  for (const auto& g : sum.groups) {
    CHECK(sum.buffer_names[g.buffer] == "x");
    CHECK(g.pids.size() == 2);
    CHECK(g.pids[1] == g.pids[0] + 1);
    CHECK(g.pids[0] % 2 == 0);
    CHECK(g.shared_bytes == intersection_bytes(touched(t, g.pids[0], "x"), touched(t, g.pids[1], "x")));
    CHECK(g.shared_bytes == 2048 * 4);
    CHECK(g.cross_phase);
    CHECK(g.reuse == ReuseClass::Contiguous);
  }
}

TEST_CASE("line granule exposes transpose half-line sharing") {
  KernelSpec s = default_spec(KernelKind::Transpose);
  s.problem = {256, 256};
  const auto t = generate_trace(s);
  CHECK(locality_summary(t, 1).groups.empty());
  const auto lines = locality_summary(t, 1, 128);
  CHECK_FALSE(lines.groups.empty());
  for (const auto& g : lines.groups) CHECK(g.pids.size() == 2);
}

TEST_CASE("dump format") {
  KernelSpec s = default_spec(KernelKind::BlackScholes);
  s.problem = {2048};
  std::ostringstream os;
  dump_trace(generate_trace(s), os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "# phase 0");
  std::getline(is, line);
  CHECK(line == "0,price,0,4096,read");
}
