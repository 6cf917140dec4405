// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "reference_sim.hpp"
#include "swizzle/context_io.hpp"
#include "swizzle/error.hpp"
#include "swizzle/json_io.hpp"
#include "swizzle/optimizer.hpp"

using namespace swz;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ArchSpec mi300x() { return arch_preset("mi300x-like"); }

bool is_pow2(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f", v * 100);
  return buf;
}

std::string fixture(const std::string& name) { return std::string(SWZ_SOURCE_DIR) + "/tests/fixtures/" + name; }

// ---- 1 ---------------------------------------------------------------------

Outcome bijectivity_suite() {
  Outcome o;
  const ArchSpec a = mi300x();
  std::vector<GridSpec> grids;
  for (std::int64_t m = 1; m <= 20; ++m)
    for (std::int64_t n = 1; n <= 12; ++n) grids.push_back(GridSpec::blocks(m, n));
  for (std::int64_t t : {7, 10, 13, 64, 100, 127, 128, 255, 256, 304, 1000, 1024}) grids.push_back(GridSpec::blocks(t));

  int checked = 0, rejected = 0;
  for (const auto& g : grids) {
    for (auto which : all_builtins()) {
      const std::string where = std::string(builtin_name(which)) + " on " + std::to_string(g.num_blocks_m) + "x" +
                                std::to_string(g.num_blocks_n);
      if (which == BuiltinPattern::BitwiseLowbit && !is_pow2(g.total())) {
        int refusals = 0;
        for (int k = 0; k < 2; ++k) {
          try {
            builtin_pattern(which, g, a);
          } catch (const Error& e) {
            refusals += e.kind() == ErrorKind::GridRejected;
          }
        }
        if (refusals != 2) o.fail(where + " was not rejected");
        ++rejected;
        continue;
      }
      const ValidationResult v = check_bijectivity(builtin_pattern(which, g, a), g, a);
      if (!v.bijective || !v.coverage_ok) o.fail(where + " is not a bijection");
      ++checked;
    }
  }
  if (o.pass)
    o.detail = std::to_string(grids.size()) + " grids, " + std::to_string(checked) + " bijective, " +
               std::to_string(rejected) + " non-power-of-two rejections";
  return o;
}

// ---- 2 ---------------------------------------------------------------------

// Closed-form XCD swizzle for grids divisible by the XCD count.
std::int64_t expert_formula(std::int64_t pid, std::int64_t num_blocks, std::int64_t num_xcds) {
  const std::int64_t blocks_per_xcd = num_blocks / num_xcds;
  const std::int64_t xcd = pid % num_xcds;
  const std::int64_t local = pid / num_xcds;
  return xcd * blocks_per_xcd + local;
}

Outcome expert_equivalence() {
  Outcome o;
  std::int64_t grids = 0, pids = 0;
  for (std::uint32_t x : {2u, 4u, 8u}) {
    ArchSpec a = mi300x();
    a.num_xcds = x;
    for (std::int64_t t = x; t <= 4096; t += x) {
      const GridSpec g = GridSpec::blocks(t);
      const PatternMap m(builtin_pattern(BuiltinPattern::GemmContiguous, g, a), g, a);
      for (std::int64_t pid = 0; pid < t; ++pid)
        if (m.logical_of(pid) != expert_formula(pid, t, x)) {
          o.fail("mismatch at pid " + std::to_string(pid) + " of " + std::to_string(t) + ", X=" + std::to_string(x));
          return o;
        }
      ++grids;
      pids += t;
    }
  }
  o.detail = std::to_string(grids) + " divisible grids (X = 2, 4, 8), " + std::to_string(pids) + " pids, exact";
  return o;
}

// ---- 3 ---------------------------------------------------------------------

std::set<std::uint32_t> xcds_of(const PatternMap& m, const std::vector<std::int64_t>& logical) {
  std::set<std::uint32_t> s;
  for (auto l : logical) s.insert(m.xcd_of_logical(l));
  return s;
}

Outcome colocation_intents() {
  Outcome o;
  const ArchSpec a = mi300x();
  const std::int64_t X = a.num_xcds;
  int exact = 0, infeasible = 0;

  // Rows of chunks. Keeping every row on one XCD is impossible when a row has
  // two or more chunks and X does not divide the row count: round-robin fixes
  // how many tiles each XCD gets, and those counts are then not multiples of
  // the row length.
  auto rows_together = [&](BuiltinPattern which, const GridSpec& g, const std::string& tag) {
    const PatternMap m(builtin_pattern(which, g, a), g, a);
    for (std::int64_t r = 0; r < g.num_blocks_m; ++r) {
      std::vector<std::int64_t> row;
      for (std::int64_t c = 0; c < g.num_blocks_n; ++c) row.push_back(r * g.num_blocks_n + c);
      if (xcds_of(m, row).size() != 1) o.fail(tag + ": row " + std::to_string(r) + " spans several XCDs");
    }
    ++exact;
  };
  for (auto which : {BuiltinPattern::SoftmaxRowgroup, BuiltinPattern::LayernormRowgroup})
    for (std::int64_t rows = X; rows <= 72; ++rows)
      for (std::int64_t chunks = 1; chunks <= 8; ++chunks) {
        if (chunks > 1 && rows % X != 0) {
          ++infeasible;
          continue;
        }
        rows_together(which, GridSpec::blocks(rows, chunks),
                      std::string(builtin_name(which)) + " " + std::to_string(rows) + "x" + std::to_string(chunks));
      }
  for (KernelKind k : {KernelKind::Softmax, KernelKind::Layernorm}) {
    const GridSpec g = total_blocks(default_spec(k));
    rows_together(intended_pattern(k), g, std::string(kernel_name(k)) + " default");
  }

  // fdtd_stripe: whole tile columns, same feasibility argument transposed.
  for (std::int64_t rows = 1; rows <= 16; ++rows)
    for (std::int64_t cols = X; cols <= 48; ++cols) {
      if (rows > 1 && cols % X != 0) {
        ++infeasible;
        continue;
      }
      const GridSpec g = GridSpec::blocks(rows, cols);
      const PatternMap m(builtin_pattern(BuiltinPattern::FdtdStripe, g, a), g, a);
      for (std::int64_t c = 0; c < cols; ++c) {
        std::vector<std::int64_t> col;
        for (std::int64_t r = 0; r < rows; ++r) col.push_back(r * cols + c);
        if (xcds_of(m, col).size() != 1) o.fail("fdtd_stripe column " + std::to_string(c) + " spans several XCDs");
      }
      ++exact;
    }

  // gemm_contiguous: each run of T/X consecutive logical pids on one XCD.
  for (std::int64_t t = X; t <= 1024; t += X) {
    const GridSpec g = GridSpec::blocks(t);
    const PatternMap m(builtin_pattern(BuiltinPattern::GemmContiguous, g, a), g, a);
    for (std::int64_t start = 0; start < t; start += t / X) {
      std::vector<std::int64_t> run;
      for (std::int64_t l = start; l < start + t / X; ++l) run.push_back(l);
      if (xcds_of(m, run).size() != 1) o.fail("gemm_contiguous run at " + std::to_string(start) + " of " +
                                              std::to_string(t) + " spans several XCDs");
    }
    ++exact;
  }
  if (o.pass)
    o.detail = std::to_string(exact) + " grids exact (including the default softmax and layernorm sizes); " +
               std::to_string(infeasible) + " grids skipped where co-location is arithmetically impossible";
  return o;
}

// ---- 4 ---------------------------------------------------------------------

Outcome directional_locality() {
  Outcome o;
  struct Gate {
    KernelKind kind;
    double min_delta;  // in rate units
    bool no_effect;
  };
  const Gate gates[] = {{KernelKind::Gemm, 0.05, false},         {KernelKind::Transpose, 0.10, false},
                        {KernelKind::Stencil2d, 0.10, false},    {KernelKind::Softmax, 0.10, false},
                        {KernelKind::BlackScholes, 0.0, true},   {KernelKind::FusedElementwise, 0.0, true}};
  const ArchSpec a = mi300x();
  std::ostringstream d;
  for (const auto& g : gates) {
    const AccessTrace t = generate_trace(default_spec(g.kind));
    const SwizzlePattern p = builtin_pattern(intended_pattern(g.kind), t.grid, a);
    const double delta = simulate_pair(t, a, {}, p).delta();
    d << kernel_name(g.kind) << ' ' << pct(delta) << "; ";
    const bool ok = g.no_effect ? std::fabs(delta) <= 0.02 : delta >= g.min_delta;
    if (!ok) o.fail(std::string(kernel_name(g.kind)) + " delta " + pct(delta) + " points misses its gate");
  }
  if (o.pass) o.detail = "deltas in points: " + d.str();
  return o;
}

// ---- 5 ---------------------------------------------------------------------

Outcome conservation() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::ostringstream d;
  KernelSpec gemm = spec_with_size(KernelKind::Gemm, 128);
  gemm.block = {32, 32, 32};
  KernelSpec tr = spec_with_size(KernelKind::Transpose, 256);
  tr.block = {32, 32};
  for (const KernelSpec& s : {gemm, tr}) {
    const AccessTrace t = generate_trace(s);
    ArchSpec a = mi300x();
    a.num_xcds = 1;
    const std::uint64_t lines = (t.footprint_bytes() + a.l2_line_bytes - 1) / a.l2_line_bytes + 64;
    a.l2_associativity = static_cast<std::uint32_t>(lines);  // one fully associative set
    a.l2_bytes_per_xcd = lines * a.l2_line_bytes;
    const SwizzlePattern pats[] = {builtin_pattern(BuiltinPattern::Identity, t.grid, a),
                                   builtin_pattern(BuiltinPattern::GemmContiguous, t.grid, a),
                                   ref::affine_bijection(rng, t.grid.total())};
    std::optional<std::uint64_t> misses;
    for (const auto& p : pats) {
      const BottleneckReport r = simulate(t, p, a);
      if (r.misses != r.unique_lines_touched) o.fail(t.kernel + "/" + p.name + ": misses != unique lines");
      if (misses && *misses != r.misses) o.fail(t.kernel + "/" + p.name + ": misses differ across patterns");
      misses = r.misses;
    }
    d << t.kernel << ' ' << *misses << " misses; ";
  }
  if (o.pass) o.detail = d.str() + "equal under identity, gemm_contiguous and a random bijection";
  return o;
}

// ---- 6 ---------------------------------------------------------------------

Outcome lru_correctness() {
  Outcome o;
  std::size_t total_accesses = 0;
  int seeds = 0;
  for (int seed = 0; seed < 120; ++seed) {
    std::mt19937_64 rng(50000 + seed);
    // Single cache against the list model.
    const std::uint32_t ways = 1 + static_cast<std::uint32_t>(rng() % 8);
    const std::uint64_t sets = 1 + rng() % 16;
    const bool hashed = rng() % 2 == 0;
    LruCache c(sets, ways, hashed);
    ref::ListLru r(sets, ways, hashed);
    const std::uint64_t universe = 1 + rng() % (sets * ways * 3);
    const std::size_t n = 1 + rng() % 10000;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t line = rng() % universe;
      if (c.access(line) != r.access(line)) {
        o.fail("cache disagrees with the list model, seed " + std::to_string(seed));
        return o;
      }
    }
    total_accesses += n;

    // Whole simulator against the brute-force dispatcher.
    ArchSpec a = arch_preset("toy-4xcd");
    a.num_xcds = 1 + static_cast<std::uint32_t>(rng() % 4);
    a.cus_per_xcd = 1 + static_cast<std::uint32_t>(rng() % 4);
    a.l2_associativity = ways;
    a.l2_bytes_per_xcd = std::uint64_t{a.l2_line_bytes} * ways * (1 + rng() % 8);
    const GridSpec g = GridSpec::blocks(1 + static_cast<std::int64_t>(rng() % 6), 1 + static_cast<std::int64_t>(rng() % 6));
    const AccessTrace t = ref::random_trace(rng, g, 1 + rng() % 3, 6, 8192);
    const SwizzlePattern p = ref::affine_bijection(rng, g.total());
    ExecParams e;
    e.interleave_granularity = 1 + static_cast<std::uint32_t>(rng() % 3);
    e.respect_wave_barriers = rng() % 2 == 0;
    e.hashed_set_index = rng() % 2 == 0;
    std::vector<ref::Event> got;
    const SimObserver obs = [&](const SimEvent& s) { got.push_back({s.xcd, s.line, s.hit}); };
    simulate(t, p, a, e, &obs);
    const auto want = ref::simulate(t, p, a, e);
    if (want.size() > 10000) continue;
    if (got != want) {
      o.fail("simulator disagrees with the reference model, seed " + std::to_string(seed));
      return o;
    }
    total_accesses += want.size();
    ++seeds;
  }
  if (seeds < 100) o.fail("only " + std::to_string(seeds) + " simulator seeds stayed under 10^4 accesses");
  if (o.pass)
    o.detail = "120 cache seeds and " + std::to_string(seeds) + " simulator seeds, " + std::to_string(total_accesses) +
               " accesses, identical hit/miss sequences";
  return o;
}

// ---- 7 ---------------------------------------------------------------------

KernelSpec ten_block_gemm() {
  KernelSpec s = default_spec(KernelKind::Gemm);
  s.problem = {320, 128, 64};
  s.block = {64, 64, 64};
  return s;
}

Outcome loop_semantics() {
  Outcome o;
  ReplayProposer p(fixture("loop_replay.jsonl"));
  const auto r = optimize(ten_block_gemm(), mi300x(), p, 3);
  if (r.history.size() != 4) o.fail("history has " + std::to_string(r.history.size()) + " entries");
  else {
    if (r.history[1].status != EntryStatus::Duplicate) o.fail("identity repeat not recorded as duplicate");
    if (r.history[2].status != EntryStatus::Invalid || r.history[2].has_report())
      o.fail("non-bijective entry is not invalid or carries a report");
  }
  if (!r.best.pattern || r.best.pattern->name != "gemm_contiguous") o.fail("best is not gemm_contiguous");
  for (std::size_t i = 1; i < r.progression.size(); ++i)
    if (r.progression[i].best_so_far < r.progression[i - 1].best_so_far) o.fail("best-so-far decreased");
  if (o.pass)
    o.detail = "best gemm_contiguous at " + pct(r.best.report->l2_hit_rate) + "% vs baseline " +
               pct(r.history[0].report->l2_hit_rate) + "%, 4 entries, monotone best-so-far";
  return o;
}

// ---- 8 ---------------------------------------------------------------------

Outcome size_ablation() {
  Outcome o;
  const ArchSpec a = mi300x();
  std::vector<double> deltas;
  std::ostringstream d;
  for (std::int64_t n : {512, 1024, 2048, 4096}) {
    const AccessTrace t = generate_trace(spec_with_size(KernelKind::Stencil2d, n));
    const double delta = simulate_pair(t, a, {}, builtin_pattern(BuiltinPattern::StencilGroup, t.grid, a)).delta();
    if (!deltas.empty() && delta < deltas.back() - 0.01)
      o.fail("delta drops from " + pct(deltas.back()) + " to " + pct(delta) + " at " + std::to_string(n));
    deltas.push_back(delta);
    d << n << ": " << pct(delta) << "; ";
  }
  if (o.pass) o.detail = "stencil2d deltas in points " + d.str();
  return o;
}

// ---- 9 ---------------------------------------------------------------------

SwizzleExpr random_tree(std::mt19937_64& rng, int depth) {
  const int choice = depth <= 0 ? static_cast<int>(rng() % 2) : static_cast<int>(rng() % 13);
  if (choice == 0) return SwizzleExpr::literal(static_cast<std::int64_t>(rng() % 100000));
  if (choice == 1) return SwizzleExpr::ident(static_cast<Ident>(rng() % kNumIdents));
  static constexpr BinOp ops[] = {BinOp::Add, BinOp::Sub, BinOp::Mul,    BinOp::FloorDiv, BinOp::Mod, BinOp::Shl,
                                  BinOp::Shr, BinOp::BitAnd, BinOp::BitOr, BinOp::Min,   BinOp::Max};
  return SwizzleExpr::binary(ops[rng() % std::size(ops)], random_tree(rng, depth - 1), random_tree(rng, depth - 1));
}

BottleneckReport random_report(std::mt19937_64& rng) {
  BottleneckReport r;
  r.kernel = "k" + std::to_string(rng() % 10);
  r.pattern = "p" + std::to_string(rng() % 1000);
  r.num_xcds = 1 + static_cast<std::uint32_t>(rng() % 8);
  for (std::uint32_t x = 0; x < r.num_xcds; ++x) {
    XcdStats s;
    s.accesses = rng() % 1000000;
    s.hits = s.accesses ? rng() % (s.accesses + 1) : 0;
    s.misses = s.accesses - s.hits;
    s.hit_rate = s.accesses ? static_cast<double>(s.hits) / static_cast<double>(s.accesses) : 0.0;
    r.accesses += s.accesses;
    r.hits += s.hits;
    r.misses += s.misses;
    r.per_xcd.push_back(s);
  }
  r.l2_hit_rate = r.accesses ? static_cast<double>(r.hits) / static_cast<double>(r.accesses) : 0.0;
  r.unique_lines_touched = rng() % 100000;
  return r;
}

Outcome round_trips() {
  Outcome o;
  std::mt19937_64 rng(99);
  for (int i = 0; i < 2000; ++i) {
    const SwizzleExpr e = random_tree(rng, 1 + static_cast<int>(rng() % 6));
    if (!(parse_expr(format_expr(e)) == e)) o.fail("DSL round-trip broke on " + format_expr(e));
  }
  for (int i = 0; i < 500; ++i) {
    const BottleneckReport r = random_report(rng);
    if (!(parse_profiler_log(serialize_report(r)) == r)) o.fail("report round-trip broke");
  }

  // Prompt determinism from independently rebuilt inputs.
  auto prompt = [] {
    const KernelSpec s = ten_block_gemm();
    ReplayProposer p(fixture("loop_replay.jsonl"));
    const auto r = optimize(s, mi300x(), p, 3);
    const AccessTrace t = generate_trace(s);
    return build_prompt(describe(s), locality_summary(t, 64, 128), r.history, mi300x()).render();
  };
  const std::string p1 = prompt(), p2 = prompt();
  if (p1 != p2) o.fail("prompt text differs between identical runs");
  if (o.pass) o.detail = "2000 expressions, 500 reports, prompt of " + std::to_string(p1.size()) + " bytes identical";
  return o;
}

// ---- 10 --------------------------------------------------------------------

struct CountingTransport : Transport {
  int calls = 0;
  HttpResult post(const std::string&, const std::string&, const std::map<std::string, std::string>&,
                  double) override {
    ++calls;
    return {0, "", false, "network use is not allowed here"};
  }
};

// Answers every prompt with the next canned proposal.
struct CannedTransport : Transport {
  std::vector<std::string> answers;
  std::size_t next = 0;
  HttpResult post(const std::string&, const std::string&, const std::map<std::string, std::string>&,
                  double) override {
    nlohmann::json j;
    j["choices"] = {{{"message", {{"role", "assistant"}, {"content", answers[next++ % answers.size()]}}}}};
    return {200, j.dump(), false, ""};
  }
};

Outcome replay_offline(Clock::time_point suite_start) {
  Outcome o;
  const fs::path fx = fs::temp_directory_path() / "swz_acceptance_llm.jsonl";
  fs::remove(fx);
  const char* answers[] = {
      "FINAL_EXPRESSION:\n```\npid = pid\n```\n",
      "FINAL_EXPRESSION:\n```\npid = ((pid >> 1) & 5) | ((pid & 5) << 1)\n```\n",
      "FINAL_EXPRESSION:\n```\npid = (pid % num_xcds) * (num_blocks // num_xcds) + "
      "min(pid % num_xcds, num_blocks % num_xcds) + pid // num_xcds\n```\n",
  };

  ClientConfig rec;
  rec.endpoint = "http://recorder.invalid/v1/chat/completions";
  rec.credential = "unused";
  rec.model = "canned";
  rec.mode = ClientMode::Record;
  rec.fixture_path = fx.string();
  auto canned = std::make_shared<CannedTransport>();
  canned->answers.assign(std::begin(answers), std::end(answers));
  CompletionClient recorder(rec, canned, [](double) {});
  LlmProposer rp(recorder);
  const auto recorded = optimize(ten_block_gemm(), mi300x(), rp, 3);

  ClientConfig rep;
  rep.mode = ClientMode::Replay;
  rep.fixture_path = fx.string();
  auto counter = std::make_shared<CountingTransport>();
  CompletionClient replayer(rep, counter);
  LlmProposer pp(replayer);
  const auto replayed = optimize(ten_block_gemm(), mi300x(), pp, 3);

  if (counter->calls != 0) o.fail("replay mode made " + std::to_string(counter->calls) + " network calls");
  if (progression_csv(recorded) != progression_csv(replayed)) o.fail("replayed run differs from the recorded one");
  if (replayed.best.pattern->expression_text() != recorded.best.pattern->expression_text())
    o.fail("replayed best differs");
  const double elapsed = seconds_since(suite_start);
  if (elapsed > 600) o.fail("suite took " + std::to_string(elapsed) + " s");
  if (o.pass) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "replayed LLM loop made 0 network calls and matched the recording; suite ran %.1f s",
                  elapsed);
    o.detail = buf;
  }
  return o;
}

}  // namespace

int main() {
  const auto start = Clock::now();
  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
    double budget_seconds;
  };
  const std::vector<Criterion> criteria = {
      {1, "bijectivity suite", bijectivity_suite, 60},
      {2, "expert formula equivalence", expert_equivalence, 0},
      {3, "co-location intents", colocation_intents, 0},
      {4, "directional locality", directional_locality, 300},
      {5, "conservation oracle", conservation, 0},
      {6, "LRU correctness", lru_correctness, 0},
      {7, "loop semantics", loop_semantics, 0},
      {8, "size-ablation direction", size_ablation, 0},
      {9, "round-trips", round_trips, 0},
      {10, "runtime and offline replay", [start] { return replay_offline(start); }, 0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const double secs = seconds_since(t0);
    if (c.budget_seconds > 0 && secs > c.budget_seconds && o.pass)
      o.fail("took " + std::to_string(secs) + " s, budget " + std::to_string(c.budget_seconds) + " s");
    char head[96];
    std::snprintf(head, sizeof head, "[%s] %2d %-28s (%6.2f s) ", o.pass ? "PASS" : "FAIL", c.id, c.title, secs);
    std::cout << head << o.detail << std::endl;
    failed += !o.pass;
  }
  std::cout << (10 - failed) << "/10 criteria passed" << std::endl;
  return failed ? 1 : 0;
}
