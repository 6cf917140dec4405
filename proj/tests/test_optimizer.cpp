#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "swizzle/context_io.hpp"
#include "swizzle/error.hpp"
#include "swizzle/optimizer.hpp"

using namespace swz;
namespace fs = std::filesystem;

namespace {

// 5 x 2 tiles: the 10-block grid on which bitwise_lowbit sends pid 5 out of
// range, while gemm_contiguous pairs tiles that share a B panel.
KernelSpec ten_block_gemm() {
  KernelSpec s = default_spec(KernelKind::Gemm);
  s.problem = {320, 128, 64};
  s.block = {64, 64, 64};
  return s;
}

std::string fixture(const std::string& name) { return std::string(SWZ_SOURCE_DIR) + "/tests/fixtures/" + name; }

fs::path temp_file(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("swz_opt_" + name);
  fs::remove(p);
  return p;
}

struct MemorySink : HistorySink {
  std::vector<HistoryEntry> entries;
  void append(const HistoryEntry& e) override { entries.push_back(e); }
};

struct FailingSink : HistorySink {
  void append(const HistoryEntry&) override { throw Error(ErrorKind::Io, "disk full"); }
};

struct ThrowingProposer : Proposer {
  int calls = 0;
  std::string name() const override { return "throwing"; }
  Proposal propose(const ProposalContext&) override {
    ++calls;
    throw Error(ErrorKind::ProposerFailure, "nothing usable");
  }
};

void check_monotone(const OptimizationResult& r) {
  for (std::size_t i = 1; i < r.progression.size(); ++i)
    CHECK(r.progression[i].best_so_far >= r.progression[i - 1].best_so_far);
}

HistoryEntry with_rate(int it, double rate, EntryStatus st = EntryStatus::Ok) {
  HistoryEntry e;
  e.iteration = it;
  e.status = st;
  BottleneckReport r;
  r.kernel = "gemm";
  r.pattern = "p" + std::to_string(it);
  r.num_xcds = 1;
  r.l2_hit_rate = rate;
  if (st != EntryStatus::Invalid) e.report = r;
  return e;
}

struct Ctx {
  KernelSpec spec = ten_block_gemm();
  ArchSpec arch = arch_preset("mi300x-like");
  AccessTrace trace = generate_trace(spec);
  std::string summary = describe(spec);
  LocalitySummary loc = locality_summary(trace, 64, 128);
  std::vector<HistoryEntry> history;
  ProposalContext get() const { return {spec, trace.grid, arch, summary, loc, history}; }
};

}  // namespace

TEST_CASE("zero iterations return the baseline") {
  SearchProposer p;
  const auto r = optimize(ten_block_gemm(), arch_preset("mi300x-like"), p, 0);
  CHECK(r.history.size() == 1);
  CHECK(r.best.iteration == 0);
  CHECK(r.best.pattern->name == "identity");
  CHECK(r.iterations_run == 0);
}

TEST_CASE("replayed duplicate, non-bijective and good candidates") {
  ReplayProposer p(fixture("loop_replay.jsonl"));
  MemorySink sink;
  const auto r = optimize(ten_block_gemm(), arch_preset("mi300x-like"), p, 3, &sink);
  REQUIRE(r.history.size() == 4);
  CHECK(r.history[1].status == EntryStatus::Duplicate);
  CHECK(r.history[1].report == r.history[0].report);
  CHECK(r.history[2].status == EntryStatus::Invalid);
  CHECK_FALSE(r.history[2].has_report());
  REQUIRE(r.history[2].validation);
  CHECK(std::find(r.history[2].validation->out_of_range.begin(), r.history[2].validation->out_of_range.end(), 5) !=
        r.history[2].validation->out_of_range.end());
  CHECK(r.history[3].status == EntryStatus::Ok);
  CHECK(r.best.pattern->name == "gemm_contiguous");
  CHECK(r.best.report->l2_hit_rate > r.history[0].report->l2_hit_rate);
  CHECK(sink.entries.size() == 4);
  check_monotone(r);
}

TEST_CASE("replay running out ends the loop early") {
  ReplayProposer p(fixture("loop_replay.jsonl"));
  const auto r = optimize(ten_block_gemm(), arch_preset("mi300x-like"), p, 5);
  CHECK(r.exhausted);
  CHECK(r.iterations_run == 3);
  CHECK(r.history.size() == 4);
}

TEST_CASE("proposer failures are recorded and the loop continues") {
  ThrowingProposer p;
  const auto r = optimize(ten_block_gemm(), arch_preset("mi300x-like"), p, 3);
  CHECK(p.calls == 3);
  REQUIRE(r.history.size() == 4);
  for (int i = 1; i <= 3; ++i) {
    CHECK(r.history[static_cast<std::size_t>(i)].status == EntryStatus::ProposerError);
    CHECK(r.history[static_cast<std::size_t>(i)].error == "nothing usable");
  }
  CHECK(r.best.iteration == 0);
}

TEST_CASE("persistence failure aborts") {
  SearchProposer p;
  FailingSink sink;
  try {
    optimize(ten_block_gemm(), arch_preset("mi300x-like"), p, 2, &sink);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}

TEST_CASE("search on the default gemm improves on the baseline") {
  SearchProposer p;
  const auto r = optimize(default_spec(KernelKind::Gemm), arch_preset("mi300x-like"), p, 5);
  CHECK(r.iterations_run == 5);
  CHECK(r.best.report->l2_hit_rate > r.history[0].report->l2_hit_rate);
  check_monotone(r);
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i].status != EntryStatus::Duplicate);
}

TEST_CASE("search family order and exhaustion") {
  Ctx c;
  SearchProposer p;
  const auto fam = search_family(c.trace.grid, c.arch);
  REQUIRE(fam.size() >= 2);
  CHECK(fam[0].params.at("axis") == static_cast<std::int64_t>(construct::Axis::Linear));
  CHECK(fam[0].params.at("chunk") == c.trace.grid.total() / c.arch.num_xcds);

  CHECK(p.propose(c.get()).pattern.same_mapping_as(fam[0]));
  HistoryEntry e;
  e.iteration = 1;
  e.pattern = fam[0];
  c.history.push_back(e);
  CHECK(p.propose(c.get()).pattern.same_mapping_as(fam[1]));
  for (std::size_t i = 1; i < fam.size(); ++i) {
    e.pattern = fam[i];
    c.history.push_back(e);
  }
  try {
    p.propose(c.get());
    FAIL("expected exhaustion");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::Exhausted);
  }
}

TEST_CASE("search family members are distinct bijections") {
  const ArchSpec a = arch_preset("mi300x-like");
  for (const GridSpec g : {GridSpec::blocks(16, 16), GridSpec::blocks(19, 16), GridSpec::blocks(1, 304)}) {
    const auto fam = search_family(g, a);
    CHECK_FALSE(fam.empty());
    std::vector<std::vector<std::int64_t>> seen;
    for (const auto& p : fam) {
      const PatternMap m(p, g, a);
      CHECK(std::find(seen.begin(), seen.end(), m.forward()) == seen.end());
      seen.push_back(m.forward());
    }
  }
}

TEST_CASE("rank_history") {
  CHECK(rank_history({with_rate(0, 0.50), with_rate(1, 0.65)}).iteration == 1);
  auto invalid = with_rate(1, 0.9, EntryStatus::Invalid);
  CHECK(rank_history({with_rate(0, 0.4), invalid}).iteration == 0);
  CHECK(rank_history({with_rate(0, 0.3)}).iteration == 0);
  CHECK_THROWS_AS(rank_history({invalid}), Error);
}

TEST_CASE("history file and progression CSV") {
  const fs::path path = temp_file("history.jsonl");
  ReplayProposer p(fixture("loop_replay.jsonl"));
  JsonlHistorySink sink(path.string());
  const auto r = optimize(ten_block_gemm(), arch_preset("mi300x-like"), p, 3, &sink);
  std::ifstream in(path);
  std::string line;
  std::vector<HistoryEntry> back;
  while (std::getline(in, line)) back.push_back(history_entry_from_json(nlohmann::json::parse(line)));
  REQUIRE(back.size() == r.history.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].iteration == r.history[i].iteration);
    CHECK(back[i].status == r.history[i].status);
    CHECK(back[i].report == r.history[i].report);
  }
  const std::string csv = progression_csv(r);
  std::istringstream is(csv);
  std::getline(is, line);
  CHECK(line == "iteration,current_hit_rate,best_so_far");
  std::getline(is, line);
  CHECK(line.rfind("0,", 0) == 0);
  std::getline(is, line);
  std::getline(is, line);
  CHECK(line.rfind("2,,", 0) == 0);  // invalid entry has no current rate
}

TEST_CASE("replays are reproducible") {
  ReplayProposer a(fixture("loop_replay.jsonl")), b(fixture("loop_replay.jsonl"));
  const auto ra = optimize(ten_block_gemm(), arch_preset("mi300x-like"), a, 3);
  const auto rb = optimize(ten_block_gemm(), arch_preset("mi300x-like"), b, 3);
  CHECK(progression_csv(ra) == progression_csv(rb));
  for (std::size_t i = 0; i < ra.history.size(); ++i)
    CHECK(history_entry_to_json(ra.history[i]) == history_entry_to_json(rb.history[i]));
}

TEST_CASE("llm proposer parses a replayed answer") {
  Ctx c;
  const fs::path fx = temp_file("llm_ok.jsonl");
  std::ifstream ok(fixture("proposal_ok.txt"));
  const std::string answer((std::istreambuf_iterator<char>(ok)), std::istreambuf_iterator<char>());
  append_fixture(fx.string(), {prompt_digest(LlmProposer::prompt_for(c.get(), {})), "", answer});

  ClientConfig cfg;
  cfg.mode = ClientMode::Replay;
  cfg.fixture_path = fx.string();
  CompletionClient client(cfg);
  LlmProposer p(client);
  const Proposal prop = p.propose(c.get());
  CHECK(prop.pattern.same_mapping_as(builtin_pattern(BuiltinPattern::GemmContiguous, c.trace.grid, c.arch)));
  CHECK(prop.critique.find("iteration 2: Bit swapping") != std::string::npos);
}

TEST_CASE("llm proposer retries with the parse error appended") {
  Ctx c;
  const std::string bad = "FINAL_EXPRESSION:\n```\npid = (pid +\n```\n";
  std::string err;
  try {
    parse_proposal(bad);
  } catch (const Error& e) {
    err = e.what();
  }
  REQUIRE_FALSE(err.empty());
  const std::string good = "FINAL_EXPRESSION:\n```\npid = pid\n```\n";
  const fs::path fx = temp_file("llm_retry.jsonl");
  append_fixture(fx.string(), {prompt_digest(LlmProposer::prompt_for(c.get(), {})), "", bad});
  append_fixture(fx.string(), {prompt_digest(LlmProposer::prompt_for(c.get(), {err})), "", good});

  ClientConfig cfg;
  cfg.mode = ClientMode::Replay;
  cfg.fixture_path = fx.string();
  CompletionClient client(cfg);
  LlmProposer p(client, 2);
  CHECK(p.propose(c.get()).pattern.expression_text() == "pid = pid");
  CHECK(client.replay_position() == 2);
  CHECK(LlmProposer::prompt_for(c.get(), {err}).find(err) != std::string::npos);
}

TEST_CASE("llm proposer fails once the fixture runs out") {
  Ctx c;
  const fs::path fx = temp_file("llm_empty.jsonl");
  std::ofstream(fx).flush();
  ClientConfig cfg;
  cfg.mode = ClientMode::Replay;
  cfg.fixture_path = fx.string();
  CompletionClient client(cfg);
  LlmProposer p(client);
  try {
    p.propose(c.get());
    FAIL("expected a proposer failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ProposerFailure);
  }
}

TEST_CASE("llm proposer gives up after the parse retries") {
  Ctx c;
  const std::string bad = "no sections at all";
  const fs::path fx = temp_file("llm_bad.jsonl");
  std::vector<std::string> errs;
  for (int i = 0; i < 2; ++i) {
    append_fixture(fx.string(), {prompt_digest(LlmProposer::prompt_for(c.get(), errs)), "", bad});
    errs.push_back("no fenced code block after FINAL_EXPRESSION");
  }
  ClientConfig cfg;
  cfg.mode = ClientMode::Replay;
  cfg.fixture_path = fx.string();
  CompletionClient client(cfg);
  LlmProposer p(client, 1);
  try {
    p.propose(c.get());
    FAIL("expected a proposer failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ProposerFailure);
  }
  CHECK(client.replay_position() == 2);
}
