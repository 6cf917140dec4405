#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "swizzle/cache_sim.hpp"
#include "swizzle/history.hpp"
#include "swizzle/json_io.hpp"
#include "swizzle/llm_client.hpp"
#include "swizzle/traces.hpp"

namespace swz {

struct ProposalContext {
  const KernelSpec& spec;
  const GridSpec& grid;
  const ArchSpec& arch;
  const std::string& spec_summary;
  const LocalitySummary& locality;
  const std::vector<HistoryEntry>& history;
};

struct Proposal {
  SwizzlePattern pattern;
  std::string critique;
};

// Candidate generator. Throws Error(Exhausted) when it has nothing left to
// offer and Error(ProposerFailure) when one attempt produced nothing usable.
class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual std::string name() const = 0;
  virtual Proposal propose(const ProposalContext& ctx) = 0;
};

// Deterministic parametric search. Members in order: axis linear, row,
// column; chunk extent/X first, then descending powers of two; XCD stride 1
// then X. Members that are not bijective on the grid, or that map exactly
// like an earlier member, are dropped.
std::vector<SwizzlePattern> search_family(const GridSpec& grid, const ArchSpec& arch);

class SearchProposer : public Proposer {
 public:
  std::string name() const override { return "search"; }
  // First family member whose mapping differs from every pattern in history.
  Proposal propose(const ProposalContext& ctx) override;
};

// Replays serialized patterns from a JSON Lines file, one per proposal. Each
// line is {"name", "expression", optional "params", "fallback", "critique"}.
class ReplayProposer : public Proposer {
 public:
  explicit ReplayProposer(const std::string& path);
  explicit ReplayProposer(std::vector<Proposal> items);
  std::string name() const override { return "replay"; }
  Proposal propose(const ProposalContext& ctx) override;

 private:
  std::vector<Proposal> items_;
  std::size_t next_ = 0;
};

// Prompts the completion client and parses the structured answer. A parse
// failure is retried up to max_parse_retries times with the error appended
// to the prompt.
class LlmProposer : public Proposer {
 public:
  LlmProposer(CompletionClient& client, int max_parse_retries = 2);
  std::string name() const override { return "llm"; }
  Proposal propose(const ProposalContext& ctx) override;
  // Prompt for one attempt; `errors` are earlier parse failures in this call.
  static std::string prompt_for(const ProposalContext& ctx, const std::vector<std::string>& errors);

 private:
  CompletionClient& client_;
  int max_parse_retries_;
};

class HistorySink {
 public:
  virtual ~HistorySink() = default;
  // Must persist the entry before returning; throws Error(Io) otherwise.
  virtual void append(const HistoryEntry& entry) = 0;
};

// Append-only JSON Lines file, flushed per entry. The file is truncated on
// construction.
class JsonlHistorySink : public HistorySink {
 public:
  explicit JsonlHistorySink(std::string path);
  void append(const HistoryEntry& entry) override;

 private:
  std::string path_;
};

Json history_entry_to_json(const HistoryEntry& e);
HistoryEntry history_entry_from_json(const nlohmann::json& doc);

struct ProgressionPoint {
  int iteration = 0;
  std::optional<double> current_hit_rate;  // absent for entries without a report
  double best_so_far = 0.0;
};

struct OptimizationResult {
  HistoryEntry best;
  std::vector<HistoryEntry> history;  // baseline first
  std::vector<ProgressionPoint> progression;
  int iterations_run = 0;
  bool exhausted = false;  // proposer ran out before max_iters
};

inline constexpr int kDefaultMaxIters = 5;

// Iteration 0 simulates the identity baseline. Each proposal is validated,
// then simulated unless it maps exactly like an earlier candidate, in which
// case the earlier report is reused. Proposer failures are recorded and the
// loop continues; exhaustion ends it early; a sink failure aborts.
OptimizationResult optimize(const KernelSpec& spec, const ArchSpec& arch, Proposer& proposer,
                            int max_iters = kDefaultMaxIters, HistorySink* sink = nullptr,
                            const ExecParams& exec = {});

// Best entry with a report. Throws Error(InvalidArgument) when none has one.
const HistoryEntry& rank_history(const std::vector<HistoryEntry>& entries);

// "iteration,current_hit_rate,best_so_far" with an empty field for absent
// rates.
std::string progression_csv(const OptimizationResult& result);

}  // namespace swz
