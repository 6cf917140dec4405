#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "swizzle/arch.hpp"
#include "swizzle/cache_sim.hpp"
#include "swizzle/history.hpp"
#include "swizzle/traces.hpp"

namespace swz {

// Used when the caller supplies no goal.
extern const std::string_view kDefaultGoal;

struct PromptContext {
  std::string code_summary;
  std::string bottleneck;
  std::string memory_analysis;
  std::string history_block;
  std::string arch_block;
  std::string scheduling_block;
  std::string goal_block;

  // The seven blocks in fixed order, separated by blank lines, followed by
  // the response format instructions.
  std::string render() const;
};

// History entries are listed in ascending iteration order; iteration 0 (the
// baseline) supplies the bottleneck of the original code.
PromptContext build_prompt(const std::string& spec_summary, const LocalitySummary& locality,
                           const std::vector<HistoryEntry>& history, const ArchSpec& arch,
                           std::string_view goal = kDefaultGoal);

// Compact digest used in prompts: overall and per-XCD hit rates.
std::string report_digest(const BottleneckReport& report);

struct ProposalRecord {
  std::string reasoning;
  std::map<int, std::string> critiques;  // iteration -> critique
  std::string new_approach;
  std::string improvement_rationale;
  std::string final_expression;  // pattern text as found in the fenced block
};

// Sections are introduced by the header lines REASONING, CRITIQUES,
// NEW_APPROACH, IMPROVEMENT_RATIONALE and FINAL_EXPRESSION (optionally
// prefixed with '#' and followed by ':'). The final expression is the first
// fenced code block after FINAL_EXPRESSION. Throws
// Error(MissingExpression) without one; DSL errors propagate unchanged.
ProposalRecord parse_proposal(std::string_view text);

// Reads a report in the simulator's JSON schema. Throws Error(Schema) for
// structural problems and Error(CorruptReport) for inconsistent counters.
BottleneckReport parse_profiler_log(std::string_view document);

}  // namespace swz
