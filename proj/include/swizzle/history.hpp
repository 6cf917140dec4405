#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "swizzle/cache_sim.hpp"
#include "swizzle/patterns.hpp"

namespace swz {

enum class EntryStatus {
  Ok,             // validated and simulated
  Invalid,        // failed bijectivity or coverage; no report
  Duplicate,      // same mapping as an earlier entry; report reused
  ProposerError,  // the proposer produced nothing usable
};

std::string_view status_name(EntryStatus s);

// One iteration of the loop. Iteration 0 is the identity baseline.
struct HistoryEntry {
  int iteration = 0;
  EntryStatus status = EntryStatus::Ok;
  std::optional<SwizzlePattern> pattern;
  std::string diff_summary;
  std::optional<ValidationResult> validation;
  std::optional<BottleneckReport> report;
  std::string critique;
  std::string error;

  bool has_report() const { return report.has_value(); }
};

}  // namespace swz
