#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "swizzle/arch.hpp"
#include "swizzle/patterns.hpp"
#include "swizzle/traces.hpp"

namespace swz {

struct ExecParams {
  std::uint32_t interleave_granularity = 1;  // line touches per slot per turn
  bool respect_wave_barriers = true;
  bool hashed_set_index = true;
};

struct XcdStats {
  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  double hit_rate = 0.0;

  bool operator==(const XcdStats&) const = default;
};

struct BottleneckReport {
  std::string kernel;
  std::string pattern;
  std::uint32_t num_xcds = 0;
  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  double l2_hit_rate = 0.0;
  std::vector<XcdStats> per_xcd;
  std::uint64_t unique_lines_touched = 0;

  bool operator==(const BottleneckReport&) const = default;
};

// Set of a line address. The hashed form XOR-folds upper address bits into
// the index, as GPU L2s do, so power-of-two strides do not pile onto a few
// sets. The fold does not depend on the set count, which keeps doubling the
// set count an inclusion-preserving refinement.
std::uint64_t l2_set_index(std::uint64_t line, std::uint64_t sets, bool hashed);

// One set-associative cache with strict LRU replacement per set.
class LruCache {
 public:
  LruCache(std::uint64_t sets, std::uint32_t ways, bool hashed_index = true);

  // True on hit. A miss allocates the line, evicting the least recently used
  // way of its set (empty ways first).
  bool access(std::uint64_t line);
  void clear();
  std::uint64_t sets() const { return sets_; }
  std::uint32_t ways() const { return ways_; }

 private:
  std::uint64_t sets_;
  std::uint32_t ways_;
  bool hashed_;
  std::uint64_t clock_ = 0;
  std::vector<std::uint64_t> tags_;
  std::vector<std::uint64_t> stamps_;
};

struct SimEvent {
  std::uint32_t xcd;
  std::uint64_t line;  // absolute line address
  bool hit;
};
using SimObserver = std::function<void(const SimEvent&)>;

// Launch pid i runs logical workgroup remap(i) on XCD i mod X. Each XCD keeps
// up to cus * slots workgroups in flight, interleaving them round-robin and
// refilling finished slots in launch order. Phases (wave barriers) drain
// every XCD before the next starts. Throws Error(NotBijective) for invalid
// patterns and Error(TraceMismatch) when the map and trace grids disagree.
BottleneckReport simulate(const AccessTrace& trace, const SwizzlePattern& pattern, const ArchSpec& arch,
                          const ExecParams& exec = {}, const SimObserver* observer = nullptr);
BottleneckReport simulate(const AccessTrace& trace, const PatternMap& map, const std::string& pattern_name,
                          const ArchSpec& arch, const ExecParams& exec = {}, const SimObserver* observer = nullptr);

struct PairReport {
  BottleneckReport baseline;  // identity
  BottleneckReport swizzled;
  double delta() const { return swizzled.l2_hit_rate - baseline.l2_hit_rate; }
};

PairReport simulate_pair(const AccessTrace& trace, const ArchSpec& arch, const ExecParams& exec,
                         const SwizzlePattern& pattern);

// Strict ordering: higher hit rate, then fewer unique lines, then name.
bool ranks_before(const BottleneckReport& a, const BottleneckReport& b);

// Best first. Throws Error(MixedKernels) when kernels or XCD counts differ.
std::vector<BottleneckReport> compare_reports(std::vector<BottleneckReport> reports);

// JSON with the report's field names as keys.
std::string serialize_report(const BottleneckReport& report);
std::string ranking_document(const std::vector<BottleneckReport>& ranked);

}  // namespace swz
