#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "swizzle/patterns.hpp"

namespace swz {

enum class KernelKind {
  Gemm,
  FusedElementwise,
  Layernorm,
  Softmax,
  SpmvNaive,
  Transpose,
  BlackScholes,
  Fdtd2d,
  SmithWaterman,
  Stencil2d,
};

std::string_view kernel_name(KernelKind kind);
KernelKind kernel_from_name(std::string_view name);  // throws InvalidArgument
const std::vector<KernelKind>& all_kernels();

// Problem and block sizes per kind:
//   gemm                   problem {M, N, K}      block {BM, BN, BK}
//   transpose              problem {M, N}         block {BM, BN}
//   softmax, layernorm     problem {rows, cols}   block {col_chunk}
//   stencil2d, fdtd2d,
//   smith_waterman         problem {ny, nx}       block {by, bx}
//   spmv_naive             problem {rows}         block {rows_per_block}
//   black_scholes,
//   fused_elementwise      problem {n}            block {elements_per_block}
struct KernelSpec {
  KernelKind kind = KernelKind::Gemm;
  std::vector<std::int64_t> problem;
  std::vector<std::int64_t> block;
  std::int64_t dtype_bytes = 4;
  std::int64_t group_m = 8;           // gemm tile ordering; 1 is plain row-major
  std::int64_t steps = 2;             // fdtd2d time steps
  std::int64_t band_half_width = 16;  // spmv_naive matrix band

  bool operator==(const KernelSpec&) const = default;
};

// Throws Error(InvalidArgument) for unsupported kind/dims combinations.
void validate(const KernelSpec& spec);

KernelSpec default_spec(KernelKind kind);
// Default spec with the leading problem dimensions set to `size` (square
// problems for the 2-D kinds, element or row count for the 1-D kinds).
KernelSpec spec_with_size(KernelKind kind, std::int64_t size);
std::string describe(const KernelSpec& spec);

GridSpec total_blocks(const KernelSpec& spec);

// The built-in pattern written for each kind; kinds without one get
// gemm_contiguous.
BuiltinPattern intended_pattern(KernelKind kind);

// Tile coordinates computed by logical workgroup `pid`. Identity row-major
// for every kind except gemm, whose kernel walks tiles in groups of group_m
// rows.
std::pair<std::int64_t, std::int64_t> logical_tile(const KernelSpec& spec, std::int64_t pid);

enum class AccessMode : std::uint8_t { Read, Write };

struct AccessRecord {
  std::uint64_t offset = 0;
  std::uint32_t length = 0;
  std::uint16_t buffer = 0;
  AccessMode mode = AccessMode::Read;

  bool operator==(const AccessRecord&) const = default;
};

struct TraceBuffer {
  std::string name;
  std::uint64_t length = 0;
  std::uint64_t base = 0;  // absolute address, 4 KiB aligned
  bool output = false;

  bool operator==(const TraceBuffer&) const = default;
};

inline constexpr std::uint64_t kBufferAlignment = 4096;

// Per-phase, per-logical-workgroup record streams in one flat array. Phases
// are separated by wave barriers; a workgroup with an empty stream in a phase
// does not take part in it.
class AccessTrace {
 public:
  std::string kernel;
  GridSpec grid;
  std::vector<TraceBuffer> buffers;

  std::size_t num_phases() const { return phases_; }
  std::int64_t num_workgroups() const { return grid.total(); }
  std::span<const AccessRecord> stream(std::size_t phase, std::int64_t pid) const;
  const std::vector<AccessRecord>& records() const { return records_; }
  // Logical pids with a non-empty stream in `phase`, ascending.
  std::vector<std::int64_t> participants(std::size_t phase) const;

  std::uint64_t footprint_bytes() const;
  bool operator==(const AccessTrace&) const = default;

 private:
  friend class TraceBuilder;
  std::size_t phases_ = 0;
  std::vector<AccessRecord> records_;
  std::vector<std::uint64_t> index_;  // phases_ * T + 1 entries
};

// Streams must be opened in (phase, pid) ascending order.
class TraceBuilder {
 public:
  TraceBuilder(std::string kernel, GridSpec grid, std::size_t phases);

  std::uint16_t add_buffer(std::string name, std::uint64_t length, bool output);
  void open(std::size_t phase, std::int64_t pid);
  void read(std::uint16_t buffer, std::uint64_t offset, std::uint64_t length);
  void write(std::uint16_t buffer, std::uint64_t offset, std::uint64_t length);
  // Checks every record against its buffer bounds.
  AccessTrace finish();

 private:
  void emit(std::uint16_t buffer, std::uint64_t offset, std::uint64_t length, AccessMode mode);
  AccessTrace trace_;
  std::size_t cursor_ = 0;
  std::uint64_t next_base_ = 0;
};

AccessTrace generate_trace(const KernelSpec& spec);

struct CoverageResult {
  bool ok = false;
  std::string problem;  // empty when ok
};

// Within each phase writes are pairwise disjoint, and across the trace every
// byte of every output buffer is written the same nonzero number of times.
CoverageResult check_coverage(const AccessTrace& trace);

// Debug dump: "pid,buffer,offset,len,mode" lines, with "# phase N" headers.
void dump_trace(const AccessTrace& trace, std::ostream& os);

// ---- locality summary -------------------------------------------------------

enum class ReuseClass { Contiguous, Strided, Irregular };
std::string_view reuse_name(ReuseClass c);

struct SharingGroup {
  std::uint16_t buffer = 0;
  std::vector<std::int64_t> pids;  // ascending logical pids
  std::uint64_t shared_bytes = 0;  // bytes touched by exactly this set of pids
  ReuseClass reuse = ReuseClass::Irregular;
  std::int64_t stride = 0;  // pid stride for Contiguous (1) and Strided groups
  bool cross_phase = false;  // group members touch the bytes in different phases
};

struct LocalitySummary {
  std::string kernel;
  std::vector<std::string> buffer_names;
  std::vector<SharingGroup> groups;  // descending shared_bytes, then buffer, then pids
};

// Byte ranges are widened to `granule` boundaries first; pass the cache line
// size to see sharing of lines rather than of bytes.
LocalitySummary locality_summary(const AccessTrace& trace, std::uint64_t threshold_bytes = 64,
                                 std::uint64_t granule = 1);
// Short text form for prompts: groups with the same shape are folded into
// one line, at most `max_lines` lines.
std::string render_locality(const LocalitySummary& summary, std::size_t max_lines = 12);

}  // namespace swz
