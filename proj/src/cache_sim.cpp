#include "swizzle/cache_sim.hpp"

#include <algorithm>
#include <limits>

#include "swizzle/error.hpp"
#include "swizzle/simd/kernels.hpp"

namespace swz {

namespace {

constexpr std::uint64_t kEmpty = std::numeric_limits<std::uint64_t>::max();

// Walks the line touches of one workgroup across a range of phases.
class Cursor {
 public:
  Cursor() = default;
  Cursor(const AccessTrace& t, std::int64_t logical, std::size_t phase_begin, std::size_t phase_end,
         std::uint64_t line_bytes)
      : trace_(&t), logical_(logical), phase_(phase_begin), phase_end_(phase_end), line_bytes_(line_bytes) {
    load_phase();
    fetch();
  }

  bool live() const { return live_; }
  std::uint64_t line() const { return pending_; }

  void fetch() {
    while (true) {
      if (line_ <= last_) {
        pending_ = line_++;
        live_ = true;
        return;
      }
      if (rec_ != end_) {
        const std::uint64_t addr = trace_->buffers[rec_->buffer].base + rec_->offset;
        line_ = addr / line_bytes_;
        last_ = (addr + rec_->length - 1) / line_bytes_;
        ++rec_;
        continue;
      }
      if (++phase_ < phase_end_) {
        load_phase();
        continue;
      }
      live_ = false;
      return;
    }
  }

 private:
  void load_phase() {
    const auto s = trace_->stream(phase_, logical_);
    rec_ = s.data();
    end_ = s.data() + s.size();
  }

  const AccessTrace* trace_ = nullptr;
  std::int64_t logical_ = 0;
  std::size_t phase_ = 0, phase_end_ = 0;
  std::uint64_t line_bytes_ = 1;
  const AccessRecord* rec_ = nullptr;
  const AccessRecord* end_ = nullptr;
  std::uint64_t line_ = 1, last_ = 0, pending_ = 0;
  bool live_ = false;
};

bool has_work(const AccessTrace& t, std::int64_t logical, std::size_t pb, std::size_t pe) {
  for (std::size_t p = pb; p < pe; ++p)
    if (!t.stream(p, logical).empty()) return true;
  return false;
}

}  // namespace

std::uint64_t l2_set_index(std::uint64_t line, std::uint64_t sets, bool hashed) {
  if (hashed) line ^= (line >> 5) ^ (line >> 11) ^ (line >> 17);
  return line % sets;
}

LruCache::LruCache(std::uint64_t sets, std::uint32_t ways, bool hashed_index)
    : sets_(sets), ways_(ways), hashed_(hashed_index), tags_(sets * ways, kEmpty), stamps_(sets * ways, 0) {
  if (sets == 0 || ways == 0) throw Error(ErrorKind::InvalidArgument, "cache needs at least one set and way");
}

bool LruCache::access(std::uint64_t line) {
  static const simd::KernelTable& k = simd::active_kernels();
  const std::uint64_t set = l2_set_index(line, sets_, hashed_);
  std::uint64_t* tags = tags_.data() + set * ways_;
  std::uint64_t* stamps = stamps_.data() + set * ways_;
  ++clock_;
  const int way = k.find_tag(tags, ways_, line);
  if (way >= 0) {
    stamps[way] = clock_;
    return true;
  }
  // Empty ways carry stamp 0, so they are chosen before any resident line.
  const std::uint32_t victim = k.argmin_stamp(stamps, ways_);
  tags[victim] = line;
  stamps[victim] = clock_;
  return false;
}

void LruCache::clear() {
  std::fill(tags_.begin(), tags_.end(), kEmpty);
  std::fill(stamps_.begin(), stamps_.end(), 0);
  clock_ = 0;
}

BottleneckReport simulate(const AccessTrace& trace, const SwizzlePattern& pattern, const ArchSpec& arch,
                          const ExecParams& exec, const SimObserver* observer) {
  validate(arch);
  const PatternMap map(pattern, trace.grid, arch);
  return simulate(trace, map, pattern.name, arch, exec, observer);
}

BottleneckReport simulate(const AccessTrace& trace, const PatternMap& map, const std::string& pattern_name,
                          const ArchSpec& arch, const ExecParams& exec, const SimObserver* observer) {
  validate(arch);
  if (exec.interleave_granularity < 1) throw Error(ErrorKind::InvalidArgument, "interleave granularity must be >= 1");
  if (map.total() != trace.num_workgroups())
    throw Error(ErrorKind::TraceMismatch, "pattern covers " + std::to_string(map.total()) + " workgroups, trace has " +
                                              std::to_string(trace.num_workgroups()));

  const std::uint32_t X = arch.num_xcds;
  const std::uint64_t L = arch.l2_line_bytes;
  std::vector<LruCache> caches;
  caches.reserve(X);
  for (std::uint32_t x = 0; x < X; ++x) caches.emplace_back(arch.l2_sets(), arch.l2_associativity, exec.hashed_set_index);

  std::uint64_t span = 0;
  for (const auto& b : trace.buffers) span = std::max(span, b.base + b.length);
  std::vector<bool> seen(span / L + 1, false);
  std::uint64_t unique = 0;

  BottleneckReport rep;
  rep.kernel = trace.kernel;
  rep.pattern = pattern_name;
  rep.num_xcds = X;
  rep.per_xcd.assign(X, {});

  // Each wave is a range of phases executed without a barrier.
  std::vector<std::pair<std::size_t, std::size_t>> waves;
  if (exec.respect_wave_barriers)
    for (std::size_t p = 0; p < trace.num_phases(); ++p) waves.push_back({p, p + 1});
  else
    waves.push_back({0, trace.num_phases()});

  const std::size_t S = concurrent_slots_per_xcd(arch);
  const std::int64_t T = trace.num_workgroups();
  std::vector<Cursor> slots(S);
  std::vector<std::int64_t> queue;
  for (const auto& [pb, pe] : waves) {
    for (std::uint32_t x = 0; x < X; ++x) {
      queue.clear();
      for (std::int64_t i = x; i < T; i += X)
        if (has_work(trace, map.logical_of(i), pb, pe)) queue.push_back(map.logical_of(i));
      std::size_t next = 0, active = 0;
      auto refill = [&](std::size_t s) {
        if (next < queue.size()) {
          slots[s] = Cursor(trace, queue[next++], pb, pe, L);
          return true;
        }
        slots[s] = Cursor();
        return false;
      };
      for (std::size_t s = 0; s < S; ++s) active += refill(s);

      LruCache& cache = caches[x];
      XcdStats& st = rep.per_xcd[x];
      while (active > 0) {
        for (std::size_t s = 0; s < S; ++s) {
          Cursor& c = slots[s];
          for (std::uint32_t g = 0; g < exec.interleave_granularity && c.live(); ++g) {
            const std::uint64_t line = c.line();
            const bool hit = cache.access(line);
            ++st.accesses;
            hit ? ++st.hits : ++st.misses;
            if (!seen[line]) {
              seen[line] = true;
              ++unique;
            }
            if (observer) (*observer)({x, line, hit});
            c.fetch();
          }
          // A finished workgroup frees its slot for the next launch pid; the
          // newcomer starts on the following turn.
          if (!c.live()) refill(s);
        }
        active = 0;
        for (const auto& c : slots) active += c.live();
      }
    }
  }

  for (auto& st : rep.per_xcd) {
    st.hit_rate = st.accesses ? static_cast<double>(st.hits) / static_cast<double>(st.accesses) : 0.0;
    rep.accesses += st.accesses;
    rep.hits += st.hits;
    rep.misses += st.misses;
  }
  rep.l2_hit_rate = rep.accesses ? static_cast<double>(rep.hits) / static_cast<double>(rep.accesses) : 0.0;
  rep.unique_lines_touched = unique;
  return rep;
}

PairReport simulate_pair(const AccessTrace& trace, const ArchSpec& arch, const ExecParams& exec,
                         const SwizzlePattern& pattern) {
  PairReport out;
  out.baseline = simulate(trace, builtin_pattern(BuiltinPattern::Identity, trace.grid, arch), arch, exec);
  out.swizzled = simulate(trace, pattern, arch, exec);
  return out;
}

bool ranks_before(const BottleneckReport& a, const BottleneckReport& b) {
  if (a.l2_hit_rate != b.l2_hit_rate) return a.l2_hit_rate > b.l2_hit_rate;
  if (a.unique_lines_touched != b.unique_lines_touched) return a.unique_lines_touched < b.unique_lines_touched;
  return a.pattern < b.pattern;
}

std::vector<BottleneckReport> compare_reports(std::vector<BottleneckReport> reports) {
  for (const auto& r : reports)
    if (r.kernel != reports.front().kernel || r.num_xcds != reports.front().num_xcds)
      throw Error(ErrorKind::MixedKernels, "cannot rank reports of '" + reports.front().kernel + "' and '" +
                                               r.kernel + "' together");
  std::stable_sort(reports.begin(), reports.end(), ranks_before);
  return reports;
}

}  // namespace swz
