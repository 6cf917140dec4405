#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "swizzle/error.hpp"
#include "swizzle/traces.hpp"

namespace swz {

namespace {

struct Span {
  std::int64_t pid;
  std::uint32_t phase;
  std::uint64_t start, end;
};

struct Accum {
  std::uint64_t bytes = 0;
  bool cross_phase = false;
};

std::string human_bytes(std::uint64_t b) {
  std::ostringstream os;
  if (b >= (1u << 20) && b % (1u << 20) == 0)
    os << b / (1u << 20) << " MiB";
  else if (b >= 1024 && b % 1024 == 0)
    os << b / 1024 << " KiB";
  else
    os << b << " B";
  return os.str();
}

}  // namespace

std::string_view reuse_name(ReuseClass c) {
  switch (c) {
    case ReuseClass::Contiguous: return "contiguous";
    case ReuseClass::Strided: return "strided";
    case ReuseClass::Irregular: return "irregular";
  }
  return "?";
}

LocalitySummary locality_summary(const AccessTrace& trace, std::uint64_t threshold_bytes, std::uint64_t granule) {
  if (granule == 0) throw Error(ErrorKind::InvalidArgument, "granule must be positive");
  LocalitySummary out;
  out.kernel = trace.kernel;
  for (const auto& b : trace.buffers) out.buffer_names.push_back(b.name);

  const std::size_t nb = trace.buffers.size();
  std::vector<std::vector<Span>> spans(nb);
  for (std::size_t p = 0; p < trace.num_phases(); ++p)
    for (std::int64_t pid = 0; pid < trace.num_workgroups(); ++pid)
      for (const auto& r : trace.stream(p, pid)) {
        const std::uint64_t s = r.offset / granule * granule;
        const std::uint64_t e = (r.offset + r.length + granule - 1) / granule * granule;
        spans[r.buffer].push_back({pid, static_cast<std::uint32_t>(p), s, e});
      }

  std::map<std::pair<std::uint16_t, std::vector<std::int64_t>>, Accum> groups;
  for (std::size_t b = 0; b < nb; ++b) {
    auto& v = spans[b];
    // Merge per (pid, phase) so every key is active at most once at a time.
    std::sort(v.begin(), v.end(), [](const Span& x, const Span& y) {
      return std::tie(x.pid, x.phase, x.start) < std::tie(y.pid, y.phase, y.start);
    });
    std::vector<Span> merged;
    for (const auto& s : v) {
      if (!merged.empty() && merged.back().pid == s.pid && merged.back().phase == s.phase &&
          s.start <= merged.back().end)
        merged.back().end = std::max(merged.back().end, s.end);
      else
        merged.push_back(s);
    }
    v.clear();
    v.shrink_to_fit();

    struct Event {
      std::uint64_t at;
      bool open;
      std::int64_t pid;
      std::uint32_t phase;
    };
    std::vector<Event> ev;
    ev.reserve(merged.size() * 2);
    for (const auto& s : merged) {
      ev.push_back({s.start, true, s.pid, s.phase});
      ev.push_back({s.end, false, s.pid, s.phase});
    }
    std::sort(ev.begin(), ev.end(), [](const Event& x, const Event& y) { return x.at < y.at; });

    std::set<std::pair<std::int64_t, std::uint32_t>> active;
    std::vector<std::int64_t> key;
    std::uint64_t pos = 0;
    for (std::size_t i = 0; i < ev.size();) {
      const std::uint64_t at = ev[i].at;
      if (at > pos && active.size() >= 2) {
        key.clear();
        std::set<std::uint32_t> phases;
        for (const auto& [pid, ph] : active) {
          if (key.empty() || key.back() != pid) key.push_back(pid);
          phases.insert(ph);
        }
        if (key.size() >= 2) {
          auto& acc = groups[{static_cast<std::uint16_t>(b), key}];
          acc.bytes += at - pos;
          acc.cross_phase = acc.cross_phase || phases.size() > 1;
        }
      }
      for (; i < ev.size() && ev[i].at == at; ++i) {
        if (ev[i].open)
          active.insert({ev[i].pid, ev[i].phase});
        else
          active.erase({ev[i].pid, ev[i].phase});
      }
      pos = at;
    }
  }

  for (auto& [k, acc] : groups) {
    if (acc.bytes < threshold_bytes) continue;
    SharingGroup g;
    g.buffer = k.first;
    g.pids = k.second;
    g.shared_bytes = acc.bytes;
    g.cross_phase = acc.cross_phase;
    const std::int64_t d = g.pids[1] - g.pids[0];
    bool uniform = true;
    for (std::size_t i = 2; i < g.pids.size(); ++i) uniform = uniform && g.pids[i] - g.pids[i - 1] == d;
    g.reuse = !uniform ? ReuseClass::Irregular : d == 1 ? ReuseClass::Contiguous : ReuseClass::Strided;
    g.stride = uniform ? d : 0;
    out.groups.push_back(std::move(g));
  }
  std::stable_sort(out.groups.begin(), out.groups.end(), [](const SharingGroup& a, const SharingGroup& b) {
    if (a.shared_bytes != b.shared_bytes) return a.shared_bytes > b.shared_bytes;
    if (a.buffer != b.buffer) return a.buffer < b.buffer;
    return a.pids < b.pids;
  });
  return out;
}

std::string render_locality(const LocalitySummary& s, std::size_t max_lines) {
  struct Fold {
    std::size_t count = 0;
    std::uint64_t total = 0;
    const SharingGroup* example = nullptr;
  };
  using Key = std::tuple<std::uint16_t, std::size_t, std::uint64_t, ReuseClass, std::int64_t, bool>;
  std::map<Key, Fold> folds;
  std::vector<Key> order;
  for (const auto& g : s.groups) {
    const Key k{g.buffer, g.pids.size(), g.shared_bytes, g.reuse, g.stride, g.cross_phase};
    auto [it, fresh] = folds.try_emplace(k);
    if (fresh) {
      it->second.example = &g;
      order.push_back(k);
    }
    ++it->second.count;
    it->second.total += g.shared_bytes;
  }
  std::stable_sort(order.begin(), order.end(), [&](const Key& a, const Key& b) { return folds[a].total > folds[b].total; });

  std::ostringstream os;
  os << "Memory locality of " << s.kernel << ":\n";
  if (order.empty()) {
    os << "- no workgroups share data; every block touches disjoint memory.\n";
    return os.str();
  }
  std::size_t lines = 0;
  for (const auto& k : order) {
    if (lines++ == max_lines) {
      os << "- (" << order.size() - max_lines << " more sharing shapes omitted)\n";
      break;
    }
    const Fold& f = folds[k];
    const SharingGroup& g = *f.example;
    os << "- " << s.buffer_names[g.buffer] << ": " << f.count << (f.count == 1 ? " group" : " groups") << " of "
       << g.pids.size() << " workgroups share " << human_bytes(g.shared_bytes) << (f.count == 1 ? "" : " each");
    if (g.reuse == ReuseClass::Contiguous)
      os << ", consecutive logical pids";
    else if (g.reuse == ReuseClass::Strided)
      os << ", logical pids strided by " << g.stride;
    else
      os << ", irregular pid sets";
    if (g.cross_phase) os << ", reused across barrier phases";
    os << "; e.g. pids";
    for (std::size_t i = 0; i < std::min<std::size_t>(g.pids.size(), 8); ++i) os << (i ? "," : " ") << g.pids[i];
    if (g.pids.size() > 8) os << ",...";
    os << '\n';
  }
  return os.str();
}

}  // namespace swz
