#include "swizzle/optimizer.hpp"

#include <fstream>
#include <sstream>

#include "swizzle/error.hpp"

namespace swz {

namespace {

std::string diff_against(const HistoryEntry* best, const SwizzlePattern& p) {
  if (!best || !best->pattern) return "new pattern " + p.name + ": " + p.expression_text();
  return "replaces " + best->pattern->name + " (" + best->pattern->expression_text() + ") with " + p.name + " (" +
         p.expression_text() + ")";
}

const HistoryEntry* best_of(const std::vector<HistoryEntry>& entries) {
  const HistoryEntry* best = nullptr;
  for (const auto& e : entries)
    if (e.report && (!best || ranks_before(*e.report, *best->report))) best = &e;
  return best;
}

ValidationResult validation_from_json(const nlohmann::json& j) {
  ValidationResult v;
  v.bijective = j.at("bijective").get<bool>();
  v.coverage_ok = j.at("coverage_ok").get<bool>();
  v.total_blocks = j.at("total_blocks").get<std::int64_t>();
  v.out_of_range = j.at("out_of_range").get<std::vector<std::int64_t>>();
  for (const auto& c : j.at("collisions"))
    v.collisions.push_back({c.at("pid_a").get<std::int64_t>(), c.at("pid_b").get<std::int64_t>(),
                            c.at("image").get<std::int64_t>()});
  return v;
}

}  // namespace

JsonlHistorySink::JsonlHistorySink(std::string path) : path_(std::move(path)) {
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot create history file '" + path_ + "'");
}

void JsonlHistorySink::append(const HistoryEntry& entry) {
  std::ofstream out(path_, std::ios::app);
  out << history_entry_to_json(entry).dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "cannot append to history file '" + path_ + "'");
}

Json history_entry_to_json(const HistoryEntry& e) {
  Json j;
  j["iteration"] = e.iteration;
  j["status"] = status_name(e.status);
  j["pattern"] = e.pattern ? pattern_to_json(*e.pattern) : Json();
  j["diff_summary"] = e.diff_summary;
  j["validation"] = e.validation ? validation_to_json(*e.validation, SIZE_MAX) : Json();
  j["report"] = e.report ? report_to_json(*e.report) : Json();
  j["critique"] = e.critique;
  j["error"] = e.error;
  return j;
}

HistoryEntry history_entry_from_json(const nlohmann::json& j) {
  try {
    HistoryEntry e;
    e.iteration = j.at("iteration").get<int>();
    const std::string s = j.at("status").get<std::string>();
    bool known = false;
    for (auto st : {EntryStatus::Ok, EntryStatus::Invalid, EntryStatus::Duplicate, EntryStatus::ProposerError})
      if (status_name(st) == s) {
        e.status = st;
        known = true;
      }
    if (!known) throw Error(ErrorKind::Schema, "unknown history status '" + s + "'");
    if (!j.at("pattern").is_null()) e.pattern = pattern_from_json(j["pattern"]);
    e.diff_summary = j.at("diff_summary").get<std::string>();
    if (!j.at("validation").is_null()) e.validation = validation_from_json(j["validation"]);
    if (!j.at("report").is_null()) e.report = report_from_json(j["report"]);
    e.critique = j.at("critique").get<std::string>();
    e.error = j.at("error").get<std::string>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::Schema, std::string("malformed history entry: ") + ex.what());
  }
}

const HistoryEntry& rank_history(const std::vector<HistoryEntry>& entries) {
  const HistoryEntry* best = best_of(entries);
  if (!best) throw Error(ErrorKind::InvalidArgument, "no validated entry to rank");
  return *best;
}

OptimizationResult optimize(const KernelSpec& spec, const ArchSpec& arch, Proposer& proposer, int max_iters,
                            HistorySink* sink, const ExecParams& exec) {
  if (max_iters < 0) throw Error(ErrorKind::InvalidArgument, "max_iters must be >= 0");
  validate(arch);
  const AccessTrace trace = generate_trace(spec);
  const GridSpec& grid = trace.grid;
  const std::string summary = describe(spec);
  const LocalitySummary locality = locality_summary(trace, 64, arch.l2_line_bytes);

  OptimizationResult res;
  auto record = [&](HistoryEntry e) {
    res.history.push_back(std::move(e));
    if (sink) sink->append(res.history.back());
    const HistoryEntry& last = res.history.back();
    ProgressionPoint pt;
    pt.iteration = last.iteration;
    if (last.report) pt.current_hit_rate = last.report->l2_hit_rate;
    pt.best_so_far = rank_history(res.history).report->l2_hit_rate;
    res.progression.push_back(pt);
  };

  {
    HistoryEntry base;
    base.iteration = 0;
    base.pattern = builtin_pattern(BuiltinPattern::Identity, grid, arch);
    base.diff_summary = "baseline (identity mapping)";
    base.validation = check_bijectivity(*base.pattern, grid, arch);
    base.report = simulate(trace, *base.pattern, arch, exec);
    record(std::move(base));
  }

  for (int it = 1; it <= max_iters; ++it) {
    HistoryEntry e;
    e.iteration = it;
    Proposal prop;
    try {
      const ProposalContext ctx{spec, grid, arch, summary, locality, res.history};
      prop = proposer.propose(ctx);
    } catch (const Error& err) {
      if (err.kind() == ErrorKind::Exhausted) {
        res.exhausted = true;
        break;
      }
      e.status = EntryStatus::ProposerError;
      e.error = err.what();
      record(std::move(e));
      ++res.iterations_run;
      continue;
    } catch (const std::exception& err) {
      e.status = EntryStatus::ProposerError;
      e.error = err.what();
      record(std::move(e));
      ++res.iterations_run;
      continue;
    }
    e.pattern = prop.pattern;
    e.critique = prop.critique;
    e.diff_summary = diff_against(best_of(res.history), prop.pattern);

    const HistoryEntry* earlier = nullptr;
    for (const auto& h : res.history)
      if (h.report && h.pattern && h.pattern->same_mapping_as(prop.pattern)) {
        earlier = &h;
        break;
      }
    if (earlier) {
      e.status = EntryStatus::Duplicate;
      e.validation = earlier->validation;
      e.report = earlier->report;
    } else {
      try {
        e.validation = check_bijectivity(prop.pattern, grid, arch);
      } catch (const Error& err) {
        e.error = err.what();
      }
      if (e.validation && e.validation->bijective && e.validation->coverage_ok) {
        e.report = simulate(trace, prop.pattern, arch, exec);
      } else {
        e.status = EntryStatus::Invalid;
        if (e.error.empty()) e.error = "pattern is not a bijection on the grid";
      }
    }
    record(std::move(e));
    ++res.iterations_run;
  }

  res.best = rank_history(res.history);
  return res;
}

std::string progression_csv(const OptimizationResult& r) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,current_hit_rate,best_so_far\n";
  for (const auto& p : r.progression) {
    os << p.iteration << ',';
    if (p.current_hit_rate) os << *p.current_hit_rate;
    os << ',' << p.best_so_far << '\n';
  }
  return os.str();
}

}  // namespace swz
