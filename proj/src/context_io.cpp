#include "swizzle/context_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "swizzle/error.hpp"

namespace swz {

const std::string_view kDefaultGoal =
    "remap program ids so that workgroups which read the same data are dispatched to the same XCD and share "
    "its L2 cache, raising the L2 hit rate while keeping the mapping a bijection over all program ids";

std::string_view status_name(EntryStatus s) {
  switch (s) {
    case EntryStatus::Ok: return "ok";
    case EntryStatus::Invalid: return "invalid";
    case EntryStatus::Duplicate: return "duplicate";
    case EntryStatus::ProposerError: return "proposer_error";
  }
  return "unknown";
}

namespace {

std::string percent(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", r * 100.0);
  return buf;
}

std::string megabytes(std::uint64_t bytes) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", static_cast<double>(bytes) / (1024.0 * 1024.0));
  std::string s = buf;
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string history_stanza(const HistoryEntry& e) {
  std::ostringstream os;
  os << "{iteration: " << e.iteration << ", status: " << status_name(e.status) << ", applied diff: ";
  os << (e.diff_summary.empty() ? "none" : e.diff_summary);
  if (e.report)
    os << ", bottleneck report: " << report_digest(*e.report);
  else if (e.validation && !e.validation->bijective)
    os << ", bottleneck report: none (not a bijection, " << e.validation->out_of_range.size() << " out of range, "
       << e.validation->collisions.size() << " collisions)";
  else if (!e.error.empty())
    os << ", bottleneck report: none (" << e.error << ")";
  os << "}";
  return os.str();
}

}  // namespace

std::string report_digest(const BottleneckReport& r) {
  std::string s = "L2 hit rate " + percent(r.l2_hit_rate) + " (per XCD:";
  for (std::size_t i = 0; i < r.per_xcd.size(); ++i) s += (i ? ", " : " ") + percent(r.per_xcd[i].hit_rate);
  return s + ")";
}

std::string PromptContext::render() const {
  std::string out;
  out += "The original code is " + code_summary + " with bottleneck " + bottleneck + "\n\n";
  out += "The memory analysis is:\n" + memory_analysis + "\n\n";
  out += "History of previous optimization attempts (do not repeat an implementation):\n" + history_block + "\n\n";
  out += arch_block + "\n\n";
  out += scheduling_block + "\n\n";
  out += goal_block + "\n\n";
  out +=
      "Answer with these sections, each introduced by its header on its own line:\n"
      "REASONING: why the current mapping misses in L2.\n"
      "CRITIQUES: a JSON object mapping each previous iteration number to why it was suboptimal.\n"
      "NEW_APPROACH: the new swizzling pattern in words.\n"
      "IMPROVEMENT_RATIONALE: why it should raise the L2 hit rate.\n"
      "FINAL_EXPRESSION: one fenced code block holding either `pid = <expr>` or `pid_m = <expr>; pid_n = <expr>`.\n"
      "Expressions use integers, + - * // % << >> & |, min(a, b), max(a, b) and the identifiers pid, pid_m, "
      "pid_n, num_xcds, num_blocks, num_blocks_m, num_blocks_n.\n";
  return out;
}

PromptContext build_prompt(const std::string& spec_summary, const LocalitySummary& locality,
                           const std::vector<HistoryEntry>& history, const ArchSpec& arch, std::string_view goal) {
  PromptContext c;
  c.code_summary = spec_summary;
  c.bottleneck = "not yet measured";
  for (const auto& e : history)
    if (e.iteration == 0 && e.report) c.bottleneck = report_digest(*e.report);
  c.memory_analysis = render_locality(locality);

  std::vector<const HistoryEntry*> attempts;
  for (const auto& e : history)
    if (e.iteration > 0) attempts.push_back(&e);
  std::stable_sort(attempts.begin(), attempts.end(),
                   [](const HistoryEntry* a, const HistoryEntry* b) { return a->iteration < b->iteration; });
  if (attempts.empty()) {
    c.history_block = "No prior attempts.";
  } else {
    for (std::size_t i = 0; i < attempts.size(); ++i) c.history_block += (i ? "\n" : "") + history_stanza(*attempts[i]);
  }

  c.arch_block = "On the " + arch.name + ", there are " + std::to_string(arch.num_xcds) + " XCDs, each has " +
                 std::to_string(arch.cus_per_xcd) + " CUs and a " + megabytes(arch.l2_bytes_per_xcd) +
                 " MB L2 cache.";
  c.scheduling_block = "Blocks are scheduled Round-robin to XCDs: launch pid i runs on XCD i % " +
                       std::to_string(arch.num_xcds) + ".";
  c.goal_block = "Your swizzling goal is to " + std::string(goal);
  if (c.goal_block.back() != '.') c.goal_block += '.';
  return c;
}

namespace {

enum class Section { None, Reasoning, Critiques, NewApproach, Rationale, Final };

struct Header {
  Section section;
  std::string rest;  // text after the colon on the header line
};

std::optional<Header> header_of(std::string_view line) {
  std::string_view s = trim(line);
  while (!s.empty() && (s.front() == '#' || s.front() == '*')) s.remove_prefix(1);
  s = trim(s);
  static const std::pair<std::string_view, Section> kHeaders[] = {
      {"REASONING", Section::Reasoning},
      {"CRITIQUES", Section::Critiques},
      {"NEW_APPROACH", Section::NewApproach},
      {"IMPROVEMENT_RATIONALE", Section::Rationale},
      {"FINAL_EXPRESSION", Section::Final},
  };
  for (const auto& [name, sec] : kHeaders) {
    if (s.substr(0, name.size()) != name) continue;
    std::string_view rest = s.substr(name.size());
    while (!rest.empty() && rest.front() == '*') rest.remove_prefix(1);
    if (rest.empty()) return Header{sec, ""};
    if (rest.front() != ':') continue;
    return Header{sec, std::string(trim(rest.substr(1)))};
  }
  return std::nullopt;
}

void parse_critiques(const std::string& text, std::map<int, std::string>& out) {
  const std::string_view body = trim(text);
  if (body.empty()) return;
  if (body.front() == '{') {
    try {
      const auto j = nlohmann::json::parse(body);
      for (const auto& [k, v] : j.items()) {
        std::string key = k;
        const auto digit = key.find_first_of("0123456789");
        if (digit == std::string::npos) continue;
        out[std::stoi(key.substr(digit))] = v.is_string() ? v.get<std::string>() : v.dump();
      }
      return;
    } catch (const nlohmann::json::exception&) {
      // fall through to the line form
    }
  }
  // Line form: "iteration 2: text", "- 2: text".
  std::istringstream is{std::string(body)};
  std::string line;
  while (std::getline(is, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = line.substr(0, colon);
    const auto digit = key.find_first_of("0123456789");
    if (digit == std::string::npos) continue;
    out[std::stoi(key.substr(digit))] = std::string(trim(std::string_view(line).substr(colon + 1)));
  }
}

}  // namespace

ProposalRecord parse_proposal(std::string_view text) {
  ProposalRecord rec;
  std::map<Section, std::string> bodies;
  Section cur = Section::None;
  bool in_fence = false, have_expr = false, capture = false;
  std::string fenced;

  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string_view t = trim(line);
    if (t.substr(0, 3) == "```") {
      if (!in_fence) {
        in_fence = true;
        capture = cur == Section::Final && !have_expr;
        fenced.clear();
      } else {
        in_fence = false;
        if (capture) {
          rec.final_expression = std::string(trim(fenced));
          have_expr = true;
          capture = false;
        }
      }
      if (cur != Section::None) bodies[cur] += line + "\n";
      continue;
    }
    if (in_fence) {
      if (capture) fenced += line + "\n";
      if (cur != Section::None) bodies[cur] += line + "\n";
      continue;
    }
    if (auto h = header_of(line)) {
      cur = h->section;
      if (!h->rest.empty()) bodies[cur] += h->rest + "\n";
      continue;
    }
    if (cur != Section::None) bodies[cur] += line + "\n";
  }

  rec.reasoning = std::string(trim(bodies[Section::Reasoning]));
  rec.new_approach = std::string(trim(bodies[Section::NewApproach]));
  rec.improvement_rationale = std::string(trim(bodies[Section::Rationale]));
  parse_critiques(bodies[Section::Critiques], rec.critiques);

  if (!have_expr || rec.final_expression.empty())
    throw Error(ErrorKind::MissingExpression, "no fenced code block after FINAL_EXPRESSION");
  // Surfaces the DSL error unchanged so it can be fed back into a retry prompt.
  SwizzlePattern::from_text("proposal", rec.final_expression);
  return rec;
}

}  // namespace swz
