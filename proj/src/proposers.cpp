#include <fstream>

#include "swizzle/context_io.hpp"
#include "swizzle/error.hpp"
#include "swizzle/optimizer.hpp"

namespace swz {

namespace {

std::optional<std::vector<std::int64_t>> forward_table(const SwizzlePattern& p, const GridSpec& grid,
                                                       const ArchSpec& arch) {
  try {
    return PatternMap(p, grid, arch).forward();
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<std::int64_t> chunk_sizes(std::int64_t extent, std::int64_t X) {
  std::vector<std::int64_t> out;
  const std::int64_t top = extent / X;
  if (top < 1) return out;
  out.push_back(top);
  std::int64_t p = 1;
  while (p * 2 <= top) p *= 2;
  for (; p >= 1; p /= 2)
    if (p != top) out.push_back(p);
  return out;
}

}  // namespace

std::vector<SwizzlePattern> search_family(const GridSpec& grid, const ArchSpec& arch) {
  using construct::Axis;
  const std::int64_t X = arch.num_xcds;
  const std::pair<Axis, std::int64_t> axes[] = {
      {Axis::Linear, grid.total()}, {Axis::Row, grid.num_blocks_m}, {Axis::Column, grid.num_blocks_n}};
  std::vector<SwizzlePattern> out;
  std::vector<std::vector<std::int64_t>> seen;
  for (const auto& [axis, extent] : axes) {
    for (const std::int64_t chunk : chunk_sizes(extent, X)) {
      for (const std::int64_t stride : {std::int64_t{1}, X}) {
        auto p = construct::grouped(axis, chunk, stride, grid, arch);
        if (!p) continue;
        auto fwd = forward_table(*p, grid, arch);
        if (!fwd || std::find(seen.begin(), seen.end(), *fwd) != seen.end()) continue;
        seen.push_back(std::move(*fwd));
        p->name = "search_" + p->name;
        out.push_back(std::move(*p));
      }
    }
  }
  return out;
}

Proposal SearchProposer::propose(const ProposalContext& ctx) {
  std::vector<std::vector<std::int64_t>> tried;
  for (const auto& e : ctx.history)
    if (e.pattern)
      if (auto f = forward_table(*e.pattern, ctx.grid, ctx.arch)) tried.push_back(std::move(*f));
  for (auto& p : search_family(ctx.grid, ctx.arch)) {
    const auto f = forward_table(p, ctx.grid, ctx.arch);
    if (std::find(tried.begin(), tried.end(), *f) != tried.end()) continue;
    bool repeated = false;
    for (const auto& e : ctx.history) repeated = repeated || (e.pattern && e.pattern->same_mapping_as(p));
    if (repeated) continue;
    return {std::move(p), ""};
  }
  throw Error(ErrorKind::Exhausted, "search family exhausted");
}

ReplayProposer::ReplayProposer(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read replay file '" + path + "'");
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::Schema, path + ":" + std::to_string(n) + ": " + e.what());
    }
    Proposal p{pattern_from_json(j), ""};
    if (j.contains("critique") && j["critique"].is_string()) p.critique = j["critique"].get<std::string>();
    items_.push_back(std::move(p));
  }
}

ReplayProposer::ReplayProposer(std::vector<Proposal> items) : items_(std::move(items)) {}

Proposal ReplayProposer::propose(const ProposalContext&) {
  if (next_ >= items_.size())
    throw Error(ErrorKind::Exhausted, "replay proposer exhausted after " + std::to_string(items_.size()) + " patterns");
  return items_[next_++];
}

LlmProposer::LlmProposer(CompletionClient& client, int max_parse_retries)
    : client_(client), max_parse_retries_(max_parse_retries) {
  if (max_parse_retries < 0) throw Error(ErrorKind::InvalidArgument, "max_parse_retries must be >= 0");
}

std::string LlmProposer::prompt_for(const ProposalContext& ctx, const std::vector<std::string>& errors) {
  std::string prompt = build_prompt(ctx.spec_summary, ctx.locality, ctx.history, ctx.arch).render();
  for (const auto& e : errors)
    prompt += "\nYour previous answer could not be used: " + e + "\nAnswer again in the required format.\n";
  return prompt;
}

Proposal LlmProposer::propose(const ProposalContext& ctx) {
  std::vector<std::string> errors;
  int iteration = 1;
  for (const auto& e : ctx.history) iteration = std::max(iteration, e.iteration + 1);
  for (int attempt = 0; attempt <= max_parse_retries_; ++attempt) {
    std::string text;
    try {
      text = client_.complete(prompt_for(ctx, errors));
    } catch (const Error& e) {
      throw Error(ErrorKind::ProposerFailure, std::string("completion failed: ") + e.what());
    }
    try {
      const ProposalRecord rec = parse_proposal(text);
      Proposal p{SwizzlePattern::from_text("llm_iter" + std::to_string(iteration), rec.final_expression), ""};
      p.critique = rec.new_approach;
      for (const auto& [it, c] : rec.critiques) p.critique += "\niteration " + std::to_string(it) + ": " + c;
      return p;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::MissingExpression && e.kind() != ErrorKind::Syntax &&
          e.kind() != ErrorKind::UnknownIdentifier)
        throw;
      errors.push_back(e.what());
    }
  }
  throw Error(ErrorKind::ProposerFailure, "no usable proposal after " + std::to_string(max_parse_retries_ + 1) +
                                              " attempts; last error: " + errors.back());
}

}  // namespace swz
