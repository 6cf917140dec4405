#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "swizzle/cache_sim.hpp"
#include "swizzle/error.hpp"
#include "swizzle/json_io.hpp"
#include "swizzle/optimizer.hpp"

using namespace swz;
namespace fs = std::filesystem;

namespace {

constexpr int kDomainFailure = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string kernel = "gemm";
  std::string pattern;
  std::string expr;
  std::string arch = "mi300x-like";
  std::string sizes;
  std::string blocks;
  std::string proposer = "search";
  std::string fixture;
  int max_iters = kDefaultMaxIters;
  std::string out_dir;
  std::string history;
  bool record = false;
};

ArchSpec resolve_arch(const std::string& a) {
  if (fs::is_regular_file(a)) return load_arch_spec_file(a);
  return arch_preset(a);
}

std::vector<std::int64_t> parse_sizes(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v <= 0) throw UsageError("bad size '" + item + "'");
    out.push_back(v);
  }
  return out;
}

KernelSpec make_spec(const Options& o, std::optional<std::int64_t> size) {
  const KernelKind k = kernel_from_name(o.kernel);
  return size ? spec_with_size(k, *size) : default_spec(k);
}

std::optional<std::int64_t> single_size(const Options& o) {
  if (o.sizes.empty()) return std::nullopt;
  const auto v = parse_sizes(o.sizes);
  if (v.size() != 1) throw UsageError("--sizes takes one size for this command");
  return v[0];
}

// Built-ins go through the grid acceptance check unless `unchecked`.
SwizzlePattern resolve_pattern(const Options& o, const GridSpec& grid, const ArchSpec& arch, bool unchecked = false) {
  if (!o.pattern.empty() && !o.expr.empty()) throw UsageError("give either --pattern or --expr, not both");
  if (!o.expr.empty()) return SwizzlePattern::from_text("custom", o.expr);
  const BuiltinPattern b =
      o.pattern.empty() ? intended_pattern(kernel_from_name(o.kernel)) : builtin_from_name(o.pattern);
  return unchecked ? builtin_pattern_unchecked(b, grid, arch) : builtin_pattern(b, grid, arch);
}

fs::path out_path(const Options& o, const std::string& name) {
  const fs::path dir = o.out_dir.empty() ? fs::path(".") : fs::path(o.out_dir);
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + p.string() + "'");
}

std::string fmt(double v, const char* f = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int cmd_simulate(const Options& o) {
  const ArchSpec arch = resolve_arch(o.arch);
  const KernelSpec spec = make_spec(o, single_size(o));
  const AccessTrace trace = generate_trace(spec);
  const SwizzlePattern p = resolve_pattern(o, trace.grid, arch);
  const PairReport pr = simulate_pair(trace, arch, {}, p);
  write_file(out_path(o, "baseline.json"), serialize_report(pr.baseline) + "\n");
  write_file(out_path(o, "swizzled.json"), serialize_report(pr.swizzled) + "\n");
  std::cout << kernel_name(spec.kind) << ' ' << p.name << " baseline=" << fmt(pr.baseline.l2_hit_rate)
            << " swizzled=" << fmt(pr.swizzled.l2_hit_rate) << " delta=" << fmt(pr.delta() * 100, "%+.2f")
            << " points\n";
  return 0;
}

int cmd_sweep(const Options& o) {
  const auto sizes = parse_sizes(o.sizes);
  if (sizes.empty()) throw UsageError("--sizes needs at least one size");
  const ArchSpec arch = resolve_arch(o.arch);
  const KernelKind kind = kernel_from_name(o.kernel);
  if (!o.pattern.empty()) builtin_from_name(o.pattern);  // usage check before any work

  struct Row {
    std::string pattern;
    std::optional<PairReport> pair;
    std::string error;
  };
  std::vector<std::future<Row>> jobs;
  for (const std::int64_t n : sizes)
    jobs.push_back(std::async(std::launch::async, [&, n] {
      Row r;
      try {
        const AccessTrace t = generate_trace(spec_with_size(kind, n));
        const SwizzlePattern p = resolve_pattern(o, t.grid, arch);
        r.pattern = p.name;
        r.pair = simulate_pair(t, arch, {}, p);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      return r;
    }));

  std::ostringstream csv;
  csv << "kernel,pattern,size,baseline_rate,swizzled_rate,delta\n";
  int failed = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const Row r = jobs[i].get();
    const std::string name = !r.pattern.empty() ? r.pattern : (!o.expr.empty() ? "custom" : o.pattern);
    csv << kernel_name(kind) << ',' << name << ',' << sizes[i] << ',';
    if (r.pair)
      csv << fmt(r.pair->baseline.l2_hit_rate) << ',' << fmt(r.pair->swizzled.l2_hit_rate) << ','
          << fmt(r.pair->delta());
    else
      csv << ",,";
    csv << '\n';
    if (!r.pair) {
      ++failed;
      std::cerr << "size " << sizes[i] << ": " << r.error << '\n';
    }
  }
  std::cout << csv.str();
  if (!o.out_dir.empty()) write_file(out_path(o, "sweep.csv"), csv.str());
  if (failed) std::cerr << failed << " of " << sizes.size() << " sizes failed\n";
  return failed ? kDomainFailure : 0;
}

int cmd_optimize(const Options& o) {
  if (o.max_iters < 0) throw UsageError("--max-iters must be >= 0");
  const ArchSpec arch = resolve_arch(o.arch);
  const KernelSpec spec = make_spec(o, single_size(o));

  std::unique_ptr<CompletionClient> client;
  std::unique_ptr<Proposer> proposer;
  if (o.proposer == "search") {
    proposer = std::make_unique<SearchProposer>();
  } else if (o.proposer == "replay") {
    if (o.fixture.empty()) throw UsageError("--proposer replay needs --fixture");
    proposer = std::make_unique<ReplayProposer>(o.fixture);
  } else if (o.proposer == "llm") {
    ClientMode mode = ClientMode::Live;
    if (o.record) {
      if (o.fixture.empty()) throw UsageError("--record needs --fixture");
      mode = ClientMode::Record;
    } else if (!o.fixture.empty()) {
      mode = ClientMode::Replay;
    }
    try {
      client = std::make_unique<CompletionClient>(config_from_env(mode, o.fixture));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    proposer = std::make_unique<LlmProposer>(*client);
  } else {
    throw UsageError("unknown proposer '" + o.proposer + "' (search, llm, replay)");
  }

  const fs::path history = o.history.empty() ? out_path(o, "history.jsonl") : fs::path(o.history);
  if (history.has_parent_path()) fs::create_directories(history.parent_path());
  JsonlHistorySink sink(history.string());
  const OptimizationResult r = optimize(spec, arch, *proposer, o.max_iters, &sink);

  write_file(out_path(o, "progression.csv"), progression_csv(r));
  Json best;
  best["iteration"] = r.best.iteration;
  best["pattern"] = pattern_to_json(*r.best.pattern);
  best["report"] = report_to_json(*r.best.report);
  write_file(out_path(o, "best_pattern.json"), best.dump(2) + "\n");

  for (const auto& e : r.history) {
    std::cout << "iteration " << e.iteration << ' ' << status_name(e.status);
    if (e.pattern) std::cout << ' ' << e.pattern->name;
    if (e.report) std::cout << " hit_rate=" << fmt(e.report->l2_hit_rate);
    if (!e.error.empty()) std::cout << " (" << e.error << ')';
    std::cout << '\n';
  }
  if (r.exhausted)
    std::cout << "proposer exhausted after " << r.iterations_run << " of " << o.max_iters << " iterations\n";
  std::cout << "best: iteration " << r.best.iteration << ' ' << r.best.pattern->name
            << " hit_rate=" << fmt(r.best.report->l2_hit_rate) << '\n';
  return 0;
}

GridSpec parse_blocks(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) return GridSpec::blocks(std::stoll(text));
    return GridSpec::blocks(std::stoll(text.substr(0, x)), std::stoll(text.substr(x + 1)));
  } catch (const std::logic_error&) {
    throw UsageError("bad --blocks '" + text + "' (N or MxN)");
  }
}

int cmd_validate(const Options& o) {
  const ArchSpec arch = resolve_arch(o.arch);
  const GridSpec grid = o.blocks.empty() ? total_blocks(make_spec(o, single_size(o))) : parse_blocks(o.blocks);
  validate(grid);
  const SwizzlePattern p = resolve_pattern(o, grid, arch, true);
  const ValidationResult v = check_bijectivity(p, grid, arch);
  Json doc;
  doc["pattern"] = p.name;
  doc["expression"] = p.expression_text();
  doc["grid"] = {grid.num_blocks_m, grid.num_blocks_n};
  doc["num_xcds"] = arch.num_xcds;
  doc["validation"] = validation_to_json(v);
  std::cout << doc.dump(2) << '\n';
  const bool ok = v.bijective && v.coverage_ok;
  if (!ok) {
    std::cerr << p.name << " is not a bijection on " << grid.total() << " blocks";
    if (!v.out_of_range.empty()) {
      std::cerr << "; out-of-range pids:";
      for (std::size_t i = 0; i < std::min<std::size_t>(v.out_of_range.size(), 16); ++i)
        std::cerr << ' ' << v.out_of_range[i];
    }
    if (!v.collisions.empty()) std::cerr << "; " << v.collisions.size() << " collisions";
    std::cerr << '\n';
  }
  return ok ? 0 : kDomainFailure;
}

bool is_usage(ErrorKind k) {
  return k == ErrorKind::InvalidArgument || k == ErrorKind::UnknownPattern || k == ErrorKind::Syntax ||
         k == ErrorKind::UnknownIdentifier;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chiplet GPU L2 locality lab: simulate, sweep, validate and optimize workgroup swizzles."};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c) {
    c->add_option("--kernel", o.kernel, "kernel kind")->capture_default_str();
    c->add_option("--pattern", o.pattern, "built-in pattern name (default: the kernel's own)");
    c->add_option("--expr", o.expr, "pattern expression, e.g. 'pid = pid % 8'");
    c->add_option("--arch", o.arch, "preset name or arch JSON file")->capture_default_str();
  };
  auto* sim = app.add_subcommand("simulate", "baseline vs swizzled reports for one kernel");
  common(sim);
  sim->add_option("--sizes", o.sizes, "problem size (one value)");
  sim->add_option("--out-dir", o.out_dir, "where baseline.json and swizzled.json go");

  auto* sweep = app.add_subcommand("sweep", "baseline vs swizzled over problem sizes, as CSV");
  common(sweep);
  sweep->add_option("--sizes", o.sizes, "comma-separated problem sizes")->required();
  sweep->add_option("--out-dir", o.out_dir, "also write sweep.csv here");

  auto* opt = app.add_subcommand("optimize", "run the propose/validate/simulate loop");
  common(opt);
  opt->add_option("--sizes", o.sizes, "problem size (one value)");
  opt->add_option("--proposer", o.proposer, "search, llm or replay")->capture_default_str();
  opt->add_option("--fixture", o.fixture, "replay patterns (replay) or completion fixture (llm)");
  opt->add_flag("--record", o.record, "llm: call the live endpoint and append to --fixture");
  opt->add_option("--max-iters", o.max_iters, "proposals to attempt")->capture_default_str();
  opt->add_option("--out-dir", o.out_dir, "where progression.csv and best_pattern.json go");
  opt->add_option("--history", o.history, "history JSONL path (default OUT_DIR/history.jsonl)");

  auto* val = app.add_subcommand("validate", "check that a pattern is a bijection on a grid");
  common(val);
  val->add_option("--sizes", o.sizes, "problem size used to derive the grid (one value)");
  val->add_option("--blocks", o.blocks, "explicit grid: N or MxN blocks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*sim) return cmd_simulate(o);
    if (*sweep) return cmd_sweep(o);
    if (*opt) return cmd_optimize(o);
    return cmd_validate(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const Error& e) {
    std::cerr << (is_usage(e.kind()) ? "usage error: " : "error: ") << e.what() << '\n';
    return is_usage(e.kind()) ? kUsageError : kDomainFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainFailure;
  }
}
