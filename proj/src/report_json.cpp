#include <cmath>
#include <set>

#include "swizzle/context_io.hpp"
#include "swizzle/error.hpp"
#include "swizzle/json_io.hpp"

namespace swz {

namespace {

const std::set<std::string> kReportKeys = {"kernel", "pattern", "num_xcds", "accesses", "hits", "misses",
                                           "l2_hit_rate", "per_xcd", "unique_lines_touched"};
const std::set<std::string> kXcdKeys = {"accesses", "hits", "misses", "hit_rate"};

void check_keys(const nlohmann::json& obj, const std::set<std::string>& keys, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorKind::Schema, where + " must be an object");
  for (const auto& [k, v] : obj.items())
    if (!keys.count(k)) throw Error(ErrorKind::Schema, where + ": unexpected key '" + k + "'");
  for (const auto& k : keys)
    if (!obj.contains(k)) throw Error(ErrorKind::Schema, where + ": missing key '" + k + "'");
}

std::uint64_t count(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw Error(ErrorKind::Schema, where + ": '" + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

double rate(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw Error(ErrorKind::Schema, where + ": '" + key + "' must be a number");
  const double r = v.get<double>();
  if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorKind::CorruptReport, where + ": '" + key + "' outside [0, 1]");
  return r;
}

void check_rate(double r, std::uint64_t hits, std::uint64_t accesses, const std::string& where) {
  const double expect = accesses ? static_cast<double>(hits) / static_cast<double>(accesses) : 0.0;
  if (std::fabs(r - expect) > 1e-9) throw Error(ErrorKind::CorruptReport, where + ": hit rate disagrees with counts");
}

std::string text(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_string()) throw Error(ErrorKind::Schema, where + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

Json report_to_json(const BottleneckReport& r) {
  Json j;
  j["kernel"] = r.kernel;
  j["pattern"] = r.pattern;
  j["num_xcds"] = r.num_xcds;
  j["accesses"] = r.accesses;
  j["hits"] = r.hits;
  j["misses"] = r.misses;
  j["l2_hit_rate"] = r.l2_hit_rate;
  j["per_xcd"] = Json::array();
  for (const auto& x : r.per_xcd)
    j["per_xcd"].push_back({{"accesses", x.accesses}, {"hits", x.hits}, {"misses", x.misses}, {"hit_rate", x.hit_rate}});
  j["unique_lines_touched"] = r.unique_lines_touched;
  return j;
}

BottleneckReport report_from_json(const nlohmann::json& doc) {
  check_keys(doc, kReportKeys, "report");
  BottleneckReport r;
  r.kernel = text(doc, "kernel", "report");
  r.pattern = text(doc, "pattern", "report");
  r.num_xcds = static_cast<std::uint32_t>(count(doc, "num_xcds", "report"));
  r.accesses = count(doc, "accesses", "report");
  r.hits = count(doc, "hits", "report");
  r.misses = count(doc, "misses", "report");
  r.l2_hit_rate = rate(doc, "l2_hit_rate", "report");
  r.unique_lines_touched = count(doc, "unique_lines_touched", "report");
  if (!doc.at("per_xcd").is_array()) throw Error(ErrorKind::Schema, "report: 'per_xcd' must be an array");
  std::size_t i = 0;
  for (const auto& e : doc.at("per_xcd")) {
    const std::string where = "per_xcd[" + std::to_string(i++) + "]";
    check_keys(e, kXcdKeys, where);
    XcdStats x;
    x.accesses = count(e, "accesses", where);
    x.hits = count(e, "hits", where);
    x.misses = count(e, "misses", where);
    x.hit_rate = rate(e, "hit_rate", where);
    if (x.hits + x.misses != x.accesses) throw Error(ErrorKind::CorruptReport, where + ": hits + misses != accesses");
    check_rate(x.hit_rate, x.hits, x.accesses, where);
    r.per_xcd.push_back(x);
  }

  if (r.hits + r.misses != r.accesses) throw Error(ErrorKind::CorruptReport, "report: hits + misses != accesses");
  check_rate(r.l2_hit_rate, r.hits, r.accesses, "report");
  if (r.per_xcd.size() != r.num_xcds) throw Error(ErrorKind::CorruptReport, "report: per_xcd length != num_xcds");
  std::uint64_t a = 0, h = 0;
  for (const auto& x : r.per_xcd) {
    a += x.accesses;
    h += x.hits;
  }
  if (a != r.accesses || h != r.hits) throw Error(ErrorKind::CorruptReport, "report: per-XCD counts do not sum to totals");
  return r;
}

std::string serialize_report(const BottleneckReport& report) { return report_to_json(report).dump(2); }

std::string ranking_document(const std::vector<BottleneckReport>& ranked) {
  Json doc = Json::array();
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    Json e;
    e["rank"] = i + 1;
    e["pattern"] = ranked[i].pattern;
    e["l2_hit_rate"] = ranked[i].l2_hit_rate;
    e["unique_lines_touched"] = ranked[i].unique_lines_touched;
    doc.push_back(e);
  }
  return doc.dump(2);
}

BottleneckReport parse_profiler_log(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Schema, std::string("malformed report document: ") + e.what());
  }
  return report_from_json(doc);
}

Json pattern_to_json(const SwizzlePattern& p) {
  Json j;
  j["name"] = p.name;
  j["expression"] = p.expression_text();
  j["params"] = Json::object();
  for (const auto& [k, v] : p.params) j["params"][k] = v;
  j["fallback"] = p.fallback == Fallback::RejectGrid ? "reject_grid" : "identity_on_grid";
  return j;
}

SwizzlePattern pattern_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("expression") || !doc["expression"].is_string())
    throw Error(ErrorKind::Schema, "pattern needs a string 'expression'");
  const std::string name = doc.contains("name") && doc["name"].is_string() ? doc["name"].get<std::string>() : "custom";
  SwizzlePattern p = SwizzlePattern::from_text(name, doc["expression"].get<std::string>());
  if (doc.contains("params")) {
    if (!doc["params"].is_object()) throw Error(ErrorKind::Schema, "pattern 'params' must be an object");
    for (const auto& [k, v] : doc["params"].items()) {
      if (!v.is_number_integer()) throw Error(ErrorKind::Schema, "pattern param '" + k + "' must be an integer");
      p.params[k] = v.get<std::int64_t>();
    }
  }
  if (doc.contains("fallback")) {
    const auto f = doc["fallback"];
    if (f == "reject_grid")
      p.fallback = Fallback::RejectGrid;
    else if (f == "identity_on_grid")
      p.fallback = Fallback::IdentityOnGrid;
    else
      throw Error(ErrorKind::Schema, "unknown pattern fallback");
  }
  return p;
}

Json validation_to_json(const ValidationResult& v, std::size_t max_listed) {
  Json j;
  j["bijective"] = v.bijective;
  j["coverage_ok"] = v.coverage_ok;
  j["total_blocks"] = v.total_blocks;
  j["out_of_range_count"] = v.out_of_range.size();
  j["out_of_range"] = Json::array();
  for (std::size_t i = 0; i < std::min(max_listed, v.out_of_range.size()); ++i) j["out_of_range"].push_back(v.out_of_range[i]);
  j["collision_count"] = v.collisions.size();
  j["collisions"] = Json::array();
  for (std::size_t i = 0; i < std::min(max_listed, v.collisions.size()); ++i) {
    const auto& c = v.collisions[i];
    j["collisions"].push_back({{"pid_a", c.pid_a}, {"pid_b", c.pid_b}, {"image", c.image}});
  }
  return j;
}

}  // namespace swz
