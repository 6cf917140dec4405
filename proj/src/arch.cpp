#include "swizzle/arch.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "swizzle/error.hpp"

namespace swz {

namespace {

constexpr const char* kFields[] = {"name",          "num_xcds",         "cus_per_xcd",
                                   "l2_bytes_per_xcd", "l2_line_bytes", "l2_associativity",
                                   "wg_slots_per_cu"};

[[noreturn]] void violation(const std::string& field, const std::string& why) {
  throw Error(ErrorKind::InvariantViolation, "arch spec field '" + field + "': " + why);
}

template <class T>
T positive_field(const nlohmann::json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_number_integer()) violation(key, "expected an integer");
  if (v.get<std::int64_t>() <= 0) violation(key, "must be positive");
  return v.get<T>();
}

}  // namespace

void validate(const ArchSpec& arch) {
  if (arch.num_xcds < 1) violation("num_xcds", "must be >= 1");
  if (arch.cus_per_xcd < 1) violation("cus_per_xcd", "must be >= 1");
  if (arch.wg_slots_per_cu < 1) violation("wg_slots_per_cu", "must be >= 1");
  if (arch.l2_associativity < 1) violation("l2_associativity", "must be >= 1");
  if (arch.l2_line_bytes == 0 || (arch.l2_line_bytes & (arch.l2_line_bytes - 1)) != 0)
    violation("l2_line_bytes", "must be a power of two");
  if (arch.l2_bytes_per_xcd == 0 || arch.l2_bytes_per_xcd % arch.l2_line_bytes != 0)
    violation("l2_bytes_per_xcd", "must be a positive multiple of l2_line_bytes");
  if ((arch.l2_bytes_per_xcd / arch.l2_line_bytes) % arch.l2_associativity != 0)
    violation("l2_associativity", "must divide the number of L2 lines");
}

ArchSpec load_arch_spec(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Schema, std::string("malformed arch document: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::Schema, "arch document must be a JSON object");

  std::set<std::string> known(std::begin(kFields), std::end(kFields));
  for (const auto& [key, _] : doc.items()) {
    if (!known.count(key)) throw Error(ErrorKind::Schema, "unknown arch key '" + key + "'");
  }
  for (const char* key : kFields) {
    if (!doc.contains(key)) throw Error(ErrorKind::Schema, std::string("missing arch key '") + key + "'");
  }
  if (!doc.at("name").is_string()) violation("name", "expected a string");

  // Zero and negative values are invariant violations, not schema errors.
  ArchSpec arch;
  arch.name = doc.at("name").get<std::string>();
  arch.num_xcds = positive_field<std::uint32_t>(doc, "num_xcds");
  arch.cus_per_xcd = positive_field<std::uint32_t>(doc, "cus_per_xcd");
  arch.l2_bytes_per_xcd = positive_field<std::uint64_t>(doc, "l2_bytes_per_xcd");
  arch.l2_line_bytes = positive_field<std::uint32_t>(doc, "l2_line_bytes");
  arch.l2_associativity = positive_field<std::uint32_t>(doc, "l2_associativity");
  arch.wg_slots_per_cu = positive_field<std::uint32_t>(doc, "wg_slots_per_cu");
  validate(arch);
  return arch;
}

ArchSpec load_arch_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open arch file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_arch_spec(ss.str());
}

std::string dump_arch_spec(const ArchSpec& arch) {
  nlohmann::ordered_json doc;
  doc["name"] = arch.name;
  doc["num_xcds"] = arch.num_xcds;
  doc["cus_per_xcd"] = arch.cus_per_xcd;
  doc["l2_bytes_per_xcd"] = arch.l2_bytes_per_xcd;
  doc["l2_line_bytes"] = arch.l2_line_bytes;
  doc["l2_associativity"] = arch.l2_associativity;
  doc["wg_slots_per_cu"] = arch.wg_slots_per_cu;
  return doc.dump(2);
}

ArchSpec arch_preset(std::string_view name) {
  if (name == "mi300x-like") {
    // Only the XCD count is taken from the MI300X; the rest are CDNA3-class defaults.
    ArchSpec a{"mi300x-like", 8, 38, 4ull << 20, 128, 16, 1, DispatchPolicy::RoundRobinXcd};
    validate(a);
    return a;
  }
  if (name == "toy-4xcd") {
    ArchSpec a{"toy-4xcd", 4, 4, 64ull << 10, 128, 4, 1, DispatchPolicy::RoundRobinXcd};
    validate(a);
    return a;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown arch preset '" + std::string(name) + "'");
}

}  // namespace swz
