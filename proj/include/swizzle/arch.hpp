#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace swz {

enum class DispatchPolicy { RoundRobinXcd };

// Chiplet GPU description: X dies, each with its own CUs and private L2.
struct ArchSpec {
  std::string name;
  std::uint32_t num_xcds = 1;
  std::uint32_t cus_per_xcd = 1;
  std::uint64_t l2_bytes_per_xcd = 0;
  std::uint32_t l2_line_bytes = 0;
  std::uint32_t l2_associativity = 1;
  std::uint32_t wg_slots_per_cu = 1;
  DispatchPolicy dispatch = DispatchPolicy::RoundRobinXcd;

  std::uint64_t l2_sets() const {
    return l2_bytes_per_xcd / (std::uint64_t{l2_line_bytes} * l2_associativity);
  }

  bool operator==(const ArchSpec&) const = default;
};

// Throws Error(InvariantViolation) naming the first offending field.
void validate(const ArchSpec& arch);

inline std::uint32_t default_xcd_assignment(std::uint64_t launch_pid, const ArchSpec& arch) {
  return static_cast<std::uint32_t>(launch_pid % arch.num_xcds);
}

inline std::uint32_t concurrent_slots_per_xcd(const ArchSpec& arch) {
  return arch.cus_per_xcd * arch.wg_slots_per_cu;
}

// Parses the flat JSON arch document. Unknown keys and missing keys are
// rejected, and the result is validated.
ArchSpec load_arch_spec(std::string_view document);
ArchSpec load_arch_spec_file(const std::string& path);
std::string dump_arch_spec(const ArchSpec& arch);

// Built-in presets. "mi300x-like" is the default target.
ArchSpec arch_preset(std::string_view name);

}  // namespace swz
