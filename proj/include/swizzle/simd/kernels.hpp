#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

// Data-parallel inner loops with a scalar reference and ISA variants chosen
// at runtime. Every variant must produce bit-identical results to scalar.
namespace swz::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

// Elementwise int64 lane ops over the swizzle domain (inputs are >= 0).
// Returns false when some lane could not be computed exactly (overflow,
// negative result, zero divisor, or an operand outside the fast path); the
// caller then recomputes those lanes with checked scalar arithmetic.
using BinaryLaneFn = bool (*)(const std::int64_t* a, const std::int64_t* b, std::int64_t* out,
                              std::size_t n);

struct KernelTable {
  Isa isa;
  BinaryLaneFn add;
  BinaryLaneFn sub;
  BinaryLaneFn mul;
  BinaryLaneFn floordiv;
  BinaryLaneFn mod;
  BinaryLaneFn shl;
  BinaryLaneFn shr;
  BinaryLaneFn bit_and;
  BinaryLaneFn bit_or;
  BinaryLaneFn min;
  BinaryLaneFn max;
  // Index of the first way holding `tag`, or -1.
  int (*find_tag)(const std::uint64_t* tags, std::uint32_t ways, std::uint64_t tag);
  // Index of the first way with the smallest stamp (stamps < 2^63).
  std::uint32_t (*argmin_stamp)(const std::uint64_t* stamps, std::uint32_t ways);
};

const KernelTable& scalar_kernels();
// nullptr when the binary was built without the variant or the CPU lacks it.
const KernelTable* avx2_kernels();

// Best available table; SWZ_SIMD=scalar in the environment forces scalar.
const KernelTable& active_kernels();

}  // namespace swz::simd
