#include "swizzle/simd/kernels.hpp"

namespace swz::simd {

namespace {

bool add(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  bool ok = true;
  for (std::size_t i = 0; i < n; ++i) ok &= !__builtin_add_overflow(a[i], b[i], &out[i]);
  return ok;
}

bool sub(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  bool ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = a[i] - b[i];
    ok &= out[i] >= 0;
  }
  return ok;
}

bool mul(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  bool ok = true;
  for (std::size_t i = 0; i < n; ++i) ok &= !__builtin_mul_overflow(a[i], b[i], &out[i]);
  return ok;
}

bool floordiv(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  bool ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (b[i] == 0) {
      ok = false;
      out[i] = 0;
    } else {
      out[i] = a[i] / b[i];  // operands are nonnegative, truncation == floor
    }
  }
  return ok;
}

bool mod(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  bool ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (b[i] == 0) {
      ok = false;
      out[i] = 0;
    } else {
      out[i] = a[i] % b[i];
    }
  }
  return ok;
}

bool shl(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  bool ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (b[i] > 62 || (a[i] >> (62 - b[i])) != 0) {
      ok = false;
      out[i] = 0;
    } else {
      out[i] = a[i] << b[i];
    }
  }
  return ok;
}

bool shr(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = b[i] >= 63 ? 0 : (a[i] >> b[i]);
  return true;
}

bool bit_and(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] & b[i];
  return true;
}

bool bit_or(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] | b[i];
  return true;
}

bool min(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] < b[i] ? a[i] : b[i];
  return true;
}

bool max(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
  return true;
}

int find_tag(const std::uint64_t* tags, std::uint32_t ways, std::uint64_t tag) {
  for (std::uint32_t w = 0; w < ways; ++w)
    if (tags[w] == tag) return static_cast<int>(w);
  return -1;
}

std::uint32_t argmin_stamp(const std::uint64_t* stamps, std::uint32_t ways) {
  std::uint32_t best = 0;
  for (std::uint32_t w = 1; w < ways; ++w)
    if (stamps[w] < stamps[best]) best = w;
  return best;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::Scalar, add,    sub,     mul, floordiv, mod,      shl,
                                 shr,         bit_and, bit_or, min, max,      find_tag, argmin_stamp};
  return table;
}

}  // namespace swz::simd
