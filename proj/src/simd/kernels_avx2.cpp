// Compiled with -mavx2; only reached after a runtime CPU check.
#include "swizzle/simd/kernels.hpp"

#if defined(__AVX2__)
#include <immintrin.h>

#include <algorithm>

namespace swz::simd {

const KernelTable& scalar_kernels();

namespace {

inline __m256i load(const std::int64_t* p) { return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p)); }
inline void store(std::int64_t* p, __m256i v) { _mm256_storeu_si256(reinterpret_cast<__m256i*>(p), v); }

// Sign bits set in any lane.
inline bool any_negative(__m256i v) { return _mm256_movemask_pd(_mm256_castsi256_pd(v)) != 0; }

bool add(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  // Nonnegative operands overflow exactly when the wrapped sum is negative.
  std::size_t i = 0;
  __m256i bad = _mm256_setzero_si256();
  for (; i + 4 <= n; i += 4) {
    __m256i s = _mm256_add_epi64(load(a + i), load(b + i));
    bad = _mm256_or_si256(bad, s);
    store(out + i, s);
  }
  bool ok = !any_negative(bad);
  if (i < n) ok &= scalar_kernels().add(a + i, b + i, out + i, n - i);
  return ok;
}

bool sub(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  std::size_t i = 0;
  __m256i bad = _mm256_setzero_si256();
  for (; i + 4 <= n; i += 4) {
    __m256i d = _mm256_sub_epi64(load(a + i), load(b + i));
    bad = _mm256_or_si256(bad, d);
    store(out + i, d);
  }
  bool ok = !any_negative(bad);
  if (i < n) ok &= scalar_kernels().sub(a + i, b + i, out + i, n - i);
  return ok;
}

bool mul(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  // Fast path: both operands below 2^31, so _mm256_mul_epu32 is exact and
  // the product fits below 2^62.
  const __m256i limit = _mm256_set1_epi64x((std::int64_t{1} << 31) - 1);
  std::size_t i = 0;
  bool ok = true;
  for (; i + 4 <= n; i += 4) {
    __m256i va = load(a + i), vb = load(b + i);
    __m256i over = _mm256_or_si256(_mm256_cmpgt_epi64(va, limit), _mm256_cmpgt_epi64(vb, limit));
    if (!_mm256_testz_si256(over, over)) {
      ok &= scalar_kernels().mul(a + i, b + i, out + i, 4);
      continue;
    }
    store(out + i, _mm256_mul_epu32(va, vb));
  }
  if (i < n) ok &= scalar_kernels().mul(a + i, b + i, out + i, n - i);
  return ok;
}

bool shl(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  const __m256i vlimit = _mm256_set1_epi64x((std::int64_t{1} << 31) - 1);
  const __m256i slimit = _mm256_set1_epi64x(31);
  std::size_t i = 0;
  bool ok = true;
  for (; i + 4 <= n; i += 4) {
    __m256i va = load(a + i), vb = load(b + i);
    __m256i over = _mm256_or_si256(_mm256_cmpgt_epi64(va, vlimit), _mm256_cmpgt_epi64(vb, slimit));
    if (!_mm256_testz_si256(over, over)) {
      ok &= scalar_kernels().shl(a + i, b + i, out + i, 4);
      continue;
    }
    store(out + i, _mm256_sllv_epi64(va, vb));
  }
  if (i < n) ok &= scalar_kernels().shl(a + i, b + i, out + i, n - i);
  return ok;
}

bool shr(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  // srlv yields 0 for counts >= 64; counts of exactly 63 also give 0 for
  // nonnegative values, matching scalar.
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) store(out + i, _mm256_srlv_epi64(load(a + i), load(b + i)));
  if (i < n) scalar_kernels().shr(a + i, b + i, out + i, n - i);
  return true;
}

bool bit_and(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) store(out + i, _mm256_and_si256(load(a + i), load(b + i)));
  if (i < n) scalar_kernels().bit_and(a + i, b + i, out + i, n - i);
  return true;
}

bool bit_or(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) store(out + i, _mm256_or_si256(load(a + i), load(b + i)));
  if (i < n) scalar_kernels().bit_or(a + i, b + i, out + i, n - i);
  return true;
}

bool min(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256i va = load(a + i), vb = load(b + i);
    store(out + i, _mm256_blendv_epi8(va, vb, _mm256_cmpgt_epi64(va, vb)));
  }
  if (i < n) scalar_kernels().min(a + i, b + i, out + i, n - i);
  return true;
}

bool max(const std::int64_t* a, const std::int64_t* b, std::int64_t* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256i va = load(a + i), vb = load(b + i);
    store(out + i, _mm256_blendv_epi8(vb, va, _mm256_cmpgt_epi64(va, vb)));
  }
  if (i < n) scalar_kernels().max(a + i, b + i, out + i, n - i);
  return true;
}

int find_tag(const std::uint64_t* tags, std::uint32_t ways, std::uint64_t tag) {
  const __m256i needle = _mm256_set1_epi64x(static_cast<std::int64_t>(tag));
  std::uint32_t w = 0;
  for (; w + 4 <= ways; w += 4) {
    __m256i eq = _mm256_cmpeq_epi64(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(tags + w)), needle);
    int mask = _mm256_movemask_pd(_mm256_castsi256_pd(eq));
    if (mask) return static_cast<int>(w + __builtin_ctz(static_cast<unsigned>(mask)));
  }
  for (; w < ways; ++w)
    if (tags[w] == tag) return static_cast<int>(w);
  return -1;
}

std::uint32_t argmin_stamp(const std::uint64_t* stamps, std::uint32_t ways) {
  if (ways < 8) return scalar_kernels().argmin_stamp(stamps, ways);
  // Reduce to the minimum value, then locate its first occurrence.
  __m256i best = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(stamps));
  std::uint32_t w = 4;
  for (; w + 4 <= ways; w += 4) {
    __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(stamps + w));
    best = _mm256_blendv_epi8(best, v, _mm256_cmpgt_epi64(best, v));
  }
  alignas(32) std::int64_t lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), best);
  std::uint64_t m = static_cast<std::uint64_t>(lanes[0]);
  for (int k = 1; k < 4; ++k) m = std::min(m, static_cast<std::uint64_t>(lanes[k]));
  for (; w < ways; ++w) m = std::min(m, stamps[w]);
  return static_cast<std::uint32_t>(find_tag(stamps, ways, m));
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Isa::Avx2, add,    sub,     mul, scalar_kernels().floordiv,
                                 scalar_kernels().mod, shl, shr, bit_and, bit_or, min, max,
                                 find_tag,  argmin_stamp};
  return &table;
}

}  // namespace swz::simd

#else

namespace swz::simd {
struct KernelTable;
const KernelTable* avx2_table() { return nullptr; }
}  // namespace swz::simd

#endif
