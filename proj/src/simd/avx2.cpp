#include "kernel_tables.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define SHELAB_HAVE_AVX2_TARGET 1
#include <immintrin.h>

#include "box_muller.hpp"
#endif

namespace shelab::simd {

#if SHELAB_HAVE_AVX2_TARGET

#define SHELAB_AVX2 __attribute__((target("avx2,fma")))

namespace {

using namespace detail;

SHELAB_AVX2 inline __m256d log_poly4(__m256d x) {
  const __m256i magic = _mm256_set1_epi64x(static_cast<long long>(kExpMagic));
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i biased = _mm256_srli_epi64(bits, 52);
  __m256d dk = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(magic, biased)),
                             _mm256_set1_pd(kTwo52 + 1023.0));
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFll)),
                      _mm256_set1_epi64x(0x3FF0000000000000ll)));
  const __m256d big = _mm256_cmp_pd(m, _mm256_set1_pd(kSqrt2), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
  dk = _mm256_add_pd(dk, _mm256_and_pd(big, _mm256_set1_pd(1.0)));

  const __m256d f = _mm256_sub_pd(m, _mm256_set1_pd(1.0));
  const __m256d s = _mm256_div_pd(f, _mm256_add_pd(_mm256_set1_pd(2.0), f));
  const __m256d z = _mm256_mul_pd(s, s);
  const __m256d w = _mm256_mul_pd(z, z);
  const __m256d t1 = _mm256_mul_pd(
      w, _mm256_add_pd(_mm256_set1_pd(kLg2),
                       _mm256_mul_pd(w, _mm256_add_pd(_mm256_set1_pd(kLg4),
                                                      _mm256_mul_pd(w, _mm256_set1_pd(kLg6))))));
  const __m256d t2 = _mm256_mul_pd(
      z, _mm256_add_pd(
             _mm256_set1_pd(kLg1),
             _mm256_mul_pd(
                 w, _mm256_add_pd(_mm256_set1_pd(kLg3),
                                  _mm256_mul_pd(w, _mm256_add_pd(_mm256_set1_pd(kLg5),
                                                                 _mm256_mul_pd(w, _mm256_set1_pd(kLg7))))))));
  const __m256d r = _mm256_add_pd(t2, t1);
  const __m256d hfsq = _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(0.5), f), f);
  // dk*ln2hi - ((hfsq - (s*(hfsq + r) + dk*ln2lo)) - f)
  const __m256d inner = _mm256_add_pd(_mm256_mul_pd(s, _mm256_add_pd(hfsq, r)),
                                      _mm256_mul_pd(dk, _mm256_set1_pd(kLn2Lo)));
  return _mm256_sub_pd(_mm256_mul_pd(dk, _mm256_set1_pd(kLn2Hi)),
                       _mm256_sub_pd(_mm256_sub_pd(hfsq, inner), f));
}

SHELAB_AVX2 inline __m256d sin_kernel4(__m256d x) {
  const __m256d z = _mm256_mul_pd(x, x);
  const __m256d w = _mm256_mul_pd(z, z);
  // S2 + z*(S3 + z*S4) + z*w*(S5 + z*S6)
  const __m256d a = _mm256_add_pd(
      _mm256_set1_pd(kS2),
      _mm256_mul_pd(z, _mm256_add_pd(_mm256_set1_pd(kS3), _mm256_mul_pd(z, _mm256_set1_pd(kS4)))));
  const __m256d b = _mm256_mul_pd(
      _mm256_mul_pd(z, w), _mm256_add_pd(_mm256_set1_pd(kS5), _mm256_mul_pd(z, _mm256_set1_pd(kS6))));
  const __m256d r = _mm256_add_pd(a, b);
  const __m256d v = _mm256_mul_pd(z, x);
  return _mm256_add_pd(
      x, _mm256_mul_pd(v, _mm256_add_pd(_mm256_set1_pd(kS1), _mm256_mul_pd(z, r))));
}

SHELAB_AVX2 inline __m256d cos_kernel4(__m256d x) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d z = _mm256_mul_pd(x, x);
  const __m256d w = _mm256_mul_pd(z, z);
  // z*(C1 + z*(C2 + z*C3)) + w*w*(C4 + z*(C5 + z*C6))
  const __m256d a = _mm256_mul_pd(
      z, _mm256_add_pd(_mm256_set1_pd(kC1),
                       _mm256_mul_pd(z, _mm256_add_pd(_mm256_set1_pd(kC2),
                                                      _mm256_mul_pd(z, _mm256_set1_pd(kC3))))));
  const __m256d b = _mm256_mul_pd(
      _mm256_mul_pd(w, w),
      _mm256_add_pd(_mm256_set1_pd(kC4),
                    _mm256_mul_pd(z, _mm256_add_pd(_mm256_set1_pd(kC5),
                                                   _mm256_mul_pd(z, _mm256_set1_pd(kC6))))));
  const __m256d r = _mm256_add_pd(a, b);
  const __m256d hz = _mm256_mul_pd(_mm256_set1_pd(0.5), z);
  const __m256d v = _mm256_sub_pd(one, hz);
  return _mm256_add_pd(
      v, _mm256_add_pd(_mm256_sub_pd(_mm256_sub_pd(one, v), hz), _mm256_mul_pd(z, r)));
}

// Philox for 4*L consecutive blocks starting at `block`; lane set j holds blocks
// block + 4j .. block + 4j + 3, one per 64-bit lane. Several independent sets
// are interleaved because a single set is bound by multiply latency.
template <int L>
SHELAB_AVX2 inline void philox4xL(std::uint64_t seed, std::uint32_t stream,
                                  std::uint32_t replicate, std::uint64_t block, __m256i (&w0)[L],
                                  __m256i (&w1)[L], __m256i (&w2)[L], __m256i (&w3)[L]) {
  const __m256i lo32 = _mm256_set1_epi64x(0xFFFFFFFFll);
  const __m256i m0 = _mm256_set1_epi64x(Philox4x32::kMul0);
  const __m256i m1 = _mm256_set1_epi64x(Philox4x32::kMul1);
  __m256i c0[L], c1[L], c2[L], c3[L];
  for (int j = 0; j < L; ++j) {
    const __m256i blocks = _mm256_add_epi64(_mm256_set1_epi64x(static_cast<long long>(block + 4 * j)),
                                            _mm256_set_epi64x(3, 2, 1, 0));
    c0[j] = _mm256_and_si256(blocks, lo32);
    c1[j] = _mm256_srli_epi64(blocks, 32);
    c2[j] = _mm256_set1_epi64x(replicate);
    c3[j] = _mm256_set1_epi64x(stream);
  }
  std::uint32_t k0 = static_cast<std::uint32_t>(seed);
  std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
  for (int r = 0; r < Philox4x32::kRounds; ++r) {
    if (r > 0) {
      k0 += Philox4x32::kWeyl0;
      k1 += Philox4x32::kWeyl1;
    }
    const __m256i key0 = _mm256_set1_epi64x(k0);
    const __m256i key1 = _mm256_set1_epi64x(k1);
    for (int j = 0; j < L; ++j) {
      const __m256i p0 = _mm256_mul_epu32(m0, c0[j]);
      const __m256i p1 = _mm256_mul_epu32(m1, c2[j]);
      const __m256i n0 = _mm256_xor_si256(_mm256_xor_si256(_mm256_srli_epi64(p1, 32), c1[j]), key0);
      const __m256i n2 = _mm256_xor_si256(_mm256_xor_si256(_mm256_srli_epi64(p0, 32), c3[j]), key1);
      c1[j] = _mm256_and_si256(p1, lo32);
      c3[j] = _mm256_and_si256(p0, lo32);
      c0[j] = n0;
      c2[j] = n2;
    }
  }
  for (int j = 0; j < L; ++j) {
    w0[j] = c0[j];
    w1[j] = c1[j];
    w2[j] = c2[j];
    w3[j] = c3[j];
  }
}

// Box-Muller on four Philox outputs; writes draws 2b, 2b+1 for the four blocks b.
SHELAB_AVX2 inline void box_muller4(__m256i w0, __m256i w1, __m256i w2, __m256i w3, double* out) {
  const __m256i magic = _mm256_set1_epi64x(static_cast<long long>(kExpMagic));
  const __m256i mask20 = _mm256_set1_epi64x(0xFFFFFll);
  const __m256d two52 = _mm256_set1_pd(kTwo52);
  const __m256d twom52 = _mm256_set1_pd(kTwoM52);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256i x1 = _mm256_or_si256(_mm256_slli_epi64(_mm256_and_si256(w1, mask20), 32), w0);
  const __m256i x2 = _mm256_or_si256(_mm256_slli_epi64(_mm256_and_si256(w3, mask20), 32), w2);
  const __m256d u1 = _mm256_sub_pd(
      one, _mm256_mul_pd(_mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(magic, x1)), two52),
                         twom52));
  const __m256d u2 = _mm256_mul_pd(
      _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(magic, x2)), two52), twom52);
  const __m256d radius = _mm256_sqrt_pd(_mm256_mul_pd(_mm256_set1_pd(-2.0), log_poly4(u1)));

  const __m256d w = _mm256_mul_pd(_mm256_set1_pd(4.0), u2);
  const __m256d k = _mm256_round_pd(w, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256d a = _mm256_mul_pd(_mm256_sub_pd(w, k), _mm256_set1_pd(kHalfPi));
  const __m256d sa = sin_kernel4(a);
  const __m256d ca = cos_kernel4(a);
  // k == 4 is quadrant 0
  const __m256d q1 = _mm256_cmp_pd(k, _mm256_set1_pd(1.0), _CMP_EQ_OQ);
  const __m256d q2 = _mm256_cmp_pd(k, _mm256_set1_pd(2.0), _CMP_EQ_OQ);
  const __m256d q3 = _mm256_cmp_pd(k, _mm256_set1_pd(3.0), _CMP_EQ_OQ);
  const __m256d swap = _mm256_or_pd(q1, q3);
  __m256d s = _mm256_blendv_pd(sa, ca, swap);
  __m256d c = _mm256_blendv_pd(ca, sa, swap);
  s = _mm256_xor_pd(s, _mm256_and_pd(_mm256_or_pd(q2, q3), sign));
  c = _mm256_xor_pd(c, _mm256_and_pd(_mm256_or_pd(q1, q2), sign));

  const __m256d zc = _mm256_mul_pd(radius, c);  // even draws
  const __m256d zs = _mm256_mul_pd(radius, s);  // odd draws
  const __m256d lo = _mm256_unpacklo_pd(zc, zs);  // c0 s0 c2 s2
  const __m256d hi = _mm256_unpackhi_pd(zc, zs);  // c1 s1 c3 s3
  _mm256_storeu_pd(out, _mm256_permute2f128_pd(lo, hi, 0x20));
  _mm256_storeu_pd(out + 4, _mm256_permute2f128_pd(lo, hi, 0x31));
}

SHELAB_AVX2 void fill_normals_avx2(std::uint64_t seed, std::uint32_t stream,
                                   std::uint32_t replicate, std::uint64_t first, double* out,
                                   std::size_t n) {
  std::size_t i = 0;
  std::uint64_t index = first;
  double z0, z1;
  if (n > 0 && (index & 1u)) {
    box_muller(philox_for(seed, stream, replicate, index >> 1), z0, z1);
    out[i++] = z1;
    ++index;
  }

  constexpr int kSets = 4;
  for (; i + 8 * kSets <= n; i += 8 * kSets, index += 8 * kSets) {
    __m256i w0[kSets], w1[kSets], w2[kSets], w3[kSets];
    philox4xL<kSets>(seed, stream, replicate, index >> 1, w0, w1, w2, w3);
    for (int j = 0; j < kSets; ++j) box_muller4(w0[j], w1[j], w2[j], w3[j], out + i + 8 * j);
  }
  for (; i + 8 <= n; i += 8, index += 8) {
    __m256i w0[1], w1[1], w2[1], w3[1];
    philox4xL<1>(seed, stream, replicate, index >> 1, w0, w1, w2, w3);
    box_muller4(w0[0], w1[0], w2[0], w3[0], out + i);
  }

  for (; i + 1 < n; i += 2, index += 2) {
    box_muller(philox_for(seed, stream, replicate, index >> 1), z0, z1);
    out[i] = z0;
    out[i + 1] = z1;
  }
  if (i < n) {
    box_muller(philox_for(seed, stream, replicate, index >> 1), z0, z1);
    out[i] = z0;
  }
}

SHELAB_AVX2 void heat_update_avx2(const double* left, const double* centre, const double* right,
                                  const double* forcing, double k, double* out, std::size_t n) {
  const __m256d kk = _mm256_set1_pd(k);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d c = _mm256_loadu_pd(centre + i);
    const __m256d lap = _mm256_sub_pd(_mm256_add_pd(_mm256_loadu_pd(left + i), _mm256_loadu_pd(right + i)),
                                      _mm256_add_pd(c, c));
    _mm256_storeu_pd(out + i,
                     _mm256_add_pd(c, _mm256_add_pd(_mm256_mul_pd(kk, lap), _mm256_loadu_pd(forcing + i))));
  }
  for (; i < n; ++i) {
    const double c = centre[i];
    out[i] = c + (k * ((left[i] + right[i]) - (c + c)) + forcing[i]);
  }
}

SHELAB_AVX2 void noise_forcing_avx2(const double* amp, const double* xi, const double* drift,
                                    double* out, std::size_t n) {
  std::size_t i = 0;
  if (drift == nullptr) {
    for (; i + 4 <= n; i += 4)
      _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(amp + i), _mm256_loadu_pd(xi + i)));
    for (; i < n; ++i) out[i] = amp[i] * xi[i];
  } else {
    for (; i + 4 <= n; i += 4)
      _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(drift + i),
                                              _mm256_mul_pd(_mm256_loadu_pd(amp + i),
                                                            _mm256_loadu_pd(xi + i))));
    for (; i < n; ++i) out[i] = drift[i] + amp[i] * xi[i];
  }
}

SHELAB_AVX2 void sine_affine_avx2(const double* x, double c0, double c1, double turns,
                                  double scale, double* out, std::size_t n) {
  const __m256d vt = _mm256_set1_pd(turns);
  const __m256d four = _mm256_set1_pd(4.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d w = _mm256_mul_pd(four, _mm256_mul_pd(vt, _mm256_loadu_pd(x + i)));
    const __m256d k = _mm256_round_pd(w, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    const __m256d a = _mm256_mul_pd(_mm256_sub_pd(w, k), _mm256_set1_pd(kHalfPi));
    const __m256d q = _mm256_sub_pd(
        k, _mm256_mul_pd(four, _mm256_floor_pd(_mm256_mul_pd(k, _mm256_set1_pd(0.25)))));
    const __m256d sa = sin_kernel4(a);
    const __m256d ca = cos_kernel4(a);
    const __m256d odd = _mm256_or_pd(_mm256_cmp_pd(q, _mm256_set1_pd(1.0), _CMP_EQ_OQ),
                                     _mm256_cmp_pd(q, _mm256_set1_pd(3.0), _CMP_EQ_OQ));
    const __m256d neg = _mm256_cmp_pd(q, _mm256_set1_pd(1.5), _CMP_GT_OQ);
    __m256d s = _mm256_blendv_pd(sa, ca, odd);
    s = _mm256_xor_pd(s, _mm256_and_pd(neg, _mm256_set1_pd(-0.0)));
    const __m256d v = _mm256_add_pd(_mm256_set1_pd(c0), _mm256_mul_pd(_mm256_set1_pd(c1), s));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_set1_pd(scale), v));
  }
  for (; i < n; ++i) out[i] = scale * (c0 + c1 * sin_turns(turns * x[i]));
}

inline void two_sum_into(double& sum, double& comp, double term) {
  const double t = sum + term;
  const double z = t - sum;
  comp += (sum - (t - z)) + (term - z);
  sum = t;
}

SHELAB_AVX2 double power_sum_avx2(const double* v, std::size_t n, unsigned p) {
  if (n < 2) return 0.0;
  const std::size_t terms = n - 1;
  __m256d sum = _mm256_setzero_pd();
  __m256d comp = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= terms; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(v + i + 1), _mm256_loadu_pd(v + i));
    const __m256d d2 = _mm256_mul_pd(d, d);
    __m256d term = d2;
    for (unsigned e = 2; e < p; e += 2) term = _mm256_mul_pd(term, d2);
    const __m256d t = _mm256_add_pd(sum, term);
    const __m256d z = _mm256_sub_pd(t, sum);
    comp = _mm256_add_pd(comp, _mm256_add_pd(_mm256_sub_pd(sum, _mm256_sub_pd(t, z)),
                                             _mm256_sub_pd(term, z)));
    sum = t;
  }
  alignas(32) double lane_sum[4];
  alignas(32) double lane_comp[4];
  _mm256_store_pd(lane_sum, sum);
  _mm256_store_pd(lane_comp, comp);
  double s = 0.0;
  double c = 0.0;
  for (int l = 0; l < 4; ++l) {
    two_sum_into(s, c, lane_sum[l]);
    c += lane_comp[l];
  }
  for (; i < terms; ++i) {
    const double d = v[i + 1] - v[i];
    const double d2 = d * d;
    double term = d2;
    for (unsigned e = 2; e < p; e += 2) term *= d2;
    two_sum_into(s, c, term);
  }
  return s + c;
}

SHELAB_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  const __m256d acc = _mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3));
  const __m128d pair = _mm_add_pd(_mm256_castpd256_pd128(acc), _mm256_extractf128_pd(acc, 1));
  double total = _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

}  // namespace

const KernelTable* avx2_kernels() noexcept {
  static const KernelTable table{Isa::Avx2,         fill_normals_avx2, heat_update_avx2,
                                 noise_forcing_avx2, sine_affine_avx2,  power_sum_avx2,
                                 dot_avx2};
  return &table;
}

#else

const KernelTable* avx2_kernels() noexcept { return nullptr; }

#endif

}  // namespace shelab::simd
