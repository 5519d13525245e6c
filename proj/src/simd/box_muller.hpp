#pragma once

// Scalar reference for the Box-Muller transform. The AVX2 path in avx2.cpp
// replays exactly this operation sequence lane-wise; keep the two in sync.

#include <bit>
#include <cmath>
#include <cstdint>

#include "shelab/rng.hpp"

namespace shelab::simd::detail {

// fdlibm e_log.c coefficients.
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kLg1 = 6.666666666666735130e-01;
inline constexpr double kLg2 = 3.999999999940941908e-01;
inline constexpr double kLg3 = 2.857142874366239149e-01;
inline constexpr double kLg4 = 2.222219843214978396e-01;
inline constexpr double kLg5 = 1.818357216161805012e-01;
inline constexpr double kLg6 = 1.531383769920937332e-01;
inline constexpr double kLg7 = 1.479819860511658591e-01;
inline constexpr double kSqrt2 = 1.4142135623730951;

// fdlibm k_sin.c / k_cos.c coefficients, valid on |x| <= pi/4.
inline constexpr double kS1 = -1.66666666666666324348e-01;
inline constexpr double kS2 = 8.33333333332248946124e-03;
inline constexpr double kS3 = -1.98412698298579493134e-04;
inline constexpr double kS4 = 2.75573137070700676789e-06;
inline constexpr double kS5 = -2.50507602534068634195e-08;
inline constexpr double kS6 = 1.58969099521155010221e-10;
inline constexpr double kC1 = 4.16666666666666019037e-02;
inline constexpr double kC2 = -1.38888888888741095749e-03;
inline constexpr double kC3 = 2.48015872894767294178e-05;
inline constexpr double kC4 = -2.75573143513906633035e-07;
inline constexpr double kC5 = 2.08757232129817482790e-09;
inline constexpr double kC6 = -1.13596475577881948265e-11;
inline constexpr double kHalfPi = 1.5707963267948966;

inline constexpr std::uint64_t kExpMagic = 0x4330000000000000ull;  // bits of 2^52
inline constexpr double kTwo52 = 4503599627370496.0;
inline constexpr double kTwoM52 = 2.220446049250313e-16;

/// Natural log for normal positive doubles.
inline double log_poly(double x) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  const std::uint64_t biased = bits >> 52;
  // exponent as an exact double via the 2^52 trick
  double dk = std::bit_cast<double>(kExpMagic | biased) - (kTwo52 + 1023.0);
  double m = std::bit_cast<double>((bits & 0x000FFFFFFFFFFFFFull) | 0x3FF0000000000000ull);
  if (m > kSqrt2) {
    m = m * 0.5;
    dk = dk + 1.0;
  }
  const double f = m - 1.0;
  const double s = f / (2.0 + f);
  const double z = s * s;
  const double w = z * z;
  const double t1 = w * (kLg2 + w * (kLg4 + w * kLg6));
  const double t2 = z * (kLg1 + w * (kLg3 + w * (kLg5 + w * kLg7)));
  const double r = t2 + t1;
  const double hfsq = 0.5 * f * f;
  return dk * kLn2Hi - ((hfsq - (s * (hfsq + r) + dk * kLn2Lo)) - f);
}

inline double sin_kernel(double x) {
  const double z = x * x;
  const double w = z * z;
  const double r = kS2 + z * (kS3 + z * kS4) + z * w * (kS5 + z * kS6);
  const double v = z * x;
  return x + v * (kS1 + z * r);
}

inline double cos_kernel(double x) {
  const double z = x * x;
  const double w = z * z;
  const double r = z * (kC1 + z * (kC2 + z * kC3)) + w * w * (kC4 + z * (kC5 + z * kC6));
  const double hz = 0.5 * z;
  const double v = 1.0 - hz;
  return v + (((1.0 - v) - hz) + z * r);
}

/// sin and cos of 2*pi*u for u in [0, 1).
inline void sincos_turns(double u, double& s, double& c) {
  const double w = 4.0 * u;
  const double k = std::nearbyint(w);
  const double a = (w - k) * kHalfPi;
  const double sa = sin_kernel(a);
  const double ca = cos_kernel(a);
  switch (static_cast<int>(k) & 3) {
    case 0: s = sa; c = ca; break;
    case 1: s = ca; c = -sa; break;
    case 2: s = -sa; c = -ca; break;
    default: s = -ca; c = sa; break;
  }
}

/// sin(2*pi*u) for |u| < 2^50. Reduction is exact once u is formed.
inline double sin_turns(double u) {
  const double w = 4.0 * u;
  const double k = std::nearbyint(w);
  const double a = (w - k) * kHalfPi;
  const double q = k - 4.0 * std::floor(k * 0.25);
  if (q == 0.0) return sin_kernel(a);
  if (q == 1.0) return cos_kernel(a);
  if (q == 2.0) return -sin_kernel(a);
  return -cos_kernel(a);
}

/// Two normals from one Philox block.
inline void box_muller(const Philox4x32::Counter& w, double& z0, double& z1) {
  const std::uint64_t x1 = (std::uint64_t{w[1] & 0xFFFFFu} << 32) | w[0];
  const std::uint64_t x2 = (std::uint64_t{w[3] & 0xFFFFFu} << 32) | w[2];
  // x < 2^52 converts exactly; u1 = 1 - x1 * 2^-52 lies in (0, 1] with no rounding
  const double u1 = 1.0 - (std::bit_cast<double>(kExpMagic | x1) - kTwo52) * kTwoM52;
  const double u2 = (std::bit_cast<double>(kExpMagic | x2) - kTwo52) * kTwoM52;
  const double radius = std::sqrt(-2.0 * log_poly(u1));
  double s, c;
  sincos_turns(u2, s, c);
  z0 = radius * c;
  z1 = radius * s;
}

inline Philox4x32::Counter philox_for(std::uint64_t seed, std::uint32_t stream,
                                      std::uint32_t replicate, std::uint64_t block) {
  return Philox4x32::block({static_cast<std::uint32_t>(block),
                            static_cast<std::uint32_t>(block >> 32), replicate, stream},
                           {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
}

}  // namespace shelab::simd::detail
