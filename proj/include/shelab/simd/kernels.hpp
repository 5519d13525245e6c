#pragma once

// Data-parallel inner loops, one implementation per instruction set.
//
// The scalar table is the reference. Other tables must agree with it:
//   fill_normals, heat_update, noise_forcing,
//   sine_affine                               -> bit-identical
//   power_sum, dot                            -> equal up to summation order
// (see tests/test_simd.cpp). The active table is picked at first use from
// the CPU features, overridable with SHELAB_ISA=scalar|avx2 or set_active_isa().

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace shelab::simd {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa) noexcept;

struct KernelTable {
  Isa isa;

  // out[i] = standard normal number (first + i) of the stream keyed by
  // {seed_lo, seed_hi} with counter high words {replicate, stream}.
  void (*fill_normals)(std::uint64_t seed, std::uint32_t stream, std::uint32_t replicate,
                       std::uint64_t first, double* out, std::size_t n);

  // out[i] = c + (k * ((l + r) - (c + c)) + f)   with l,c,r,f = left[i],centre[i],right[i],forcing[i]
  void (*heat_update)(const double* left, const double* centre, const double* right,
                      const double* forcing, double k, double* out, std::size_t n);

  // out[i] = amp[i] * xi[i]                (drift == nullptr)
  // out[i] = drift[i] + amp[i] * xi[i]     otherwise
  void (*noise_forcing)(const double* amp, const double* xi, const double* drift, double* out,
                        std::size_t n);

  // out[i] = scale * (c0 + c1 * sin(2 pi turns x[i]))
  void (*sine_affine)(const double* x, double c0, double c1, double turns, double scale,
                      double* out, std::size_t n);

  // sum_{i=1}^{n-1} (v[i] - v[i-1])^p, p even >= 2, compensated accumulation.
  double (*power_sum)(const double* v, std::size_t n, unsigned p);

  double (*dot)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
bool isa_supported(Isa isa) noexcept;

/// Throws shelab::DomainError if the ISA is not compiled in or not supported by this CPU.
const KernelTable& kernels_for(Isa isa);

const KernelTable& active() noexcept;
Isa active_isa() noexcept;
void set_active_isa(Isa isa);

/// Best ISA for this CPU, honouring SHELAB_ISA.
Isa detect_isa() noexcept;

}  // namespace shelab::simd
