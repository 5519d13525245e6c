#include "box_muller.hpp"
#include "kernel_tables.hpp"

namespace shelab::simd {
namespace {

void fill_normals_scalar(std::uint64_t seed, std::uint32_t stream, std::uint32_t replicate,
                         std::uint64_t first, double* out, std::size_t n) {
  std::size_t i = 0;
  std::uint64_t index = first;
  double z0, z1;
  if (n > 0 && (index & 1u)) {
    detail::box_muller(detail::philox_for(seed, stream, replicate, index >> 1), z0, z1);
    out[i++] = z1;
    ++index;
  }
  for (; i + 1 < n; i += 2, index += 2) {
    detail::box_muller(detail::philox_for(seed, stream, replicate, index >> 1), z0, z1);
    out[i] = z0;
    out[i + 1] = z1;
  }
  if (i < n) {
    detail::box_muller(detail::philox_for(seed, stream, replicate, index >> 1), z0, z1);
    out[i] = z0;
  }
}

void heat_update_scalar(const double* left, const double* centre, const double* right,
                        const double* forcing, double k, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double c = centre[i];
    out[i] = c + (k * ((left[i] + right[i]) - (c + c)) + forcing[i]);
  }
}

void noise_forcing_scalar(const double* amp, const double* xi, const double* drift, double* out,
                          std::size_t n) {
  if (drift == nullptr) {
    for (std::size_t i = 0; i < n; ++i) out[i] = amp[i] * xi[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = drift[i] + amp[i] * xi[i];
  }
}

void sine_affine_scalar(const double* x, double c0, double c1, double turns, double scale,
                        double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = scale * (c0 + c1 * detail::sin_turns(turns * x[i]));
}

double power_sum_scalar(const double* v, std::size_t n, unsigned p) {
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = v[i] - v[i - 1];
    const double d2 = d * d;
    double term = d2;
    for (unsigned e = 2; e < p; e += 2) term *= d2;
    // TwoSum(sum, term)
    const double t = sum + term;
    const double z = t - sum;
    comp += (sum - (t - z)) + (term - z);
    sum = t;
  }
  return sum + comp;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{Isa::Scalar,        fill_normals_scalar, heat_update_scalar,
                                 noise_forcing_scalar, sine_affine_scalar,  power_sum_scalar,
                                 dot_scalar};
  return table;
}

}  // namespace shelab::simd
