#include "shelab/rng.hpp"

#include "shelab/simd/kernels.hpp"
#include "simd/box_muller.hpp"

namespace shelab {

void fill_normals(const NoiseKey& key, std::uint64_t first, std::span<double> out) {
  simd::active().fill_normals(key.seed, key.stream, key.replicate, first, out.data(), out.size());
}

double normal_at(const NoiseKey& key, std::uint64_t index) {
  double z0, z1;
  simd::detail::box_muller(simd::detail::philox_for(key.seed, key.stream, key.replicate, index >> 1),
                           z0, z1);
  return (index & 1u) ? z1 : z0;
}

double NormalStream::next() {
  if (pos_ == buffered_) {
    fill_normals(key_, next_, buf_);
    next_ += buf_.size();
    buffered_ = buf_.size();
    pos_ = 0;
  }
  return buf_[pos_++];
}

void NormalStream::fill(std::span<double> out) {
  std::size_t i = 0;
  while (i < out.size() && pos_ < buffered_) out[i++] = buf_[pos_++];
  if (i < out.size()) {
    const auto rest = out.subspan(i);
    fill_normals(key_, next_, rest);
    next_ += rest.size();
  }
}

}  // namespace shelab
