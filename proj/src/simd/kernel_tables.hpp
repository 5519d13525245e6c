#pragma once

#include "shelab/simd/kernels.hpp"

namespace shelab::simd {

// nullptr when the build target cannot emit the instruction set.
const KernelTable* avx2_kernels() noexcept;

}  // namespace shelab::simd
