#pragma once

#include "handover/nn/kernels.hpp"

namespace handover::nn::kernels::detail {

// Defined in kernels_avx2.cpp, which is the only TU built with -mavx2 -mfma.
// Callers must check CPU support before using the table.
const KernelSet& avx2_table() noexcept;

}  // namespace handover::nn::kernels::detail
