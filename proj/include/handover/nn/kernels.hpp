#pragma once

// Hot inner loops of the 1D CNN, as a table of function pointers.
//
// The scalar table is the reference. SIMD tables must agree with it to
// rounding (FMA contraction and summation order are the only differences);
// tests/test_simd_equivalence.cpp enforces that. The active table is chosen
// once per process from CPU features, and can be pinned with the
// HANDOVER_KERNELS environment variable ("scalar", "avx2" or "auto").

#include <cstddef>
#include <string_view>
#include <vector>

namespace handover::nn::kernels {

struct KernelSet {
  std::string_view name;

  // Same-padded, stride-1 cross-correlation with an odd kernel size.
  //   out[o][t] = bias[o] + sum_{i,k} w[o][i][k] * in[i][t + k - ksize/2]
  // in: cin x len, w: cout x cin x ksize, bias: cout or nullptr, out: cout x len.
  void (*conv1d)(const double* in, std::size_t cin, std::size_t len, const double* w,
                 std::size_t ksize, const double* bias, std::size_t cout, double* out);

  // Accumulates the weight gradient of conv1d:
  //   gw[o][i][k] += sum_t grad_out[o][t] * in[i][t + k - ksize/2]
  void (*conv1d_weight_grad)(const double* in, std::size_t cin, std::size_t len,
                             const double* grad_out, std::size_t cout, std::size_t ksize,
                             double* gw);
};

const KernelSet& scalar_kernels() noexcept;

// nullptr when the variant was not compiled in or the CPU lacks the ISA.
const KernelSet* avx2_kernels() noexcept;

const KernelSet& active_kernels() noexcept;

// Every table usable on this machine, scalar first.
std::vector<const KernelSet*> available_kernels();

// Replace the active table (tests, benchmarking). Not thread-safe with
// concurrent kernel calls.
void set_active_kernels(const KernelSet& set) noexcept;

}  // namespace handover::nn::kernels
