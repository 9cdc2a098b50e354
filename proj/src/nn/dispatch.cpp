#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_internal.hpp"

namespace handover::nn::kernels {

namespace {

bool cpu_has_avx2() noexcept {
#if defined(HANDOVER_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelSet* select_default() noexcept {
  const char* env = std::getenv("HANDOVER_KERNELS");
  const std::string_view want = env ? env : "auto";
  if (want == "scalar") return &scalar_kernels();
  if (const KernelSet* simd = avx2_kernels()) return simd;
  return &scalar_kernels();
}

std::atomic<const KernelSet*>& active_slot() noexcept {
  static std::atomic<const KernelSet*> slot{select_default()};
  return slot;
}

}  // namespace

const KernelSet* avx2_kernels() noexcept {
#if defined(HANDOVER_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelSet& active_kernels() noexcept {
  return *active_slot().load(std::memory_order_acquire);
}

std::vector<const KernelSet*> available_kernels() {
  std::vector<const KernelSet*> out{&scalar_kernels()};
  if (const KernelSet* simd = avx2_kernels()) out.push_back(simd);
  return out;
}

void set_active_kernels(const KernelSet& set) noexcept {
  active_slot().store(&set, std::memory_order_release);
}

}  // namespace handover::nn::kernels
