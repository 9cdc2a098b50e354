#include "handover/nn/kernels.hpp"

#include "kernels_internal.hpp"

namespace handover::nn::kernels {

namespace {

void conv1d_scalar(const double* in, std::size_t cin, std::size_t len, const double* w,
                   std::size_t ksize, const double* bias, std::size_t cout, double* out) {
  const auto pad = static_cast<std::ptrdiff_t>(ksize / 2);
  const auto n = static_cast<std::ptrdiff_t>(len);
  for (std::size_t o = 0; o < cout; ++o) {
    double* dst = out + o * len;
    const double b = bias ? bias[o] : 0.0;
    for (std::size_t t = 0; t < len; ++t) dst[t] = b;
    for (std::size_t i = 0; i < cin; ++i) {
      const double* src = in + i * len;
      const double* wk = w + (o * cin + i) * ksize;
      for (std::size_t k = 0; k < ksize; ++k) {
        const double wv = wk[k];
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
        const std::ptrdiff_t lo = shift < 0 ? -shift : 0;
        const std::ptrdiff_t hi = shift > 0 ? n - shift : n;
        for (std::ptrdiff_t t = lo; t < hi; ++t) dst[t] += wv * src[t + shift];
      }
    }
  }
}

void conv1d_weight_grad_scalar(const double* in, std::size_t cin, std::size_t len,
                               const double* grad_out, std::size_t cout, std::size_t ksize,
                               double* gw) {
  const auto pad = static_cast<std::ptrdiff_t>(ksize / 2);
  const auto n = static_cast<std::ptrdiff_t>(len);
  for (std::size_t o = 0; o < cout; ++o) {
    const double* g = grad_out + o * len;
    for (std::size_t i = 0; i < cin; ++i) {
      const double* src = in + i * len;
      double* gk = gw + (o * cin + i) * ksize;
      for (std::size_t k = 0; k < ksize; ++k) {
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
        const std::ptrdiff_t lo = shift < 0 ? -shift : 0;
        const std::ptrdiff_t hi = shift > 0 ? n - shift : n;
        double acc = 0.0;
        for (std::ptrdiff_t t = lo; t < hi; ++t) acc += g[t] * src[t + shift];
        gk[k] += acc;
      }
    }
  }
}

constexpr KernelSet kScalar{"scalar", &conv1d_scalar, &conv1d_weight_grad_scalar};

}  // namespace

const KernelSet& scalar_kernels() noexcept { return kScalar; }

}  // namespace handover::nn::kernels
