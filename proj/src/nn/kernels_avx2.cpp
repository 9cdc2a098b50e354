// AVX2 + FMA variants of the conv1d kernels. Compiled with -mavx2 -mfma;
// nothing in here may run before dispatch.cpp has confirmed CPU support.

#include <immintrin.h>

#include <cstring>
#include <vector>

#include "kernels_internal.hpp"

namespace handover::nn::kernels {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Zero-padded copy of in (cin rows of len + 2*pad), reused across calls.
const double* padded(const double* in, std::size_t cin, std::size_t len, std::size_t pad,
                     std::vector<double>& buf) {
  const std::size_t plen = len + 2 * pad;
  buf.assign(cin * plen, 0.0);
  for (std::size_t i = 0; i < cin; ++i) {
    std::memcpy(buf.data() + i * plen + pad, in + i * len, len * sizeof(double));
  }
  return buf.data();
}

// OB output channels x 8 time steps per register tile.
template <int OB>
void conv_tile(const double* xp, std::size_t plen, std::size_t cin, const double* w,
               std::size_t ksize, const double* bias, std::size_t o0, std::size_t len,
               double* out) {
  std::size_t t = 0;
  for (; t + 8 <= len; t += 8) {
    __m256d acc[OB][2];
    for (int q = 0; q < OB; ++q) {
      const __m256d b = _mm256_set1_pd(bias ? bias[o0 + q] : 0.0);
      acc[q][0] = b;
      acc[q][1] = b;
    }
    for (std::size_t i = 0; i < cin; ++i) {
      const double* x = xp + i * plen + t;
      for (std::size_t k = 0; k < ksize; ++k) {
        const __m256d x0 = _mm256_loadu_pd(x + k);
        const __m256d x1 = _mm256_loadu_pd(x + k + 4);
        for (int q = 0; q < OB; ++q) {
          const __m256d wv = _mm256_set1_pd(w[((o0 + q) * cin + i) * ksize + k]);
          acc[q][0] = _mm256_fmadd_pd(wv, x0, acc[q][0]);
          acc[q][1] = _mm256_fmadd_pd(wv, x1, acc[q][1]);
        }
      }
    }
    for (int q = 0; q < OB; ++q) {
      _mm256_storeu_pd(out + (o0 + q) * len + t, acc[q][0]);
      _mm256_storeu_pd(out + (o0 + q) * len + t + 4, acc[q][1]);
    }
  }
  for (; t < len; ++t) {
    for (int q = 0; q < OB; ++q) {
      double acc = bias ? bias[o0 + q] : 0.0;
      for (std::size_t i = 0; i < cin; ++i) {
        const double* x = xp + i * plen + t;
        const double* wk = w + ((o0 + q) * cin + i) * ksize;
        for (std::size_t k = 0; k < ksize; ++k) acc += wk[k] * x[k];
      }
      out[(o0 + q) * len + t] = acc;
    }
  }
}

void conv1d_avx2(const double* in, std::size_t cin, std::size_t len, const double* w,
                 std::size_t ksize, const double* bias, std::size_t cout, double* out) {
  thread_local std::vector<double> buf;
  const std::size_t pad = ksize / 2;
  const std::size_t plen = len + 2 * pad;
  const double* xp = padded(in, cin, len, pad, buf);
  std::size_t o = 0;
  for (; o + 4 <= cout; o += 4) conv_tile<4>(xp, plen, cin, w, ksize, bias, o, len, out);
  for (; o < cout; ++o) conv_tile<1>(xp, plen, cin, w, ksize, bias, o, len, out);
}

// Weight gradient for 4 output channels and one input channel, ksize == 3.
template <int OB>
void weight_grad_tile3(const double* xp, const double* g, std::size_t len, std::size_t o0,
                       std::size_t cin, std::size_t i, double* gw) {
  __m256d acc[OB][3];
  for (int q = 0; q < OB; ++q) {
    acc[q][0] = _mm256_setzero_pd();
    acc[q][1] = _mm256_setzero_pd();
    acc[q][2] = _mm256_setzero_pd();
  }
  std::size_t t = 0;
  for (; t + 4 <= len; t += 4) {
    const __m256d x0 = _mm256_loadu_pd(xp + t);
    const __m256d x1 = _mm256_loadu_pd(xp + t + 1);
    const __m256d x2 = _mm256_loadu_pd(xp + t + 2);
    for (int q = 0; q < OB; ++q) {
      const __m256d gv = _mm256_loadu_pd(g + (o0 + q) * len + t);
      acc[q][0] = _mm256_fmadd_pd(gv, x0, acc[q][0]);
      acc[q][1] = _mm256_fmadd_pd(gv, x1, acc[q][1]);
      acc[q][2] = _mm256_fmadd_pd(gv, x2, acc[q][2]);
    }
  }
  for (int q = 0; q < OB; ++q) {
    double s[3] = {hsum(acc[q][0]), hsum(acc[q][1]), hsum(acc[q][2])};
    const double* gq = g + (o0 + q) * len;
    for (std::size_t tt = t; tt < len; ++tt) {
      s[0] += gq[tt] * xp[tt];
      s[1] += gq[tt] * xp[tt + 1];
      s[2] += gq[tt] * xp[tt + 2];
    }
    double* dst = gw + ((o0 + q) * cin + i) * 3;
    dst[0] += s[0];
    dst[1] += s[1];
    dst[2] += s[2];
  }
}

void weight_grad_generic(const double* xp, const double* g, std::size_t len, std::size_t o,
                         std::size_t cin, std::size_t i, std::size_t ksize, double* gw) {
  const double* go = g + o * len;
  for (std::size_t k = 0; k < ksize; ++k) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t t = 0;
    for (; t + 4 <= len; t += 4) {
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(go + t), _mm256_loadu_pd(xp + t + k), acc);
    }
    double s = hsum(acc);
    for (; t < len; ++t) s += go[t] * xp[t + k];
    gw[(o * cin + i) * ksize + k] += s;
  }
}

void conv1d_weight_grad_avx2(const double* in, std::size_t cin, std::size_t len,
                             const double* grad_out, std::size_t cout, std::size_t ksize,
                             double* gw) {
  thread_local std::vector<double> buf;
  const std::size_t pad = ksize / 2;
  const std::size_t plen = len + 2 * pad;
  const double* xp = padded(in, cin, len, pad, buf);
  for (std::size_t i = 0; i < cin; ++i) {
    const double* xi = xp + i * plen;
    if (ksize == 3) {
      std::size_t o = 0;
      for (; o + 4 <= cout; o += 4) weight_grad_tile3<4>(xi, grad_out, len, o, cin, i, gw);
      for (; o < cout; ++o) weight_grad_tile3<1>(xi, grad_out, len, o, cin, i, gw);
    } else {
      for (std::size_t o = 0; o < cout; ++o) {
        weight_grad_generic(xi, grad_out, len, o, cin, i, ksize, gw);
      }
    }
  }
}

constexpr KernelSet kAvx2{"avx2", &conv1d_avx2, &conv1d_weight_grad_avx2};

}  // namespace

const KernelSet& detail::avx2_table() noexcept { return kAvx2; }

}  // namespace handover::nn::kernels
