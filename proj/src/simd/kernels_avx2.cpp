// AVX2 variants. This translation unit is the only one compiled with -mavx2; its
// functions are reached solely through the dispatch table after a CPUID check.

#include <immintrin.h>

#include "nst/simd/kernels.hpp"

namespace nst::simd::detail {
namespace {

inline __m256d load4_as_f64(const float* p) { return _mm256_cvtps_pd(_mm_loadu_ps(p)); }

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void axpy_f64(double* acc, const float* x, double wd, std::size_t n) {
  const __m256d vw = _mm256_set1_pd(wd);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d a0 = _mm256_loadu_pd(acc + i);
    __m256d a1 = _mm256_loadu_pd(acc + i + 4);
    a0 = _mm256_add_pd(a0, _mm256_mul_pd(vw, load4_as_f64(x + i)));
    a1 = _mm256_add_pd(a1, _mm256_mul_pd(vw, load4_as_f64(x + i + 4)));
    _mm256_storeu_pd(acc + i, a0);
    _mm256_storeu_pd(acc + i + 4, a1);
  }
  for (; i < n; ++i) acc[i] += wd * static_cast<double>(x[i]);
}

double dot_f64(const float* a, const float* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_add_pd(s0, _mm256_mul_pd(load4_as_f64(a + i), load4_as_f64(b + i)));
    s1 = _mm256_add_pd(s1, _mm256_mul_pd(load4_as_f64(a + i + 4), load4_as_f64(b + i + 4)));
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

double sum_sq_diff_f64(const float* a, const float* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(load4_as_f64(a + i), load4_as_f64(b + i));
    const __m256d d1 = _mm256_sub_pd(load4_as_f64(a + i + 4), load4_as_f64(b + i + 4));
    s0 = _mm256_add_pd(s0, _mm256_mul_pd(d0, d0));
    s1 = _mm256_add_pd(s1, _mm256_mul_pd(d1, d1));
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

void relu(float* out, const float* in, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  // max_ps returns the second operand unless the first is strictly greater,
  // which reproduces `in > 0 ? in : 0` including NaN and -0.
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(in + i), zero));
  for (; i < n; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
}

void relu_backward(float* grad, const float* upstream, const float* in, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(in + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(grad + i, _mm256_and_ps(mask, _mm256_loadu_ps(upstream + i)));
  }
  for (; i < n; ++i) grad[i] = in[i] > 0.0f ? upstream[i] : 0.0f;
}

void adam_update(float* param, float* m, float* v, const float* grad, std::size_t n,
                 const AdamStep& s) {
  const __m256 b1 = _mm256_set1_ps(s.beta1);
  const __m256 b2 = _mm256_set1_ps(s.beta2);
  const __m256 omb1 = _mm256_set1_ps(1.0f - s.beta1);
  const __m256 omb2 = _mm256_set1_ps(1.0f - s.beta2);
  const __m256 bc1 = _mm256_set1_ps(s.bias_correction1);
  const __m256 bc2 = _mm256_set1_ps(s.bias_correction2);
  const __m256 lr = _mm256_set1_ps(s.lr);
  const __m256 eps = _mm256_set1_ps(s.eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(omb1, g));
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(omb2, _mm256_mul_ps(g, g)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 m_hat = _mm256_div_ps(mi, bc1);
    const __m256 v_hat = _mm256_div_ps(vi, bc2);
    const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(v_hat), eps);
    const __m256 step = _mm256_div_ps(_mm256_mul_ps(lr, m_hat), denom);
    _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), step));
  }
  if (i < n) {
    scalar_table().adam_update(param + i, m + i, v + i, grad + i, n - i, s);
  }
}

constexpr KernelTable kAvx2{
    Isa::avx2, axpy_f64, dot_f64, sum_sq_diff_f64, relu, relu_backward, adam_update,
};

}  // namespace

const KernelTable& avx2_table() noexcept { return kAvx2; }

}  // namespace nst::simd::detail
