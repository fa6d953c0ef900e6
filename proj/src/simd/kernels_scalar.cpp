#include "nst/simd/kernels.hpp"

#include <cmath>

namespace nst::simd::detail {
namespace {

void axpy_f64(double* acc, const float* x, double wd, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += wd * static_cast<double>(x[i]);
}

double dot_f64(const float* a, const float* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

double sum_sq_diff_f64(const float* a, const float* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

void relu(float* out, const float* in, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
}

void relu_backward(float* grad, const float* upstream, const float* in, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) grad[i] = in[i] > 0.0f ? upstream[i] : 0.0f;
}

void adam_update(float* param, float* m, float* v, const float* grad, std::size_t n,
                 const AdamStep& s) {
  const float one_minus_b1 = 1.0f - s.beta1;
  const float one_minus_b2 = 1.0f - s.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const float g = grad[i];
    m[i] = s.beta1 * m[i] + one_minus_b1 * g;
    v[i] = s.beta2 * v[i] + one_minus_b2 * (g * g);
    const float m_hat = m[i] / s.bias_correction1;
    const float v_hat = v[i] / s.bias_correction2;
    param[i] = param[i] - s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

constexpr KernelTable kScalar{
    Isa::scalar, axpy_f64, dot_f64, sum_sq_diff_f64, relu, relu_backward, adam_update,
};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

}  // namespace nst::simd::detail
