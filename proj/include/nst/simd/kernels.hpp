#pragma once

// Data-parallel inner loops used by the tensor kernels and the optimizer.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2 variant.
// The active table is chosen once at startup from CPUID, and can be forced with
// NST_SIMD=scalar|avx2. Kernels marked "exact" produce bit-identical results in
// every variant; the reductions marked "reassociated" sum in lane order and agree
// with the scalar reference only to rounding.

#include <cstddef>
#include <string_view>

namespace nst::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa) noexcept;

/// Precomputed per-step Adam constants (bias corrections folded in by the caller).
struct AdamStep {
  float lr;
  float beta1;
  float beta2;
  float eps;
  float bias_correction1;  // 1 - beta1^t
  float bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  /// acc[i] += w * double(x[i]), one rounding for the product and one for the sum. Exact.
  void (*axpy_f64)(double* acc, const float* x, double w, std::size_t n);
  /// sum_i double(a[i]) * double(b[i]). Reassociated.
  double (*dot_f64)(const float* a, const float* b, std::size_t n);
  /// sum_i (double(a[i]) - double(b[i]))^2. Reassociated.
  double (*sum_sq_diff_f64)(const float* a, const float* b, std::size_t n);
  /// out[i] = max(0, in[i]). Exact.
  void (*relu)(float* out, const float* in, std::size_t n);
  /// grad[i] = in[i] > 0 ? upstream[i] : 0. Exact.
  void (*relu_backward)(float* grad, const float* upstream, const float* in, std::size_t n);
  /// In-place Adam update of param with moments m, v. Exact.
  void (*adam_update)(float* param, float* m, float* v, const float* grad, std::size_t n,
                      const AdamStep& step);
};

/// Kernels for the ISA selected at startup.
const KernelTable& active() noexcept;

/// Kernels for a specific ISA; throws PreconditionError if the CPU or build lacks it.
const KernelTable& table_for(Isa isa);

bool isa_available(Isa isa) noexcept;

namespace detail {
const KernelTable& scalar_table() noexcept;
#if defined(NST_HAVE_AVX2)
const KernelTable& avx2_table() noexcept;
#endif
}  // namespace detail

}  // namespace nst::simd
