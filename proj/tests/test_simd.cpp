#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include "nst/errors.hpp"
#include "nst/simd/kernels.hpp"

using namespace nst;
using simd::Isa;

namespace {

std::vector<float> random_floats(std::size_t n, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

class SimdEquivalence : public ::testing::TestWithParam<std::size_t> {
 protected:
  void SetUp() override {
    if (!simd::isa_available(Isa::avx2)) GTEST_SKIP() << "AVX2 not available";
  }
  const simd::KernelTable& scalar = simd::table_for(Isa::scalar);
  const simd::KernelTable& vec = simd::isa_available(Isa::avx2) ? simd::table_for(Isa::avx2) : scalar;
};

}  // namespace

TEST(SimdDispatch, ScalarAlwaysAvailable) {
  EXPECT_TRUE(simd::isa_available(Isa::scalar));
  EXPECT_EQ(simd::table_for(Isa::scalar).isa, Isa::scalar);
  EXPECT_EQ(simd::isa_name(Isa::avx2), "avx2");
}

TEST(SimdDispatch, ActiveTableIsAnAvailableIsa) {
  EXPECT_TRUE(simd::isa_available(simd::active().isa));
}

TEST_P(SimdEquivalence, AxpyIsBitExact) {
  const std::size_t n = GetParam();
  const auto x = random_floats(n, 1);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = b[i] = 0.125 * static_cast<double>(i);
  scalar.axpy_f64(a.data(), x.data(), 0.3, n);
  vec.axpy_f64(b.data(), x.data(), 0.3, n);
  EXPECT_TRUE(bit_equal(a, b));
}

TEST_P(SimdEquivalence, ReductionsAgreeToRounding) {
  const std::size_t n = GetParam();
  const auto a = random_floats(n, 2);
  const auto b = random_floats(n, 3);
  const double tol = 1e-12 * static_cast<double>(n + 1);
  EXPECT_NEAR(scalar.dot_f64(a.data(), b.data(), n), vec.dot_f64(a.data(), b.data(), n), tol);
  EXPECT_NEAR(scalar.sum_sq_diff_f64(a.data(), b.data(), n), vec.sum_sq_diff_f64(a.data(), b.data(), n), tol);
}

TEST_P(SimdEquivalence, ReluAndBackwardAreBitExact) {
  const std::size_t n = GetParam();
  auto in = random_floats(n, 4);
  if (n > 3) {
    in[0] = 0.0f;
    in[1] = -0.0f;
    in[2] = std::numeric_limits<float>::quiet_NaN();
  }
  const auto up = random_floats(n, 5);
  std::vector<float> o1(n), o2(n), g1(n), g2(n);
  scalar.relu(o1.data(), in.data(), n);
  vec.relu(o2.data(), in.data(), n);
  EXPECT_TRUE(bit_equal(o1, o2));
  scalar.relu_backward(g1.data(), up.data(), in.data(), n);
  vec.relu_backward(g2.data(), up.data(), in.data(), n);
  EXPECT_TRUE(bit_equal(g1, g2));
}

TEST_P(SimdEquivalence, AdamIsBitExactOverSteps) {
  const std::size_t n = GetParam();
  auto p1 = random_floats(n, 6);
  auto p2 = p1;
  std::vector<float> m1(n, 0.0f), v1(n, 0.0f), m2(n, 0.0f), v2(n, 0.0f);
  double b1 = 1.0, b2 = 1.0;
  for (int t = 1; t <= 5; ++t) {
    const auto g = random_floats(n, 100 + t, -50.0f, 50.0f);
    b1 *= 0.9;
    b2 *= 0.999;
    const simd::AdamStep s{0.05f, 0.9f, 0.999f, 1e-8f, static_cast<float>(1.0 - b1), static_cast<float>(1.0 - b2)};
    scalar.adam_update(p1.data(), m1.data(), v1.data(), g.data(), n, s);
    vec.adam_update(p2.data(), m2.data(), v2.data(), g.data(), n, s);
  }
  EXPECT_TRUE(bit_equal(p1, p2));
  EXPECT_TRUE(bit_equal(m1, m2));
  EXPECT_TRUE(bit_equal(v1, v2));
}

INSTANTIATE_TEST_SUITE_P(Lengths, SimdEquivalence, ::testing::Values(0, 1, 7, 8, 9, 31, 64, 1000));

TEST(SimdScalar, AdamFirstStepMovesByLearningRate) {
  // With bias correction the first step is lr * sign(g) up to eps.
  float p[2] = {1.0f, 1.0f};
  float m[2] = {0, 0}, v[2] = {0, 0};
  const float g[2] = {3.0f, -0.5f};
  const simd::AdamStep s{0.1f, 0.9f, 0.999f, 1e-8f, 0.1f, 0.001f};
  simd::table_for(Isa::scalar).adam_update(p, m, v, g, 2, s);
  EXPECT_NEAR(p[0], 0.9f, 1e-6);
  EXPECT_NEAR(p[1], 1.1f, 1e-6);
}

TEST(SimdScalar, DotMatchesDefinition) {
  const float a[3] = {1, 2, 3}, b[3] = {4, -5, 6};
  EXPECT_EQ(simd::table_for(Isa::scalar).dot_f64(a, b, 3), 12.0);
  EXPECT_EQ(simd::table_for(Isa::scalar).sum_sq_diff_f64(a, b, 3), 9.0 + 49.0 + 9.0);
}
