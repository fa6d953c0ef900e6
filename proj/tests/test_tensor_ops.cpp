#include <gtest/gtest.h>

#include <cmath>

#include "nst/errors.hpp"
#include "nst/tensor/gradcheck.hpp"
#include "nst/tensor/ops.hpp"
#include "test_support.hpp"

using namespace nst;
using nst::testing::max_abs_diff;
using nst::testing::random_tensor;

namespace {

Tensor from(Shape s, std::vector<float> v) { return Tensor(s, std::move(v)); }

// Direct sliding-window cross-correlation with explicit zero padding.
Tensor conv_oracle(const Tensor& in, const ops::ConvWeights& w, const ops::ConvGeometry& g) {
  const int ho = (in.height() + 2 * g.pad_h - w.kernel_h) / g.stride_h + 1;
  const int wo = (in.width() + 2 * g.pad_w - w.kernel_w) / g.stride_w + 1;
  Tensor out(Shape{w.out_channels, ho, wo});
  for (int co = 0; co < w.out_channels; ++co) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        double s = w.bias.empty() ? 0.0 : w.bias[co];
        for (int ci = 0; ci < w.in_channels; ++ci) {
          for (int ky = 0; ky < w.kernel_h; ++ky) {
            for (int kx = 0; kx < w.kernel_w; ++kx) {
              const int iy = oy * g.stride_h - g.pad_h + ky;
              const int ix = ox * g.stride_w - g.pad_w + kx;
              if (iy < 0 || ix < 0 || iy >= in.height() || ix >= in.width()) continue;
              const std::size_t wi = ((static_cast<std::size_t>(co) * w.in_channels + ci) * w.kernel_h + ky) * w.kernel_w + kx;
              s += static_cast<double>(w.weight[wi]) * in.at(ci, iy, ix);
            }
          }
        }
        out.at(co, oy, ox) = static_cast<float>(s);
      }
    }
  }
  return out;
}

ops::ConvWeights random_conv(int cout, int cin, int kh, int kw, std::uint64_t seed, bool bias) {
  ops::ConvWeights w{cout, cin, kh, kw, {}, {}};
  const Tensor wt = random_tensor(Shape{1, 1, static_cast<int>(w.weight_count())}, seed);
  w.weight.assign(wt.data().begin(), wt.data().end());
  if (bias) {
    const Tensor b = random_tensor(Shape{1, 1, cout}, seed + 1);
    w.bias.assign(b.data().begin(), b.data().end());
  }
  return w;
}

// f(x) = sum_i r_i * op(x)_i with a fixed random projection r, so the analytic
// gradient is the op's backward applied to r.
template <typename Fwd, typename Bwd>
ScalarFunction projected(Fwd fwd, Bwd bwd, Shape out_shape, std::uint64_t seed) {
  const Tensor r = random_tensor(out_shape, seed);
  return ScalarFunction{
      [fwd, r](const Tensor& x) {
        const Tensor y = fwd(x);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(r[i]) * y[i];
        return s;
      },
      [bwd, r](const Tensor& x) { return bwd(r, x); }};
}

}  // namespace

TEST(Conv2d, IdentityKernelOnOnes) {
  const Tensor x(Shape{1, 3, 3}, 1.0f);
  const ops::ConvWeights w{1, 1, 1, 1, {1.0f}, {0.0f}};
  EXPECT_EQ(ops::conv2d_forward(x, w, {}), x);
}

TEST(Conv2d, TwoByTwoSum) {
  const Tensor x = from(Shape{1, 2, 2}, {1, 2, 3, 4});
  const ops::ConvWeights w{1, 1, 2, 2, {1, 1, 1, 1}, {}};
  const Tensor y = ops::conv2d_forward(x, w, {});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(y[0], 10.0f);
}

TEST(Conv2d, PaddedTwoByTwo) {
  const Tensor x = from(Shape{1, 2, 2}, {1, 2, 3, 4});
  const ops::ConvWeights w{1, 1, 2, 2, {1, 1, 1, 1}, {}};
  const Tensor y = ops::conv2d_forward(x, w, {1, 1, 1, 1});
  ASSERT_EQ(y.shape(), (Shape{1, 3, 3}));
  EXPECT_EQ(y.at(0, 1, 1), 10.0f);
  EXPECT_EQ(y.at(0, 0, 0), 1.0f);
  EXPECT_EQ(y.at(0, 0, 2), 2.0f);
  EXPECT_EQ(y.at(0, 2, 0), 3.0f);
  EXPECT_EQ(y.at(0, 2, 2), 4.0f);
  EXPECT_EQ(y, conv_oracle(x, w, {1, 1, 1, 1}));
}

TEST(Conv2d, MatchesSlidingWindowOracle) {
  struct Case { int cin, cout, h, w, kh, kw, sh, sw, ph, pw; };
  const Case cases[] = {
      {3, 4, 7, 6, 3, 3, 1, 1, 1, 1}, {2, 5, 9, 9, 3, 3, 2, 2, 1, 1}, {4, 3, 8, 5, 1, 7, 1, 1, 0, 3},
      {1, 2, 11, 11, 7, 7, 2, 2, 3, 3}, {3, 3, 5, 8, 3, 1, 1, 2, 1, 0}, {6, 2, 4, 4, 1, 1, 1, 1, 0, 0},
  };
  std::uint64_t seed = 10;
  for (const auto& c : cases) {
    const Tensor x = random_tensor(Shape{c.cin, c.h, c.w}, seed++);
    const auto w = random_conv(c.cout, c.cin, c.kh, c.kw, seed++, true);
    const ops::ConvGeometry g{c.sh, c.sw, c.ph, c.pw};
    const Tensor y = ops::conv2d_forward(x, w, g);
    const Tensor ref = conv_oracle(x, w, g);
    ASSERT_EQ(y.shape(), ref.shape());
    EXPECT_LT(max_abs_diff(y, ref), 1e-5);
  }
}

TEST(Conv2d, ShapeErrorsNameTheLayer) {
  const Tensor x(Shape{2, 4, 4});
  const ops::ConvWeights w{1, 3, 3, 3, std::vector<float>(27, 1.0f), {}};
  try {
    ops::conv2d_forward(x, w, {}, "block3.conv");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("block3.conv"), std::string::npos);
  }
  const ops::ConvWeights big{1, 2, 7, 7, std::vector<float>(98, 1.0f), {}};
  EXPECT_THROW(ops::conv2d_forward(x, big, {}, "c"), ConfigError);
}

TEST(Conv2dBackward, ZeroUpstreamGivesZero) {
  const auto w = random_conv(2, 3, 3, 3, 1, false);
  const Shape in{3, 5, 5};
  const Tensor up(ops::conv2d_output_shape(in, w, {1, 1, 1, 1}));
  const Tensor g = ops::conv2d_backward(up, in, w, {1, 1, 1, 1}).wrt_input;
  EXPECT_EQ(g, Tensor(in));
}

TEST(Conv2dBackward, IdentityKernelPassesUpstream) {
  const ops::ConvWeights w{1, 1, 1, 1, {1.0f}, {}};
  const Tensor up = random_tensor(Shape{1, 4, 4}, 3);
  EXPECT_EQ(ops::conv2d_backward(up, up.shape(), w, {}).wrt_input, up);
}

TEST(Conv2dBackward, MismatchedUpstreamIsInternalError) {
  const ops::ConvWeights w{1, 1, 3, 3, std::vector<float>(9, 1.0f), {}};
  EXPECT_THROW(ops::conv2d_backward(Tensor(Shape{1, 4, 4}), Shape{1, 4, 4}, w, {}), InternalError);
}

TEST(Conv2dBackward, FiniteDifferenceSpecCase) {
  const Tensor x = random_tensor(Shape{1, 4, 4}, 5);
  const auto w = random_conv(1, 1, 3, 3, 6, true);
  const Shape out = ops::conv2d_output_shape(x.shape(), w, {});
  const auto f = projected([&](const Tensor& t) { return ops::conv2d_forward(t, w, {}); },
                           [&](const Tensor& r, const Tensor& t) { return ops::conv2d_backward(r, t.shape(), w, {}).wrt_input; },
                           out, 7);
  GradCheckOptions o;
  o.eps = 1e-3;
  EXPECT_LT(finite_difference_check(f, x, o).max_relative_error, 1e-3);
}

TEST(Conv2dBackward, FiniteDifferenceStridedPadded) {
  const Tensor x = random_tensor(Shape{3, 7, 6}, 8);
  const auto w = random_conv(4, 3, 3, 3, 9, false);
  const ops::ConvGeometry g{2, 2, 1, 1};
  const Shape out = ops::conv2d_output_shape(x.shape(), w, g);
  const auto f = projected([&](const Tensor& t) { return ops::conv2d_forward(t, w, g); },
                           [&](const Tensor& r, const Tensor& t) { return ops::conv2d_backward(r, t.shape(), w, g).wrt_input; },
                           out, 10);
  GradCheckOptions o;
  o.eps = 1e-2;  // exact for linear maps; the larger step only reduces rounding noise
  EXPECT_LT(finite_difference_check(f, x, o).max_relative_error, 1e-3);
}

TEST(Relu, ForwardAndMask) {
  const Tensor x = from(Shape{1, 1, 3}, {-1, 0, 2});
  EXPECT_EQ(ops::relu(x), from(Shape{1, 1, 3}, {0, 0, 2}));
  const Tensor up(Shape{1, 1, 3}, 5.0f);
  EXPECT_EQ(ops::relu_backward(up, x).wrt_input, from(Shape{1, 1, 3}, {0, 0, 5}));
}

TEST(Relu, FiniteDifferenceAwayFromKinks) {
  const Tensor x = random_tensor(Shape{1, 8, 8}, 11);
  const auto f = projected([](const Tensor& t) { return ops::relu(t); },
                           [](const Tensor& r, const Tensor& t) { return ops::relu_backward(r, t).wrt_input; },
                           x.shape(), 12);
  GradCheckOptions o;
  o.eps = 1e-3;
  o.skip = [&](const Tensor& lo, const Tensor& hi) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (lo[i] != hi[i] && std::abs(x[i]) <= 1e-2f) return true;
    }
    return false;
  };
  const auto r = finite_difference_check(f, x, o);
  EXPECT_LT(r.max_relative_error, 1e-3);
  EXPECT_GT(r.checked, 50u);
}

TEST(Pool2d, MaxAndAverage) {
  const Tensor x = from(Shape{1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(ops::pool2d(x, {ops::PoolKind::max, 2, 2, 2, 2})[0], 4.0f);
  EXPECT_EQ(ops::pool2d(x, {ops::PoolKind::avg, 2, 2, 2, 2})[0], 2.5f);
}

TEST(Pool2d, MaxTieRoutesToFirstIndex) {
  const Tensor x = from(Shape{1, 2, 2}, {7, 7, 0, 0});
  const Tensor up(Shape{1, 1, 1}, 1.0f);
  const ops::PoolGeometry g{ops::PoolKind::max, 2, 2, 2, 2};
  EXPECT_EQ(ops::pool2d_backward(up, x, g).wrt_input, from(Shape{1, 2, 2}, {1, 0, 0, 0}));
  EXPECT_EQ(ops::pool2d_argmax(x, g), std::vector<std::uint32_t>{0});
}

TEST(Pool2d, ArgmaxIsWithinChannelPlane) {
  Tensor x(Shape{2, 2, 2});
  x.at(0, 1, 0) = 5.0f;
  x.at(1, 0, 1) = 5.0f;
  const auto arg = ops::pool2d_argmax(x, {ops::PoolKind::max, 2, 2, 2, 2});
  EXPECT_EQ(arg, (std::vector<std::uint32_t>{2, 1}));
}

// Padded average windows count the zero cells, so the property is checked on
// unpadded windows only.
TEST(Pool2d, MaxDominatesAverage) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor x = random_tensor(Shape{3, 9, 9}, seed);
    for (auto [k, s, p] : {std::tuple{2, 2, 0}, std::tuple{3, 2, 0}, std::tuple{3, 1, 0}}) {
      const Tensor mx = ops::pool2d(x, {ops::PoolKind::max, k, k, s, s, p, p});
      const Tensor av = ops::pool2d(x, {ops::PoolKind::avg, k, k, s, s, p, p});
      for (std::size_t i = 0; i < mx.size(); ++i) EXPECT_GE(mx[i], av[i]);
    }
  }
}

TEST(Pool2d, FiniteDifference) {
  const Tensor x = random_tensor(Shape{2, 6, 6}, 13);
  for (auto kind : {ops::PoolKind::max, ops::PoolKind::avg}) {
    const ops::PoolGeometry g{kind, 3, 3, 2, 2, 1, 1};
    const auto f = projected([&](const Tensor& t) { return ops::pool2d(t, g); },
                             [&](const Tensor& r, const Tensor& t) { return ops::pool2d_backward(r, t, g).wrt_input; },
                             ops::pool2d_output_shape(x.shape(), g), 14);
    GradCheckOptions o;
    o.eps = 1e-3;
    // A probe that changes a window's argmax crosses a kink of the max.
    o.skip = [&](const Tensor& lo, const Tensor& hi) {
      return kind == ops::PoolKind::max && ops::pool2d_argmax(lo, g) != ops::pool2d_argmax(hi, g);
    };
    EXPECT_LT(finite_difference_check(f, x, o).max_relative_error, 1e-3);
  }
}

TEST(Pool2d, WindowLargerThanInputIsConfigError) {
  EXPECT_THROW(ops::pool2d(Tensor(Shape{1, 2, 2}), {ops::PoolKind::max, 3, 3, 1, 1}), ConfigError);
}

TEST(BatchNorm, IdentityParameters) {
  const Tensor x = random_tensor(Shape{2, 3, 3}, 15);
  const ops::BatchNormParams p{{1, 1}, {0, 0}, {0, 0}, {1, 1}, 0.0f};
  EXPECT_EQ(ops::batchnorm_inference(x, p), x);
}

TEST(BatchNorm, ShiftAndScale) {
  const Tensor x(Shape{1, 2, 2}, 5.0f);
  const ops::BatchNormParams p{{2}, {3}, {5}, {1}, 0.0f};
  EXPECT_EQ(ops::batchnorm_inference(x, p), Tensor(Shape{1, 2, 2}, 3.0f));
}

TEST(BatchNorm, NonPositiveVarianceIsConfigError) {
  const ops::BatchNormParams p{{1}, {0}, {0}, {-1}, 0.5f};
  EXPECT_THROW(ops::batchnorm_inference(Tensor(Shape{1, 2, 2}), p), ConfigError);
  const ops::BatchNormParams short_p{{1}, {0}, {0}, {1}, 1e-5f};
  EXPECT_THROW(ops::batchnorm_inference(Tensor(Shape{2, 2, 2}), short_p), ConfigError);
}

TEST(BatchNorm, FiniteDifference) {
  const Tensor x = random_tensor(Shape{2, 3, 3}, 16);
  const ops::BatchNormParams p{{1.5f, -0.7f}, {0.2f, 0.1f}, {0.3f, -0.2f}, {0.8f, 2.0f}, 1e-5f};
  const auto f = projected([&](const Tensor& t) { return ops::batchnorm_inference(t, p); },
                           [&](const Tensor& r, const Tensor&) { return ops::batchnorm_backward(r, p).wrt_input; },
                           x.shape(), 17);
  GradCheckOptions o;
  o.eps = 1e-2;
  EXPECT_LT(finite_difference_check(f, x, o).max_relative_error, 1e-3);
}

TEST(AddConcat, AddZerosIsIdentity) {
  const Tensor x = random_tensor(Shape{2, 3, 3}, 18);
  EXPECT_EQ(ops::add(x, Tensor(x.shape())), x);
  EXPECT_THROW(ops::add(x, Tensor(Shape{2, 3, 4})), ConfigError);
}

TEST(AddConcat, AddBackwardCopiesUpstream) {
  const Tensor g = random_tensor(Shape{1, 2, 2}, 19);
  const auto [a, b] = ops::add_backward(g);
  EXPECT_EQ(a, g);
  EXPECT_EQ(b, g);
}

TEST(AddConcat, ConcatStacksChannels) {
  const Tensor a = random_tensor(Shape{1, 2, 2}, 20);
  const Tensor b = random_tensor(Shape{3, 2, 2}, 21);
  const Tensor* parts[] = {&a, &b};
  const Tensor c = ops::concat_channels(parts);
  ASSERT_EQ(c.shape(), (Shape{4, 2, 2}));
  EXPECT_EQ(c.at(0, 1, 1), a.at(0, 1, 1));
  EXPECT_EQ(c.at(3, 0, 1), b.at(2, 0, 1));

  const int counts[] = {1, 3};
  const auto back = ops::concat_backward(c, counts);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], a);
  EXPECT_EQ(back[1], b);

  const Tensor d(Shape{1, 3, 2});
  const Tensor* bad[] = {&a, &d};
  EXPECT_THROW(ops::concat_channels(bad), ConfigError);
}

TEST(GradCheck, LinearMapIsExact) {
  const Tensor x = random_tensor(Shape{2, 3, 3}, 22);
  const Tensor r = random_tensor(x.shape(), 23);
  const ScalarFunction f{[&](const Tensor& t) {
                           double s = 0.0;
                           for (std::size_t i = 0; i < t.size(); ++i) s += static_cast<double>(r[i]) * t[i];
                           return s;
                         },
                         [&](const Tensor&) { return r; }};
  for (double eps : {1e-2, 1e-3}) {
    GradCheckOptions o;
    o.eps = eps;
    EXPECT_LT(finite_difference_check(f, x, o).max_relative_error, 1e-6);
  }
}

TEST(GradCheck, CompositeConvReluPool) {
  const Tensor x = random_tensor(Shape{2, 6, 6}, 24);
  const auto w = random_conv(3, 2, 3, 3, 25, true);
  const ops::ConvGeometry cg{1, 1, 1, 1};
  const ops::PoolGeometry pg{ops::PoolKind::max, 2, 2, 2, 2};
  auto fwd_parts = [&](const Tensor& t) {
    const Tensor c = ops::conv2d_forward(t, w, cg);
    const Tensor r = ops::relu(c);
    return std::tuple{c, r, ops::pool2d(r, pg)};
  };
  const Shape out = ops::pool2d_output_shape(ops::conv2d_output_shape(x.shape(), w, cg), pg);
  const auto f = projected([&](const Tensor& t) { return std::get<2>(fwd_parts(t)); },
                           [&](const Tensor& up, const Tensor& t) {
                             const auto [c, r, p] = fwd_parts(t);
                             const Tensor gr = ops::pool2d_backward(up, r, pg).wrt_input;
                             const Tensor gc = ops::relu_backward(gr, c).wrt_input;
                             return ops::conv2d_backward(gc, t.shape(), w, cg).wrt_input;
                           },
                           out, 26);
  // Piecewise linear, so any step that stays on one piece is exact; at 1e-3 the
  // float forward pass leaves ~5e-5 absolute noise, too much for small components.
  GradCheckOptions o;
  o.eps = 1e-2;
  o.skip = [&](const Tensor& lo, const Tensor& hi) {
    const auto [cl, rl, pl] = fwd_parts(lo);
    const auto [ch, rh, ph] = fwd_parts(hi);
    for (std::size_t i = 0; i < cl.size(); ++i) {
      if ((cl[i] > 0) != (ch[i] > 0)) return true;
    }
    return ops::pool2d_argmax(rl, pg) != ops::pool2d_argmax(rh, pg);
  };
  const auto r = finite_difference_check(f, x, o);
  EXPECT_LT(r.max_relative_error, 1e-3);
  EXPECT_GT(r.checked, 0u);
}

TEST(GradCheck, RejectsBadOptions) {
  const ScalarFunction f{[](const Tensor&) { return 0.0; }, [](const Tensor& t) { return Tensor(t.shape()); }};
  GradCheckOptions o;
  o.eps = 0.0;
  EXPECT_THROW(finite_difference_check(f, Tensor(Shape{1, 1, 1}), o), PreconditionError);
  o.eps = 1e-3;
  o.stencil = 3;
  EXPECT_THROW(finite_difference_check(f, Tensor(Shape{1, 1, 1}), o), PreconditionError);
}

TEST(GradCheck, FivePointStencilIsExactForQuartics) {
  const Tensor x = from(Shape{1, 1, 2}, {0.3f, -0.7f});
  const ScalarFunction f{[](const Tensor& t) {
                           const double a = t[0], b = t[1];
                           return a * a * a * a + 2 * b * b * b - a * b;
                         },
                         [](const Tensor& t) {
                           const double a = t[0], b = t[1];
                           return from(Shape{1, 1, 2}, {static_cast<float>(4 * a * a * a - b),
                                                        static_cast<float>(6 * b * b - a)});
                         }};
  GradCheckOptions o;
  o.eps = 0.5;
  o.stencil = 4;
  EXPECT_LT(finite_difference_check(f, x, o).max_relative_error, 1e-6);
}

TEST(GradCheck, SamplesRequestedCoordinateCount) {
  const Tensor x = random_tensor(Shape{1, 10, 10}, 27);
  const ScalarFunction f{[](const Tensor& t) { return static_cast<double>(t[0]); },
                         [](const Tensor& t) {
                           Tensor g(t.shape());
                           g[0] = 1.0f;
                           return g;
                         }};
  GradCheckOptions o;
  o.max_coordinates = 17;
  EXPECT_EQ(finite_difference_check(f, x, o).checked, 17u);
}

TEST(Determinism, ForwardIsBitReproducible) {
  const Tensor x = random_tensor(Shape{3, 16, 16}, 28);
  const auto w = random_conv(8, 3, 3, 3, 29, true);
  EXPECT_EQ(ops::conv2d_forward(x, w, {1, 1, 1, 1}), ops::conv2d_forward(x, w, {1, 1, 1, 1}));
}
