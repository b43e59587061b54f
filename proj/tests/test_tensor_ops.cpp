#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "eenn/layers.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace eenn;
using test_support::random_tensor;
using test_support::random_vector;

namespace {

oracle::Plane to_plane(const Tensor& t) {
  oracle::Plane p;
  p.h = t.dim(0);
  p.w = t.dim(1);
  p.c = t.dim(2);
  p.data.assign(t.data().data(), t.data().data() + t.size());
  return p;
}

std::vector<double> to_doubles(const Tensor& t) {
  return std::vector<double>(t.data().data(), t.data().data() + t.size());
}

std::vector<double> to_doubles(const VecXf& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

TEST_CASE("conv2d all-ones hand case") {
  const Tensor input = Tensor::constant({3, 3, 1}, 1.0f);
  const Tensor kernel = Tensor::constant({2, 2, 1, 1}, 1.0f);
  const auto [out, macs] =
      conv2d(input, kernel, VecXf::Zero(1), Stride{1, 1}, Padding::kValid);
  CHECK(out.shape() == std::vector<Index>{2, 2, 1});
  for (Index i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 4.0f);
  CHECK(macs == MacCount(16));
}

TEST_CASE("conv2d identity 1x1 kernel passes input through") {
  std::mt19937_64 rng(7);
  const Tensor input = random_tensor({4, 5, 3}, rng);
  Tensor kernel({1, 1, 3, 3});
  for (Index c = 0; c < 3; ++c) kernel(0, 0, c, c) = 1.0f;
  const auto [out, macs] =
      conv2d(input, kernel, VecXf::Zero(3), Stride{1, 1}, Padding::kValid);
  CHECK(out.data() == input.data());
  CHECK(macs == MacCount(3 * 3 * 4 * 5));
}

TEST_CASE("conv2d matches the naive loop-nest reference") {
  std::mt19937_64 rng(11);
  const Tensor input = random_tensor({5, 5, 2}, rng);
  const Tensor kernel = random_tensor({3, 3, 2, 4}, rng);
  const VecXf bias = random_vector(4, rng);
  const auto [out, macs] =
      conv2d(input, kernel, bias, Stride{1, 1}, Padding::kValid);
  CHECK(macs == MacCount(3 * 3 * 2 * 4 * 3 * 3));

  const oracle::Plane ref = oracle::conv2d_ref(
      to_plane(input), to_doubles(kernel), 3, 3, 4, to_doubles(bias), 1, 1,
      false);
  REQUIRE(out.size() == static_cast<Index>(ref.data.size()));
  for (Index i = 0; i < out.size(); ++i) {
    CHECK(std::abs(out.data()[i] - ref.data[static_cast<std::size_t>(i)]) <
          1e-5);
  }
}

TEST_CASE("conv2d same padding matches the reference") {
  std::mt19937_64 rng(12);
  const Tensor input = random_tensor({6, 7, 3}, rng);
  const Tensor kernel = random_tensor({3, 3, 3, 2}, rng);
  const VecXf bias = random_vector(2, rng);
  const auto [out, macs] =
      conv2d(input, kernel, bias, Stride{2, 2}, Padding::kSame);
  const oracle::Plane ref = oracle::conv2d_ref(
      to_plane(input), to_doubles(kernel), 3, 3, 2, to_doubles(bias), 2, 2,
      true);
  CHECK(out.dim(0) == ref.h);
  CHECK(out.dim(1) == ref.w);
  CHECK(macs == MacCount(3 * 3 * 3 * 2 * ref.h * ref.w));
  for (Index i = 0; i < out.size(); ++i) {
    CHECK(std::abs(out.data()[i] - ref.data[static_cast<std::size_t>(i)]) <
          1e-5);
  }
}

TEST_CASE("conv2d rejects shape mismatches") {
  const Tensor input = Tensor::constant({3, 3, 2}, 1.0f);
  const Tensor bad_channels = Tensor::constant({2, 2, 3, 1}, 1.0f);
  CHECK_THROWS_AS(conv2d(input, bad_channels, VecXf::Zero(1), Stride{1, 1},
                         Padding::kValid),
                  ShapeError);
  const Tensor too_big = Tensor::constant({4, 4, 2, 1}, 1.0f);
  CHECK_THROWS_AS(
      conv2d(input, too_big, VecXf::Zero(1), Stride{1, 1}, Padding::kValid),
      ShapeError);
  const Tensor kernel = Tensor::constant({2, 2, 2, 2}, 1.0f);
  CHECK_THROWS_AS(
      conv2d(input, kernel, VecXf::Zero(3), Stride{1, 1}, Padding::kValid),
      ShapeError);
}

TEST_CASE("depthwise_conv2d all-ones hand case") {
  const Tensor input = Tensor::constant({4, 4, 2}, 1.0f);
  const Tensor kernel = Tensor::constant({2, 2, 2}, 1.0f);
  const auto [out, macs] = depthwise_conv2d(input, kernel, VecXf::Zero(2),
                                            Stride{1, 1}, Padding::kValid);
  CHECK(out.shape() == std::vector<Index>{3, 3, 2});
  for (Index i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 4.0f);
  CHECK(macs == MacCount(2 * 2 * 2 * 3 * 3));
}

TEST_CASE("depthwise_conv2d matches the naive reference") {
  std::mt19937_64 rng(23);
  const Tensor input = random_tensor({6, 5, 4}, rng);
  const Tensor kernel = random_tensor({3, 2, 4}, rng);
  const VecXf bias = random_vector(4, rng);
  const auto out =
      depthwise_conv2d(input, kernel, bias, Stride{1, 2}, Padding::kSame);
  const oracle::Plane ref = oracle::depthwise_ref(
      to_plane(input), to_doubles(kernel), 3, 2, to_doubles(bias), 1, 2, true);
  REQUIRE(out.value.size() == static_cast<Index>(ref.data.size()));
  for (Index i = 0; i < out.value.size(); ++i) {
    CHECK(std::abs(out.value.data()[i] -
                   ref.data[static_cast<std::size_t>(i)]) < 1e-5);
  }
}

TEST_CASE("depthwise + pointwise MAC ratio vs standard conv") {
  std::mt19937_64 rng(13);
  const Tensor input = random_tensor({8, 8, 8}, rng);
  const Tensor dw_kernel = random_tensor({3, 3, 8}, rng);
  const auto dw = depthwise_conv2d(input, dw_kernel, VecXf::Zero(8),
                                   Stride{1, 1}, Padding::kValid);
  const Tensor pw_kernel = random_tensor({1, 1, 8, 8}, rng);
  const auto pw = conv2d(dw.value, pw_kernel, VecXf::Zero(8), Stride{1, 1},
                         Padding::kValid);
  const Tensor std_kernel = random_tensor({3, 3, 8, 8}, rng);
  const auto full = conv2d(input, std_kernel, VecXf::Zero(8), Stride{1, 1},
                           Padding::kValid);

  const double ratio =
      double(dw.macs.value + pw.macs.value) / double(full.macs.value);
  CHECK(ratio == doctest::Approx((72.0 + 64.0) / 576.0).epsilon(1e-12));
}

TEST_CASE("separable MAC identity 1/Cout + 1/(Kh*Kw) over random configs") {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<Index> kdist(1, 4);
  std::uniform_int_distribution<Index> cdist(1, 8);
  std::uniform_int_distribution<Index> sdist(6, 12);
  for (int it = 0; it < 20; ++it) {
    const Index kh = kdist(rng), kw = kdist(rng);
    const Index c = cdist(rng), cout = cdist(rng);
    const Index h = sdist(rng), w = sdist(rng);
    const Tensor input = random_tensor({h, w, c}, rng);
    const auto dw =
        depthwise_conv2d(input, random_tensor({kh, kw, c}, rng),
                         VecXf::Zero(c), Stride{1, 1}, Padding::kValid);
    const auto pw = conv2d(dw.value, random_tensor({1, 1, c, cout}, rng),
                           VecXf::Zero(cout), Stride{1, 1}, Padding::kValid);
    const auto full = conv2d(input, random_tensor({kh, kw, c, cout}, rng),
                             VecXf::Zero(cout), Stride{1, 1}, Padding::kValid);
    // exact integer form of sep/std == 1/Cout + 1/(Kh*Kw)
    CHECK((dw.macs.value + pw.macs.value) *
              static_cast<std::uint64_t>(kh * kw * cout) ==
          full.macs.value * static_cast<std::uint64_t>(kh * kw + cout));
  }
}

TEST_CASE("single-channel depthwise equals conv2d") {
  std::mt19937_64 rng(15);
  const Tensor input = random_tensor({6, 6, 1}, rng);
  const Tensor kernel = random_tensor({3, 3, 1}, rng);
  const VecXf bias = random_vector(1, rng);
  const auto dw =
      depthwise_conv2d(input, kernel, bias, Stride{1, 1}, Padding::kValid);
  const auto cv = conv2d(input, kernel.reshaped({3, 3, 1, 1}), bias,
                         Stride{1, 1}, Padding::kValid);
  CHECK(dw.value.data() == cv.value.data());
  CHECK(dw.macs == cv.macs);
}

TEST_CASE("depthwise_conv2d rejects channel mismatch") {
  const Tensor input = Tensor::constant({4, 4, 2}, 1.0f);
  const Tensor kernel = Tensor::constant({2, 2, 3}, 1.0f);
  CHECK_THROWS_AS(depthwise_conv2d(input, kernel, VecXf::Zero(3), Stride{1, 1},
                                   Padding::kValid),
                  ShapeError);
}

TEST_CASE("pool2d hand cases") {
  Tensor input({2, 2, 1});
  input(0, 0, 0) = 1.0f;
  input(0, 1, 0) = 2.0f;
  input(1, 0, 0) = 3.0f;
  input(1, 1, 0) = 4.0f;
  const auto mx = pool2d(input, PoolKind::kMax, Window{2, 2}, Stride{2, 2});
  CHECK(mx.value.shape() == std::vector<Index>{1, 1, 1});
  CHECK(mx.value.data()[0] == 4.0f);
  CHECK(mx.macs == MacCount(0));
  const auto av = pool2d(input, PoolKind::kAvg, Window{2, 2}, Stride{2, 2});
  CHECK(av.value.data()[0] == 2.5f);
  CHECK(av.macs == MacCount(1));
}

TEST_CASE("pool2d matches the reference on a random input") {
  std::mt19937_64 rng(16);
  const Tensor input = random_tensor({7, 7, 3}, rng);
  for (const PoolKind kind : {PoolKind::kMax, PoolKind::kAvg}) {
    const auto out = pool2d(input, kind, Window{3, 3}, Stride{2, 2});
    const oracle::Plane ref =
        oracle::pool_ref(to_plane(input), kind == PoolKind::kMax, 3, 3, 2, 2);
    REQUIRE(out.value.size() == static_cast<Index>(ref.data.size()));
    for (Index i = 0; i < out.value.size(); ++i) {
      CHECK(std::abs(out.value.data()[i] -
                     ref.data[static_cast<std::size_t>(i)]) < 1e-5);
    }
  }
}

TEST_CASE("pool2d rejects oversized windows") {
  const Tensor input = Tensor::constant({2, 2, 1}, 1.0f);
  CHECK_THROWS_AS(pool2d(input, PoolKind::kMax, Window{3, 3}, Stride{1, 1}),
                  ShapeError);
}

TEST_CASE("dense hand cases") {
  std::mt19937_64 rng(17);
  const VecXf input = random_vector(4, rng);
  Tensor identity({4, 4});
  for (Index i = 0; i < 4; ++i) identity(i, i) = 1.0f;
  const auto id = dense(input, identity, VecXf::Zero(4));
  CHECK(id.value == input);

  VecXf x(3);
  x << 1.0f, 2.0f, 3.0f;
  Tensor w({3, 2});
  w(0, 0) = 1.0f;
  w(1, 1) = 1.0f;
  w(2, 0) = 1.0f;
  w(2, 1) = 1.0f;
  const auto out = dense(x, w, VecXf::Zero(2));
  CHECK(out.value[0] == 4.0f);
  CHECK(out.value[1] == 5.0f);
  CHECK(out.macs == MacCount(6));
}

TEST_CASE("dense matches the reference and rejects mismatches") {
  std::mt19937_64 rng(18);
  const VecXf x = random_vector(9, rng);
  const Tensor w = random_tensor({9, 5}, rng);
  const VecXf b = random_vector(5, rng);
  const auto out = dense(x, w, b);
  const std::vector<double> ref =
      oracle::dense_ref(to_doubles(x), to_doubles(w), to_doubles(b), 9, 5);
  for (Index i = 0; i < 5; ++i) {
    CHECK(std::abs(out.value[i] - ref[static_cast<std::size_t>(i)]) < 1e-5);
  }
  CHECK_THROWS_AS(dense(random_vector(4, rng), w, b), ShapeError);
  CHECK_THROWS_AS(dense(x, w, random_vector(3, rng)), ShapeError);
}

TEST_CASE("softmax symmetry, stability and monotonicity") {
  VecXf zeros = VecXf::Zero(3);
  const VecXf thirds = softmax(zeros);
  for (int i = 0; i < 3; ++i) {
    CHECK(thirds[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  }

  VecXf spiky(2);
  spiky << 1000.0f, 0.0f;
  const VecXf stable = softmax(spiky);
  CHECK(stable.allFinite());
  CHECK(stable[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(stable[1] < 1e-6f);

  std::mt19937_64 rng(19);
  for (int it = 0; it < 100; ++it) {
    const VecXf v = random_vector(5, rng, -10.0f, 10.0f);
    const VecXf p = softmax(v);
    CHECK(argmax(p) == argmax(v));
    CHECK(std::abs(p.sum() - 1.0f) < 1e-6f);
    CHECK(p.minCoeff() > 0.0f);
  }

  VecXf bad(2);
  bad << 1.0f, std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(softmax(bad), std::domain_error);
  CHECK_THROWS_AS(softmax(VecXf()), ShapeError);
}

TEST_CASE("reorder_time_antenna hand cases") {
  std::mt19937_64 rng(20);
  const Tensor single = random_tensor({1, 3, 4, 2}, rng);
  const Tensor dropped = reorder_time_antenna(single);
  CHECK(dropped.shape() == std::vector<Index>{3, 4, 2});
  CHECK(dropped.data() == single.data());

  Tensor tiny({2, 1, 1, 2});
  tiny.data() << 1.0f, 2.0f, 3.0f, 4.0f;  // [[a,b],[c,d]]
  const Tensor out = reorder_time_antenna(tiny);
  CHECK(out.shape() == std::vector<Index>{1, 1, 4});
  CHECK(out.data()[0] == 1.0f);
  CHECK(out.data()[1] == 2.0f);
  CHECK(out.data()[2] == 3.0f);
  CHECK(out.data()[3] == 4.0f);

  CHECK_THROWS_AS(reorder_time_antenna(Tensor::constant({2, 2, 2}, 0.0f)),
                  ShapeError);
}

TEST_CASE("reorder_time_antenna round-trips through the inverse") {
  std::mt19937_64 rng(21);
  const Tensor input = random_tensor({8, 4, 4, 3}, rng);
  const Tensor out = reorder_time_antenna(input);
  const std::vector<double> back =
      oracle::reorder_inverse_ref(to_doubles(out), 8, 4, 4, 3);
  REQUIRE(back.size() == static_cast<std::size_t>(input.size()));
  for (Index i = 0; i < input.size(); ++i) {
    CHECK(static_cast<double>(input.data()[i]) ==
          back[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("euclidean_distance analytic cases") {
  VecXf a(3), b(3);
  a << 1.0f, 0.0f, 0.0f;
  b << 1.0f, 0.0f, 0.0f;
  CHECK(euclidean_distance(a, b) == 0.0f);

  VecXf c(2), d(2);
  c << 1.0f, 0.0f;
  d << 0.0f, 1.0f;
  CHECK(euclidean_distance(c, d) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-5));

  VecXf e(3), f(3);
  e << 0.9f, 0.1f, 0.0f;
  f << 1.0f, 0.0f, 0.0f;
  CHECK(euclidean_distance(e, f) == doctest::Approx(0.14142).epsilon(1e-4));

  CHECK(euclidean_distance(c, d) == euclidean_distance(d, c));
  CHECK_THROWS_AS(euclidean_distance(a, c), ShapeError);
}

TEST_CASE("argmax follows the lowest-index tie-break") {
  VecXf v(3);
  v << 0.1f, 0.7f, 0.2f;
  CHECK(argmax(v) == 1);
  VecXf tie(2);
  tie << 0.5f, 0.5f;
  CHECK(argmax(tie) == 0);
  CHECK_THROWS_AS(argmax(VecXf()), ShapeError);

  std::mt19937_64 rng(22);
  for (int it = 0; it < 1000; ++it) {
    const VecXf r = random_vector(8, rng);
    CHECK(argmax(r) == oracle::argmax_ref(to_doubles(r)));
  }
}

TEST_CASE("tensor and MacCount invariants") {
  CHECK_THROWS_AS(Tensor({2, 0, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor(std::vector<Index>{}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, VecXf::Zero(5)), ShapeError);
  const Tensor t = Tensor::constant({2, 3}, 1.5f);
  CHECK(t.size() == 6);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
  CHECK(t.reshaped({3, 2}).dim(0) == 3);

  MacCount a(3), b(4);
  CHECK(a + b == MacCount(7));
  a += b;
  CHECK(a.value == 7);
  CHECK(MacCount(3) < MacCount(4));
}
