#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>

#include "eenn/tensor.hpp"

// Layer primitives. Every compute layer returns its output together with the
// exact multiply-accumulate count of the mathematical operation:
//   conv2d:            Kh*Kw*Cin*Cout*Ho*Wo
//   depthwise_conv2d:  Kh*Kw*C*Ho*Wo
//   dense:             N*M
//   pool2d:            0 for max, Ho*Wo*C for avg (one accumulate chain per
//                      window); reorder/flatten/softmax cost nothing.

namespace eenn {

enum class Padding { kValid, kSame };
enum class PoolKind { kMax, kAvg };

struct Stride {
  Index h = 1;
  Index w = 1;
};

struct Window {
  Index h = 1;
  Index w = 1;
};

template <typename Scalar>
using VecX = Eigen::Vector<Scalar, Eigen::Dynamic>;
using VecXf = VecX<float>;

// non-deduced alias: lets callers pass Eigen expressions where a vector is
// expected without disturbing Scalar deduction
template <typename Scalar>
using VecArg = std::type_identity_t<VecX<Scalar>>;

template <typename Scalar>
struct LayerOut {
  TensorT<Scalar> value;
  MacCount macs;
};

template <typename Scalar>
struct VecOut {
  VecX<Scalar> value;
  MacCount macs;
};

struct ConvExtent {
  Index out = 0;
  Index pad_lo = 0;
};

/// Output extent and leading pad along one spatial axis. Valid padding
/// requires the kernel to fit; same padding pads symmetrically (extra cell at
/// the trailing edge when the total is odd).
inline ConvExtent conv_extent(Index in, Index k, Index stride, Padding padding,
                              const char* axis) {
  if (k < 1 || stride < 1) {
    throw ShapeError(std::string("kernel and stride must be >= 1 on axis ") +
                     axis);
  }
  if (padding == Padding::kValid) {
    if (k > in) {
      throw ShapeError("kernel extent " + std::to_string(k) +
                       " exceeds input extent " + std::to_string(in) +
                       " on axis " + axis);
    }
    return {(in - k) / stride + 1, 0};
  }
  const Index out = (in + stride - 1) / stride;
  const Index total = std::max<Index>((out - 1) * stride + k - in, 0);
  return {out, total / 2};
}

template <typename Scalar>
LayerOut<Scalar> conv2d(const TensorT<Scalar>& input,
                        const TensorT<Scalar>& kernel,
                        const VecArg<Scalar>& bias, Stride stride,
                        Padding padding) {
  if (input.rank() != 3) {
    throw ShapeError("conv2d expects input [H,W,Cin], got " +
                     input.shape_str());
  }
  if (kernel.rank() != 4) {
    throw ShapeError("conv2d expects kernel [Kh,Kw,Cin,Cout], got " +
                     kernel.shape_str());
  }
  const Index h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const Index kh = kernel.dim(0), kw = kernel.dim(1);
  const Index cout = kernel.dim(3);
  if (kernel.dim(2) != cin) {
    throw ShapeError("conv2d kernel input channels " +
                     std::to_string(kernel.dim(2)) +
                     " do not match input channels " + std::to_string(cin));
  }
  if (bias.size() != cout) {
    throw ShapeError("conv2d bias length " + std::to_string(bias.size()) +
                     " does not match output channels " +
                     std::to_string(cout));
  }
  const ConvExtent eh = conv_extent(h, kh, stride.h, padding, "H");
  const ConvExtent ew = conv_extent(w, kw, stride.w, padding, "W");
  TensorT<Scalar> out({eh.out, ew.out, cout});
  const MacCount macs(static_cast<std::uint64_t>(kh * kw * cin * cout) *
                      static_cast<std::uint64_t>(eh.out * ew.out));

  const Scalar* src = input.data().data();
  const Scalar* ker = kernel.data().data();
  Scalar* dst = out.data().data();

  // 1x1 stride-1 convolutions reduce to a pixelwise matrix product.
  if (kh == 1 && kw == 1 && stride.h == 1 && stride.w == 1) {
    using Mat =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> x(src, h * w, cin);
    Eigen::Map<const Mat> wk(ker, cin, cout);
    Eigen::Map<Mat> y(dst, h * w, cout);
    y.noalias() = x * wk;
    y.rowwise() += bias.transpose();
    return {std::move(out), macs};
  }

  for (Index oh = 0; oh < eh.out; ++oh) {
    for (Index ow = 0; ow < ew.out; ++ow) {
      for (Index co = 0; co < cout; ++co) {
        double acc = static_cast<double>(bias[co]);
        for (Index ki = 0; ki < kh; ++ki) {
          const Index ih = oh * stride.h + ki - eh.pad_lo;
          if (ih < 0 || ih >= h) continue;
          for (Index kj = 0; kj < kw; ++kj) {
            const Index iw = ow * stride.w + kj - ew.pad_lo;
            if (iw < 0 || iw >= w) continue;
            const Scalar* in_px = src + (ih * w + iw) * cin;
            const Scalar* k_px = ker + ((ki * kw + kj) * cin) * cout + co;
            for (Index ci = 0; ci < cin; ++ci) {
              acc += static_cast<double>(in_px[ci]) *
                     static_cast<double>(k_px[ci * cout]);
            }
          }
        }
        dst[(oh * ew.out + ow) * cout + co] = static_cast<Scalar>(acc);
      }
    }
  }
  return {std::move(out), macs};
}

template <typename Scalar>
LayerOut<Scalar> depthwise_conv2d(const TensorT<Scalar>& input,
                                  const TensorT<Scalar>& kernel,
                                  const VecArg<Scalar>& bias, Stride stride,
                                  Padding padding) {
  if (input.rank() != 3) {
    throw ShapeError("depthwise_conv2d expects input [H,W,C], got " +
                     input.shape_str());
  }
  if (kernel.rank() != 3) {
    throw ShapeError("depthwise_conv2d expects kernel [Kh,Kw,C], got " +
                     kernel.shape_str());
  }
  const Index h = input.dim(0), w = input.dim(1), c = input.dim(2);
  const Index kh = kernel.dim(0), kw = kernel.dim(1);
  if (kernel.dim(2) != c) {
    throw ShapeError("depthwise_conv2d kernel channels " +
                     std::to_string(kernel.dim(2)) +
                     " do not match input channels " + std::to_string(c));
  }
  if (bias.size() != c) {
    throw ShapeError("depthwise_conv2d bias length " +
                     std::to_string(bias.size()) +
                     " does not match channels " + std::to_string(c));
  }
  const ConvExtent eh = conv_extent(h, kh, stride.h, padding, "H");
  const ConvExtent ew = conv_extent(w, kw, stride.w, padding, "W");
  TensorT<Scalar> out({eh.out, ew.out, c});
  const MacCount macs(static_cast<std::uint64_t>(kh * kw * c) *
                      static_cast<std::uint64_t>(eh.out * ew.out));

  const Scalar* src = input.data().data();
  const Scalar* ker = kernel.data().data();
  Scalar* dst = out.data().data();
  Eigen::VectorXd acc(c);
  for (Index oh = 0; oh < eh.out; ++oh) {
    for (Index ow = 0; ow < ew.out; ++ow) {
      for (Index ci = 0; ci < c; ++ci) acc[ci] = static_cast<double>(bias[ci]);
      for (Index ki = 0; ki < kh; ++ki) {
        const Index ih = oh * stride.h + ki - eh.pad_lo;
        if (ih < 0 || ih >= h) continue;
        for (Index kj = 0; kj < kw; ++kj) {
          const Index iw = ow * stride.w + kj - ew.pad_lo;
          if (iw < 0 || iw >= w) continue;
          const Scalar* in_px = src + (ih * w + iw) * c;
          const Scalar* k_px = ker + (ki * kw + kj) * c;
          for (Index ci = 0; ci < c; ++ci) {
            acc[ci] += static_cast<double>(in_px[ci]) *
                       static_cast<double>(k_px[ci]);
          }
        }
      }
      Scalar* out_px = dst + (oh * ew.out + ow) * c;
      for (Index ci = 0; ci < c; ++ci) out_px[ci] = static_cast<Scalar>(acc[ci]);
    }
  }
  return {std::move(out), macs};
}

template <typename Scalar>
LayerOut<Scalar> pool2d(const TensorT<Scalar>& input, PoolKind kind,
                        Window window, Stride stride) {
  if (input.rank() != 3) {
    throw ShapeError("pool2d expects input [H,W,C], got " + input.shape_str());
  }
  const Index h = input.dim(0), w = input.dim(1), c = input.dim(2);
  if (window.h < 1 || window.w < 1 || stride.h < 1 || stride.w < 1) {
    throw ShapeError("pool2d window and stride must be >= 1");
  }
  if (window.h > h || window.w > w) {
    throw ShapeError("pool2d window " + std::to_string(window.h) + "x" +
                     std::to_string(window.w) + " larger than input " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  const Index ho = (h - window.h) / stride.h + 1;
  const Index wo = (w - window.w) / stride.w + 1;
  TensorT<Scalar> out({ho, wo, c});
  const MacCount macs(kind == PoolKind::kAvg
                          ? static_cast<std::uint64_t>(ho * wo * c)
                          : 0u);

  const Scalar* src = input.data().data();
  Scalar* dst = out.data().data();
  const double inv_area = 1.0 / static_cast<double>(window.h * window.w);
  for (Index oh = 0; oh < ho; ++oh) {
    for (Index ow = 0; ow < wo; ++ow) {
      for (Index ci = 0; ci < c; ++ci) {
        if (kind == PoolKind::kMax) {
          Scalar best = src[((oh * stride.h) * w + ow * stride.w) * c + ci];
          for (Index ki = 0; ki < window.h; ++ki) {
            for (Index kj = 0; kj < window.w; ++kj) {
              const Scalar v =
                  src[((oh * stride.h + ki) * w + ow * stride.w + kj) * c + ci];
              best = std::max(best, v);
            }
          }
          dst[(oh * wo + ow) * c + ci] = best;
        } else {
          double acc = 0.0;
          for (Index ki = 0; ki < window.h; ++ki) {
            for (Index kj = 0; kj < window.w; ++kj) {
              acc += static_cast<double>(
                  src[((oh * stride.h + ki) * w + ow * stride.w + kj) * c +
                      ci]);
            }
          }
          dst[(oh * wo + ow) * c + ci] = static_cast<Scalar>(acc * inv_area);
        }
      }
    }
  }
  return {std::move(out), macs};
}

/// out = x^T W + b with W of shape [N,M].
template <typename Scalar>
VecOut<Scalar> dense(const VecArg<Scalar>& input,
                     const TensorT<Scalar>& weights,
                     const VecArg<Scalar>& bias) {
  if (weights.rank() != 2) {
    throw ShapeError("dense expects weights [N,M], got " +
                     weights.shape_str());
  }
  const Index n = weights.dim(0), m = weights.dim(1);
  if (input.size() != n) {
    throw ShapeError("dense input length " + std::to_string(input.size()) +
                     " does not match weights rows " + std::to_string(n));
  }
  if (bias.size() != m) {
    throw ShapeError("dense bias length " + std::to_string(bias.size()) +
                     " does not match weights cols " + std::to_string(m));
  }
  Eigen::VectorXd acc = bias.template cast<double>();
  const Scalar* wp = weights.data().data();
  for (Index i = 0; i < n; ++i) {
    const double xi = static_cast<double>(input[i]);
    for (Index j = 0; j < m; ++j) {
      acc[j] += xi * static_cast<double>(wp[i * m + j]);
    }
  }
  return {acc.cast<Scalar>(),
          MacCount(static_cast<std::uint64_t>(n) *
                   static_cast<std::uint64_t>(m))};
}

/// Max-stabilized softmax; outputs are positive and sum to 1.
template <typename Scalar>
VecX<Scalar> softmax(const VecX<Scalar>& logits) {
  if (logits.size() < 1) {
    throw ShapeError("softmax requires a non-empty vector");
  }
  if (!logits.allFinite()) {
    throw std::domain_error("softmax input must be finite");
  }
  Eigen::ArrayXd z = logits.template cast<double>().array();
  Eigen::ArrayXd e = (z - z.maxCoeff()).exp();
  return (e / e.sum()).template cast<Scalar>().matrix();
}

/// [T,H,W,C] -> [H,W,T*C]: element (t,h,w,c) moves to (h,w,t*C+c). A pure
/// (bijective) relabeling, no arithmetic.
template <typename Scalar>
TensorT<Scalar> reorder_time_antenna(const TensorT<Scalar>& input) {
  if (input.rank() != 4) {
    throw ShapeError("reorder_time_antenna expects input [T,H,W,C], got " +
                     input.shape_str());
  }
  const Index t = input.dim(0), h = input.dim(1), w = input.dim(2),
              c = input.dim(3);
  TensorT<Scalar> out({h, w, t * c});
  const Scalar* src = input.data().data();
  Scalar* dst = out.data().data();
  for (Index ti = 0; ti < t; ++ti) {
    for (Index hi = 0; hi < h; ++hi) {
      for (Index wi = 0; wi < w; ++wi) {
        const Scalar* in_px = src + (((ti * h) + hi) * w + wi) * c;
        Scalar* out_px = dst + (hi * w + wi) * (t * c) + ti * c;
        for (Index ci = 0; ci < c; ++ci) out_px[ci] = in_px[ci];
      }
    }
  }
  return out;
}

template <typename Scalar>
Scalar euclidean_distance(const VecX<Scalar>& a, const VecX<Scalar>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("euclidean_distance requires equal lengths, got " +
                     std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  return static_cast<Scalar>(
      (a.template cast<double>() - b.template cast<double>()).norm());
}

/// Index of the maximum element; ties break to the lowest index.
template <typename Scalar>
int argmax(const VecX<Scalar>& v) {
  if (v.size() == 0) {
    throw ShapeError("argmax of an empty vector");
  }
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

template <typename Scalar>
TensorT<Scalar> flatten(const TensorT<Scalar>& t) {
  return t.reshaped({t.size()});
}

template <typename Scalar>
void relu_in_place(TensorT<Scalar>& t) {
  t.data() = t.data().cwiseMax(Scalar(0));
}

template <typename Scalar>
VecX<Scalar> to_vector(const TensorT<Scalar>& t) {
  if (t.rank() != 1) {
    throw ShapeError("to_vector expects a rank-1 tensor, got " +
                     t.shape_str());
  }
  return t.data();
}

}  // namespace eenn
