#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eenn/exit_graph.hpp"

namespace eenn {

namespace {

Tensor gaussian_tensor(std::vector<Index> shape, double sigma,
                       std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) {
    t.data()[i] = static_cast<float>(normal(rng) * sigma);
  }
  return t;
}

LayerSpec depthwise_spec(Index kernel, Index channels, std::mt19937_64& rng) {
  LayerSpec spec;
  spec.kind = LayerKind::kDepthwiseConv;
  spec.padding = Padding::kSame;
  // unit-variance-preserving scale for a Kh*Kw window
  spec.weights = gaussian_tensor({kernel, kernel, channels},
                                 1.0 / std::sqrt(double(kernel * kernel)),
                                 rng);
  spec.bias = VecXf::Zero(channels);
  return spec;
}

LayerSpec pointwise_spec(Index in_ch, Index out_ch, std::mt19937_64& rng) {
  LayerSpec spec;
  spec.kind = LayerKind::kConv;
  spec.activation = Activation::kRelu;
  spec.weights =
      gaussian_tensor({1, 1, in_ch, out_ch}, std::sqrt(2.0 / double(in_ch)),
                      rng);
  spec.bias = VecXf::Zero(out_ch);
  return spec;
}

LayerSpec max_pool_spec(Index window) {
  LayerSpec spec;
  spec.kind = LayerKind::kMaxPool;
  spec.window_h = spec.window_w = window;
  spec.stride_h = spec.stride_w = window;
  return spec;
}

// Global average pool: window covers the whole spatial extent.
LayerSpec gap_spec(Index h, Index w) {
  LayerSpec spec;
  spec.kind = LayerKind::kAvgPool;
  spec.window_h = h;
  spec.window_w = w;
  spec.stride_h = h;
  spec.stride_w = w;
  return spec;
}

LayerSpec flatten_spec() {
  LayerSpec spec;
  spec.kind = LayerKind::kFlatten;
  return spec;
}

}  // namespace

ExitGraph build_desk_model(const std::vector<Tensor>& class_centroids,
                           const DeskModelConfig& config, std::uint64_t seed) {
  if (class_centroids.size() < 2) {
    throw ConfigError("desk model needs at least 2 class centroids, got " +
                      std::to_string(class_centroids.size()));
  }
  const std::vector<Index>& frame_shape = class_centroids.front().shape();
  if (frame_shape.size() != 4) {
    throw ShapeError("desk model centroids must be rank-4 [T,H,W,C], got " +
                     class_centroids.front().shape_str());
  }
  for (const Tensor& c : class_centroids) {
    if (c.shape() != frame_shape) {
      throw ShapeError("centroid shape " + c.shape_str() +
                       " does not match " +
                       Tensor::shape_string(frame_shape));
    }
  }
  const int classes = static_cast<int>(class_centroids.size());

  std::mt19937_64 rng(seed);
  std::vector<LayerStack> segments;
  Index channels = frame_shape[0] * frame_shape[3];  // after reorder
  for (int s = 0; s < 3; ++s) {
    LayerStack seg;
    if (s == 0) {
      LayerSpec reorder;
      reorder.kind = LayerKind::kReorderTimeAntenna;
      seg.push_back(reorder);
    } else {
      seg.push_back(max_pool_spec(config.pool_window));
    }
    seg.push_back(depthwise_spec(config.dw_kernel, channels, rng));
    seg.push_back(pointwise_spec(channels, config.channel_widths[s], rng));
    channels = config.channel_widths[s];
    segments.push_back(std::move(seg));
  }

  // Feature pass: run each centroid through the trunk, pooling each segment
  // output down to its per-channel means.
  std::vector<std::vector<VecXf>> features(
      segments.size(), std::vector<VecXf>(static_cast<std::size_t>(classes)));
  std::vector<std::vector<Index>> seg_shapes;
  for (int c = 0; c < classes; ++c) {
    Tensor x = class_centroids[static_cast<std::size_t>(c)];
    for (std::size_t s = 0; s < segments.size(); ++s) {
      x = detail::run_stack(segments[s], x, nullptr,
                            MacTrace::Event::Site::kSegment,
                            static_cast<int>(s))
              .value;
      if (c == 0) seg_shapes.push_back(x.shape());
      Tensor pooled =
          pool2d(x, PoolKind::kAvg, Window{x.dim(0), x.dim(1)},
                 Stride{x.dim(0), x.dim(1)})
              .value;
      features[s][static_cast<std::size_t>(c)] = VecXf(pooled.data());
    }
  }

  std::vector<LayerStack> heads;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const std::vector<VecXf>& mu = features[s];
    const Index feat_dim = mu[0].size();

    double mean_sq = 0.0;
    int pairs = 0;
    for (int a = 0; a < classes; ++a) {
      for (int b = a + 1; b < classes; ++b) {
        mean_sq += (mu[static_cast<std::size_t>(a)] -
                    mu[static_cast<std::size_t>(b)])
                       .cast<double>()
                       .squaredNorm();
        ++pairs;
      }
    }
    mean_sq /= pairs;
    if (!(mean_sq > 0.0)) {
      throw ConfigError("degenerate centroids: identical features at head " +
                        std::to_string(s));
    }
    const double scale = double(config.logit_gap) / mean_sq;

    LayerSpec head_dense;
    head_dense.kind = LayerKind::kDense;
    head_dense.activation = Activation::kSoftmax;
    head_dense.weights = Tensor({feat_dim, classes});
    head_dense.bias = VecXf::Zero(classes);
    for (int c = 0; c < classes; ++c) {
      const VecXf& m = mu[static_cast<std::size_t>(c)];
      for (Index f = 0; f < feat_dim; ++f) {
        head_dense.weights(f, c) = static_cast<float>(2.0 * scale * m[f]);
      }
      head_dense.bias[c] =
          static_cast<float>(-scale * m.cast<double>().squaredNorm());
    }

    LayerStack head;
    head.push_back(gap_spec(seg_shapes[s][0], seg_shapes[s][1]));
    head.push_back(flatten_spec());
    head.push_back(std::move(head_dense));
    heads.push_back(std::move(head));
  }

  ExitGraph graph(std::move(segments), std::move(heads), classes, frame_shape);

  // The nearest-centroid construction must classify every noiseless centroid
  // correctly at every exit; a violation means the seed produced colliding
  // features.
  for (int c = 0; c < classes; ++c) {
    PartialRun pr = run_full(graph, class_centroids[static_cast<std::size_t>(c)]);
    for (int k = 0; k < graph.head_count(); ++k) {
      if (argmax(pr.exit_output(k)) != c) {
        throw std::runtime_error(
            "desk model construction failed: centroid " + std::to_string(c) +
            " misclassified at exit " + std::to_string(k));
      }
    }
  }
  return graph;
}

}  // namespace eenn
