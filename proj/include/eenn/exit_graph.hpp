#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eenn/layers.hpp"
#include "eenn/tensor.hpp"

namespace eenn {

enum class LayerKind {
  kReorderTimeAntenna,  // [T,H,W,C] -> [H,W,T*C]
  kConv,                // weights [Kh,Kw,Cin,Cout]
  kDepthwiseConv,       // weights [Kh,Kw,C]
  kMaxPool,
  kAvgPool,
  kFlatten,
  kDense,  // weights [N,M]
};

enum class Activation { kNone, kRelu, kSoftmax };

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  Activation activation = Activation::kNone;
  Index window_h = 1, window_w = 1;  // pools only
  Index stride_h = 1, stride_w = 1;
  Padding padding = Padding::kValid;
  Tensor weights;  // conv/depthwise/dense only
  VecXf bias;

  bool has_params() const {
    return kind == LayerKind::kConv || kind == LayerKind::kDepthwiseConv ||
           kind == LayerKind::kDense;
  }
};

using LayerStack = std::vector<LayerSpec>;

/// Per-frame token handed out by the graph; detects resumption of a
/// PartialRun against the wrong frame.
struct FrameToken {
  std::uint64_t value = 0;
  friend bool operator==(FrameToken, FrameToken) = default;
};

/// Linear trunk of layer stacks with one classifier head per segment; the
/// last head is the final classifier. Immutable after construction and safe
/// to share across threads. Construction shape-checks the whole topology and
/// precomputes static per-stack MAC costs.
class ExitGraph {
 public:
  ExitGraph(std::vector<LayerStack> segments, std::vector<LayerStack> heads,
            int class_count, std::vector<Index> input_shape);

  int segment_count() const { return static_cast<int>(segments_.size()); }
  int head_count() const { return static_cast<int>(heads_.size()); }
  int final_exit() const { return head_count() - 1; }
  int class_count() const { return class_count_; }
  const std::vector<Index>& input_shape() const { return input_shape_; }

  const std::vector<LayerStack>& segments() const { return segments_; }
  const std::vector<LayerStack>& heads() const { return heads_; }
  const std::vector<Index>& segment_output_shape(int idx) const;

  MacCount segment_cost(int idx) const;
  MacCount head_cost(int idx) const;
  /// Cost of terminating at exit idx: segments 0..idx plus head idx only.
  MacCount cumulative_cost(int idx) const;
  /// Every segment plus every head: what a majority vote costs.
  MacCount full_vote_cost() const;
  /// Every segment plus the final head only.
  MacCount single_exit_cost() const { return cumulative_cost(final_exit()); }

  FrameToken issue_frame_token() const;

 private:
  std::vector<LayerStack> segments_;
  std::vector<LayerStack> heads_;
  int class_count_ = 0;
  std::vector<Index> input_shape_;
  std::vector<std::vector<Index>> segment_out_shapes_;
  std::vector<MacCount> segment_costs_;
  std::vector<MacCount> head_costs_;
};

/// State of a partially executed frame: per-segment activations are cached so
/// execution can resume at any depth without recomputing a segment.
struct PartialRun {
  FrameToken token;
  int deepest_segment = -1;
  std::vector<Tensor> segment_outputs;           // outputs of segments 0..deepest
  std::vector<std::optional<VecXf>> exit_outputs;  // indexed by exit
  MacCount macs;  // everything executed for this frame so far

  bool has_exit(int idx) const {
    return idx >= 0 && idx < static_cast<int>(exit_outputs.size()) &&
           exit_outputs[static_cast<std::size_t>(idx)].has_value();
  }
  const VecXf& exit_output(int idx) const;
  int exits_present() const;
};

/// Optional per-layer cost trace for instrumented runs.
struct MacTrace {
  struct Event {
    enum class Site { kSegment, kHead };
    Site site;
    int stack_index = 0;
    int layer_index = 0;
    MacCount macs;
  };
  std::vector<Event> events;
  MacCount total() const {
    MacCount t;
    for (const Event& e : events) t += e.macs;
    return t;
  }
};

/// Executes segments 0..exit_idx (resuming from `prior` without recomputing
/// any segment) and head exit_idx if not already present. Heads other than
/// exit_idx are left untouched, so a fresh call costs exactly
/// cumulative_cost(exit_idx).
PartialRun run_to_exit(const ExitGraph& graph, const Tensor& frame,
                       int exit_idx, FrameToken token,
                       std::optional<PartialRun> prior = std::nullopt,
                       MacTrace* trace = nullptr);
PartialRun run_to_exit(const ExitGraph& graph, const Tensor& frame,
                       int exit_idx, MacTrace* trace = nullptr);

/// Executes every segment and every head still missing from `prior`; the
/// result carries all exit outputs (the majority-vote input).
PartialRun run_full(const ExitGraph& graph, const Tensor& frame,
                    FrameToken token,
                    std::optional<PartialRun> prior = std::nullopt,
                    MacTrace* trace = nullptr);
PartialRun run_full(const ExitGraph& graph, const Tensor& frame,
                    MacTrace* trace = nullptr);

struct DeskModelConfig {
  std::array<int, 3> channel_widths{8, 24, 48};
  Index dw_kernel = 3;    // depthwise kernel, square, same padding
  Index pool_window = 2;  // max-pool between segments, stride == window
  float logit_gap = 8.0f;  // target mean inter-class logit separation per head
};

/// Builds the three-block depthwise-separable trunk with one
/// global-average-pool classifier head per block. Trunk weights are drawn
/// from `seed`; head k is a nearest-centroid linear classifier in the
/// segment-k feature space (dense row 2*mu, bias -|mu|^2, scaled per head to
/// the configured logit gap), so every noiseless centroid frame classifies
/// correctly at every exit.
ExitGraph build_desk_model(const std::vector<Tensor>& class_centroids,
                           const DeskModelConfig& config, std::uint64_t seed);

namespace detail {
// Runs one layer stack; used by the graph executor and the desk-model
// builder's feature pass.
LayerOut<float> run_stack(const LayerStack& stack, const Tensor& input,
                          MacTrace* trace, MacTrace::Event::Site site,
                          int stack_index);
}  // namespace detail

}  // namespace eenn
