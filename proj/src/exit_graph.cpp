#include "eenn/exit_graph.hpp"

#include <atomic>
#include <stdexcept>
#include <utility>

namespace eenn {

namespace {

std::atomic<std::uint64_t> g_frame_tokens{1};

struct ShapeCost {
  std::vector<Index> shape;
  MacCount macs;
};

std::string layer_name(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::kReorderTimeAntenna:
      return "reorder_time_antenna";
    case LayerKind::kConv:
      return "conv2d";
    case LayerKind::kDepthwiseConv:
      return "depthwise_conv2d";
    case LayerKind::kMaxPool:
      return "max_pool2d";
    case LayerKind::kAvgPool:
      return "avg_pool2d";
    case LayerKind::kFlatten:
      return "flatten";
    case LayerKind::kDense:
      return "dense";
  }
  return "?";
}

Index shape_product(const std::vector<Index>& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

// Static shape propagation and cost for one layer; mirrors the execution
// functions in layers.hpp exactly.
ShapeCost analyze_layer(const LayerSpec& spec, const std::vector<Index>& in,
                        const std::string& where) {
  auto fail = [&](const std::string& msg) -> ShapeCost {
    throw ShapeError(where + " " + layer_name(spec) + ": " + msg);
  };
  switch (spec.kind) {
    case LayerKind::kReorderTimeAntenna: {
      if (in.size() != 4) {
        return fail("expects rank-4 input, got " +
                    Tensor::shape_string(in));
      }
      return {{in[1], in[2], in[0] * in[3]}, MacCount(0)};
    }
    case LayerKind::kConv: {
      if (in.size() != 3) {
        return fail("expects rank-3 input, got " + Tensor::shape_string(in));
      }
      if (spec.weights.rank() != 4) {
        return fail("expects weights [Kh,Kw,Cin,Cout], got " +
                    spec.weights.shape_str());
      }
      if (spec.weights.dim(2) != in[2]) {
        return fail("kernel input channels " +
                    std::to_string(spec.weights.dim(2)) +
                    " do not match input channels " + std::to_string(in[2]));
      }
      if (spec.bias.size() != spec.weights.dim(3)) {
        return fail("bias length does not match output channels");
      }
      const ConvExtent eh = conv_extent(in[0], spec.weights.dim(0),
                                        spec.stride_h, spec.padding, "H");
      const ConvExtent ew = conv_extent(in[1], spec.weights.dim(1),
                                        spec.stride_w, spec.padding, "W");
      const std::uint64_t per_px = static_cast<std::uint64_t>(
          spec.weights.dim(0) * spec.weights.dim(1) * in[2] *
          spec.weights.dim(3));
      return {{eh.out, ew.out, spec.weights.dim(3)},
              MacCount(per_px * static_cast<std::uint64_t>(eh.out * ew.out))};
    }
    case LayerKind::kDepthwiseConv: {
      if (in.size() != 3) {
        return fail("expects rank-3 input, got " + Tensor::shape_string(in));
      }
      if (spec.weights.rank() != 3) {
        return fail("expects weights [Kh,Kw,C], got " +
                    spec.weights.shape_str());
      }
      if (spec.weights.dim(2) != in[2]) {
        return fail("kernel channels do not match input channels");
      }
      if (spec.bias.size() != in[2]) {
        return fail("bias length does not match channels");
      }
      const ConvExtent eh = conv_extent(in[0], spec.weights.dim(0),
                                        spec.stride_h, spec.padding, "H");
      const ConvExtent ew = conv_extent(in[1], spec.weights.dim(1),
                                        spec.stride_w, spec.padding, "W");
      const std::uint64_t per_px = static_cast<std::uint64_t>(
          spec.weights.dim(0) * spec.weights.dim(1) * in[2]);
      return {{eh.out, ew.out, in[2]},
              MacCount(per_px * static_cast<std::uint64_t>(eh.out * ew.out))};
    }
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool: {
      if (in.size() != 3) {
        return fail("expects rank-3 input, got " + Tensor::shape_string(in));
      }
      if (spec.window_h > in[0] || spec.window_w > in[1]) {
        return fail("window larger than input");
      }
      const Index ho = (in[0] - spec.window_h) / spec.stride_h + 1;
      const Index wo = (in[1] - spec.window_w) / spec.stride_w + 1;
      const MacCount macs(spec.kind == LayerKind::kAvgPool
                              ? static_cast<std::uint64_t>(ho * wo * in[2])
                              : 0u);
      return {{ho, wo, in[2]}, macs};
    }
    case LayerKind::kFlatten:
      return {{shape_product(in)}, MacCount(0)};
    case LayerKind::kDense: {
      if (in.size() != 1) {
        return fail("expects rank-1 input, got " + Tensor::shape_string(in));
      }
      if (spec.weights.rank() != 2) {
        return fail("expects weights [N,M], got " + spec.weights.shape_str());
      }
      if (spec.weights.dim(0) != in[0]) {
        return fail("weights rows " + std::to_string(spec.weights.dim(0)) +
                    " do not match input length " + std::to_string(in[0]));
      }
      if (spec.bias.size() != spec.weights.dim(1)) {
        return fail("bias length does not match output width");
      }
      return {{spec.weights.dim(1)},
              MacCount(static_cast<std::uint64_t>(spec.weights.dim(0) *
                                                  spec.weights.dim(1)))};
    }
  }
  throw std::logic_error("unhandled layer kind");
}

Tensor apply_layer(const LayerSpec& spec, const Tensor& x, MacCount* macs,
                   MacTrace* trace, MacTrace::Event::Site site,
                   int stack_index, int layer_index) {
  Tensor out;
  MacCount layer_macs;
  switch (spec.kind) {
    case LayerKind::kReorderTimeAntenna:
      out = reorder_time_antenna(x);
      break;
    case LayerKind::kConv: {
      auto r = conv2d(x, spec.weights, spec.bias,
                      Stride{spec.stride_h, spec.stride_w}, spec.padding);
      out = std::move(r.value);
      layer_macs = r.macs;
      break;
    }
    case LayerKind::kDepthwiseConv: {
      auto r = depthwise_conv2d(x, spec.weights, spec.bias,
                                Stride{spec.stride_h, spec.stride_w},
                                spec.padding);
      out = std::move(r.value);
      layer_macs = r.macs;
      break;
    }
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool: {
      auto r = pool2d(x,
                      spec.kind == LayerKind::kMaxPool ? PoolKind::kMax
                                                       : PoolKind::kAvg,
                      Window{spec.window_h, spec.window_w},
                      Stride{spec.stride_h, spec.stride_w});
      out = std::move(r.value);
      layer_macs = r.macs;
      break;
    }
    case LayerKind::kFlatten:
      out = flatten(x);
      break;
    case LayerKind::kDense: {
      auto r = dense(to_vector(x), spec.weights, spec.bias);
      const Index width = r.value.size();
      out = Tensor({width}, std::move(r.value));
      layer_macs = r.macs;
      break;
    }
  }
  switch (spec.activation) {
    case Activation::kNone:
      break;
    case Activation::kRelu:
      relu_in_place(out);
      break;
    case Activation::kSoftmax:
      out = Tensor({out.size()}, softmax(VecXf(out.data())));
      break;
  }
  if (macs) *macs += layer_macs;
  if (trace) {
    trace->events.push_back({site, stack_index, layer_index, layer_macs});
  }
  return out;
}

}  // namespace

namespace detail {

LayerOut<float> run_stack(const LayerStack& stack, const Tensor& input,
                          MacTrace* trace, MacTrace::Event::Site site,
                          int stack_index) {
  Tensor x = input;
  MacCount macs;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    x = apply_layer(stack[i], x, &macs, trace, site, stack_index,
                    static_cast<int>(i));
  }
  return {std::move(x), macs};
}

}  // namespace detail

ExitGraph::ExitGraph(std::vector<LayerStack> segments,
                     std::vector<LayerStack> heads, int class_count,
                     std::vector<Index> input_shape)
    : segments_(std::move(segments)),
      heads_(std::move(heads)),
      class_count_(class_count),
      input_shape_(std::move(input_shape)) {
  if (segments_.empty()) {
    throw ShapeError("exit graph needs at least one segment");
  }
  if (heads_.size() != segments_.size()) {
    throw ShapeError("exit graph needs exactly one head per segment, got " +
                     std::to_string(heads_.size()) + " heads for " +
                     std::to_string(segments_.size()) + " segments");
  }
  if (class_count_ < 2) {
    throw ShapeError("exit graph needs at least 2 classes");
  }

  std::vector<Index> shape = input_shape_;
  Index check = 1;
  for (Index d : shape) {
    if (d < 1) throw ShapeError("input shape dims must be >= 1");
    check *= d;
  }

  for (std::size_t s = 0; s < segments_.size(); ++s) {
    if (segments_[s].empty()) {
      throw ShapeError("segment " + std::to_string(s) + " is empty");
    }
    MacCount cost;
    for (std::size_t l = 0; l < segments_[s].size(); ++l) {
      ShapeCost sc = analyze_layer(segments_[s][l], shape,
                                   "segment " + std::to_string(s) + " layer " +
                                       std::to_string(l));
      shape = std::move(sc.shape);
      cost += sc.macs;
    }
    segment_out_shapes_.push_back(shape);
    segment_costs_.push_back(cost);
  }

  for (std::size_t k = 0; k < heads_.size(); ++k) {
    if (heads_[k].empty()) {
      throw ShapeError("head " + std::to_string(k) + " is empty");
    }
    std::vector<Index> hshape = segment_out_shapes_[k];
    MacCount cost;
    for (std::size_t l = 0; l < heads_[k].size(); ++l) {
      ShapeCost sc = analyze_layer(heads_[k][l], hshape,
                                   "head " + std::to_string(k) + " layer " +
                                       std::to_string(l));
      hshape = std::move(sc.shape);
      cost += sc.macs;
    }
    if (hshape.size() != 1 || hshape[0] != class_count_) {
      throw ShapeError("head " + std::to_string(k) +
                       " must output a length-" + std::to_string(class_count_) +
                       " vector, got " + Tensor::shape_string(hshape));
    }
    if (heads_[k].back().activation != Activation::kSoftmax) {
      throw ShapeError("head " + std::to_string(k) +
                       " must end with a softmax activation");
    }
    head_costs_.push_back(cost);
  }
}

const std::vector<Index>& ExitGraph::segment_output_shape(int idx) const {
  return segment_out_shapes_.at(static_cast<std::size_t>(idx));
}

MacCount ExitGraph::segment_cost(int idx) const {
  return segment_costs_.at(static_cast<std::size_t>(idx));
}

MacCount ExitGraph::head_cost(int idx) const {
  return head_costs_.at(static_cast<std::size_t>(idx));
}

MacCount ExitGraph::cumulative_cost(int idx) const {
  if (idx < 0 || idx >= head_count()) {
    throw std::out_of_range("cumulative_cost: exit index " +
                            std::to_string(idx) + " out of range [0," +
                            std::to_string(head_count()) + ")");
  }
  MacCount total;
  for (int s = 0; s <= idx; ++s) total += segment_costs_[s];
  total += head_costs_[static_cast<std::size_t>(idx)];
  return total;
}

MacCount ExitGraph::full_vote_cost() const {
  MacCount total;
  for (const MacCount& c : segment_costs_) total += c;
  for (const MacCount& c : head_costs_) total += c;
  return total;
}

FrameToken ExitGraph::issue_frame_token() const {
  return {g_frame_tokens.fetch_add(1, std::memory_order_relaxed)};
}

const VecXf& PartialRun::exit_output(int idx) const {
  if (!has_exit(idx)) {
    throw std::out_of_range("PartialRun has no output for exit " +
                            std::to_string(idx));
  }
  return *exit_outputs[static_cast<std::size_t>(idx)];
}

int PartialRun::exits_present() const {
  int n = 0;
  for (const auto& e : exit_outputs) n += e.has_value();
  return n;
}

namespace {

void check_frame(const ExitGraph& graph, const Tensor& frame) {
  if (frame.shape() != graph.input_shape()) {
    throw ShapeError("frame shape " + frame.shape_str() +
                     " does not match graph input " +
                     Tensor::shape_string(graph.input_shape()));
  }
}

PartialRun start_or_resume(const ExitGraph& graph, const Tensor& frame,
                           FrameToken token, std::optional<PartialRun> prior) {
  check_frame(graph, frame);
  if (!prior) {
    PartialRun pr;
    pr.token = token;
    pr.exit_outputs.assign(static_cast<std::size_t>(graph.head_count()),
                           std::nullopt);
    return pr;
  }
  if (!(prior->token == token)) {
    throw std::invalid_argument(
        "PartialRun belongs to a different frame (stale token)");
  }
  if (static_cast<int>(prior->exit_outputs.size()) != graph.head_count()) {
    throw std::invalid_argument("PartialRun does not belong to this graph");
  }
  return std::move(*prior);
}

void extend_segments(const ExitGraph& graph, const Tensor& frame,
                     PartialRun& pr, int target, MacTrace* trace) {
  for (int s = pr.deepest_segment + 1; s <= target; ++s) {
    const Tensor& in =
        s == 0 ? frame : pr.segment_outputs[static_cast<std::size_t>(s - 1)];
    auto out = detail::run_stack(graph.segments()[static_cast<std::size_t>(s)],
                                 in, trace, MacTrace::Event::Site::kSegment, s);
    pr.segment_outputs.push_back(std::move(out.value));
    pr.macs += out.macs;
    pr.deepest_segment = s;
  }
}

void run_head(const ExitGraph& graph, PartialRun& pr, int idx,
              MacTrace* trace) {
  if (pr.has_exit(idx)) return;
  auto out = detail::run_stack(
      graph.heads()[static_cast<std::size_t>(idx)],
      pr.segment_outputs[static_cast<std::size_t>(idx)], trace,
      MacTrace::Event::Site::kHead, idx);
  pr.exit_outputs[static_cast<std::size_t>(idx)] = VecXf(out.value.data());
  pr.macs += out.macs;
}

}  // namespace

PartialRun run_to_exit(const ExitGraph& graph, const Tensor& frame,
                       int exit_idx, FrameToken token,
                       std::optional<PartialRun> prior, MacTrace* trace) {
  if (exit_idx < 0 || exit_idx >= graph.head_count()) {
    throw std::out_of_range("run_to_exit: exit index " +
                            std::to_string(exit_idx) + " out of range [0," +
                            std::to_string(graph.head_count()) + ")");
  }
  PartialRun pr = start_or_resume(graph, frame, token, std::move(prior));
  extend_segments(graph, frame, pr, exit_idx, trace);
  run_head(graph, pr, exit_idx, trace);
  return pr;
}

PartialRun run_to_exit(const ExitGraph& graph, const Tensor& frame,
                       int exit_idx, MacTrace* trace) {
  return run_to_exit(graph, frame, exit_idx, graph.issue_frame_token(),
                     std::nullopt, trace);
}

PartialRun run_full(const ExitGraph& graph, const Tensor& frame,
                    FrameToken token, std::optional<PartialRun> prior,
                    MacTrace* trace) {
  PartialRun pr = start_or_resume(graph, frame, token, std::move(prior));
  extend_segments(graph, frame, pr, graph.segment_count() - 1, trace);
  for (int k = 0; k < graph.head_count(); ++k) run_head(graph, pr, k, trace);
  return pr;
}

PartialRun run_full(const ExitGraph& graph, const Tensor& frame,
                    MacTrace* trace) {
  return run_full(graph, frame, graph.issue_frame_token(), std::nullopt,
                  trace);
}

}  // namespace eenn
