#include <doctest.h>

#include <random>
#include <vector>

#include "eenn/exit_graph.hpp"
#include "eenn/stream.hpp"
#include "test_support.hpp"

using namespace eenn;
using test_support::make_script_graph;
using test_support::random_tensor;
using test_support::script_frame;

namespace {

// Small desk model over a 4x8x8x2 frame; cheap enough for unit tests.
StreamConfig small_config() {
  StreamConfig cfg;
  cfg.class_count = 3;
  cfg.frame_shape = {4, 8, 8, 2};
  cfg.stream_length = 200;
  cfg.seed = 42;
  return cfg;
}

ExitGraph small_desk() {
  const StreamConfig cfg = small_config();
  return build_desk_model(class_centroids(cfg), DeskModelConfig{}, cfg.seed);
}

}  // namespace

TEST_CASE("resume completeness: partial run plus completion equals run_full") {
  const ExitGraph graph = small_desk();
  std::mt19937_64 rng(31);
  const Tensor frame = random_tensor({4, 8, 8, 2}, rng);

  const PartialRun whole = run_full(graph, frame);
  CHECK(whole.exits_present() == graph.head_count());
  CHECK(whole.macs == graph.full_vote_cost());

  for (int k = 0; k < graph.head_count(); ++k) {
    const FrameToken token = graph.issue_frame_token();
    PartialRun part = run_to_exit(graph, frame, k, token);
    CHECK(part.exits_present() == 1);
    CHECK(part.deepest_segment == k);
    CHECK(part.macs == graph.cumulative_cost(k));

    const PartialRun completed =
        run_full(graph, frame, token, std::move(part));
    CHECK(completed.macs == whole.macs);
    for (int e = 0; e < graph.head_count(); ++e) {
      CHECK(completed.exit_output(e) == whole.exit_output(e));
    }
  }
}

TEST_CASE("static cumulative cost equals dynamic executed MACs") {
  const ExitGraph graph = small_desk();
  std::mt19937_64 rng(32);
  for (int it = 0; it < 5; ++it) {
    const Tensor frame = random_tensor({4, 8, 8, 2}, rng);
    for (int k = 0; k < graph.head_count(); ++k) {
      CHECK(run_to_exit(graph, frame, k).macs == graph.cumulative_cost(k));
    }
  }
}

TEST_CASE("exit output is identical alone or within a full run") {
  const ExitGraph graph = small_desk();
  std::mt19937_64 rng(33);
  const Tensor frame = random_tensor({4, 8, 8, 2}, rng);
  const PartialRun alone = run_to_exit(graph, frame, 0);
  const PartialRun whole = run_full(graph, frame);
  CHECK(alone.exit_output(0) == whole.exit_output(0));
}

TEST_CASE("run_full is deterministic and outputs sum to one") {
  const ExitGraph graph = small_desk();
  std::mt19937_64 rng(34);
  const Tensor frame = random_tensor({4, 8, 8, 2}, rng);
  const PartialRun a = run_full(graph, frame);
  const PartialRun b = run_full(graph, frame);
  for (int k = 0; k < graph.head_count(); ++k) {
    CHECK(a.exit_output(k) == b.exit_output(k));
    CHECK(std::abs(a.exit_output(k).sum() - 1.0f) < 1e-6f);
  }
  CHECK(a.macs == b.macs);
}

TEST_CASE("cost ordering: cumulative costs increase, vote costs most") {
  const ExitGraph graph = small_desk();
  for (int k = 0; k + 1 < graph.head_count(); ++k) {
    CHECK(graph.cumulative_cost(k) < graph.cumulative_cost(k + 1));
  }
  CHECK(graph.cumulative_cost(graph.final_exit()) < graph.full_vote_cost());
  CHECK(graph.single_exit_cost() == graph.cumulative_cost(graph.final_exit()));
  CHECK_THROWS_AS(graph.cumulative_cost(graph.head_count()),
                  std::out_of_range);
  CHECK_THROWS_AS(graph.cumulative_cost(-1), std::out_of_range);
}

TEST_CASE("MacTrace events add up to the reported total") {
  const ExitGraph graph = small_desk();
  std::mt19937_64 rng(35);
  const Tensor frame = random_tensor({4, 8, 8, 2}, rng);
  MacTrace trace;
  const PartialRun pr = run_full(graph, frame, &trace);
  CHECK(trace.total() == pr.macs);

  // per-stack sums match the static cost table
  std::vector<std::uint64_t> seg(static_cast<std::size_t>(graph.segment_count()), 0);
  std::vector<std::uint64_t> head(static_cast<std::size_t>(graph.head_count()), 0);
  for (const MacTrace::Event& e : trace.events) {
    auto& bucket = e.site == MacTrace::Event::Site::kSegment ? seg : head;
    bucket[static_cast<std::size_t>(e.stack_index)] += e.macs.value;
  }
  for (int s = 0; s < graph.segment_count(); ++s) {
    CHECK(seg[static_cast<std::size_t>(s)] == graph.segment_cost(s).value);
  }
  for (int k = 0; k < graph.head_count(); ++k) {
    CHECK(head[static_cast<std::size_t>(k)] == graph.head_cost(k).value);
  }
}

TEST_CASE("run_to_exit rejects misuse") {
  const ExitGraph graph = small_desk();
  std::mt19937_64 rng(36);
  const Tensor frame = random_tensor({4, 8, 8, 2}, rng);
  CHECK_THROWS_AS(run_to_exit(graph, frame, graph.head_count()),
                  std::out_of_range);
  CHECK_THROWS_AS(run_to_exit(graph, frame, -1), std::out_of_range);
  CHECK_THROWS_AS(run_full(graph, random_tensor({4, 8, 8, 3}, rng)),
                  ShapeError);

  // a PartialRun minted for one frame cannot resume another
  PartialRun stale = run_to_exit(graph, frame, 0);
  const Tensor other = random_tensor({4, 8, 8, 2}, rng);
  CHECK_THROWS_AS(run_full(graph, other, graph.issue_frame_token(),
                           std::move(stale)),
                  std::invalid_argument);
}

TEST_CASE("desk model classifies noiseless centroids at every exit") {
  const StreamConfig cfg = small_config();
  const std::vector<Tensor> centroids = class_centroids(cfg);
  const ExitGraph graph = build_desk_model(centroids, DeskModelConfig{},
                                           cfg.seed);
  for (int c = 0; c < cfg.class_count; ++c) {
    const PartialRun pr = run_full(graph, centroids[static_cast<std::size_t>(c)]);
    for (int k = 0; k < graph.head_count(); ++k) {
      CHECK(argmax(pr.exit_output(k)) == c);
    }
  }
}

TEST_CASE("desk model build is deterministic per seed") {
  const StreamConfig cfg = small_config();
  const std::vector<Tensor> centroids = class_centroids(cfg);
  const ExitGraph a = build_desk_model(centroids, DeskModelConfig{}, 7);
  const ExitGraph b = build_desk_model(centroids, DeskModelConfig{}, 7);
  REQUIRE(a.segment_count() == b.segment_count());
  for (int s = 0; s < a.segment_count(); ++s) {
    const LayerStack& sa = a.segments()[static_cast<std::size_t>(s)];
    const LayerStack& sb = b.segments()[static_cast<std::size_t>(s)];
    REQUIRE(sa.size() == sb.size());
    for (std::size_t l = 0; l < sa.size(); ++l) {
      if (sa[l].has_params()) {
        CHECK(sa[l].weights == sb[l].weights);
        CHECK(sa[l].bias == sb[l].bias);
      }
    }
  }
  for (int k = 0; k < a.head_count(); ++k) {
    CHECK(a.heads()[static_cast<std::size_t>(k)].back().weights ==
          b.heads()[static_cast<std::size_t>(k)].back().weights);
  }

  // different seed, different trunk
  const ExitGraph c = build_desk_model(centroids, DeskModelConfig{}, 8);
  CHECK(a.segments()[0][1].weights.data() != c.segments()[0][1].weights.data());
}

TEST_CASE("desk model rejects bad centroid sets") {
  const StreamConfig cfg = small_config();
  std::vector<Tensor> centroids = class_centroids(cfg);
  CHECK_THROWS_AS(
      build_desk_model({centroids[0]}, DeskModelConfig{}, cfg.seed),
      ConfigError);
  std::vector<Tensor> mixed = centroids;
  mixed[1] = Tensor::constant({4, 8, 8, 3}, 0.0f);
  CHECK_THROWS_AS(build_desk_model(mixed, DeskModelConfig{}, cfg.seed),
                  ShapeError);
}

TEST_CASE("graph construction validates topology") {
  // head output width must equal the class count and end in softmax
  const ExitGraph script = make_script_graph(2, 3);
  CHECK(script.head_count() == 2);
  CHECK(script.class_count() == 3);

  std::vector<LayerStack> segments = script.segments();
  std::vector<LayerStack> heads = script.heads();
  CHECK_THROWS_AS(ExitGraph(segments, {heads[0]}, 3, {1, 1, 1, 6}),
                  ShapeError);
  CHECK_THROWS_AS(ExitGraph(segments, heads, 4, {1, 1, 1, 6}), ShapeError);

  std::vector<LayerStack> no_softmax = heads;
  no_softmax[1].back().activation = Activation::kNone;
  CHECK_THROWS_AS(ExitGraph(segments, no_softmax, 3, {1, 1, 1, 6}),
                  ShapeError);
}

TEST_CASE("script graph delivers the scripted outputs") {
  const ExitGraph graph = make_script_graph(3, 2);
  const Tensor frame = script_frame({{1.0f, 0.0f}, {0.0f, 2.0f}, {3.0f, 0.0f}});
  const PartialRun pr = run_full(graph, frame);
  CHECK(argmax(pr.exit_output(0)) == 0);
  CHECK(argmax(pr.exit_output(1)) == 1);
  CHECK(argmax(pr.exit_output(2)) == 0);
}
