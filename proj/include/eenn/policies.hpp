#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eenn/exit_graph.hpp"

// Per-stream termination policies. Each stateful policy is written as a pure
// step function (state, frame) -> (result, state): the caller owns the
// SceneState and feeds one stream with it. Distinct states over a shared
// graph may run in parallel; a single state must not.

namespace eenn {

/// Marker for steps that fell back to a full run over all classifiers.
inline constexpr int kFullVote = -1;

struct SceneState {
  VecXf reference_vector;   // tracked exit's output at the scene's first sample
  int reference_vote = 0;   // majority vote at the scene's first sample
  int selected_exit = 0;    // exit compared within the scene (always 0 for DD)
  std::int64_t scene_start = 0;
  std::int64_t next_t = 0;  // stream position of the next sample to process
};

struct StepResult {
  int prediction = 0;
  MacCount macs;            // exact cost of the layers executed this step
  int exit_used = kFullVote;
  bool scene_changed = false;
};

struct StepOutcome {
  StepResult result;
  SceneState state;
};

/// Which sample difference detection compares against. kPredecessor replaces
/// the scene-initial reference with the immediately preceding sample; it
/// exists for ablation experiments and is not reachable from config files.
enum class DdReference { kSceneInitial, kPredecessor };

enum class PolicyKind {
  kSingleExit,
  kConfidence,
  kDifferenceDetection,
  kTemporalPatience,
};

std::string policy_kind_name(PolicyKind kind);
PolicyKind policy_kind_from_name(const std::string& name);

struct PolicyConfig {
  PolicyKind kind = PolicyKind::kDifferenceDetection;
  float threshold = 0.0f;  // DD/TP global threshold
  std::vector<float> confidence_thresholds;  // one per non-final exit
  DdReference dd_reference = DdReference::kSceneInitial;

  void validate(int head_count) const;
};

/// Class with the highest count; ties break to the class predicted by the
/// deepest classifier among the tied classes. `predictions` is ordered
/// shallowest first.
int majority_vote(const std::vector<int>& predictions, int class_count);

/// Shallowest exit whose prediction equals the vote. Total whenever `vote`
/// was produced by majority_vote over `exit_predictions`.
int tp_select(const std::vector<int>& exit_predictions, int vote);

/// Difference detection. Stream start (no state): full run, majority vote,
/// exit-0 output becomes the scene reference. Within a scene only exit 0 is
/// executed; a Euclidean change below `threshold` reuses the scene's vote,
/// otherwise the run resumes to a full vote and the scene resets.
StepOutcome dd_step(const std::optional<SceneState>& state,
                    const ExitGraph& graph, const Tensor& frame,
                    float threshold,
                    DdReference reference = DdReference::kSceneInitial,
                    MacTrace* trace = nullptr);

/// Temporal patience. Tracks the shallowest exit that agreed with the scene's
/// majority vote; staying in-scene additionally requires the tracked exit's
/// label to be unchanged, and the in-scene prediction is the tracked exit's
/// live argmax.
StepOutcome tp_step(const std::optional<SceneState>& state,
                    const ExitGraph& graph, const Tensor& frame,
                    float threshold, MacTrace* trace = nullptr);

/// Executes exits in depth order and stops at the first whose max softmax
/// probability reaches its threshold; the final classifier accepts
/// unconditionally.
StepResult confidence_step(const ExitGraph& graph, const Tensor& frame,
                           const std::vector<float>& confidence_thresholds,
                           MacTrace* trace = nullptr);

/// Trunk plus final head only; no early heads are executed.
StepResult single_exit_step(const ExitGraph& graph, const Tensor& frame,
                            MacTrace* trace = nullptr);

/// Argmax prediction of every present exit, shallowest first.
std::vector<int> exit_argmaxes(const PartialRun& run);

}  // namespace eenn
