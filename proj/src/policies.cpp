#include "eenn/policies.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace eenn {

std::string policy_kind_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kSingleExit:
      return "single_exit";
    case PolicyKind::kConfidence:
      return "confidence";
    case PolicyKind::kDifferenceDetection:
      return "difference_detection";
    case PolicyKind::kTemporalPatience:
      return "temporal_patience";
  }
  return "?";
}

PolicyKind policy_kind_from_name(const std::string& name) {
  if (name == "single_exit") return PolicyKind::kSingleExit;
  if (name == "confidence") return PolicyKind::kConfidence;
  if (name == "difference_detection" || name == "dd") {
    return PolicyKind::kDifferenceDetection;
  }
  if (name == "temporal_patience" || name == "tp") {
    return PolicyKind::kTemporalPatience;
  }
  throw ConfigError("unknown policy '" + name + "'");
}

void PolicyConfig::validate(int head_count) const {
  if (kind == PolicyKind::kDifferenceDetection ||
      kind == PolicyKind::kTemporalPatience) {
    if (!(threshold >= 0.0f)) {
      throw ConfigError("policy threshold must be non-negative");
    }
  }
  if (kind == PolicyKind::kConfidence) {
    if (static_cast<int>(confidence_thresholds.size()) != head_count - 1) {
      throw ConfigError(
          "expected one confidence threshold per non-final exit (" +
          std::to_string(head_count - 1) + "), got " +
          std::to_string(confidence_thresholds.size()));
    }
    for (float t : confidence_thresholds) {
      if (!(t >= 0.0f && t <= 1.0f)) {
        throw ConfigError("confidence thresholds must lie in [0,1]");
      }
    }
  }
}

int majority_vote(const std::vector<int>& predictions, int class_count) {
  if (predictions.empty()) {
    throw std::invalid_argument("majority_vote: empty prediction list");
  }
  std::vector<int> counts(static_cast<std::size_t>(class_count), 0);
  for (int p : predictions) {
    if (p < 0 || p >= class_count) {
      throw std::invalid_argument("majority_vote: prediction " +
                                  std::to_string(p) + " outside [0," +
                                  std::to_string(class_count) + ")");
    }
    ++counts[static_cast<std::size_t>(p)];
  }
  int best = 0;
  for (int c : counts) best = std::max(best, c);
  // deepest classifier among the tied classes wins
  for (int i = static_cast<int>(predictions.size()) - 1; i >= 0; --i) {
    if (counts[static_cast<std::size_t>(predictions[i])] == best) {
      return predictions[i];
    }
  }
  throw std::logic_error("majority_vote: unreachable");
}

int tp_select(const std::vector<int>& exit_predictions, int vote) {
  for (std::size_t i = 0; i < exit_predictions.size(); ++i) {
    if (exit_predictions[i] == vote) return static_cast<int>(i);
  }
  throw std::logic_error(
      "tp_select: vote is not predicted by any classifier");
}

std::vector<int> exit_argmaxes(const PartialRun& run) {
  std::vector<int> preds;
  preds.reserve(run.exit_outputs.size());
  for (std::size_t k = 0; k < run.exit_outputs.size(); ++k) {
    preds.push_back(argmax(run.exit_output(static_cast<int>(k))));
  }
  return preds;
}

namespace {

void check_threshold(float threshold) {
  if (!(threshold >= 0.0f)) {
    throw ConfigError("change threshold must be non-negative");
  }
}

StepOutcome start_scene(const ExitGraph& graph, const Tensor& frame,
                        bool temporal_patience, std::int64_t t,
                        FrameToken token, std::optional<PartialRun> prior,
                        MacTrace* trace) {
  PartialRun pr = run_full(graph, frame, token, std::move(prior), trace);
  const std::vector<int> preds = exit_argmaxes(pr);
  const int vote = majority_vote(preds, graph.class_count());
  SceneState state;
  state.selected_exit = temporal_patience ? tp_select(preds, vote) : 0;
  state.reference_vector = pr.exit_output(state.selected_exit);
  state.reference_vote = vote;
  state.scene_start = t;
  state.next_t = t + 1;
  return {StepResult{vote, pr.macs, kFullVote, true}, std::move(state)};
}

}  // namespace

StepOutcome dd_step(const std::optional<SceneState>& state,
                    const ExitGraph& graph, const Tensor& frame,
                    float threshold, DdReference reference, MacTrace* trace) {
  check_threshold(threshold);
  const FrameToken token = graph.issue_frame_token();
  if (!state) {
    return start_scene(graph, frame, /*temporal_patience=*/false, 0, token,
                       std::nullopt, trace);
  }

  SceneState next = *state;
  const std::int64_t t = next.next_t;
  next.next_t = t + 1;

  PartialRun pr = run_to_exit(graph, frame, 0, token, std::nullopt, trace);
  const float change =
      euclidean_distance(pr.exit_output(0), next.reference_vector);
  if (change < threshold) {
    StepResult result{next.reference_vote, pr.macs, 0, false};
    if (reference == DdReference::kPredecessor) {
      next.reference_vector = pr.exit_output(0);
    }
    return {result, std::move(next)};
  }

  StepOutcome outcome = start_scene(graph, frame, /*temporal_patience=*/false,
                                    t, token, std::move(pr), trace);
  outcome.state.next_t = t + 1;
  return outcome;
}

StepOutcome tp_step(const std::optional<SceneState>& state,
                    const ExitGraph& graph, const Tensor& frame,
                    float threshold, MacTrace* trace) {
  check_threshold(threshold);
  const FrameToken token = graph.issue_frame_token();
  if (!state) {
    return start_scene(graph, frame, /*temporal_patience=*/true, 0, token,
                       std::nullopt, trace);
  }

  SceneState next = *state;
  const std::int64_t t = next.next_t;
  next.next_t = t + 1;

  const int tracked = next.selected_exit;
  PartialRun pr =
      run_to_exit(graph, frame, tracked, token, std::nullopt, trace);
  const VecXf& current = pr.exit_output(tracked);
  const float change = euclidean_distance(current, next.reference_vector);
  const int label = argmax(current);
  if (change < threshold && label == argmax(next.reference_vector)) {
    StepResult result{label, pr.macs, tracked, false};
    return {result, std::move(next)};
  }

  StepOutcome outcome = start_scene(graph, frame, /*temporal_patience=*/true,
                                    t, token, std::move(pr), trace);
  outcome.state.next_t = t + 1;
  return outcome;
}

StepResult confidence_step(const ExitGraph& graph, const Tensor& frame,
                           const std::vector<float>& confidence_thresholds,
                           MacTrace* trace) {
  const int n = graph.head_count();
  if (static_cast<int>(confidence_thresholds.size()) != n - 1) {
    throw ConfigError(
        "expected one confidence threshold per non-final exit (" +
        std::to_string(n - 1) + "), got " +
        std::to_string(confidence_thresholds.size()));
  }
  for (float t : confidence_thresholds) {
    if (!(t >= 0.0f && t <= 1.0f)) {
      throw ConfigError("confidence thresholds must lie in [0,1]");
    }
  }

  const FrameToken token = graph.issue_frame_token();
  std::optional<PartialRun> pr;
  for (int k = 0; k + 1 < n; ++k) {
    pr = run_to_exit(graph, frame, k, token, std::move(pr), trace);
    const VecXf& out = pr->exit_output(k);
    if (out.maxCoeff() >= confidence_thresholds[static_cast<std::size_t>(k)]) {
      return {argmax(out), pr->macs, k, false};
    }
  }
  pr = run_to_exit(graph, frame, n - 1, token, std::move(pr), trace);
  return {argmax(pr->exit_output(n - 1)), pr->macs, n - 1, false};
}

StepResult single_exit_step(const ExitGraph& graph, const Tensor& frame,
                            MacTrace* trace) {
  PartialRun pr = run_to_exit(graph, frame, graph.final_exit(), trace);
  return {argmax(pr.exit_output(graph.final_exit())), pr.macs,
          graph.final_exit(), false};
}

}  // namespace eenn
