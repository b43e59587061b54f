#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eenn/exit_graph.hpp"
#include "eenn/policies.hpp"
#include "eenn/stream.hpp"

namespace eenn {

struct RunMetrics {
  double accuracy = 0.0;
  double mean_macs = 0.0;
  std::uint64_t total_macs = 0;
  // fraction of steps terminated at each exit, plus a final full-vote slot
  std::vector<double> exit_shares;
  std::int64_t scene_change_count = 0;
  PolicyConfig policy;
};

struct SweepTable {
  PolicyKind kind = PolicyKind::kDifferenceDetection;
  // NaN thresholds mark rows of policies without a scalar threshold
  std::vector<std::pair<float, RunMetrics>> rows;
};

/// Feeds the stream through the policy state machine in order.
RunMetrics evaluate(const PolicyConfig& policy, const ExitGraph& graph,
                    const std::vector<StreamSample>& stream,
                    MacTrace* trace = nullptr);

/// One evaluate per threshold, rows ordered by threshold. Sweep points are
/// independent; `threads` > 1 runs them in parallel with identical results.
SweepTable sweep(PolicyKind kind, std::vector<float> thresholds,
                 const ExitGraph& graph,
                 const std::vector<StreamSample>& stream, int threads = 1);

struct LabelingComparison {
  double vote_accuracy = 0.0;
  double confidence_accuracy = 0.0;
};

/// Applies both new-scene labeling rules (majority vote over all exits vs
/// confidence cascade) to every sample of the stream, over full runs.
LabelingComparison labeling_comparison(
    const ExitGraph& graph, const std::vector<StreamSample>& stream,
    const std::vector<float>& confidence_thresholds);

struct ConfidenceTuning {
  std::vector<float> thresholds;
  double accuracy = 0.0;
  double mean_macs = 0.0;
};

/// Exhaustive grid search of per-exit confidence thresholds on `stream`;
/// picks the config maximizing accuracy subject to mean MACs below the
/// single-exit cost (ties: cheaper wins).
ConfidenceTuning tune_confidence(
    const ExitGraph& graph, const std::vector<StreamSample>& stream,
    const std::vector<float>& grid = {0.5f, 0.55f, 0.6f, 0.65f, 0.7f, 0.75f,
                                      0.8f, 0.85f, 0.9f, 0.95f});

/// 16 geometrically spaced thresholds in [1e-3, sqrt(2)]; sqrt(2) is the
/// largest Euclidean distance two probability vectors can have.
std::vector<float> default_threshold_grid();

/// CSV with one row per sweep row:
///   policy,threshold,accuracy,mean_macs,share_exit0,...,share_full_vote,scene_changes
/// Numbers carry 6 significant digits; output is byte-deterministic.
std::string csv_report(const std::vector<SweepTable>& tables);
void report_csv(const std::vector<SweepTable>& tables,
                const std::string& path);

}  // namespace eenn
