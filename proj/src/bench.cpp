#include "eenn/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

namespace eenn {

namespace {

void check_stream(const ExitGraph& graph,
                  const std::vector<StreamSample>& stream) {
  if (stream.empty()) {
    throw std::invalid_argument("evaluate: empty stream");
  }
  if (stream.front().frame.shape() != graph.input_shape()) {
    throw ShapeError("stream frame shape " +
                     stream.front().frame.shape_str() +
                     " does not match graph input " +
                     Tensor::shape_string(graph.input_shape()));
  }
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

RunMetrics evaluate(const PolicyConfig& policy, const ExitGraph& graph,
                    const std::vector<StreamSample>& stream, MacTrace* trace) {
  check_stream(graph, stream);
  policy.validate(graph.head_count());

  const int heads = graph.head_count();
  RunMetrics metrics;
  metrics.policy = policy;
  metrics.exit_shares.assign(static_cast<std::size_t>(heads) + 1, 0.0);

  std::uint64_t correct = 0;
  std::optional<SceneState> state;
  for (const StreamSample& sample : stream) {
    StepResult r;
    switch (policy.kind) {
      case PolicyKind::kSingleExit:
        r = single_exit_step(graph, sample.frame, trace);
        break;
      case PolicyKind::kConfidence:
        r = confidence_step(graph, sample.frame, policy.confidence_thresholds,
                            trace);
        break;
      case PolicyKind::kDifferenceDetection: {
        StepOutcome o = dd_step(state, graph, sample.frame, policy.threshold,
                                policy.dd_reference, trace);
        r = o.result;
        state = std::move(o.state);
        break;
      }
      case PolicyKind::kTemporalPatience: {
        StepOutcome o = tp_step(state, graph, sample.frame, policy.threshold,
                                trace);
        r = o.result;
        state = std::move(o.state);
        break;
      }
    }
    correct += r.prediction == sample.label;
    metrics.total_macs += r.macs.value;
    const int slot = r.exit_used == kFullVote ? heads : r.exit_used;
    metrics.exit_shares[static_cast<std::size_t>(slot)] += 1.0;
    metrics.scene_change_count += r.scene_changed;
  }

  const double n = static_cast<double>(stream.size());
  metrics.accuracy = static_cast<double>(correct) / n;
  metrics.mean_macs = static_cast<double>(metrics.total_macs) / n;
  for (double& s : metrics.exit_shares) s /= n;
  return metrics;
}

SweepTable sweep(PolicyKind kind, std::vector<float> thresholds,
                 const ExitGraph& graph,
                 const std::vector<StreamSample>& stream, int threads) {
  if (kind != PolicyKind::kDifferenceDetection &&
      kind != PolicyKind::kTemporalPatience) {
    throw ConfigError("sweep requires a thresholded policy (dd or tp)");
  }
  if (thresholds.empty()) {
    throw ConfigError("sweep needs a non-empty threshold list");
  }
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) {
      throw ConfigError("sweep thresholds must be strictly increasing");
    }
  }
  check_stream(graph, stream);

  SweepTable table;
  table.kind = kind;
  table.rows.resize(thresholds.size());

  auto run_point = [&](std::size_t i) {
    PolicyConfig pc;
    pc.kind = kind;
    pc.threshold = thresholds[i];
    table.rows[i] = {thresholds[i], evaluate(pc, graph, stream)};
  };

  const int workers =
      std::clamp<int>(threads, 1, static_cast<int>(thresholds.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < thresholds.size(); ++i) run_point(i);
    return table;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < thresholds.size();
           i = next.fetch_add(1)) {
        run_point(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
  return table;
}

LabelingComparison labeling_comparison(
    const ExitGraph& graph, const std::vector<StreamSample>& stream,
    const std::vector<float>& confidence_thresholds) {
  check_stream(graph, stream);
  const int n = graph.head_count();
  if (static_cast<int>(confidence_thresholds.size()) != n - 1) {
    throw ConfigError(
        "expected one confidence threshold per non-final exit (" +
        std::to_string(n - 1) + "), got " +
        std::to_string(confidence_thresholds.size()));
  }

  std::uint64_t vote_correct = 0;
  std::uint64_t conf_correct = 0;
  for (const StreamSample& sample : stream) {
    const PartialRun pr = run_full(graph, sample.frame);
    const std::vector<int> preds = exit_argmaxes(pr);
    const int vote = majority_vote(preds, graph.class_count());

    int conf_label = preds.back();
    for (int k = 0; k + 1 < n; ++k) {
      if (pr.exit_output(k).maxCoeff() >=
          confidence_thresholds[static_cast<std::size_t>(k)]) {
        conf_label = preds[static_cast<std::size_t>(k)];
        break;
      }
    }
    vote_correct += vote == sample.label;
    conf_correct += conf_label == sample.label;
  }
  const double total = static_cast<double>(stream.size());
  return {static_cast<double>(vote_correct) / total,
          static_cast<double>(conf_correct) / total};
}

ConfidenceTuning tune_confidence(const ExitGraph& graph,
                                 const std::vector<StreamSample>& stream,
                                 const std::vector<float>& grid) {
  check_stream(graph, stream);
  if (grid.empty()) {
    throw ConfigError("tune_confidence needs a non-empty grid");
  }
  const int n = graph.head_count();

  // One full pass caches per-exit (confidence, prediction, correct) so every
  // grid combination is evaluated from the cache.
  struct ExitView {
    float confidence;
    bool correct;
  };
  std::vector<std::vector<ExitView>> cache(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const PartialRun pr = run_full(graph, stream[i].frame);
    cache[i].reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      const VecXf& out = pr.exit_output(k);
      cache[i].push_back({out.maxCoeff(), argmax(out) == stream[i].label});
    }
  }

  // Cascade cost when terminating at exit k: segments 0..k plus heads 0..k.
  std::vector<double> cascade_cost(static_cast<std::size_t>(n));
  {
    MacCount acc;
    for (int k = 0; k < n; ++k) {
      acc += graph.segment_cost(k);
      acc += graph.head_cost(k);
      cascade_cost[static_cast<std::size_t>(k)] =
          static_cast<double>(acc.value);
    }
  }
  const double budget = static_cast<double>(graph.single_exit_cost().value);

  std::vector<std::size_t> pick(static_cast<std::size_t>(n - 1), 0);
  ConfidenceTuning best;
  best.accuracy = -1.0;
  bool done = false;
  while (!done) {
    std::vector<float> thresholds(static_cast<std::size_t>(n - 1));
    for (int k = 0; k + 1 < n; ++k) {
      thresholds[static_cast<std::size_t>(k)] =
          grid[pick[static_cast<std::size_t>(k)]];
    }

    std::uint64_t correct = 0;
    double macs = 0.0;
    for (const auto& views : cache) {
      int used = n - 1;
      for (int k = 0; k + 1 < n; ++k) {
        if (views[static_cast<std::size_t>(k)].confidence >=
            thresholds[static_cast<std::size_t>(k)]) {
          used = k;
          break;
        }
      }
      correct += views[static_cast<std::size_t>(used)].correct;
      macs += cascade_cost[static_cast<std::size_t>(used)];
    }
    const double acc = static_cast<double>(correct) /
                       static_cast<double>(stream.size());
    const double mean = macs / static_cast<double>(stream.size());
    const bool feasible = mean < budget;
    const bool best_feasible = best.accuracy >= 0.0 && best.mean_macs < budget;
    bool better = false;
    if (best.accuracy < 0.0) {
      better = true;
    } else if (feasible != best_feasible) {
      better = feasible;
    } else if (acc != best.accuracy) {
      better = acc > best.accuracy;
    } else {
      better = mean < best.mean_macs;
    }
    if (better) best = {thresholds, acc, mean};

    // odometer over the grid
    done = true;
    for (std::size_t k = 0; k < pick.size(); ++k) {
      if (++pick[k] < grid.size()) {
        done = false;
        break;
      }
      pick[k] = 0;
    }
    if (pick.empty()) done = true;
  }
  return best;
}

std::vector<float> default_threshold_grid() {
  constexpr int kPoints = 16;
  const double lo = 1e-3;
  const double hi = std::sqrt(2.0);
  std::vector<float> grid;
  grid.reserve(kPoints);
  for (int i = 0; i < kPoints; ++i) {
    grid.push_back(static_cast<float>(
        lo * std::pow(hi / lo, static_cast<double>(i) / (kPoints - 1))));
  }
  return grid;
}

std::string csv_report(const std::vector<SweepTable>& tables) {
  if (tables.empty()) {
    throw std::invalid_argument("csv_report: no tables");
  }
  std::size_t heads = 0;
  for (const SweepTable& t : tables) {
    for (const auto& [thr, m] : t.rows) {
      if (heads == 0) heads = m.exit_shares.size() - 1;
      if (m.exit_shares.size() != heads + 1) {
        throw std::invalid_argument(
            "csv_report: rows disagree on the exit count");
      }
    }
  }
  if (heads == 0) {
    throw std::invalid_argument("csv_report: tables carry no rows");
  }

  std::string out = "policy,threshold,accuracy,mean_macs";
  for (std::size_t k = 0; k < heads; ++k) {
    out += ",share_exit" + std::to_string(k);
  }
  out += ",share_full_vote,scene_changes\n";

  for (const SweepTable& t : tables) {
    for (const auto& [threshold, m] : t.rows) {
      std::string name = policy_kind_name(t.kind);
      if (t.kind == PolicyKind::kDifferenceDetection &&
          m.policy.dd_reference == DdReference::kPredecessor) {
        name += "_predecessor";
      }
      out += name;
      out += ',';
      if (!std::isnan(threshold)) out += fmt6(threshold);
      out += ',';
      out += fmt6(m.accuracy);
      out += ',';
      out += fmt6(m.mean_macs);
      for (double s : m.exit_shares) {
        out += ',';
        out += fmt6(s);
      }
      out += ',';
      out += std::to_string(m.scene_change_count);
      out += '\n';
    }
  }
  return out;
}

void report_csv(const std::vector<SweepTable>& tables,
                const std::string& path) {
  const std::string text = csv_report(tables);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open '" + path + "' for writing");
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw FormatError("write failure on '" + path + "'");
  }
}

}  // namespace eenn
