// Command-line front door: model/stream generation plus the benchmark
// protocol (single runs, threshold sweeps, scene-labeling comparison).

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "eenn/bench.hpp"
#include "eenn/config.hpp"
#include "eenn/model_io.hpp"
#include "eenn/stream.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = static_cast<int>(std::thread::hardware_concurrency());
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_out) {
  cmd->add_option("--config", args.config_path,
                  "key = value config file (see README)");
  auto* seed = cmd->add_option("--seed", args.seed,
                               "overrides the config seed");
  seed->each([&args](const std::string&) { args.seed_set = true; });
  auto* out = cmd->add_option("--out", args.out_path, "output file");
  if (needs_out) out->required();
}

eenn::BenchConfig load_config(const CommonArgs& args) {
  eenn::BenchConfig cfg = args.config_path.empty()
                              ? eenn::BenchConfig{}
                              : eenn::parse_config_file(args.config_path);
  if (args.seed_set) cfg.stream.seed = args.seed;
  cfg.stream.validate();
  return cfg;
}

eenn::ExitGraph resolve_graph(const eenn::BenchConfig& cfg) {
  if (!cfg.model_path.empty()) return eenn::load_model(cfg.model_path);
  return eenn::build_desk_model(eenn::class_centroids(cfg.stream),
                                eenn::DeskModelConfig{}, cfg.stream.seed);
}

std::vector<eenn::StreamSample> resolve_stream(const eenn::BenchConfig& cfg) {
  if (!cfg.stream_path.empty()) {
    return eenn::load_stream(cfg.stream_path).samples;
  }
  return eenn::generate_stream(cfg.stream).samples;
}

int cmd_gen_model(const CommonArgs& args) {
  const eenn::BenchConfig cfg = load_config(args);
  const eenn::ExitGraph graph = eenn::build_desk_model(
      eenn::class_centroids(cfg.stream), eenn::DeskModelConfig{},
      cfg.stream.seed);
  eenn::save_model(graph, args.out_path);
  std::cout << "wrote model (" << graph.head_count() << " exits, "
            << graph.class_count() << " classes) to " << args.out_path
            << "\n";
  return 0;
}

int cmd_gen_stream(const CommonArgs& args) {
  const eenn::BenchConfig cfg = load_config(args);
  const eenn::GeneratedStream stream = eenn::generate_stream(cfg.stream);
  eenn::save_stream(stream.samples, cfg.stream.class_count, args.out_path);
  std::cout << "wrote " << stream.samples.size() << " samples ("
            << stream.samples.back().scene_id + 1 << " scenes) to "
            << args.out_path << "\n";
  return 0;
}

int cmd_run(const CommonArgs& args) {
  const eenn::BenchConfig cfg = load_config(args);
  const eenn::ExitGraph graph = resolve_graph(cfg);
  const std::vector<eenn::StreamSample> stream = resolve_stream(cfg);
  const eenn::RunMetrics metrics = eenn::evaluate(cfg.policy, graph, stream);

  const bool thresholded =
      cfg.policy.kind == eenn::PolicyKind::kDifferenceDetection ||
      cfg.policy.kind == eenn::PolicyKind::kTemporalPatience;
  eenn::SweepTable table;
  table.kind = cfg.policy.kind;
  table.rows.push_back(
      {thresholded ? cfg.policy.threshold
                   : std::numeric_limits<float>::quiet_NaN(),
       metrics});
  eenn::report_csv({table}, args.out_path);
  std::cout << eenn::policy_kind_name(cfg.policy.kind)
            << ": accuracy=" << metrics.accuracy
            << " mean_macs=" << metrics.mean_macs << "\n";
  return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& policies) {
  const eenn::BenchConfig cfg = load_config(args);
  const eenn::ExitGraph graph = resolve_graph(cfg);
  const std::vector<eenn::StreamSample> stream = resolve_stream(cfg);

  std::vector<eenn::SweepTable> tables;
  if (policies == "all" || policies == "dd") {
    tables.push_back(eenn::sweep(eenn::PolicyKind::kDifferenceDetection,
                                 cfg.sweep_thresholds, graph, stream,
                                 args.threads));
  }
  if (policies == "all" || policies == "tp") {
    tables.push_back(eenn::sweep(eenn::PolicyKind::kTemporalPatience,
                                 cfg.sweep_thresholds, graph, stream,
                                 args.threads));
  }
  if (policies == "all") {
    eenn::PolicyConfig single;
    single.kind = eenn::PolicyKind::kSingleExit;
    eenn::SweepTable table;
    table.kind = single.kind;
    table.rows.push_back({std::numeric_limits<float>::quiet_NaN(),
                          eenn::evaluate(single, graph, stream)});
    tables.push_back(std::move(table));
  }
  if (tables.empty()) {
    throw eenn::ConfigError("--policies must be one of: all, dd, tp");
  }
  eenn::report_csv(tables, args.out_path);
  std::cout << "wrote sweep (" << cfg.sweep_thresholds.size()
            << " thresholds) to " << args.out_path << "\n";
  return 0;
}

int cmd_compare_labeling(const CommonArgs& args) {
  const eenn::BenchConfig cfg = load_config(args);
  const eenn::ExitGraph graph = resolve_graph(cfg);
  const std::vector<eenn::StreamSample> stream = resolve_stream(cfg);

  std::vector<float> thresholds = cfg.policy.confidence_thresholds;
  if (thresholds.empty()) {
    // tune on the first half, compare on the whole stream
    const std::vector<eenn::StreamSample> half(
        stream.begin(), stream.begin() + stream.size() / 2);
    thresholds = eenn::tune_confidence(graph, half).thresholds;
  }
  const eenn::LabelingComparison cmp =
      eenn::labeling_comparison(graph, stream, thresholds);

  char line[160];
  std::snprintf(line, sizeof(line), "%.6g,%.6g,%.4f\n", cmp.vote_accuracy,
                cmp.confidence_accuracy,
                std::fabs(cmp.vote_accuracy - cmp.confidence_accuracy));
  std::ofstream out(args.out_path, std::ios::binary);
  if (!out) {
    throw eenn::FormatError("cannot open '" + args.out_path +
                            "' for writing");
  }
  out << "vote_accuracy,confidence_accuracy,gap\n" << line;
  std::cout << "vote=" << cmp.vote_accuracy
            << " confidence=" << cmp.confidence_accuracy << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Early-exit inference benchmark over synthetic sensor streams"};
  app.require_subcommand(1);

  CommonArgs gen_model_args, gen_stream_args, run_args, sweep_args,
      compare_args;
  std::string sweep_policies = "all";

  CLI::App* gen_model = app.add_subcommand("gen-model", "build and save a desk model");
  add_common(gen_model, gen_model_args, true);

  CLI::App* gen_stream = app.add_subcommand("gen-stream", "generate and save a stream");
  add_common(gen_stream, gen_stream_args, true);

  CLI::App* run = app.add_subcommand("run", "evaluate one policy, emit a CSV row");
  add_common(run, run_args, true);

  CLI::App* sweep = app.add_subcommand("sweep", "threshold sweep, emit a CSV table");
  add_common(sweep, sweep_args, true);
  sweep->add_option("--threads", sweep_args.threads, "parallel sweep points");
  sweep->add_option("--policies", sweep_policies, "all, dd or tp");

  CLI::App* compare = app.add_subcommand(
      "compare-labeling", "majority vote vs confidence labeling accuracy");
  add_common(compare, compare_args, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_model->parsed()) return cmd_gen_model(gen_model_args);
    if (gen_stream->parsed()) return cmd_gen_stream(gen_stream_args);
    if (run->parsed()) return cmd_run(run_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_policies);
    if (compare->parsed()) return cmd_compare_labeling(compare_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
