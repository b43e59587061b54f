#pragma once

#include <string>
#include <vector>

#include "eenn/bench.hpp"
#include "eenn/policies.hpp"
#include "eenn/stream.hpp"

namespace eenn {

/// Benchmark configuration: stream + policy fields plus optional file paths.
/// Parsed from a UTF-8 `key = value` file ('#' starts a comment); see README
/// for the key list and a complete example.
struct BenchConfig {
  StreamConfig stream;
  PolicyConfig policy;
  std::vector<float> sweep_thresholds = default_threshold_grid();
  std::string model_path;   // empty: build the desk model from the config
  std::string stream_path;  // empty: generate the stream from the config
};

BenchConfig parse_config_file(const std::string& path);
BenchConfig parse_config_text(const std::string& text);

}  // namespace eenn
