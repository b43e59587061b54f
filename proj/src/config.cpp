#include "eenn/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace eenn {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has non-numeric value '" +
                      value + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  const double v = parse_number(key, value);
  const auto i = static_cast<std::int64_t>(v);
  if (static_cast<double>(i) != v) {
    throw ConfigError("config key '" + key + "' must be an integer, got '" +
                      value + "'");
  }
  return i;
}

std::vector<float> parse_float_list(const std::string& key,
                                    const std::string& value) {
  std::vector<float> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) {
      throw ConfigError("config key '" + key + "' has an empty list entry");
    }
    out.push_back(static_cast<float>(parse_number(key, item)));
  }
  if (out.empty()) {
    throw ConfigError("config key '" + key + "' has an empty list");
  }
  return out;
}

}  // namespace

BenchConfig parse_config_text(const std::string& text) {
  BenchConfig cfg;
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        " is not 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        " is missing a key or value");
    }

    if (key == "class_count") {
      cfg.stream.class_count = static_cast<int>(parse_int(key, value));
    } else if (key == "frame_t") {
      cfg.stream.frame_shape[0] = parse_int(key, value);
    } else if (key == "frame_h") {
      cfg.stream.frame_shape[1] = parse_int(key, value);
    } else if (key == "frame_w") {
      cfg.stream.frame_shape[2] = parse_int(key, value);
    } else if (key == "frame_c") {
      cfg.stream.frame_shape[3] = parse_int(key, value);
    } else if (key == "mean_scene_length") {
      cfg.stream.mean_scene_length = static_cast<int>(parse_int(key, value));
    } else if (key == "noise_sigma") {
      cfg.stream.noise_sigma = static_cast<float>(parse_number(key, value));
    } else if (key == "drift_rate") {
      cfg.stream.drift_rate = static_cast<float>(parse_number(key, value));
    } else if (key == "stream_length") {
      cfg.stream.stream_length = parse_int(key, value);
    } else if (key == "seed") {
      cfg.stream.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "policy") {
      cfg.policy.kind = policy_kind_from_name(value);
    } else if (key == "threshold") {
      cfg.policy.threshold = static_cast<float>(parse_number(key, value));
    } else if (key == "confidence_thresholds") {
      cfg.policy.confidence_thresholds = parse_float_list(key, value);
    } else if (key == "sweep_thresholds") {
      cfg.sweep_thresholds = parse_float_list(key, value);
    } else if (key == "model_path") {
      cfg.model_path = value;
    } else if (key == "stream_path") {
      cfg.stream_path = value;
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return cfg;
}

BenchConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

}  // namespace eenn
