#include "eenn/stream.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <utility>

namespace eenn {

namespace {

// splitmix64 step; derives independent sub-seeds from the master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kCentroidTag = 0x11;
constexpr std::uint64_t kSceneTag = 0x22;
constexpr std::uint64_t kNoiseTag = 0x33;

Tensor gaussian_frame(const std::array<Index, 4>& shape,
                      std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t({shape[0], shape[1], shape[2], shape[3]});
  for (Index i = 0; i < t.size(); ++i) {
    t.data()[i] = static_cast<float>(normal(rng));
  }
  return t;
}

constexpr char kMagic[4] = {'E', 'X', 'S', 'T'};
constexpr std::uint16_t kStreamVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

}  // namespace

void StreamConfig::validate() const {
  if (class_count < 2) {
    throw ConfigError("class_count must be >= 2, got " +
                      std::to_string(class_count));
  }
  for (Index d : frame_shape) {
    if (d < 1) throw ConfigError("frame dimensions must be >= 1");
  }
  if (mean_scene_length < 1) {
    throw ConfigError("mean_scene_length must be >= 1");
  }
  if (!(noise_sigma >= 0.0f) || !std::isfinite(noise_sigma)) {
    throw ConfigError("noise_sigma must be finite and non-negative");
  }
  if (!(drift_rate >= 0.0f) || !std::isfinite(drift_rate)) {
    throw ConfigError("drift_rate must be finite and non-negative");
  }
  if (stream_length < 1) {
    throw ConfigError("stream_length must be >= 1");
  }
}

std::vector<Tensor> class_centroids(const StreamConfig& config) {
  config.validate();
  std::mt19937_64 rng(mix_seed(config.seed, kCentroidTag));
  std::vector<Tensor> centroids;
  centroids.reserve(static_cast<std::size_t>(config.class_count));
  for (int c = 0; c < config.class_count; ++c) {
    centroids.push_back(gaussian_frame(config.frame_shape, rng));
  }
  return centroids;
}

GeneratedStream generate_stream(const StreamConfig& config) {
  config.validate();
  GeneratedStream out;
  out.centroids = class_centroids(config);

  std::mt19937_64 scene_rng(mix_seed(config.seed, kSceneTag));
  std::mt19937_64 noise_rng(mix_seed(config.seed, kNoiseTag));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> first_class(0, config.class_count - 1);
  std::uniform_int_distribution<int> other_class(0, config.class_count - 2);

  out.samples.reserve(static_cast<std::size_t>(config.stream_length));
  std::int64_t pos = 0;
  std::int64_t scene_id = 0;
  int prev_class = -1;
  while (pos < config.stream_length) {
    int cls;
    if (prev_class < 0) {
      cls = first_class(scene_rng);
    } else {
      cls = other_class(scene_rng);
      if (cls >= prev_class) ++cls;  // consecutive scenes differ
    }

    std::int64_t length = 1;
    if (config.mean_scene_length > 1) {
      std::geometric_distribution<std::int64_t> geometric(
          1.0 / config.mean_scene_length);
      length = geometric(scene_rng) + 1;
    }

    const Tensor drift_dir = gaussian_frame(config.frame_shape, scene_rng);
    const Tensor& centroid = out.centroids[static_cast<std::size_t>(cls)];

    for (std::int64_t k = 0; k < length && pos < config.stream_length;
         ++k, ++pos) {
      Tensor frame = centroid;
      if (config.drift_rate > 0.0f && k > 0) {
        frame.data() +=
            (config.drift_rate * static_cast<float>(k)) * drift_dir.data();
      }
      if (config.noise_sigma > 0.0f) {
        for (Index i = 0; i < frame.size(); ++i) {
          frame.data()[i] +=
              config.noise_sigma * static_cast<float>(normal(noise_rng));
        }
      }
      out.samples.push_back({std::move(frame), cls, scene_id});
    }
    prev_class = cls;
    ++scene_id;
  }
  return out;
}

void save_stream(const std::vector<StreamSample>& samples, int class_count,
                 const std::string& path) {
  if (samples.empty()) {
    throw std::invalid_argument("save_stream: empty sample list");
  }
  const std::vector<Index>& shape = samples.front().frame.shape();
  if (shape.size() != 4) {
    throw ShapeError("save_stream expects rank-4 frames, got " +
                     samples.front().frame.shape_str());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open '" + path + "' for writing");
  }
  out.write(kMagic, 4);
  write_le<std::uint16_t>(out, kStreamVersion);
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(class_count));
  for (Index d : shape) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(samples.size()));
  for (const StreamSample& s : samples) {
    if (s.frame.shape() != shape) {
      throw ShapeError("save_stream: inconsistent frame shapes");
    }
    out.write(reinterpret_cast<const char*>(s.frame.data().data()),
              static_cast<std::streamsize>(s.frame.size() * sizeof(float)));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.label));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.scene_id));
  }
  if (!out) {
    throw FormatError("write failure on '" + path + "'");
  }
}

LoadedStream load_stream(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open stream file '" + path + "'");
  }
  const std::uintmax_t file_size = std::filesystem::file_size(path);

  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("'" + path + "' is not a stream file (bad magic)");
  }
  const auto version = read_le<std::uint16_t>(in);
  if (version != kStreamVersion) {
    throw VersionError("unsupported stream format version " +
                       std::to_string(version));
  }
  const auto class_count = read_le<std::uint16_t>(in);
  std::vector<Index> shape(4);
  for (Index& d : shape) {
    d = static_cast<Index>(read_le<std::uint32_t>(in));
    if (d < 1) throw FormatError("stream header has invalid frame dims");
  }
  const auto length = read_le<std::uint64_t>(in);
  if (!in || class_count < 2 || length == 0) {
    throw FormatError("stream header is malformed");
  }

  const std::uint64_t frame_elems =
      static_cast<std::uint64_t>(shape[0] * shape[1] * shape[2] * shape[3]);
  const std::uint64_t expected =
      32 + length * (frame_elems * sizeof(float) + 8);
  if (file_size != expected) {
    throw FormatError("stream file size " + std::to_string(file_size) +
                      " does not match header (expected " +
                      std::to_string(expected) + " bytes)");
  }

  LoadedStream out;
  out.class_count = class_count;
  out.samples.reserve(length);
  std::int64_t prev_scene = -1;
  for (std::uint64_t i = 0; i < length; ++i) {
    Tensor frame(shape);
    in.read(reinterpret_cast<char*>(frame.data().data()),
            static_cast<std::streamsize>(frame_elems * sizeof(float)));
    const auto label = read_le<std::uint32_t>(in);
    const auto scene_id = read_le<std::uint32_t>(in);
    if (!in) {
      throw FormatError("truncated stream file '" + path + "'");
    }
    if (label >= class_count) {
      throw FormatError("stream sample " + std::to_string(i) +
                        " has label outside the declared class count");
    }
    if (static_cast<std::int64_t>(scene_id) < prev_scene) {
      throw FormatError("stream scene ids must be non-decreasing");
    }
    prev_scene = static_cast<std::int64_t>(scene_id);
    out.samples.push_back(
        {std::move(frame), static_cast<int>(label), prev_scene});
  }
  return out;
}

}  // namespace eenn
