#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "eenn/tensor.hpp"

namespace eenn {

/// Scene-structured synthetic stream: scenes of geometrically distributed
/// length, one class centroid per scene (consecutive scenes differ), samples
/// drawn as centroid + cumulative in-scene drift + i.i.d. Gaussian noise.
/// Fully determined by the seed: centroids, scene structure and noise come
/// from independently derived sub-generators, so changing noise_sigma or
/// drift_rate never changes the scene layout.
struct StreamConfig {
  int class_count = 5;
  std::array<Index, 4> frame_shape{8, 16, 16, 3};  // T,H,W,C
  int mean_scene_length = 30;                      // samples
  float noise_sigma = 0.35f;
  float drift_rate = 0.002f;  // per-sample centroid drift along a scene direction
  std::int64_t stream_length = 10000;
  std::uint64_t seed = 42;

  void validate() const;
};

struct StreamSample {
  Tensor frame;
  int label = 0;
  std::int64_t scene_id = 0;
};

struct GeneratedStream {
  std::vector<StreamSample> samples;
  std::vector<Tensor> centroids;
};

/// Per-class centroid frames; a pure function of seed, class count and frame
/// shape (the model builder and the stream generator agree on these).
std::vector<Tensor> class_centroids(const StreamConfig& config);

GeneratedStream generate_stream(const StreamConfig& config);

/// Binary stream file ("EXST"): see README for the exact layout. Round trips
/// are bit-exact.
void save_stream(const std::vector<StreamSample>& samples, int class_count,
                 const std::string& path);

struct LoadedStream {
  std::vector<StreamSample> samples;
  int class_count = 0;
};

LoadedStream load_stream(const std::string& path);

}  // namespace eenn
