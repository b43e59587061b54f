#include "eenn/model_io.hpp"

#include <json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <utility>
#include <vector>

namespace eenn {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'E', 'X', 'N', 'N'};
constexpr int kModelVersion = 1;

std::string kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kReorderTimeAntenna:
      return "reorder_time_antenna";
    case LayerKind::kConv:
      return "conv2d";
    case LayerKind::kDepthwiseConv:
      return "depthwise_conv2d";
    case LayerKind::kMaxPool:
      return "max_pool2d";
    case LayerKind::kAvgPool:
      return "avg_pool2d";
    case LayerKind::kFlatten:
      return "flatten";
    case LayerKind::kDense:
      return "dense";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& name) {
  if (name == "reorder_time_antenna") return LayerKind::kReorderTimeAntenna;
  if (name == "conv2d") return LayerKind::kConv;
  if (name == "depthwise_conv2d") return LayerKind::kDepthwiseConv;
  if (name == "max_pool2d") return LayerKind::kMaxPool;
  if (name == "avg_pool2d") return LayerKind::kAvgPool;
  if (name == "flatten") return LayerKind::kFlatten;
  if (name == "dense") return LayerKind::kDense;
  throw FormatError("model header names unknown layer kind '" + name + "'");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kNone:
      return "none";
    case Activation::kRelu:
      return "relu";
    case Activation::kSoftmax:
      return "softmax";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  if (name == "none") return Activation::kNone;
  if (name == "relu") return Activation::kRelu;
  if (name == "softmax") return Activation::kSoftmax;
  throw FormatError("model header names unknown activation '" + name + "'");
}

json tensor_entry(const Tensor& t, std::vector<float>& blob) {
  json entry;
  entry["shape"] = t.shape();
  entry["offset"] = blob.size() * sizeof(float);
  entry["bytes"] = static_cast<std::size_t>(t.size()) * sizeof(float);
  blob.insert(blob.end(), t.data().data(), t.data().data() + t.size());
  return entry;
}

json layer_to_json(const LayerSpec& spec, std::vector<float>& blob) {
  json j;
  j["kind"] = kind_name(spec.kind);
  j["activation"] = activation_name(spec.activation);
  j["stride"] = {spec.stride_h, spec.stride_w};
  j["padding"] = spec.padding == Padding::kSame ? "same" : "valid";
  if (spec.kind == LayerKind::kMaxPool || spec.kind == LayerKind::kAvgPool) {
    j["window"] = {spec.window_h, spec.window_w};
  }
  if (spec.has_params()) {
    j["weights"] = tensor_entry(spec.weights, blob);
    j["bias"] = tensor_entry(Tensor({spec.bias.size()}, spec.bias), blob);
  }
  return j;
}

Tensor tensor_from_entry(const json& entry, const std::vector<char>& blob,
                         const std::string& where) {
  if (!entry.is_object() || !entry.contains("shape") ||
      !entry.contains("offset") || !entry.contains("bytes")) {
    throw FormatError("model header " + where +
                      " is missing shape/offset/bytes");
  }
  std::vector<Index> shape = entry["shape"].get<std::vector<Index>>();
  const std::size_t offset = entry["offset"].get<std::size_t>();
  const std::size_t bytes = entry["bytes"].get<std::size_t>();
  Index elems = 1;
  for (Index d : shape) {
    if (d < 1) throw FormatError("model header " + where + " has invalid shape");
    elems *= d;
  }
  if (bytes != static_cast<std::size_t>(elems) * sizeof(float)) {
    throw FormatError("model header " + where +
                      " byte count does not match its shape");
  }
  if (offset + bytes > blob.size()) {
    throw FormatError("model header " + where +
                      " points outside the weight blob");
  }
  Tensor t(shape);
  std::memcpy(t.data().data(), blob.data() + offset, bytes);
  return t;
}

LayerSpec layer_from_json(const json& j, const std::vector<char>& blob,
                          const std::string& where) {
  if (!j.is_object() || !j.contains("kind")) {
    throw FormatError("model header " + where + " is not a layer object");
  }
  LayerSpec spec;
  spec.kind = kind_from_name(j["kind"].get<std::string>());
  spec.activation =
      activation_from_name(j.value<std::string>("activation", "none"));
  if (j.contains("stride")) {
    const auto stride = j["stride"].get<std::vector<Index>>();
    if (stride.size() != 2) {
      throw FormatError("model header " + where + " stride must have 2 entries");
    }
    spec.stride_h = stride[0];
    spec.stride_w = stride[1];
  }
  const std::string padding = j.value<std::string>("padding", "valid");
  if (padding == "same") {
    spec.padding = Padding::kSame;
  } else if (padding == "valid") {
    spec.padding = Padding::kValid;
  } else {
    throw FormatError("model header " + where + " has unknown padding '" +
                      padding + "'");
  }
  if (spec.kind == LayerKind::kMaxPool || spec.kind == LayerKind::kAvgPool) {
    if (!j.contains("window")) {
      throw FormatError("model header " + where + " pool needs a window");
    }
    const auto window = j["window"].get<std::vector<Index>>();
    if (window.size() != 2) {
      throw FormatError("model header " + where + " window must have 2 entries");
    }
    spec.window_h = window[0];
    spec.window_w = window[1];
  }
  if (spec.has_params()) {
    if (!j.contains("weights") || !j.contains("bias")) {
      throw FormatError("model header " + where + " needs weights and bias");
    }
    spec.weights = tensor_from_entry(j["weights"], blob, where + " weights");
    Tensor bias = tensor_from_entry(j["bias"], blob, where + " bias");
    if (bias.rank() != 1) {
      throw FormatError("model header " + where + " bias must be rank 1");
    }
    spec.bias = bias.data();
  }
  return spec;
}

}  // namespace

void save_model(const ExitGraph& graph, const std::string& path) {
  std::vector<float> blob;
  json header;
  header["format_version"] = kModelVersion;
  header["class_count"] = graph.class_count();
  header["input_shape"] = graph.input_shape();
  json segments = json::array();
  for (const LayerStack& stack : graph.segments()) {
    json layers = json::array();
    for (const LayerSpec& spec : stack) layers.push_back(layer_to_json(spec, blob));
    segments.push_back(std::move(layers));
  }
  header["segments"] = std::move(segments);
  json heads = json::array();
  for (const LayerStack& stack : graph.heads()) {
    json layers = json::array();
    for (const LayerSpec& spec : stack) layers.push_back(layer_to_json(spec, blob));
    heads.push_back(std::move(layers));
  }
  header["heads"] = std::move(heads);
  header["blob_bytes"] = blob.size() * sizeof(float);

  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open '" + path + "' for writing");
  }
  out.write(kMagic, 4);
  const std::uint32_t len = static_cast<std::uint32_t>(text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!out) {
    throw FormatError("write failure on '" + path + "'");
  }
}

ExitGraph load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open model file '" + path + "'");
  }
  const std::uintmax_t file_size = std::filesystem::file_size(path);

  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("'" + path + "' is not a model file (bad magic)");
  }
  std::uint32_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || 8ull + header_len > file_size) {
    throw FormatError("truncated model file '" + path + "'");
  }
  std::string text(header_len, '\0');
  in.read(text.data(), header_len);
  if (!in) {
    throw FormatError("truncated model file '" + path + "'");
  }

  json header;
  try {
    header = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed model header: ") + e.what());
  }
  if (!header.contains("format_version")) {
    throw FormatError("model header is missing format_version");
  }
  const int version = header["format_version"].get<int>();
  if (version != kModelVersion) {
    throw VersionError("unsupported model format version " +
                       std::to_string(version));
  }
  if (!header.contains("class_count") || !header.contains("input_shape") ||
      !header.contains("segments") || !header.contains("heads")) {
    throw FormatError("model header is missing required fields");
  }

  const std::size_t blob_bytes = file_size - 8 - header_len;
  if (header.contains("blob_bytes") &&
      header["blob_bytes"].get<std::size_t>() != blob_bytes) {
    throw FormatError("model blob is truncated (header expects " +
                      std::to_string(header["blob_bytes"].get<std::size_t>()) +
                      " bytes, file carries " + std::to_string(blob_bytes) +
                      ")");
  }
  std::vector<char> blob(blob_bytes);
  in.read(blob.data(), static_cast<std::streamsize>(blob_bytes));
  if (!in) {
    throw FormatError("truncated model file '" + path + "'");
  }

  auto parse_stacks = [&](const json& arr, const std::string& what) {
    std::vector<LayerStack> stacks;
    if (!arr.is_array()) {
      throw FormatError("model header " + what + " must be an array");
    }
    for (std::size_t s = 0; s < arr.size(); ++s) {
      LayerStack stack;
      for (std::size_t l = 0; l < arr[s].size(); ++l) {
        stack.push_back(layer_from_json(
            arr[s][l], blob,
            what + "[" + std::to_string(s) + "][" + std::to_string(l) + "]"));
      }
      stacks.push_back(std::move(stack));
    }
    return stacks;
  };

  // ExitGraph's constructor performs the shape-consistency validation and
  // throws ShapeError diagnostics distinct from the format errors above.
  return ExitGraph(parse_stacks(header["segments"], "segments"),
                   parse_stacks(header["heads"], "heads"),
                   header["class_count"].get<int>(),
                   header["input_shape"].get<std::vector<Index>>());
}

}  // namespace eenn
