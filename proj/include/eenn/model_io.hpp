#pragma once

#include <string>

#include "eenn/exit_graph.hpp"

namespace eenn {

/// Model file ("EXNN"): a UTF-8 JSON header describing the topology followed
/// by a little-endian float32 weight blob; the header records per-layer byte
/// offsets into the blob. Round trips are output-bit-exact.
void save_model(const ExitGraph& graph, const std::string& path);
ExitGraph load_model(const std::string& path);

}  // namespace eenn
