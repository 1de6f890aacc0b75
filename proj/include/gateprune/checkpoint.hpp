#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "gateprune/network.hpp"
#include "gateprune/regularization.hpp"

namespace gateprune {

class CheckpointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct CheckpointManifest {
    std::string model;
    int epoch = 0;
    std::uint64_t seed = 0;
    RegularizerSpec reg;
    std::map<std::string, double> metrics;
};

// Container layout: one format-version byte, a little-endian u64 length, a
// JSON manifest (architecture, groups, run state, tensor table, blob CRC),
// then the raw little-endian float32 blobs in table order. Tensors round-trip
// bit-exactly. Writes go to a temp file renamed into place.
void save_checkpoint(const NetworkGraph& net, const CheckpointManifest& manifest,
                     const std::filesystem::path& path);

struct LoadedCheckpoint {
    NetworkGraph net;
    CheckpointManifest manifest;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gateprune
