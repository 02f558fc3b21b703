#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "seqlab/data.hpp"
#include "seqlab/model.hpp"
#include "seqlab/training.hpp"

namespace seqlab {

/// A full training snapshot: enough to evaluate, sample from, or resume
/// training at epoch completed_epochs + 1.
struct Checkpoint {
    TrainConfig config;
    Vocabulary vocab;
    ModelParams params;
    int completed_epochs = 0;
};

/// Binary container: magic + format version, a length-prefixed JSON header
/// (config, vocabulary, gate order, progress, tensor inventory), the raw
/// fp64 little-endian tensor payload in the declared order, and a trailing
/// FNV-1a 64 checksum of everything before it. Loading verifies magic,
/// version, checksum, and shapes, and rejects anything that does not match
/// byte for byte.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const std::string& text);

std::uint64_t fnv1a64(const unsigned char* data, std::size_t len);

}  // namespace seqlab
