#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "uvmap/tape.hpp"

namespace uvmap {

// Versioned binary checkpoint: magic, version, then per-tensor
// name / shape / row-major f64 payload (little-endian).
void save_checkpoint(const std::string& path,
                     const std::vector<const ParamTensor*>& tensors);

// Loads by name into the given tensors. Every tensor must be present in the
// file with a matching shape; mismatches raise FormatError.
void load_checkpoint(const std::string& path,
                     const std::vector<ParamTensor*>& tensors);

// Companion JSON manifest: per-network channel lists plus the RNG seed.
void save_checkpoint_manifest(const std::string& path,
                              const std::map<std::string, std::vector<std::size_t>>& channels,
                              std::uint64_t seed);

}  // namespace uvmap
