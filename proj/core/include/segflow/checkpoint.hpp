#pragma once

#include <filesystem>
#include <string>

#include "segflow/model.hpp"

namespace segflow {

// Canonical (key-sorted) JSON form of a ModelConfig; the config hash is
// FNV-1a over exactly this string.
std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& json_text);
std::uint64_t model_config_hash(const ModelConfig& config);

// Single-file self-describing archive: magic + versioned JSON header
// (config, config hash, parameter manifest) followed by raw little-endian
// float64 parameter data in manifest order. Loading rebuilds the model
// from the stored config and validates the config hash and the manifest
// against it; any inconsistency throws IoError.
void save_checkpoint(const SegFlowModel& model, const std::filesystem::path& path);
SegFlowModel load_checkpoint(const std::filesystem::path& path);

// Hash of the raw bytes of a file; used by determinism checks.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace segflow
