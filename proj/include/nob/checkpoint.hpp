#pragma once

#include <filesystem>
#include <optional>

#include "nob/data.hpp"
#include "nob/models.hpp"

namespace nob::models {

// Checkpoint file: u32 little-endian header length, JSON header (model
// configuration, optional normalization record), then all parameters as raw
// little-endian binary32 in sorted-name order.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::optional<data::NormRecord>& norm);

struct Checkpoint {
    std::unique_ptr<Model> model;
    std::optional<data::NormRecord> norm;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

// JSON (de)serialization of the run-level model configuration.
std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

}  // namespace nob::models
