#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "nrdectl/diffcore/nn.hpp"

namespace nrdectl {

/// Checkpoint layout:
///
///   {
///     "format": "nrdectl.checkpoint",
///     "version": 1,
///     "architecture": { ... policy descriptor ... },
///     "parameters": [
///       {"name": "lift.0.weight", "shape": [64, 2], "values": [ ... row-major float64 ... ]},
///       ...
///     ]
///   }
///
/// Values are written with round-trip precision.
nlohmann::json checkpoint_to_json(const ParameterSet& params, const nlohmann::json& architecture);

/// Parses a checkpoint. When `expected_architecture` is not null it must equal
/// the stored descriptor.
ParameterSet checkpoint_from_json(const nlohmann::json& doc,
                                  const nlohmann::json& expected_architecture = nullptr);

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const nlohmann::json& architecture);
ParameterSet load_checkpoint(const std::filesystem::path& path,
                             const nlohmann::json& expected_architecture = nullptr);

}  // namespace nrdectl
