#pragma once

#include <filesystem>

#include "coal/model.hpp"
#include "json.hpp"

namespace coal {

inline constexpr int kCheckpointVersion = 1;

/// Checkpoint document (JSON, doubles written with round-trip precision):
///   {"format": "coal-checkpoint", "version": 1, "temperature": T,
///    "seed": S, "input_dim": n, "layer_widths": [...], "num_classes": c,
///    "blocks": [{"name", "rows", "cols", "values": [row-major]}]}
/// Blocks appear in ModelParams::blocks() order. Momentum buffers are not
/// stored.
nlohmann::json checkpoint_json(const ModelParams& params);
ModelParams checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace coal
