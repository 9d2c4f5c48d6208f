#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coal/dataset.hpp"

namespace coal {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// MNIST-style IDX pair: unsigned-byte images (n x rows x cols) scaled to
/// [0, 1] and unsigned-byte labels. `num_classes` = 0 infers max label + 1.
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t num_classes = 0);

/// Writes pixel bytes (round(255 * v), clamped) and labels in IDX layout.
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const LabeledDataset& dataset, std::uint32_t image_rows, std::uint32_t image_cols);

/// CSV with a header row, float feature columns and a final integer label.
LabeledDataset load_csv(const std::filesystem::path& path, std::size_t num_classes = 0);
void write_csv(const std::filesystem::path& path, const LabeledDataset& dataset);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace coal
