#pragma once

#include <filesystem>
#include <string>

#include "loyalty/model/classifier.hpp"

namespace loyalty::model {

/// Checkpoint layout (all integers little-endian):
///   bytes 0..7   magic "LOYLCKPT"
///   bytes 8..11  u32 format version (1)
///   bytes 12..19 u64 header length H
///   H bytes      JSON header: config, provenance, int8_final, gates, the
///                tensor table (name, shape) and the int8 table
///   payload      float64 values of every tensor in table order, then the
///                int8 weights of every quantized linear in table order
inline constexpr char kCheckpointMagic[8] = {'L', 'O', 'Y', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save(const ClassifierModel& model, const std::filesystem::path& path);
/// Throws FormatError (with byte offset) for corrupt or truncated files and
/// IoError when the file cannot be opened.
ClassifierModel load(const std::filesystem::path& path);

std::string serialize(const ClassifierModel& model);
ClassifierModel deserialize(const std::string& bytes);

}  // namespace loyalty::model
