#pragma once

#include <filesystem>
#include <string>

#include "cola/model.hpp"

namespace cola {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary archive: magic, version, a JSON header (model config, stage, per-group
/// digests, freeze records) and the named parameter groups with shapes and raw
/// little-endian doubles.
void save_checkpoint(const ModelState& state, const std::filesystem::path& path);

/// Throws std::runtime_error on a bad magic, unsupported version, structural
/// mismatch or any group whose payload does not match its recorded digest.
ModelState load_checkpoint(const std::filesystem::path& path);

/// SHA-256 over the per-group digests of every existing group.
std::string state_digest(const ModelState& state);

}  // namespace cola
