#pragma once

#include <cstdint>
#include <string>

#include "hebbes/es.hpp"

namespace hebbes {

// Binary checkpoint: magic, version, config hash, optimizer state, model
// parameters as row-major little-endian 64-bit floats, trailing FNV-1a
// checksum. Written atomically (temp file + rename). Reloading and continuing
// reproduces the uninterrupted run bitwise, since all random streams are
// derived from (base_seed, purpose, generation, index) rather than carried
// state.
inline constexpr char kCheckpointMagic[8] = {'H', 'E', 'B', 'B', 'C', 'K', 'P', '1'};

void save_checkpoint(const std::string& path, const EsState& state,
                     const EsConfig& cfg, std::uint64_t config_hash_value);

// Throws ConfigError-compatible std::runtime_error on corrupt files or a
// config hash mismatch.
EsState load_checkpoint(const std::string& path, const EsConfig& cfg,
                        std::uint64_t expected_config_hash);

}  // namespace hebbes
