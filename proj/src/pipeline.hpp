// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace seqembed {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr std::int64_t kConfigSchemaVersion = 1;

// FNV-1a over the file bytes, rendered as "fnv1a64:" + 16 hex digits.
std::string file_digest(const std::string& path);

const std::vector<std::string>& known_commands();

// Runs one subcommand on a fully resolved config document. The config must
// carry schema_version and an "out" directory; unknown keys are rejected so
// schema drift fails loudly. The runner writes its artifacts plus a
// manifest.json under "out" and returns the manifest document.
nlohmann::json run_command(const std::string& command, const nlohmann::json& config);

// Replays a recorded run: same command, same config except for the output
// directory. Artifacts with numeric CSV fields reproduce bit-identically.
nlohmann::json rerun_manifest(const std::string& manifest_path, const std::string& out_dir);

}  // namespace seqembed
