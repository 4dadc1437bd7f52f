// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lumos::cli {

/// Provenance record for one CLI run: command, config snapshot, input file
/// hashes, output paths and wall time. Written atomically at run end.
class RunManifest {
public:
    RunManifest(std::string command, std::vector<std::string> argv);

    void set_config(nlohmann::json config);
    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);

    nlohmann::json to_json() const;

    /// Serializes to <dir>/manifest.json via a temp file + rename.
    void write(const std::filesystem::path& dir) const;
    void write_to_file(const std::filesystem::path& file) const;

private:
    std::string command_;
    std::vector<std::string> argv_;
    nlohmann::json config_;
    std::vector<std::pair<std::string, std::string>> inputs_; // path, fnv1a64
    std::vector<std::string> outputs_;
    std::chrono::steady_clock::time_point start_;
};

std::string fnv1a64_file(const std::filesystem::path& path);

} // namespace lumos::cli
