// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include "manifest.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>

#include <lumos/errors.hpp>

namespace lumos::cli {

std::string fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot hash missing input: " + path.string());
    }
    std::uint64_t h = 1469598103934665603ull;
    char buf[8192];
    while (is) {
        is.read(buf, sizeof(buf));
        const std::streamsize n = is.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)),
      start_(std::chrono::steady_clock::now()) {}

void RunManifest::set_config(nlohmann::json config) { config_ = std::move(config); }

void RunManifest::add_input(const std::filesystem::path& path) {
    inputs_.emplace_back(path.string(), fnv1a64_file(path));
}

void RunManifest::add_output(const std::filesystem::path& path) {
    outputs_.push_back(path.string());
}

nlohmann::json RunManifest::to_json() const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& [path, hash] : inputs_) {
        inputs[path] = hash;
    }
    return nlohmann::json{{"command", command_}, {"argv", argv_},      {"config", config_},
                          {"inputs", inputs},    {"outputs", outputs_}, {"wall_time_s", wall}};
}

void RunManifest::write_to_file(const std::filesystem::path& file) const {
    const std::filesystem::path tmp = file.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) {
            throw IoError("cannot write manifest: " + tmp.string());
        }
        os << to_json().dump(2) << "\n";
    }
    std::filesystem::rename(tmp, file);
}

void RunManifest::write(const std::filesystem::path& dir) const {
    write_to_file(dir / "manifest.json");
}

} // namespace lumos::cli
