#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace microtrap::cli
{
/// Hex SHA-1 of a file's bytes. Throws ConfigError when it cannot be read.
[[nodiscard]] std::string file_hash(const std::filesystem::path& path);

struct OutputFile
{
    std::string name; // relative to the output directory
    std::string hash;
};

/// Record of one command run: what was read, what was written, and how.
struct RunManifest
{
    std::string command;
    std::vector<std::string> arguments;
    std::map<std::string, std::string> config_hashes; // path -> SHA-1
    std::uint64_t seed = 1;
    int threads = 1;
    std::string version;
    double wall_time = 0.0; // s
    std::vector<OutputFile> outputs;
    nlohmann::json metadata = nlohmann::json::object();

    void add_config(const std::filesystem::path& path);
};

[[nodiscard]] nlohmann::json manifest_to_json(const RunManifest& m);

} // namespace microtrap::cli
