#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lifecycle/params.hpp"

namespace lifecycle {

// A model config read from a JSON file plus the optional run defaults it carries.
struct LoadedConfig {
    ModelConfig model;
    std::string label;
    std::filesystem::path path;
    std::string hash;  // FNV-1a of the file bytes, 16 hex digits
    std::optional<double> dt;
    double w0 = 1.0;
    double y0 = 1.0;
};

// Throws ConfigError on unreadable files, bad JSON, missing keys or bad shapes,
// and whatever ModelConfig::create throws.
LoadedConfig load_config(const std::filesystem::path& path);
LoadedConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");

// Kernel samples from a two-column CSV (zeta, phi) on a uniform grid from -d to 0.
std::vector<double> read_kernel_csv(const std::filesystem::path& path, double d);

// Income history (oldest first) from a one- or two-column CSV; the last column is used.
std::vector<double> read_history_csv(const std::filesystem::path& path);

std::string fnv1a_hex(const std::string& bytes);

struct RunManifest {
    std::string config_path;
    std::string config_hash;
    std::string subcommand;
    std::uint64_t seed = 0;
    std::size_t n_t = 0;
    std::size_t n_z = 0;
    std::vector<std::string> outputs;
    std::string tool_version;

    // Hash over every field above, embedded in each output file.
    std::string hash() const;
    // Lines for '#'-prefixed CSV headers.
    std::vector<std::string> comment_lines() const;
    std::string to_json() const;
};

extern const char* const kToolVersion;

}  // namespace lifecycle
