#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace awp::cli {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// `out` when non-empty, else runs/<UTC timestamp>-<tag>; created if missing.
std::filesystem::path make_run_dir(const std::string& out, const std::string& tag);

/// Everything needed to rerun a command. Written once, atomically, at the end.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::string config_file;
    std::map<std::string, std::string> config;   // every option, defaults resolved
    std::map<std::string, std::string> sources;  // option -> flag | file | default
    std::map<std::string, uint64_t> seeds;
    std::map<std::string, std::string> inputs;   // path -> digest
    std::map<std::string, std::string> outputs;  // path -> digest
    std::vector<std::string> failures;
    std::string started_at;
    std::string finished_at;

    void add_input(const std::filesystem::path& p) { inputs[p.string()] = sha256_file(p); }
    void add_output(const std::filesystem::path& p) { outputs[p.string()] = sha256_file(p); }

    nlohmann::json to_json() const;
    /// Stamps finished_at and writes `dir`/manifest.json via a temporary file.
    void write(const std::filesystem::path& dir);
};

}  // namespace awp::cli
