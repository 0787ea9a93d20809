#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace a5cycle::cli {

using nlohmann::json;

/// Hex SHA-256 of the file bytes. Throws IoError.
std::string sha256_file(const std::filesystem::path& path);

/// Run directory state: settings plus one checkpoint per completed stage.
///
///   { "version": 1, "settings": {...},
///     "stages": { "<name>": { "config": {...}, "inputs": {file: digest},
///                             "outputs": {file: digest}, "summary": {...} } } }
///
/// File names are relative to the run directory.
class RunManifest {
public:
    static constexpr const char* kFileName = "manifest.json";

    explicit RunManifest(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path file(const std::string& name) const { return dir_ / name; }

    json& settings() { return doc_["settings"]; }
    const json* stage(const std::string& name) const;

    /// True when the stage ran with this config and every recorded input and
    /// output still has its recorded digest.
    bool up_to_date(const std::string& name, const json& config) const;

    /// Digest of an input produced by `producer`; throws ConfigError when the
    /// producer has not run with `producer_config` and IoError when the file
    /// no longer matches its recorded digest.
    std::string consume(const std::string& producer, const json& producer_config, const std::string& file) const;

    void record(const std::string& name, const json& config, const std::map<std::string, std::string>& inputs,
                const std::vector<std::string>& outputs, const json& summary);

    /// Atomic rewrite of manifest.json.
    void save() const;

private:
    std::filesystem::path dir_;
    json doc_;
};

}  // namespace a5cycle::cli
