#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace cxr {

/// Bad input data: unreadable metadata, empty sources, inconsistent manifests.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ImageDecodeError : public DataError {
public:
    explicit ImageDecodeError(std::filesystem::path path)
        : DataError("cannot decode image: " + path.string()), path_(std::move(path)) {}

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

/// Carries every violation found, not just the first one.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> violations)
        : std::runtime_error(join(violations)), violations_(std::move(violations)) {}
    explicit ConfigError(const std::string& violation)
        : ConfigError(std::vector<std::string>{violation}) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out;
        for (const auto& s : v) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }
    std::vector<std::string> violations_;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cxr
