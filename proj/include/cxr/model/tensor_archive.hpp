#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace cxr {

/// Named tensors plus string metadata, stored in the safetensors byte layout:
/// u64 little-endian header length, a JSON header (dtype, shape, data_offsets per tensor,
/// `__metadata__` for strings), then the raw little-endian blobs.
struct TensorArchive {
    std::vector<std::pair<std::string, torch::Tensor>> tensors;
    std::map<std::string, std::string> metadata;

    const torch::Tensor* find(const std::string& name) const;
};

/// Throws CheckpointError on I/O failure or unsupported dtypes.
void write_tensor_archive(const std::filesystem::path& file, const TensorArchive& archive);
TensorArchive read_tensor_archive(const std::filesystem::path& file);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& file);

}  // namespace cxr
