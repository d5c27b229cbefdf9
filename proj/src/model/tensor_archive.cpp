#include "cxr/model/tensor_archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "cxr/core/errors.hpp"

static_assert(std::endian::native == std::endian::little, "archive blobs are written in host byte order");

namespace cxr {

namespace {

using nlohmann::json;

std::string dtype_tag(torch::Dtype t) {
    switch (t) {
        case torch::kFloat32: return "F32";
        case torch::kFloat64: return "F64";
        case torch::kInt64: return "I64";
        case torch::kInt32: return "I32";
        case torch::kUInt8: return "U8";
        default: throw CheckpointError(std::string("unsupported tensor dtype ") + c10::toString(t));
    }
}

torch::Dtype dtype_from(const std::string& tag) {
    if (tag == "F32") return torch::kFloat32;
    if (tag == "F64") return torch::kFloat64;
    if (tag == "I64") return torch::kInt64;
    if (tag == "I32") return torch::kInt32;
    if (tag == "U8") return torch::kUInt8;
    throw CheckpointError("unsupported archive dtype " + tag);
}

}  // namespace

const torch::Tensor* TensorArchive::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void write_tensor_archive(const std::filesystem::path& file, const TensorArchive& archive) {
    json header = json::object();
    if (!archive.metadata.empty()) header["__metadata__"] = archive.metadata;
    std::vector<torch::Tensor> blobs;
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : archive.tensors) {
        if (name == "__metadata__") throw CheckpointError("reserved tensor name __metadata__");
        auto t = tensor.detach().to(torch::kCPU).contiguous();
        const auto bytes = static_cast<std::uint64_t>(t.nbytes());
        header[name] = {{"dtype", dtype_tag(t.scalar_type())},
                        {"shape", t.sizes().vec()},
                        {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
        blobs.push_back(std::move(t));
    }
    std::string text = header.dump();
    while (text.size() % 8 != 0) text += ' ';

    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + file.string());
    const std::uint64_t header_len = text.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : blobs) out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
    if (!out) throw CheckpointError("short write to " + file.string());
}

TensorArchive read_tensor_archive(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw CheckpointError("cannot read " + file.string());
    const auto file_size = std::filesystem::file_size(file);
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
    if (!in || header_len > file_size - sizeof header_len) throw CheckpointError(file.string() + " is not a tensor archive");
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    json header;
    try {
        header = json::parse(text);
    } catch (const json::parse_error& e) {
        throw CheckpointError(file.string() + ": malformed archive header: " + e.what());
    }
    const std::uint64_t data_start = sizeof header_len + header_len;
    const std::uint64_t data_size = file_size - data_start;
    std::string data(data_size, '\0');
    in.read(data.data(), static_cast<std::streamsize>(data_size));
    if (!in) throw CheckpointError("truncated archive " + file.string());

    TensorArchive archive;
    for (const auto& [name, entry] : header.items()) {
        if (name == "__metadata__") {
            archive.metadata = entry.get<std::map<std::string, std::string>>();
            continue;
        }
        const auto dtype = dtype_from(entry.at("dtype").get<std::string>());
        const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
        const auto offsets = entry.at("data_offsets").get<std::vector<std::uint64_t>>();
        if (offsets.size() != 2 || offsets[0] > offsets[1] || offsets[1] > data_size)
            throw CheckpointError(file.string() + ": bad data offsets for " + name);
        auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
        if (static_cast<std::uint64_t>(t.nbytes()) != offsets[1] - offsets[0])
            throw CheckpointError(file.string() + ": size mismatch for " + name);
        std::memcpy(t.data_ptr(), data.data() + offsets[0], t.nbytes());
        archive.tensors.emplace_back(name, std::move(t));
    }
    return archive;
}

std::string sha256_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw CheckpointError("cannot read " + file.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

}  // namespace cxr
