#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hdrgan/autograd.hpp"

namespace hdrgan {

// On-disk layout:
//   "HDRGAN-CKPT v1\n"
//   u64 little-endian byte length of the JSON header
//   JSON header (keys sorted): {"meta": {...}, "tensors": [{"name", "shape", "offset"}...]}
//   tensor payloads as little-endian float64, in header order
inline constexpr const char* kCheckpointMagic = "HDRGAN-CKPT v1\n";

struct Checkpoint {
    nlohmann::json meta = nlohmann::json::object();
    std::vector<std::pair<std::string, ag::Tensor>> tensors;

    const ag::Tensor& tensor(const std::string& name) const;
    bool has_tensor(const std::string& name) const;
};

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws ConfigError on a missing or different magic/version string.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace hdrgan
