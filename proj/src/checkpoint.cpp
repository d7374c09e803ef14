#include "hdrgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hdrgan/error.hpp"

namespace hdrgan {

namespace fs = std::filesystem;

namespace {

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}

}  // namespace

const ag::Tensor& Checkpoint::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return t;
    }
    throw ConfigError("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return true;
    }
    return false;
}

void write_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
    nlohmann::json header;
    header["meta"] = ckpt.meta;
    header["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : ckpt.tensors) {
        header["tensors"].push_back({{"name", name},
                                     {"shape", {t.shape.n, t.shape.c, t.shape.h, t.shape.w}},
                                     {"offset", offset}});
        offset += t.numel();
    }
    const std::string text = header.dump();

    std::string out(kCheckpointMagic);
    put_u64(out, text.size());
    out += text;
    out.reserve(out.size() + offset * 8);
    for (const auto& [name, t] : ckpt.tensors) {
        for (double v : t.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }

    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open '" + tmp.string() + "' for writing");
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        f.flush();
        if (!f) throw IoError("write failure on '" + tmp.string() + "' (disk full?)");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
}

Checkpoint read_checkpoint(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint '" + path.string() + "'");
    const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const std::size_t magic_len = std::strlen(kCheckpointMagic);
    if (in.compare(0, magic_len, kCheckpointMagic) != 0) {
        const std::string got = in.substr(0, std::min<std::size_t>(in.find('\n'), 32));
        throw ConfigError("'" + path.string() + "' is not a compatible checkpoint (expected magic '" +
                          std::string(kCheckpointMagic, magic_len - 1) + "', found '" + got + "')");
    }
    if (in.size() < magic_len + 8) throw FormatError("truncated checkpoint '" + path.string() + "'");
    const std::uint64_t header_len = get_u64(in, magic_len);
    const std::size_t data_start = magic_len + 8 + header_len;
    if (in.size() < data_start) throw FormatError("truncated checkpoint header in '" + path.string() + "'");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(in.substr(magic_len + 8, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("corrupt checkpoint header in '" + path.string() + "': " + e.what());
    }
    Checkpoint ckpt;
    ckpt.meta = header.at("meta");
    for (const auto& entry : header.at("tensors")) {
        const auto dims = entry.at("shape").get<std::vector<int>>();
        if (dims.size() != 4) throw FormatError("bad tensor shape in checkpoint '" + path.string() + "'");
        ag::Tensor t(ag::Shape{dims[0], dims[1], dims[2], dims[3]});
        const std::size_t start = data_start + entry.at("offset").get<std::uint64_t>() * 8;
        if (in.size() < start + t.numel() * 8) throw FormatError("truncated tensor data in '" + path.string() + "'");
        for (std::size_t i = 0; i < t.numel(); ++i) t.data[i] = std::bit_cast<double>(get_u64(in, start + i * 8));
        ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
    return ckpt;
}

}  // namespace hdrgan
