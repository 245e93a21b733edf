#ifndef ASTN_CHECKPOINT_HPP
#define ASTN_CHECKPOINT_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astn/halfstn.hpp"
#include "astn/unet.hpp"

namespace astn {

/// Binary container: magic "ASTN1", little-endian uint32 header length,
/// JSON header {arch, meta, tensors: name -> {shape, offset}}, then raw
/// little-endian float64 parameter data.
namespace checkpoint {

inline constexpr char kMagic[5] = {'A', 'S', 'T', 'N', '1'};

inline nlohmann::json arch_to_json(const ArchConfig& a) {
    return {{"size", a.size},
            {"in_channels", a.in_channels},
            {"channels", a.channels},
            {"latent", a.latent}};
}

inline ArchConfig arch_from_json(const nlohmann::json& j) {
    ArchConfig a;
    a.size = j.at("size").get<int>();
    a.in_channels = j.at("in_channels").get<int>();
    a.channels = j.at("channels").get<std::vector<int>>();
    a.latent = j.at("latent").get<int>();
    return a;
}

inline void write(const std::string& path, const ArchConfig& arch, const NamedTensors& tensors,
                  const nlohmann::json& meta = nlohmann::json::object()) {
    nlohmann::json header;
    header["arch"] = arch_to_json(arch);
    header["meta"] = meta;
    nlohmann::json tj = nlohmann::json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        tj[name] = {{"shape", t.shape()}, {"offset", offset}};
        offset += t.size() * sizeof(double);
    }
    header["tensors"] = tj;
    std::string hs = header.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f.write(kMagic, 5);
    std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    unsigned char lenb[4] = {static_cast<unsigned char>(hlen & 0xff),
                             static_cast<unsigned char>((hlen >> 8) & 0xff),
                             static_cast<unsigned char>((hlen >> 16) & 0xff),
                             static_cast<unsigned char>((hlen >> 24) & 0xff)};
    f.write(reinterpret_cast<const char*>(lenb), 4);
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : tensors)
        f.write(reinterpret_cast<const char*>(t.data().data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

struct Loaded {
    ArchConfig arch;
    nlohmann::json meta;
    std::map<std::string, Tensor> tensors;
};

inline Loaded read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[5];
    f.read(magic, 5);
    if (f.gcount() != 5 || std::memcmp(magic, kMagic, 5) != 0)
        throw std::runtime_error("not an ASTN1 checkpoint: " + path);
    unsigned char lenb[4];
    f.read(reinterpret_cast<char*>(lenb), 4);
    std::uint32_t hlen = lenb[0] | (lenb[1] << 8) | (lenb[2] << 16) |
                         (static_cast<std::uint32_t>(lenb[3]) << 24);
    std::string hs(hlen, '\0');
    f.read(hs.data(), hlen);
    nlohmann::json header = nlohmann::json::parse(hs);
    Loaded out;
    out.arch = arch_from_json(header.at("arch"));
    out.meta = header.value("meta", nlohmann::json::object());
    std::streampos data_start = f.tellg();
    for (auto& [name, rec] : header.at("tensors").items()) {
        Shape shape = rec.at("shape").get<Shape>();
        std::uint64_t offset = rec.at("offset").get<std::uint64_t>();
        std::vector<double> data(shape_numel(shape));
        f.seekg(data_start + static_cast<std::streamoff>(offset));
        f.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (static_cast<std::size_t>(f.gcount()) != data.size() * sizeof(double))
            throw std::runtime_error("truncated tensor '" + name + "' in " + path);
        out.tensors.emplace(name, Tensor::from(shape, std::move(data), true));
    }
    return out;
}

inline void assign(std::map<std::string, Tensor>& loaded, const NamedTensors& dst,
                   const std::string& path) {
    for (const auto& [name, t] : dst) {
        auto it = loaded.find(name);
        if (it == loaded.end())
            throw std::runtime_error("checkpoint " + path + " is missing tensor '" + name + "'");
        if (it->second.shape() != t.shape())
            throw std::runtime_error("checkpoint " + path + " tensor '" + name +
                                     "' has shape " + shape_str(it->second.shape()) +
                                     ", expected " + shape_str(t.shape()));
        const_cast<Tensor&>(t).mutable_data() = it->second.data();
    }
}

} // namespace checkpoint

/// Full model state: segmentation net + displacement head.
struct ModelParams {
    ArchConfig arch;
    SegParams seg;
    HSParams hs;

    static ModelParams init(const ArchConfig& cfg, std::uint64_t seed) {
        ModelParams m;
        m.arch = cfg;
        m.seg = SegParams::init(cfg, seed);
        m.hs = HSParams::init(cfg, seed);
        return m;
    }
    NamedTensors named() const {
        NamedTensors n = seg.named();
        auto h = hs.named();
        n.insert(n.end(), h.begin(), h.end());
        return n;
    }
    void save(const std::string& path, const nlohmann::json& meta = nlohmann::json::object()) const {
        checkpoint::write(path, arch, named(), meta);
    }
    static ModelParams load(const std::string& path, nlohmann::json* meta_out = nullptr) {
        auto loaded = checkpoint::read(path);
        ModelParams m = ModelParams::init(loaded.arch, 0);
        checkpoint::assign(loaded.tensors, m.named(), path);
        if (meta_out) *meta_out = loaded.meta;
        return m;
    }
};

} // namespace astn

#endif
