#ifndef ASTN_PGM_HPP
#define ASTN_PGM_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astn/image.hpp"

namespace astn {

struct Sample {
    Image image;
    Label label;
    std::string domain; // "a" or "b"
    std::string split;  // "train" or "test"
    std::string id;
    std::string image_path;
    std::string label_path;
};

struct PgmError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Binary PGM (P5), maxval 255, header exactly "P5\n<w> <h>\n255\n".
inline void write_pgm(const std::string& path, const Image& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw PgmError("cannot open for writing: " + path);
    f << "P5\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(img.w));
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            double v = std::clamp(img.at(y, x), 0.0, 1.0);
            row[static_cast<std::size_t>(x)] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        f.write(reinterpret_cast<const char*>(row.data()), img.w);
    }
    if (!f) throw PgmError("write failed: " + path);
}

inline Image read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw PgmError("cannot open: " + path);
    auto offset = [&]() { return std::to_string(static_cast<long long>(f.tellg())); };
    auto next_token = [&]() -> std::string {
        // skip whitespace and '#' comment lines
        int c;
        while ((c = f.peek()) != EOF) {
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(c)) {
                f.get();
            } else {
                break;
            }
        }
        std::string tok;
        while ((c = f.peek()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(f.get()));
        return tok;
    };
    std::string magic = next_token();
    if (magic != "P5") throw PgmError("bad magic '" + magic + "' at byte offset 0 in " + path);
    std::string ws = next_token(), hs = next_token();
    int w = 0, h = 0;
    try {
        w = std::stoi(ws);
        h = std::stoi(hs);
    } catch (...) {
        throw PgmError("bad extents at byte offset " + offset() + " in " + path);
    }
    if (w <= 0 || h <= 0) throw PgmError("bad extents at byte offset " + offset() + " in " + path);
    std::string maxs = next_token();
    if (maxs != "255")
        throw PgmError("unsupported maxval '" + maxs + "' at byte offset " + offset() + " in " +
                       path + " (only 255 is accepted)");
    f.get(); // single whitespace byte after maxval
    Image img(h, w);
    std::vector<unsigned char> row(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), w);
        if (f.gcount() != w)
            throw PgmError("truncated pixel data at byte offset " + offset() + " in " + path);
        for (int x = 0; x < w; ++x) img.at(y, x) = row[static_cast<std::size_t>(x)] / 255.0;
    }
    return img;
}

inline void write_manifest(const std::string& path, const std::vector<Sample>& samples) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : samples)
        arr.push_back({{"id", s.id},
                       {"image_path", s.image_path},
                       {"label_path", s.label_path},
                       {"domain", s.domain},
                       {"split", s.split}});
    std::ofstream f(path, std::ios::binary);
    if (!f) throw PgmError("cannot open for writing: " + path);
    f << arr.dump(2) << "\n";
}

/// Reads a manifest and loads every referenced image/label. Paths are
/// resolved relative to the manifest's directory.
inline std::vector<Sample> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw PgmError("cannot open: " + path);
    nlohmann::json arr = nlohmann::json::parse(f);
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    std::vector<Sample> out;
    for (const auto& rec : arr) {
        Sample s;
        s.id = rec.value("id", "");
        if (!rec.contains("image_path") || !rec.contains("label_path"))
            throw PgmError("manifest entry for sample '" + s.id + "' is missing image or label path");
        s.image_path = rec["image_path"].get<std::string>();
        s.label_path = rec["label_path"].get<std::string>();
        s.domain = rec.value("domain", "a");
        s.split = rec.value("split", "train");
        s.image = read_pgm((base / s.image_path).string());
        s.label = binarize(read_pgm((base / s.label_path).string()), 0.5);
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace astn

#endif
