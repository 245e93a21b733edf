#ifndef ASTN_CONFIG_HPP
#define ASTN_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astn/unet.hpp"

namespace astn {

/// Run configuration. Defaults are the desk-scale setup (64x64, small
/// net); `full_scale()` switches to the full 224x224 training regime.
struct TrainConfig {
    int size = 64;
    int latent = 128;
    std::vector<int> channels = {8, 16, 32};
    int seg_epochs = 30;
    int reg_epochs = 30;
    int batch_size = 4;
    // Base learning rates. The original regime uses 1e-5 (segmentation)
    // and 1e-4 (registration); at desk scale with far fewer steps those
    // underfit, so the desk defaults are larger.
    double lr_seg = 1e-3;
    double lr_reg = 1e-3;
    int lr_decay_every = 40;
    double lr_decay = 0.1;
    double lambda1 = 0.01;
    double lambda2 = 1.0;
    std::uint64_t seed = 1;
    double threshold = 0.5;
    bool cache_atlas_features = false;
    bool no_seg_decoder = false;

    ArchConfig arch() const {
        ArchConfig a;
        a.size = size;
        a.latent = latent;
        a.channels = channels;
        return a;
    }

    static TrainConfig full_scale() {
        TrainConfig c;
        c.size = 224;
        c.latent = 1024;
        c.channels = {16, 32, 64};
        c.seg_epochs = 60;
        c.reg_epochs = 60;
        c.batch_size = 6;
        c.lr_seg = 1e-5;
        c.lr_reg = 1e-4;
        return c;
    }

    nlohmann::json to_json() const {
        return {{"size", size},
                {"latent", latent},
                {"channels", channels},
                {"seg_epochs", seg_epochs},
                {"reg_epochs", reg_epochs},
                {"batch_size", batch_size},
                {"lr_seg", lr_seg},
                {"lr_reg", lr_reg},
                {"lr_decay_every", lr_decay_every},
                {"lr_decay", lr_decay},
                {"lambda1", lambda1},
                {"lambda2", lambda2},
                {"seed", seed},
                {"threshold", threshold},
                {"cache_atlas_features", cache_atlas_features},
                {"no_seg_decoder", no_seg_decoder}};
    }

    void set(const std::string& key, const std::string& value) {
        auto as_int = [&] { return std::stoi(value); };
        auto as_real = [&] { return std::stod(value); };
        auto as_bool = [&] {
            if (value == "true" || value == "1") return true;
            if (value == "false" || value == "0") return false;
            throw std::invalid_argument("config: bad boolean '" + value + "' for " + key);
        };
        if (key == "size")
            size = as_int();
        else if (key == "latent")
            latent = as_int();
        else if (key == "channels") {
            channels.clear();
            std::stringstream ss(value);
            std::string tok;
            while (std::getline(ss, tok, ',')) channels.push_back(std::stoi(tok));
        } else if (key == "seg_epochs")
            seg_epochs = as_int();
        else if (key == "reg_epochs")
            reg_epochs = as_int();
        else if (key == "batch_size")
            batch_size = as_int();
        else if (key == "lr_seg")
            lr_seg = as_real();
        else if (key == "lr_reg")
            lr_reg = as_real();
        else if (key == "lr_decay_every")
            lr_decay_every = as_int();
        else if (key == "lr_decay")
            lr_decay = as_real();
        else if (key == "lambda1")
            lambda1 = as_real();
        else if (key == "lambda2")
            lambda2 = as_real();
        else if (key == "seed")
            seed = std::stoull(value);
        else if (key == "threshold")
            threshold = as_real();
        else if (key == "cache_atlas_features")
            cache_atlas_features = as_bool();
        else if (key == "no_seg_decoder")
            no_seg_decoder = as_bool();
        else if (key == "preset" && value == "full")
            *this = full_scale();
        else if (key == "preset" && value == "desk")
            *this = TrainConfig();
        else
            throw std::invalid_argument("config: unknown key '" + key + "'");
        validate();
    }

    void validate() const {
        if (seg_epochs < 0 || reg_epochs < 0 || batch_size < 1)
            throw std::invalid_argument("config: epochs must be >= 0 and batch_size >= 1");
        if (lr_seg <= 0 || lr_reg <= 0)
            throw std::invalid_argument("config: learning rates must be positive");
        if (lr_decay_every < 1 || lr_decay <= 0)
            throw std::invalid_argument("config: lr schedule needs lr_decay_every >= 1 and lr_decay > 0");
        if (lambda1 < 0 || lambda2 < 0)
            throw std::invalid_argument("config: lambda values must be non-negative");
        if (size < 16 || (size % (1 << channels.size())) != 0)
            throw std::invalid_argument("config: size must be >= 16 and divisible by 2^levels");
    }
};

/// Plain-text config: one `key=value` per line, '#' starts a comment.
inline TrainConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    TrainConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto strip = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key=value, got '" + line + "'");
        cfg.set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
    return cfg;
}

} // namespace astn

#endif
