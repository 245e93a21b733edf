// astn: atlas-registration segmentation workbench.
//
// Subcommands: gen, atlas, train, segment, eval, ablate. Every run echoes
// its resolved configuration to stderr and embeds it in its outputs, so a
// result file is a complete experiment record.
//
// Exit codes: 0 success, 1 input validation failure, 2 I/O failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "astn/astn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void echo_config(const json& j) { std::cerr << "config: " << j.dump() << "\n"; }

astn::TrainConfig resolve_config(const std::string& config_path,
                                 const std::vector<std::string>& overrides) {
    astn::TrainConfig cfg;
    if (!config_path.empty()) cfg = astn::load_config(config_path);
    for (const auto& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ValidationError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

// ---------------------------------------------------------------------- gen

int run_gen(const std::string& out_dir, int count, const std::string& domain, int size,
            std::uint64_t seed, const std::string& split, double train_fraction) {
    astn::DomainProfile profile = astn::DomainProfile::by_name(domain);
    json cfg = {{"command", "gen"},   {"out", out_dir}, {"count", count}, {"domain", domain},
                {"size", size},       {"seed", seed},   {"split", split},
                {"train_fraction", train_fraction}};
    echo_config(cfg);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    auto samples = astn::generate(count, profile, size, seed);
    int n_train = static_cast<int>(train_fraction * count + 0.5);
    std::vector<astn::Sample> existing;
    fs::path manifest = fs::path(out_dir) / "manifest.json";
    if (fs::exists(manifest)) existing = astn::read_manifest(manifest.string());
    for (int i = 0; i < count; ++i) {
        auto& s = samples[static_cast<std::size_t>(i)];
        if (split == "auto")
            s.split = i < n_train ? "train" : "test";
        else
            s.split = split;
        char idbuf[64];
        std::snprintf(idbuf, sizeof idbuf, "%s_%s_%04d", domain.c_str(), s.split.c_str(), i);
        s.id = idbuf;
        s.image_path = s.id + "_img.pgm";
        s.label_path = s.id + "_lbl.pgm";
        astn::write_pgm((fs::path(out_dir) / s.image_path).string(), s.image);
        astn::write_pgm((fs::path(out_dir) / s.label_path).string(), s.label);
    }
    // merge with any samples already present (other domains/splits)
    for (auto& old : existing) {
        bool clobbered = false;
        for (const auto& s : samples)
            if (s.id == old.id) clobbered = true;
        if (!clobbered) samples.push_back(std::move(old));
    }
    std::sort(samples.begin(), samples.end(),
              [](const astn::Sample& a, const astn::Sample& b) { return a.id < b.id; });
    astn::write_manifest(manifest.string(), samples);
    std::cout << "wrote " << count << " samples to " << out_dir << "\n";
    return 0;
}

// -------------------------------------------------------------------- atlas

int run_atlas(const std::string& data_dir, const std::string& grid_str, const std::string& out,
              bool random_pick, std::uint64_t seed) {
    json cfg = {{"command", "atlas"}, {"data", data_dir},      {"grid", grid_str},
                {"out", out},         {"random", random_pick}, {"seed", seed}};
    echo_config(cfg);
    auto x = grid_str.find('x');
    if (x == std::string::npos) throw ValidationError("--grid expects UxV, got '" + grid_str + "'");
    int u = std::stoi(grid_str.substr(0, x));
    int v = std::stoi(grid_str.substr(x + 1));

    auto all = astn::read_manifest((fs::path(data_dir) / "manifest.json").string());
    std::vector<astn::Sample> train;
    for (auto& s : all)
        if (s.split == "train") train.push_back(std::move(s));
    if (train.size() < 2) throw ValidationError("atlas needs at least 2 training samples");
    astn::GridSpec grid = astn::GridSpec::make(u, v, train[0].image.h, train[0].image.w);
    astn::Atlas atlas;
    if (random_pick) {
        auto rng = astn::make_rng(seed, 0xab1a5);
        atlas = astn::assemble_random(train, grid, rng);
    } else {
        atlas = astn::assemble(train, grid);
    }
    // atlas.json references images relative to its own directory
    fs::path out_dir = fs::absolute(out).parent_path();
    for (auto& e : atlas.elements) {
        fs::path img = fs::absolute(fs::path(data_dir) / e.image_path);
        fs::path lbl = fs::absolute(fs::path(data_dir) / e.label_path);
        e.image_path = fs::relative(img, out_dir).string();
        e.label_path = fs::relative(lbl, out_dir).string();
    }
    astn::write_atlas(out, atlas);
    std::cout << "atlas with " << atlas.elements.size() << " elements -> " << out << "\n";
    return 0;
}

// -------------------------------------------------------------------- train

int run_train(const std::string& data_dir, const std::string& atlas_path,
              const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_ckpt, bool no_seg_decoder, const std::string& loss_csv) {
    astn::TrainConfig cfg = resolve_config(config_path, overrides);
    if (no_seg_decoder) cfg.no_seg_decoder = true;
    json echo = cfg.to_json();
    echo["command"] = "train";
    echo["data"] = data_dir;
    echo["atlas"] = atlas_path;
    echo["out"] = out_ckpt;
    echo_config(echo);

    auto all = astn::read_manifest((fs::path(data_dir) / "manifest.json").string());
    std::vector<astn::Sample> train;
    for (auto& s : all)
        if (s.split == "train") train.push_back(std::move(s));
    if (train.empty()) throw ValidationError("training split is empty");
    if (train[0].image.h != cfg.size)
        throw ValidationError("data extent " + std::to_string(train[0].image.h) +
                              " does not match config size " + std::to_string(cfg.size));

    astn::Atlas atlas = astn::read_atlas(atlas_path, cfg.size, cfg.size);
    astn::ModelParams model = astn::ModelParams::init(cfg.arch(), cfg.seed);

    std::vector<astn::EpochLog> logs;
    if (!cfg.no_seg_decoder) {
        auto l1 = astn::train_phase1(train, model, cfg);
        logs.insert(logs.end(), l1.begin(), l1.end());
    }
    std::size_t phase1_epochs = logs.size();
    auto l2 = astn::train_phase2(train, atlas, model, cfg);
    logs.insert(logs.end(), l2.begin(), l2.end());

    json meta = cfg.to_json();
    meta["atlas"] = atlas_path;
    model.save(out_ckpt, meta);

    if (!loss_csv.empty()) {
        std::ofstream f(loss_csv);
        if (!f) throw IoError("cannot open loss csv: " + loss_csv);
        f << "phase,epoch,loss,lr\n";
        for (std::size_t i = 0; i < logs.size(); ++i)
            f << (i < phase1_epochs ? 1 : 2) << "," << logs[i].epoch << ","
              << logs[i].loss << "," << logs[i].lr << "\n";
    }
    std::cout << "checkpoint -> " << out_ckpt << "\n";
    return 0;
}

// --------------------------------------------------------------------- eval

int run_eval(const std::string& data_dir, const std::string& atlas_path,
             const std::string& ckpt_path, const std::string& fusion, const std::string& report,
             const std::string& split, const std::string& domain, int threads,
             const std::string& overlay_dir) {
    json echo = {{"command", "eval"},   {"data", data_dir}, {"atlas", atlas_path},
                 {"ckpt", ckpt_path},   {"fusion", fusion}, {"report", report},
                 {"split", split},      {"domain", domain}, {"threads", threads}};
    echo_config(echo);

    json meta;
    astn::ModelParams model = astn::ModelParams::load(ckpt_path, &meta);
    astn::TrainConfig cfg;
    for (auto& [k, v] : meta.items()) {
        if (k == "atlas") continue;
        if (v.is_boolean())
            cfg.set(k, v.get<bool>() ? "true" : "false");
        else if (k == "channels") {
            std::string cs;
            for (auto& c : v) cs += (cs.empty() ? "" : ",") + std::to_string(c.get<int>());
            cfg.set(k, cs);
        } else if (v.is_number_integer() || v.is_number_unsigned())
            cfg.set(k, std::to_string(v.get<std::int64_t>()));
        else if (v.is_number_float()) {
            std::ostringstream ss;
            ss.precision(17);
            ss << v.get<double>();
            cfg.set(k, ss.str());
        }
    }

    auto all = astn::read_manifest((fs::path(data_dir) / "manifest.json").string());
    std::vector<astn::Sample> subset;
    for (auto& s : all) {
        if (split != "all" && s.split != split) continue;
        if (domain != "all" && s.domain != domain) continue;
        if (s.image.h != cfg.size) {
            s.image = astn::resize_bilinear(s.image, cfg.size, cfg.size);
            s.label = astn::resize_label(s.label, cfg.size, cfg.size);
        }
        subset.push_back(std::move(s));
    }
    if (subset.empty()) throw ValidationError("no samples match split=" + split + " domain=" + domain);

    astn::Atlas atlas = astn::read_atlas(atlas_path, cfg.size, cfg.size);
    astn::Report r = astn::evaluate(subset, atlas, model, cfg, astn::fusion_mode_from(fusion),
                                    threads);
    r.config = echo;
    r.config["train_config"] = cfg.to_json();
    astn::write_report(report, r);

    if (!overlay_dir.empty()) {
        std::error_code ec;
        fs::create_directories(overlay_dir, ec);
        for (const auto& s : subset) {
            astn::InferDiagnostics diag;
            astn::Label fused = astn::infer(s.image, atlas, model, cfg, &diag);
            astn::Image strip(s.image.h, 3 * s.image.w);
            for (int y = 0; y < s.image.h; ++y)
                for (int x = 0; x < s.image.w; ++x) {
                    strip.at(y, x) = s.image.at(y, x);
                    strip.at(y, s.image.w + x) = diag.seg_initial.at(y, x);
                    strip.at(y, 2 * s.image.w + x) = fused.at(y, x);
                }
            astn::write_pgm((fs::path(overlay_dir) / (s.id + "_overlay.pgm")).string(), strip);
        }
    }
    std::cout << "dsc " << r.dsc.mean << " +- " << r.dsc.std << " -> " << report << "\n";
    return 0;
}

// ------------------------------------------------------------------ segment

int run_segment(const std::string& ckpt_path, const std::string& atlas_path,
                const std::string& image_path, const std::string& out_path,
                const std::string& dump_dir) {
    json echo = {{"command", "segment"}, {"ckpt", ckpt_path},      {"atlas", atlas_path},
                 {"image", image_path},  {"out", out_path},        {"dump_warped", dump_dir}};
    echo_config(echo);

    json meta;
    astn::ModelParams model = astn::ModelParams::load(ckpt_path, &meta);
    astn::TrainConfig cfg;
    cfg.size = model.arch.size;
    cfg.latent = model.arch.latent;
    cfg.channels = model.arch.channels;

    astn::Image img = astn::read_pgm(image_path);
    if (img.h != cfg.size || img.w != cfg.size) img = astn::resize_bilinear(img, cfg.size, cfg.size);
    astn::Atlas atlas = astn::read_atlas(atlas_path, cfg.size, cfg.size);

    astn::InferDiagnostics diag;
    astn::Label fused = astn::infer(img, atlas, model, cfg, &diag);
    if (diag.untrained_warning) std::cerr << "warning: checkpoint parameters are all zero\n";
    astn::write_pgm(out_path, fused);

    if (!dump_dir.empty()) {
        std::error_code ec;
        fs::create_directories(dump_dir, ec);
        for (std::size_t a = 0; a < diag.warped.size(); ++a) {
            astn::write_pgm((fs::path(dump_dir) / ("warped_" + std::to_string(a) + ".pgm")).string(),
                            diag.warped[a]);
            astn::checkpoint::write(
                (fs::path(dump_dir) / ("df_" + std::to_string(a) + ".astn")).string(), model.arch,
                {{"df", diag.dfs[a]}});
        }
    }
    std::cout << "segmentation -> " << out_path << "\n";
    return 0;
}

// ------------------------------------------------------------------- ablate

int run_ablate(const std::string& data_dir, const std::string& mode,
               const std::string& config_path, const std::vector<std::string>& overrides,
               const std::string& out_json, const std::string& work_dir) {
    astn::TrainConfig cfg = resolve_config(config_path, overrides);
    json echo = cfg.to_json();
    echo["command"] = "ablate";
    echo["mode"] = mode;
    echo["data"] = data_dir;
    echo_config(echo);

    std::error_code ec;
    fs::create_directories(work_dir, ec);
    auto all = astn::read_manifest((fs::path(data_dir) / "manifest.json").string());
    std::vector<astn::Sample> train, test_b;
    for (auto& s : all) {
        if (s.split == "train")
            train.push_back(s);
        else if (s.domain == "b")
            test_b.push_back(s);
    }
    if (train.empty() || test_b.empty())
        throw ValidationError("ablate needs a train split and domain-b test samples");

    auto run_variant = [&](const astn::Atlas& atlas, bool no_dec) {
        astn::TrainConfig c = cfg;
        c.no_seg_decoder = no_dec;
        astn::ModelParams model = astn::ModelParams::init(c.arch(), c.seed);
        if (!no_dec) astn::train_phase1(train, model, c);
        astn::train_phase2(train, atlas, model, c);
        auto mode = no_dec ? astn::FusionMode::mv : astn::FusionMode::astn;
        return astn::evaluate(test_b, atlas, model, c, mode).dsc.mean;
    };

    json result;
    result["config"] = echo;
    if (mode == "rcs") {
        astn::GridSpec grid = astn::GridSpec::make(2, 2, cfg.size, cfg.size);
        auto rng = astn::make_rng(cfg.seed, 0xab1a5);
        double with_rcs = run_variant(astn::assemble(train, grid), false);
        double with_random = run_variant(astn::assemble_random(train, grid, rng), false);
        result["rcs_dsc"] = with_rcs;
        result["random_dsc"] = with_random;
    } else if (mode == "decoder") {
        astn::GridSpec grid = astn::GridSpec::make(2, 2, cfg.size, cfg.size);
        astn::Atlas atlas = astn::assemble(train, grid);
        result["full_dsc"] = run_variant(atlas, false);
        result["no_decoder_dsc"] = run_variant(atlas, true);
    } else if (mode == "m-sweep") {
        for (auto [u, v] : std::vector<std::pair<int, int>>{{1, 2}, {2, 2}, {2, 3}, {3, 3}}) {
            astn::GridSpec grid = astn::GridSpec::make(u, v, cfg.size, cfg.size);
            result["m" + std::to_string(u * v)] = run_variant(astn::assemble(train, grid), false);
        }
    } else {
        throw ValidationError("unknown ablate mode '" + mode + "' (rcs|decoder|m-sweep)");
    }
    std::ofstream f(out_json);
    if (!f) throw IoError("cannot open for writing: " + out_json);
    f << result.dump(2) << "\n";
    std::cout << result.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ASTN atlas-registration segmentation workbench"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic phantom dataset");
    std::string gen_out, gen_domain = "a", gen_split = "auto";
    int gen_count = 100, gen_size = 64;
    std::uint64_t gen_seed = 1;
    double gen_train_fraction = 0.5;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--count", gen_count, "number of samples");
    gen->add_option("--domain", gen_domain, "domain profile: a|b");
    gen->add_option("--size", gen_size, "image extent");
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--split", gen_split, "train|test|auto");
    gen->add_option("--train-fraction", gen_train_fraction, "train share when split=auto");

    // atlas
    auto* atl = app.add_subcommand("atlas", "assemble an atlas from the training split");
    std::string atl_data, atl_grid = "2x2", atl_out = "atlas.json";
    bool atl_random = false;
    std::uint64_t atl_seed = 1;
    atl->add_option("--data", atl_data, "dataset directory")->required();
    atl->add_option("--grid", atl_grid, "grid UxV");
    atl->add_option("--out", atl_out, "output atlas.json");
    atl->add_flag("--random", atl_random, "pick candidates uniformly at random (ablation)");
    atl->add_option("--seed", atl_seed, "seed for --random");

    // train
    auto* tr = app.add_subcommand("train", "run both training phases");
    std::string tr_data, tr_atlas, tr_config, tr_out = "model.astn", tr_csv;
    std::vector<std::string> tr_set;
    bool tr_nodec = false;
    tr->add_option("--data", tr_data, "dataset directory")->required();
    tr->add_option("--atlas", tr_atlas, "atlas.json")->required();
    tr->add_option("--config", tr_config, "key=value config file");
    tr->add_option("--set", tr_set, "config override key=value (repeatable)");
    tr->add_option("--out", tr_out, "output checkpoint");
    tr->add_option("--loss-csv", tr_csv, "per-epoch loss CSV");
    tr->add_flag("--no-seg-decoder", tr_nodec, "train without the segmentation loss (ablation)");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    std::string ev_data, ev_atlas, ev_ckpt, ev_fusion = "astn", ev_report = "report.json";
    std::string ev_split = "test", ev_domain = "all", ev_overlays;
    int ev_threads = 1;
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--atlas", ev_atlas, "atlas.json")->required();
    ev->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
    ev->add_option("--fusion", ev_fusion, "astn|mv|staple|none");
    ev->add_option("--report", ev_report, "output report.json");
    ev->add_option("--split", ev_split, "train|test|all");
    ev->add_option("--domain", ev_domain, "a|b|all");
    ev->add_option("--threads", ev_threads, "evaluation fan-out");
    ev->add_option("--dump-overlays", ev_overlays, "write per-sample overlay PGMs here");

    // segment
    auto* sg = app.add_subcommand("segment", "segment a single image");
    std::string sg_ckpt, sg_atlas, sg_image, sg_out = "mask.pgm", sg_dump;
    sg->add_option("--ckpt", sg_ckpt, "checkpoint")->required();
    sg->add_option("--atlas", sg_atlas, "atlas.json")->required();
    sg->add_option("--image", sg_image, "input PGM")->required();
    sg->add_option("--out", sg_out, "output mask PGM");
    sg->add_option("--dump-warped", sg_dump, "dump warped labels and DFs here");

    // ablate
    auto* ab = app.add_subcommand("ablate", "paired ablation runs");
    std::string ab_data, ab_mode = "rcs", ab_config, ab_out = "ablation.json", ab_work = "ablate_work";
    std::vector<std::string> ab_set;
    ab->add_option("--data", ab_data, "dataset directory")->required();
    ab->add_option("--mode", ab_mode, "rcs|decoder|m-sweep");
    ab->add_option("--config", ab_config, "key=value config file");
    ab->add_option("--set", ab_set, "config override key=value (repeatable)");
    ab->add_option("--out", ab_out, "output JSON");
    ab->add_option("--work", ab_work, "working directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen)
            return run_gen(gen_out, gen_count, gen_domain, gen_size, gen_seed, gen_split,
                           gen_train_fraction);
        if (*atl) return run_atlas(atl_data, atl_grid, atl_out, atl_random, atl_seed);
        if (*tr) return run_train(tr_data, tr_atlas, tr_config, tr_set, tr_out, tr_nodec, tr_csv);
        if (*ev)
            return run_eval(ev_data, ev_atlas, ev_ckpt, ev_fusion, ev_report, ev_split, ev_domain,
                            ev_threads, ev_overlays);
        if (*sg) return run_segment(sg_ckpt, sg_atlas, sg_image, sg_out, sg_dump);
        if (*ab) return run_ablate(ab_data, ab_mode, ab_config, ab_set, ab_out, ab_work);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
