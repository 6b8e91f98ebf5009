// oba — object-based augmentation toolkit for georeferenced segmentation data.
//
// Subcommands: extract, bank, generate, gentest, evaluate, search, preview.
// Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
// stderr; machine-readable output goes to stdout or files only.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "oba/oba.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

oba::AugPolicy load_policy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) oba::raise(oba::ErrorCode::IoError, "cannot open policy file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        oba::raise(oba::ErrorCode::ParseError, std::string("bad policy JSON: ") + e.what());
    }
    return oba::policy_from_json(j);
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) oba::raise(oba::ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump(2) << "\n";
}

std::pair<std::string, std::string> split_scene_footprints(const std::string& arg) {
    const auto colon = arg.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= arg.size())
        oba::raise(oba::ErrorCode::InvalidArgument,
                   "expected SCENE:FOOTPRINTS, got '" + arg + "'");
    return {arg.substr(0, colon), arg.substr(colon + 1)};
}

std::string relative_to(const fs::path& target, const fs::path& base_dir) {
    std::error_code ec;
    const fs::path rel = fs::relative(fs::absolute(target), fs::absolute(base_dir), ec);
    if (ec || rel.empty()) return fs::absolute(target).string();
    return rel.string();
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
    std::string scene, footprints, out_dir;
    int padding = 0;
};

void run_extract(const ExtractArgs& args) {
    const oba::GeoRaster scene = oba::load_raster(args.scene);
    const auto footprints = oba::load_footprints(args.footprints);
    oba::ExtractReport report;
    auto patches = oba::extract_objects(scene, footprints, args.padding, &report);
    for (const auto& id : report.empty_mask_ids)
        std::cerr << "warning: footprint '" << id << "' covers no pixel, skipped\n";

    fs::create_directories(args.out_dir);
    std::sort(patches.begin(), patches.end(),
              [](const oba::ObjectPatch& a, const oba::ObjectPatch& b) {
                  return a.object_id < b.object_id;
              });
    const std::string digest = oba::compute_bank_digest(patches, {});
    const json config = {{"scene", args.scene},
                         {"footprints", args.footprints},
                         {"padding", args.padding},
                         {"out", args.out_dir}};
    oba::save_bank_manifest(fs::path(args.out_dir) / "bank.json", patches, {}, args.scene,
                            digest, config);
    std::cerr << "extracted " << patches.size() << " objects ("
              << report.empty_mask_ids.size() << " skipped) -> " << args.out_dir << "\n";
}

// ---------------------------------------------------------------------------

struct BankArgs {
    std::vector<std::string> patch_dirs;
    std::vector<std::string> labeled;  // SCENE:FOOTPRINTS
    std::vector<std::string> extra;
    std::string out = "bank.json";
};

void run_bank(const BankArgs& args) {
    const fs::path out_path = fs::absolute(args.out);
    const fs::path out_dir = out_path.parent_path();
    fs::create_directories(out_dir);

    json objects = json::array();
    std::vector<oba::ObjectPatch> loaded_objects;
    for (const std::string& dir : args.patch_dirs) {
        const fs::path manifest_path = fs::path(dir) / "bank.json";
        std::ifstream in(manifest_path);
        if (!in)
            oba::raise(oba::ErrorCode::IoError, "cannot open " + manifest_path.string());
        json manifest;
        try {
            in >> manifest;
        } catch (const json::exception& e) {
            oba::raise(oba::ErrorCode::ParseError,
                       std::string("bad patch manifest: ") + e.what());
        }
        for (json entry : manifest.value("objects", json::array())) {
            const fs::path image_path = fs::path(dir) / entry.at("image").get<std::string>();
            const fs::path mask_path = fs::path(dir) / entry.at("mask").get<std::string>();
            oba::ObjectPatch patch;
            patch.object_id = entry.at("id").get<std::string>();
            patch.image = oba::load_raster(image_path);
            patch.mask = oba::image_to_mask(oba::load_raster(mask_path));
            const auto& bbox = entry.at("bbox");
            patch.bbox = {bbox.at("col").get<int>(), bbox.at("row").get<int>(),
                          bbox.at("width").get<int>(), bbox.at("height").get<int>()};
            patch.footprint = oba::footprint_from_json(entry.at("footprint"),
                                                       patch.object_id,
                                                       entry.value("class", ""));
            loaded_objects.push_back(std::move(patch));
            entry["image"] = relative_to(image_path, out_dir);
            entry["mask"] = relative_to(mask_path, out_dir);
            objects.push_back(entry);
        }
    }

    json backgrounds = json::array();
    std::vector<std::pair<oba::GeoRaster, std::vector<oba::FootprintPolygon>>> labeled;
    std::vector<oba::GeoRaster> extra;
    for (const std::string& arg : args.labeled) {
        const auto [scene_path, footprints_path] = split_scene_footprints(arg);
        labeled.emplace_back(oba::load_raster(scene_path),
                             oba::load_footprints(footprints_path));
        backgrounds.push_back({{"kind", "labeled_scene"},
                               {"image", relative_to(scene_path, out_dir)},
                               {"footprints", relative_to(footprints_path, out_dir)}});
    }
    for (const std::string& path : args.extra) {
        extra.push_back(oba::load_raster(path));
        backgrounds.push_back(
            {{"kind", "extra_unlabeled"}, {"image", relative_to(path, out_dir)}});
    }

    const auto pool = oba::build_background_pool(labeled, extra);
    std::sort(loaded_objects.begin(), loaded_objects.end(),
              [](const oba::ObjectPatch& a, const oba::ObjectPatch& b) {
                  return a.object_id < b.object_id;
              });
    std::sort(objects.begin(), objects.end(), [](const json& a, const json& b) {
        return a.at("id").get<std::string>() < b.at("id").get<std::string>();
    });
    const std::string digest = oba::compute_bank_digest(loaded_objects, pool);

    const json manifest = {{"format", "oba-bank-v1"},
                           {"objects", objects},
                           {"backgrounds", backgrounds},
                           {"digest", digest},
                           {"config",
                            {{"patches", args.patch_dirs},
                             {"labeled", args.labeled},
                             {"extra", args.extra},
                             {"out", args.out}}}};
    write_json_file(out_path, manifest);
    std::cerr << "bank: " << loaded_objects.size() << " objects, " << backgrounds.size()
              << " backgrounds, digest " << digest << " -> " << args.out << "\n";
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::string bank, policy, out_dir;
    std::uint64_t count = 100;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int workers = 1;
    bool strict = false;
};

void run_generate(const GenerateArgs& args) {
    const oba::BankIndex bank = oba::load_bank(args.bank);
    oba::AugPolicy policy =
        args.policy.empty() ? oba::AugPolicy{} : load_policy_file(args.policy);
    if (args.seed_given) policy.base_seed = args.seed;
    const auto originals = oba::originals_from_bank(bank);

    const json config = {{"bank", args.bank},
                         {"policy_file", args.policy},
                         {"count", args.count},
                         {"seed", policy.base_seed},
                         {"workers", args.workers},
                         {"strict", args.strict},
                         {"bank_digest", bank.manifest_digest},
                         {"out", args.out_dir}};
    const auto manifest =
        oba::export_epoch(policy, bank, bank.backgrounds, originals, args.count,
                          args.out_dir, args.workers, args.strict, config);
    std::cout << manifest.digest << "\n";
    std::cerr << "generated " << args.count << " samples -> " << args.out_dir << "\n";
}

// ---------------------------------------------------------------------------

struct GentestArgs {
    std::string bank, background, policy, out_dir;
    int cell_width = 128, cell_height = 128;
    double paste_prob = 0.6;
    std::uint64_t seed = 0;
};

void run_gentest(const GentestArgs& args) {
    const oba::BankIndex bank = oba::load_bank(args.bank);
    const oba::GeoRaster background = oba::load_raster(args.background);

    oba::GeneratedTestSpec spec;
    spec.cell_size = {args.cell_width, args.cell_height};
    spec.paste_prob = args.paste_prob;
    spec.seed = args.seed;
    if (!args.policy.empty()) spec.shadow = load_policy_file(args.policy).shadow;

    const auto test = oba::build_generated_test(background, bank, spec);
    fs::create_directories(args.out_dir);
    oba::save_png(fs::path(args.out_dir) / "image.png", test.image);
    oba::save_png(fs::path(args.out_dir) / "mask.png", oba::mask_to_image(test.mask));

    oba::Fnv1a digest;
    digest.update(test.image.data.data(), test.image.data.size());
    digest.update(test.mask.data.data(), test.mask.data.size());
    json placements = json::array();
    for (const auto& p : test.placements)
        placements.push_back({{"object_id", p.object_id}, {"col", p.col}, {"row", p.row}});
    const json manifest = {{"format", "oba-gentest-v1"},
                           {"cells_total", test.cells_total},
                           {"cells_occupied", test.cells_occupied},
                           {"placements", placements},
                           {"digest", "fnv1a64:" + digest.hex()},
                           {"config",
                            {{"bank", args.bank},
                             {"background", args.background},
                             {"cell_size", {args.cell_width, args.cell_height}},
                             {"paste_prob", args.paste_prob},
                             {"seed", args.seed},
                             {"policy_file", args.policy},
                             {"bank_digest", bank.manifest_digest},
                             {"out", args.out_dir}}}};
    write_json_file(fs::path(args.out_dir) / "gentest.json", manifest);
    std::cout << "fnv1a64:" << digest.hex() << "\n";
    std::cerr << "gentest: " << test.cells_occupied << "/" << test.cells_total
              << " cells occupied -> " << args.out_dir << "\n";
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string pred_dir, truth_dir, out;
    int threshold = 127;
    int workers = 1;
};

void run_evaluate(const EvaluateArgs& args) {
    const auto report =
        oba::evaluate_run(args.pred_dir, args.truth_dir, args.threshold, args.workers);
    json j = oba::to_json(report);
    j["config"] = {{"pred", args.pred_dir},
                   {"truth", args.truth_dir},
                   {"threshold", args.threshold},
                   {"workers", args.workers}};
    if (args.out.empty()) {
        std::cout << j.dump(2) << "\n";
        std::cerr << oba::format_report_table(report);
    } else {
        write_json_file(args.out, j);
        std::cout << oba::format_report_table(report);
    }
}

// ---------------------------------------------------------------------------

struct SearchArgs {
    std::string trainer, store, policy;
    int budget = 20;
    int epochs = 12;
    std::uint64_t seed = 0;
};

void run_search(const SearchArgs& args) {
    oba::SearchSpace space;
    oba::StudyOptions options;
    if (!args.policy.empty()) options.base_policy = load_policy_file(args.policy);
    options.on_trial_end = [](const oba::TrialRecord& trial) {
        std::cerr << "trial " << trial.trial_id << " " << oba::to_string(trial.status);
        if (trial.final_value) std::cerr << " value " << *trial.final_value;
        std::cerr << " (" << trial.intermediate.size() << " epochs)\n";
    };
    const auto state = oba::run_study(space, args.budget, args.epochs, args.trainer,
                                      args.store, args.seed, options);
    if (const oba::TrialRecord* best = state.best()) {
        json out = {{"best_trial", best->trial_id},
                    {"best_value", *best->final_value},
                    {"policy", oba::to_json(best->policy)}};
        std::cout << out.dump(2) << "\n";
    } else {
        std::cerr << "no completed trials\n";
    }
}

// ---------------------------------------------------------------------------

struct PreviewArgs {
    std::string bank, policy, out_dir;
    std::uint64_t count = 1;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool strict = false;
};

void run_preview(const PreviewArgs& args) {
    const oba::BankIndex bank = oba::load_bank(args.bank);
    oba::AugPolicy policy =
        args.policy.empty() ? oba::AugPolicy{} : load_policy_file(args.policy);
    if (args.seed_given) policy.base_seed = args.seed;
    fs::create_directories(args.out_dir);

    for (std::uint64_t i = 0; i < args.count; ++i) {
        const std::uint64_t seed = policy.base_seed + i;
        const oba::Sample sample =
            oba::generate_sample(policy, bank, bank.backgrounds, seed, args.strict);
        const std::string stem = std::to_string(seed);
        oba::save_png(fs::path(args.out_dir) / (stem + ".png"), sample.image);
        oba::save_png(fs::path(args.out_dir) / (stem + "_mask.png"),
                      oba::mask_to_image(sample.mask));
        json placements = json::array();
        for (const auto& p : sample.placements)
            placements.push_back({{"object_id", p.object_id},
                                  {"col", p.col},
                                  {"row", p.row},
                                  {"transform_seed", p.transform_seed}});
        const json log = {{"seed", seed},
                          {"placements", placements},
                          {"config",
                           {{"bank", args.bank},
                            {"policy_file", args.policy},
                            {"bank_digest", bank.manifest_digest}}}};
        write_json_file(fs::path(args.out_dir) / (stem + "_placements.json"), log);
    }
    std::cerr << "previewed " << args.count << " samples -> " << args.out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Object-based augmentation for georeferenced segmentation data"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read flags from a config file (flags take precedence)");

    ExtractArgs extract_args;
    auto* extract = app.add_subcommand("extract", "Extract object patches from a scene");
    extract->add_option("--scene", extract_args.scene, "Georeferenced scene raster (PNG/TIFF + .wld)")
        ->required()
        ->capture_default_str();
    extract->add_option("--footprints", extract_args.footprints, "GeoJSON footprints")
        ->required()
        ->capture_default_str();
    extract->add_option("--padding", extract_args.padding, "Context pixels around each bbox")
        ->capture_default_str();
    extract->add_option("--out", extract_args.out_dir, "Output patch directory")
        ->required()
        ->capture_default_str();
    extract->callback([&] { run_extract(extract_args); });

    BankArgs bank_args;
    auto* bank = app.add_subcommand("bank", "Assemble a bank manifest from patches and backgrounds");
    bank->add_option("--patches", bank_args.patch_dirs, "Patch directory from `extract` (repeatable)")
        ->capture_default_str();
    bank->add_option("--labeled", bank_args.labeled,
                     "Labeled background SCENE:FOOTPRINTS (repeatable)")
        ->capture_default_str();
    bank->add_option("--extra", bank_args.extra, "Extra unlabeled background raster (repeatable)")
        ->capture_default_str();
    bank->add_option("--out", bank_args.out, "Bank manifest path")->capture_default_str();
    bank->callback([&] { run_bank(bank_args); });

    GenerateArgs generate_args;
    auto* generate = app.add_subcommand("generate", "Export a reproducible epoch of samples");
    generate->add_option("--bank", generate_args.bank, "Bank manifest")->required()
        ->capture_default_str();
    generate->add_option("--policy", generate_args.policy, "Policy JSON (defaults if omitted)")
        ->capture_default_str();
    generate->add_option("--count", generate_args.count, "Number of samples")
        ->capture_default_str();
    auto* gen_seed = generate->add_option("--seed", generate_args.seed,
                                          "Override the policy base seed")
                         ->capture_default_str();
    generate->add_option("--workers", generate_args.workers, "Worker threads")
        ->capture_default_str();
    generate->add_flag("--strict", generate_args.strict,
                       "Fail instead of falling back to an unclean background window");
    generate->add_option("--out", generate_args.out_dir, "Output sample directory")
        ->required()
        ->capture_default_str();
    generate->callback([&] {
        generate_args.seed_given = gen_seed->count() > 0;
        run_generate(generate_args);
    });

    GentestArgs gentest_args;
    auto* gentest = app.add_subcommand("gentest", "Build a generated test image over a grid");
    gentest->add_option("--bank", gentest_args.bank, "Bank manifest")->required()
        ->capture_default_str();
    gentest->add_option("--background", gentest_args.background, "Clean background raster")
        ->required()
        ->capture_default_str();
    gentest->add_option("--cell-width", gentest_args.cell_width, "Grid cell width")
        ->capture_default_str();
    gentest->add_option("--cell-height", gentest_args.cell_height, "Grid cell height")
        ->capture_default_str();
    gentest->add_option("--paste-prob", gentest_args.paste_prob, "Per-cell paste probability")
        ->capture_default_str();
    gentest->add_option("--seed", gentest_args.seed, "Seed")->capture_default_str();
    gentest->add_option("--policy", gentest_args.policy, "Policy JSON for shadow parameters")
        ->capture_default_str();
    gentest->add_option("--out", gentest_args.out_dir, "Output directory")->required()
        ->capture_default_str();
    gentest->callback([&] { run_gentest(gentest_args); });

    EvaluateArgs evaluate_args;
    auto* evaluate = app.add_subcommand("evaluate", "Score prediction masks with pixel-wise F1");
    evaluate->add_option("--pred", evaluate_args.pred_dir, "Prediction mask directory")
        ->required()
        ->capture_default_str();
    evaluate->add_option("--truth", evaluate_args.truth_dir, "Ground-truth mask directory")
        ->required()
        ->capture_default_str();
    evaluate->add_option("--threshold", evaluate_args.threshold,
                         "Prediction binarization threshold (value > threshold is positive)")
        ->capture_default_str();
    evaluate->add_option("--workers", evaluate_args.workers, "Worker threads")
        ->capture_default_str();
    evaluate->add_option("--out", evaluate_args.out, "Report JSON path (stdout if omitted)")
        ->capture_default_str();
    evaluate->callback([&] { run_evaluate(evaluate_args); });

    SearchArgs search_args;
    auto* search = app.add_subcommand("search", "Optimize policy knobs against an external trainer");
    search->add_option("--trainer", search_args.trainer,
                       "Trainer command; `--policy <json> --epochs <N>` is appended")
        ->required()
        ->capture_default_str();
    search->add_option("--store", search_args.store, "Trial store (JSON lines, append-only)")
        ->required()
        ->capture_default_str();
    search->add_option("--budget", search_args.budget, "Total number of trials")
        ->capture_default_str();
    search->add_option("--epochs", search_args.epochs, "Epochs per trial")
        ->capture_default_str();
    search->add_option("--seed", search_args.seed, "Study seed")->capture_default_str();
    search->add_option("--policy", search_args.policy, "Base policy JSON for non-searched knobs")
        ->capture_default_str();
    search->callback([&] { run_search(search_args); });

    PreviewArgs preview_args;
    auto* preview = app.add_subcommand("preview", "Composite samples with placement logs");
    preview->add_option("--bank", preview_args.bank, "Bank manifest")->required()
        ->capture_default_str();
    preview->add_option("--policy", preview_args.policy, "Policy JSON")->capture_default_str();
    preview->add_option("--count", preview_args.count, "Number of previews")
        ->capture_default_str();
    auto* prev_seed =
        preview->add_option("--seed", preview_args.seed, "Override the policy base seed")
            ->capture_default_str();
    preview->add_flag("--strict", preview_args.strict,
                      "Fail instead of falling back to an unclean background window");
    preview->add_option("--out", preview_args.out_dir, "Output directory")->required()
        ->capture_default_str();
    preview->callback([&] {
        preview_args.seed_given = prev_seed->count() > 0;
        run_preview(preview_args);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const oba::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
