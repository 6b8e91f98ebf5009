#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "oba/compositor.hpp"
#include "oba/errors.hpp"
#include "oba/image_io.hpp"
#include "oba/object_bank.hpp"
#include "oba/policy.hpp"

namespace oba {

/// Labeled scenes original crops are drawn from: image plus full-scene
/// ground-truth mask.
struct OriginalCropSource {
    std::vector<std::pair<GeoRaster, GeoRaster>> scenes;
};

inline OriginalCropSource originals_from_bank(const BankIndex& bank) {
    OriginalCropSource src;
    for (const BackgroundSource& bg : bank.backgrounds)
        if (bg.kind == BackgroundKind::labeled_scene)
            src.scenes.emplace_back(bg.raster, bg.exclusion_mask);
    return src;
}

/// Produce sample number `index` of the stream: a generated sample with
/// probability oba_prob, otherwise a random crop of a random original scene.
/// Original crops keep their ground-truth mask bit-exact, so only the
/// photometric part of the suite applies to them. Pure function of
/// (policy, bank contents, index) — workers can evaluate any index.
inline Sample next_sample(const AugPolicy& policy, const BankIndex& bank,
                          const std::vector<BackgroundSource>& backgrounds,
                          const OriginalCropSource& originals, std::uint64_t index,
                          bool strict = false) {
    if (policy.oba_prob < 1.0 && originals.scenes.empty())
        raise(ErrorCode::NoOriginals,
              "oba_prob < 1 requires at least one original scene");

    const std::uint64_t sample_seed = mix64(policy.base_seed, index);
    Rng rng(sample_seed);
    if (rng.bernoulli(policy.oba_prob))
        return generate_sample(policy, bank, backgrounds, rng.next_u64(), strict);

    const auto& [scene, truth] = originals.scenes[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(originals.scenes.size()) - 1))];
    const auto [w, h] = policy.crop_size;
    if (scene.width < w || scene.height < h)
        raise(ErrorCode::InvalidArgument, "original scene smaller than crop size");
    const PixelWindow window{static_cast<int>(rng.uniform_int(0, scene.width - w)),
                             static_cast<int>(rng.uniform_int(0, scene.height - h)), w, h};

    Sample sample;
    sample.provenance = Provenance::original;
    sample.seed = sample_seed;
    sample.mask = read_window(truth, window);
    sample.mask.transform.reset();
    GeoRaster image = read_window(scene, window);
    auto [augmented, _] =
        apply_suite(photometric_only(policy.suite()), std::move(image), std::nullopt, rng);
    augmented.transform.reset();
    augmented.crs_label.reset();
    sample.image = std::move(augmented);
    return sample;
}

struct EpochManifest {
    nlohmann::json json;
    std::string digest;
};

namespace sampler_detail {

inline std::string sample_name(std::uint64_t index) {
    std::ostringstream out;
    out << std::setw(6) << std::setfill('0') << index;
    return out.str();
}

}  // namespace sampler_detail

/// Materialize `count` stream samples as PNG pairs plus a JSON manifest with
/// per-sample seeds, provenance tallies, the policy echo, and a content
/// digest. Output is byte-identical for any worker count.
inline EpochManifest export_epoch(const AugPolicy& policy, const BankIndex& bank,
                                  const std::vector<BackgroundSource>& backgrounds,
                                  const OriginalCropSource& originals, std::uint64_t count,
                                  const std::filesystem::path& out_dir, int workers = 1,
                                  bool strict = false,
                                  const nlohmann::json& config_echo = {}) {
    if (count == 0) raise(ErrorCode::InvalidArgument, "sample count must be positive");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) raise(ErrorCode::IoError, "cannot create " + out_dir.string());

    std::vector<Sample> samples(count);
    workers = std::max(1, workers);
    if (workers == 1) {
        for (std::uint64_t i = 0; i < count; ++i)
            samples[i] = next_sample(policy, bank, backgrounds, originals, i, strict);
    } else {
        std::atomic<std::uint64_t> cursor{0};
        std::vector<std::thread> threads;
        std::exception_ptr failure;
        std::mutex failure_mutex;
        for (int t = 0; t < workers; ++t) {
            threads.emplace_back([&] {
                for (;;) {
                    const std::uint64_t i = cursor.fetch_add(1);
                    if (i >= count) return;
                    try {
                        samples[i] = next_sample(policy, bank, backgrounds, originals, i,
                                                 strict);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& th : threads) th.join();
        if (failure) std::rethrow_exception(failure);
    }

    nlohmann::json entries = nlohmann::json::array();
    Fnv1a digest;
    std::uint64_t generated = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
        const Sample& s = samples[i];
        const std::string stem = sampler_detail::sample_name(i);
        const std::string image_name = stem + ".png";
        const std::string mask_name = stem + "_mask.png";
        save_png(out_dir / image_name, s.image);
        save_png(out_dir / mask_name, mask_to_image(s.mask));
        entries.push_back({{"index", i},
                           {"seed", s.seed},
                           {"provenance", std::string(to_string(s.provenance))},
                           {"image", image_name},
                           {"mask", mask_name}});
        generated += s.provenance == Provenance::generated;
        digest.update(&i, sizeof(i));
        digest.update(&s.seed, sizeof(s.seed));
        digest.update(to_string(s.provenance));
        digest.update(s.image.data.data(), s.image.data.size());
        digest.update(s.mask.data.data(), s.mask.data.size());
    }

    EpochManifest manifest;
    manifest.digest = "fnv1a64:" + digest.hex();
    manifest.json = {{"format", "oba-samples-v1"},
                     {"policy", to_json(policy)},
                     {"base_seed", policy.base_seed},
                     {"count", count},
                     {"provenance_counts",
                      {{"generated", generated}, {"original", count - generated}}},
                     {"entries", entries},
                     {"digest", manifest.digest}};
    if (!config_echo.is_null() && !config_echo.empty())
        manifest.json["config"] = config_echo;

    std::ofstream out(out_dir / "manifest.json");
    if (!out) raise(ErrorCode::IoError, "cannot write manifest in " + out_dir.string());
    out << manifest.json.dump(2) << "\n";
    return manifest;
}

}  // namespace oba
