#pragma once

#include <algorithm>
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
#include "oba/raster.hpp"
#include "oba/rng.hpp"

namespace oba {

/// Pixel-wise confusion tallies for one binary mask pair.
struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

inline ConfusionCounts confusion(const GeoRaster& pred, const GeoRaster& truth) {
    if (pred.width != truth.width || pred.height != truth.height ||
        pred.channels != 1 || truth.channels != 1)
        raise(ErrorCode::SizeMismatch, "confusion inputs must be same-size single-channel masks");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i] != 0;
        const bool t = truth.data[i] != 0;
        if (p && t)
            ++c.tp;
        else if (p && !t)
            ++c.fp;
        else if (!p && t)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

/// F1 = tp / (tp + (fp + fn) / 2). An all-empty pair (tp = fp = fn = 0) is
/// defined as 0 so the metric stays total for automation.
inline double f1_score(const ConfusionCounts& c) {
    const double denom = static_cast<double>(c.tp) + (static_cast<double>(c.fp) +
                                                      static_cast<double>(c.fn)) / 2.0;
    if (denom == 0.0) return 0.0;
    return static_cast<double>(c.tp) / denom;
}

// ---------------------------------------------------------------------------
// Generated test set: grid-based probabilistic pasting on a clean background.
// ---------------------------------------------------------------------------

struct GeneratedTestSpec {
    std::pair<int, int> cell_size{128, 128};
    double paste_prob = 0.6;
    ShadowParams shadow;
    std::uint64_t seed = 0;
};

struct GeneratedTest {
    GeoRaster image;
    GeoRaster mask;  // {0,1}
    std::vector<Placement> placements;
    int cells_total = 0;
    int cells_occupied = 0;
};

/// Partition the background into a grid of cell_size cells (trailing partial
/// cells stay empty) and paste one uniformly chosen object per cell with
/// probability paste_prob, at a uniform in-cell position, with a per-cell
/// random shadow. Each cell consumes an independent child stream keyed by
/// (seed, cell index), so the occupied-cell indicators are exactly the
/// Bernoulli draws of those streams.
inline GeneratedTest build_generated_test(const GeoRaster& background,
                                          const BankIndex& bank,
                                          const GeneratedTestSpec& spec) {
    const auto [cw, chh] = spec.cell_size;
    if (cw <= 0 || chh <= 0)
        raise(ErrorCode::InvalidArgument, "cell size must be positive");
    if (background.width < cw || background.height < chh)
        raise(ErrorCode::InvalidArgument, "background smaller than one grid cell");
    if (!(spec.paste_prob >= 0.0 && spec.paste_prob <= 1.0))
        raise(ErrorCode::InvalidArgument, "paste_prob must be in [0,1]");
    if (bank.objects.empty() && spec.paste_prob > 0.0)
        raise(ErrorCode::EmptyBank, "generated test needs at least one object");

    GeneratedTest out;
    out.image = background;
    out.image.transform.reset();
    out.image.crs_label.reset();
    out.mask = GeoRaster(background.width, background.height, 1);

    const int nx = background.width / cw;
    const int ny = background.height / chh;
    out.cells_total = nx * ny;

    // Decision pass: per-cell draws from independent child streams.
    struct CellPlan {
        bool paste = false;
        std::size_t object = 0;
        int col = 0, row = 0;
        double angle = 0.0, length = 0.0, alpha = 0.0;
    };
    std::vector<CellPlan> plans(static_cast<std::size_t>(out.cells_total));
    for (int cell = 0; cell < out.cells_total; ++cell) {
        Rng rng(mix64(spec.seed, static_cast<std::uint64_t>(cell)));
        CellPlan& plan = plans[static_cast<std::size_t>(cell)];
        if (!rng.bernoulli(spec.paste_prob)) continue;
        plan.object = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(bank.objects.size()) - 1));
        const ObjectPatch& patch = bank.objects[plan.object];
        if (patch.image.width > cw || patch.image.height > chh) continue;  // cannot fit
        const int cell_col = (cell % nx) * cw;
        const int cell_row = (cell / nx) * chh;
        plan.col = cell_col + static_cast<int>(rng.uniform_int(0, cw - patch.image.width));
        plan.row = cell_row + static_cast<int>(rng.uniform_int(0, chh - patch.image.height));
        plan.angle = rng.uniform(spec.shadow.angle_range.first, spec.shadow.angle_range.second);
        plan.length =
            rng.uniform(spec.shadow.length_range.first, spec.shadow.length_range.second);
        plan.alpha = rng.uniform(spec.shadow.intensity_range.first,
                                 spec.shadow.intensity_range.second);
        plan.paste = true;
    }

    // Mark all object masks first so no shadow ever darkens a pasted object,
    // regardless of cell order.
    for (const CellPlan& plan : plans) {
        if (!plan.paste) continue;
        const ObjectPatch& patch = bank.objects[plan.object];
        for (int r = 0; r < patch.mask.height; ++r)
            for (int c = 0; c < patch.mask.width; ++c)
                if (patch.mask.at(c, r)) out.mask.at(plan.col + c, plan.row + r) = 1;
    }
    for (int cell = 0; cell < out.cells_total; ++cell) {
        const CellPlan& plan = plans[static_cast<std::size_t>(cell)];
        if (!plan.paste) continue;
        const ObjectPatch& patch = bank.objects[plan.object];
        const auto [dc, dr] = compositor_detail::shadow_shift(plan.angle, plan.length);
        compositor_detail::blend_shadow(out.image, patch.mask, plan.col, plan.row, dc, dr,
                                        plan.alpha, &out.mask);
        for (int r = 0; r < patch.mask.height; ++r)
            for (int c = 0; c < patch.mask.width; ++c)
                if (patch.mask.at(c, r))
                    for (int i = 0; i < out.image.channels; ++i)
                        out.image.at(plan.col + c, plan.row + r, i) = patch.image.at(c, r, i);
        out.placements.push_back({patch.object_id, plan.col, plan.row, 0});
        ++out.cells_occupied;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Directory evaluation.
// ---------------------------------------------------------------------------

struct FileScore {
    std::string name;
    ConfusionCounts counts;
    double f1 = 0.0;
};

struct EvalReport {
    std::vector<FileScore> per_file;
    ConfusionCounts pooled;
    double pooled_f1 = 0.0;
};

namespace evalgen_detail {

inline bool is_mask_file(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

/// Truth masks must be strictly binary: every value 0/1 or 0/255.
inline GeoRaster load_truth_mask(const std::filesystem::path& path) {
    GeoRaster raster = load_raster(path);
    if (raster.channels != 1)
        raise(ErrorCode::NonBinaryMask, path.string() + " is not single-channel");
    bool has_255 = false, has_1 = false;
    for (std::uint8_t v : raster.data) {
        if (v == 0) continue;
        if (v == 255)
            has_255 = true;
        else if (v == 1)
            has_1 = true;
        else
            raise(ErrorCode::NonBinaryMask, path.string() + " contains non-binary values");
    }
    if (has_255 && has_1)
        raise(ErrorCode::NonBinaryMask, path.string() + " mixes 0/1 and 0/255 encodings");
    for (auto& v : raster.data) v = v != 0;
    return raster;
}

}  // namespace evalgen_detail

/// Score every truth mask in truth_dir against the same-named prediction in
/// pred_dir. Predictions are 8-bit and binarized at `threshold` (value >
/// threshold is positive); truth masks must already be binary. The pooled
/// row is micro-averaged: F1 of the summed confusion counts. File pairs are
/// scored independently, so extra workers change nothing but wall time.
inline EvalReport evaluate_run(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& truth_dir,
                               int threshold = 127, int workers = 1) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(truth_dir))
        raise(ErrorCode::IoError, "truth directory not found: " + truth_dir.string());
    if (!fs::is_directory(pred_dir))
        raise(ErrorCode::IoError, "prediction directory not found: " + pred_dir.string());

    std::vector<fs::path> truth_files;
    for (const auto& entry : fs::directory_iterator(truth_dir))
        if (entry.is_regular_file() && evalgen_detail::is_mask_file(entry.path()))
            truth_files.push_back(entry.path());
    std::sort(truth_files.begin(), truth_files.end());
    if (truth_files.empty())
        raise(ErrorCode::InvalidArgument, "no mask files in " + truth_dir.string());

    std::vector<FileScore> scores(truth_files.size());
    auto score_one = [&](std::size_t i) {
        const fs::path& truth_path = truth_files[i];
        const fs::path pred_path = pred_dir / truth_path.filename();
        if (!fs::exists(pred_path))
            raise(ErrorCode::MissingPair,
                  "no prediction for " + truth_path.filename().string());
        const GeoRaster truth = evalgen_detail::load_truth_mask(truth_path);
        GeoRaster pred = load_raster(pred_path);
        if (pred.channels != 1)
            raise(ErrorCode::NonBinaryMask, pred_path.string() + " is not single-channel");
        for (auto& v : pred.data) v = v > threshold ? 1 : 0;
        scores[i].name = truth_path.filename().string();
        scores[i].counts = confusion(pred, truth);
        scores[i].f1 = f1_score(scores[i].counts);
    };

    workers = std::max(1, workers);
    if (workers == 1) {
        for (std::size_t i = 0; i < truth_files.size(); ++i) score_one(i);
    } else {
        std::atomic<std::size_t> cursor{0};
        std::vector<std::thread> threads;
        std::exception_ptr failure;
        std::mutex failure_mutex;
        for (int t = 0; t < workers; ++t) {
            threads.emplace_back([&] {
                for (;;) {
                    const std::size_t i = cursor.fetch_add(1);
                    if (i >= truth_files.size()) return;
                    try {
                        score_one(i);
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

    EvalReport report;
    report.per_file = std::move(scores);
    for (const FileScore& s : report.per_file) report.pooled += s.counts;
    report.pooled_f1 = f1_score(report.pooled);
    return report;
}

inline nlohmann::json to_json(const ConfusionCounts& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

inline nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json per_file = nlohmann::json::array();
    for (const FileScore& s : report.per_file) {
        nlohmann::json j = to_json(s.counts);
        j["name"] = s.name;
        j["f1"] = s.f1;
        per_file.push_back(j);
    }
    nlohmann::json pooled = to_json(report.pooled);
    pooled["f1"] = report.pooled_f1;
    return {{"per_file", per_file}, {"pooled", pooled}};
}

/// Aligned text table, one row per file plus the pooled row.
inline std::string format_report_table(const EvalReport& report) {
    std::ostringstream out;
    std::size_t name_width = 6;
    for (const FileScore& s : report.per_file)
        name_width = std::max(name_width, s.name.size());
    out << std::left << std::setw(static_cast<int>(name_width)) << "mask" << std::right
        << std::setw(12) << "tp" << std::setw(12) << "fp" << std::setw(12) << "fn"
        << std::setw(12) << "tn" << std::setw(10) << "f1" << "\n";
    auto row = [&](const std::string& name, const ConfusionCounts& c, double f1) {
        out << std::left << std::setw(static_cast<int>(name_width)) << name << std::right
            << std::setw(12) << c.tp << std::setw(12) << c.fp << std::setw(12) << c.fn
            << std::setw(12) << c.tn << std::setw(10) << std::fixed
            << std::setprecision(4) << f1 << "\n";
    };
    for (const FileScore& s : report.per_file) row(s.name, s.counts, s.f1);
    row("pooled", report.pooled, report.pooled_f1);
    return out.str();
}

}  // namespace oba
