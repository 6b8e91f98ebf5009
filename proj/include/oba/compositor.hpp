#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "oba/errors.hpp"
#include "oba/object_bank.hpp"
#include "oba/policy.hpp"
#include "oba/raster.hpp"
#include "oba/rng.hpp"
#include "oba/transforms.hpp"

namespace oba {

enum class Provenance { original, generated };

inline std::string_view to_string(Provenance p) {
    return p == Provenance::original ? "original" : "generated";
}

/// Where one object landed in a generated crop, with enough seed material to
/// regenerate its transformed appearance.
struct Placement {
    std::string object_id;
    int col = 0;
    int row = 0;
    std::uint64_t transform_seed = 0;
};

/// One training pair. `seed` plus the policy regenerate a generated sample
/// bit-exactly.
struct Sample {
    GeoRaster image;
    GeoRaster mask;  // {0,1}
    Provenance provenance = Provenance::generated;
    std::vector<Placement> placements;
    std::uint64_t seed = 0;
};

namespace compositor_detail {

/// Darken `canvas` where the object mask, shifted by the shadow offset,
/// lands — excluding the object's own pixels and any protected mask (already
/// pasted objects keep their appearance). Shadow pixels become
/// round((1 - alpha) * value) per channel; everything else is untouched.
inline void blend_shadow(GeoRaster& canvas, const GeoRaster& object_mask, int at_col,
                         int at_row, int shift_col, int shift_row, double alpha,
                         const GeoRaster* protected_mask) {
    if (alpha <= 0.0) return;
    if (shift_col == 0 && shift_row == 0) return;  // fully hidden by the object
    const double keep = 1.0 - alpha;
    for (int r = 0; r < object_mask.height; ++r) {
        for (int c = 0; c < object_mask.width; ++c) {
            if (!object_mask.at(c, r)) continue;
            const int sc = at_col + c + shift_col;
            const int sr = at_row + r + shift_row;
            if (!canvas.in_bounds(sc, sr)) continue;  // clipped at crop edges
            // The object occludes its own shadow.
            const int oc = sc - at_col;
            const int orow = sr - at_row;
            if (oc >= 0 && oc < object_mask.width && orow >= 0 && orow < object_mask.height &&
                object_mask.at(oc, orow))
                continue;
            if (protected_mask && protected_mask->at(sc, sr)) continue;
            for (int i = 0; i < canvas.channels; ++i)
                canvas.at(sc, sr, i) = clamp_u8(keep * canvas.at(sc, sr, i));
        }
    }
}

inline bool placement_collides(const GeoRaster& union_mask, const GeoRaster& object_mask,
                               int at_col, int at_row) {
    for (int r = 0; r < object_mask.height; ++r)
        for (int c = 0; c < object_mask.width; ++c)
            if (object_mask.at(c, r) && union_mask.at(at_col + c, at_row + r)) return true;
    return false;
}

inline void paste_object(GeoRaster& canvas, GeoRaster& union_mask, const GeoRaster& image,
                         const GeoRaster& mask, int at_col, int at_row) {
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            if (!mask.at(c, r)) continue;
            for (int i = 0; i < canvas.channels; ++i)
                canvas.at(at_col + c, at_row + r, i) = image.at(c, r, i);
            union_mask.at(at_col + c, at_row + r) = 1;
        }
    }
}

inline std::pair<int, int> shadow_shift(double angle_deg, double length) {
    const double rad = angle_deg * std::numbers::pi / 180.0;
    return {static_cast<int>(std::lround(length * std::cos(rad))),
            static_cast<int>(std::lround(length * std::sin(rad)))};
}

}  // namespace compositor_detail

/// Render a synthetic shadow for an object mask placed at (at_col, at_row):
/// the mask translated by (L cos theta, L sin theta), minus the object
/// itself, blended into the background at strength alpha. Angle, length and
/// alpha are drawn from the parameter ranges.
inline GeoRaster render_shadow(const GeoRaster& background, const GeoRaster& object_mask,
                               int at_col, int at_row, const ShadowParams& params,
                               Rng& rng) {
    GeoRaster out = background;
    const double angle = rng.uniform(params.angle_range.first, params.angle_range.second);
    const double length = rng.uniform(params.length_range.first, params.length_range.second);
    const double alpha =
        rng.uniform(params.intensity_range.first, params.intensity_range.second);
    const auto [dc, dr] = compositor_detail::shadow_shift(angle, length);
    compositor_detail::blend_shadow(out, object_mask, at_col, at_row, dc, dr, alpha,
                                    nullptr);
    return out;
}

struct PlaceStats {
    int requested = 0;   // object count drawn for this sample
    int placed = 0;
    int dropped_overlap = 0;
    int dropped_too_large = 0;
};

/// Fill a background crop with transformed objects. Object count is uniform
/// in count_range; each object gets an independent transform stream, a shadow
/// rendered before it is pasted, and a uniformly drawn in-bounds position.
/// Placements whose mask would touch an already-pasted mask are redrawn up to
/// max_attempts times, then the object is dropped. One shadow direction is
/// drawn per sample.
inline Sample place_objects(GeoRaster crop, const BankIndex& bank,
                            std::pair<int, int> count_range, const TransformSuite& suite,
                            const ShadowParams& shadow, int max_attempts, Rng& rng,
                            std::uint64_t seed, PlaceStats* stats = nullptr) {
    using namespace compositor_detail;
    if (count_range.first < 0 || count_range.first > count_range.second)
        raise(ErrorCode::InvalidArgument, "object count range must satisfy 0 <= lo <= hi");

    Sample sample;
    sample.provenance = Provenance::generated;
    sample.seed = seed;
    sample.mask = GeoRaster(crop.width, crop.height, 1);

    const int n = static_cast<int>(rng.uniform_int(count_range.first, count_range.second));
    const double angle = rng.uniform(shadow.angle_range.first, shadow.angle_range.second);
    if (stats) stats->requested = n;
    if (n > 0 && bank.objects.empty())
        raise(ErrorCode::EmptyBank, "cannot place objects from an empty bank");

    for (int j = 0; j < n; ++j) {
        const auto& patch = bank.objects[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(bank.objects.size()) - 1))];
        const std::uint64_t transform_seed = rng.next_u64();
        Rng trng(transform_seed);
        auto [timg, tmask] = apply_suite(suite, patch.image, patch.mask, trng);
        if (!tmask || mask_count(*tmask) == 0) continue;
        if (timg.width > crop.width || timg.height > crop.height) {
            if (stats) ++stats->dropped_too_large;
            continue;
        }
        bool placed = false;
        for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
            const int at_col = static_cast<int>(rng.uniform_int(0, crop.width - timg.width));
            const int at_row =
                static_cast<int>(rng.uniform_int(0, crop.height - timg.height));
            if (placement_collides(sample.mask, *tmask, at_col, at_row)) continue;
            const double length =
                rng.uniform(shadow.length_range.first, shadow.length_range.second);
            const double alpha =
                rng.uniform(shadow.intensity_range.first, shadow.intensity_range.second);
            const auto [dc, dr] = shadow_shift(angle, length);
            blend_shadow(crop, *tmask, at_col, at_row, dc, dr, alpha, &sample.mask);
            paste_object(crop, sample.mask, timg, *tmask, at_col, at_row);
            sample.placements.push_back({patch.object_id, at_col, at_row, transform_seed});
            placed = true;
        }
        if (!placed && stats) ++stats->dropped_overlap;
        if (stats && placed) ++stats->placed;
    }

    crop.transform.reset();  // synthetic scene: the georeference no longer applies
    crop.crs_label.reset();
    sample.image = std::move(crop);
    return sample;
}

/// Synthesize one full training sample from the policy: draw a clean
/// background crop, then place objects. Pure function of (policy, bank
/// contents, seed).
inline Sample generate_sample(const AugPolicy& policy, const BankIndex& bank,
                              const std::vector<BackgroundSource>& backgrounds,
                              std::uint64_t seed, bool strict = false,
                              PlaceStats* stats = nullptr) {
    Rng rng(seed);
    GeoRaster crop = sample_background_crop(backgrounds, policy.crop_size,
                                            policy.use_extra_background_prob, rng, strict);
    return place_objects(std::move(crop), bank, policy.extra_objects, policy.suite(),
                         policy.shadow, 50, rng, seed, stats);
}

}  // namespace oba
