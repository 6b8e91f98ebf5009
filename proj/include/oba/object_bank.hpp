#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "oba/errors.hpp"
#include "oba/geojson.hpp"
#include "oba/image_io.hpp"
#include "oba/polygon.hpp"
#include "oba/raster.hpp"
#include "oba/rng.hpp"

namespace oba {

/// One extracted target object: a tight RGB crop, its binary mask, the
/// source footprint, and where it came from.
struct ObjectPatch {
    std::string object_id;
    GeoRaster image;          // RGB crop
    GeoRaster mask;           // {0,1}, same size as image
    FootprintPolygon footprint;
    PixelWindow bbox;         // crop window in source-scene coordinates
};

enum class BackgroundKind { labeled_scene, extra_unlabeled };

inline std::string_view to_string(BackgroundKind kind) {
    return kind == BackgroundKind::labeled_scene ? "labeled_scene" : "extra_unlabeled";
}

/// A scene crops can be drawn from. Labeled scenes carry an exclusion mask
/// marking every pixel covered by a labeled object; extra scenes are
/// object-free by assumption and carry an all-zero mask.
struct BackgroundSource {
    GeoRaster raster;
    BackgroundKind kind = BackgroundKind::extra_unlabeled;
    GeoRaster exclusion_mask;
    // Summed-area table of the exclusion mask, (w+1)*(h+1), for O(1) window sums.
    std::vector<std::uint64_t> exclusion_integral;
};

inline void build_exclusion_integral(BackgroundSource& src) {
    const int w = src.raster.width, h = src.raster.height;
    src.exclusion_integral.assign(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    for (int r = 0; r < h; ++r) {
        std::uint64_t row_sum = 0;
        for (int c = 0; c < w; ++c) {
            row_sum += src.exclusion_mask.at(c, r) != 0;
            src.exclusion_integral[static_cast<std::size_t>(r + 1) * (w + 1) + c + 1] =
                src.exclusion_integral[static_cast<std::size_t>(r) * (w + 1) + c + 1] +
                row_sum;
        }
    }
}

inline BackgroundSource make_background_source(GeoRaster raster, BackgroundKind kind,
                                               GeoRaster exclusion) {
    if (!exclusion.same_shape(GeoRaster(raster.width, raster.height, 1)))
        raise(ErrorCode::SizeMismatch, "exclusion mask size does not match raster");
    BackgroundSource src{std::move(raster), kind, std::move(exclusion), {}};
    build_exclusion_integral(src);
    return src;
}

inline std::uint64_t window_exclusion_sum(const BackgroundSource& src,
                                          const PixelWindow& w) {
    const int stride = src.raster.width + 1;
    const auto& I = src.exclusion_integral;
    const int c0 = w.col_off, r0 = w.row_off;
    const int c1 = w.col_off + w.width, r1 = w.row_off + w.height;
    return I[static_cast<std::size_t>(r1) * stride + c1] -
           I[static_cast<std::size_t>(r0) * stride + c1] -
           I[static_cast<std::size_t>(r1) * stride + c0] +
           I[static_cast<std::size_t>(r0) * stride + c0];
}

struct ExtractReport {
    std::vector<std::string> empty_mask_ids;  // footprints that rasterized to nothing
};

/// Cut one patch per footprint out of a georeferenced scene. The crop window
/// is the footprint's tight pixel bounding box grown by `padding` and clamped
/// to the scene; the mask is the footprint rasterization restricted to that
/// window (bit-identical to cropping a full-scene rasterization). Footprints
/// that cover no pixel center are reported and skipped.
inline std::vector<ObjectPatch> extract_objects(const GeoRaster& scene,
                                                const std::vector<FootprintPolygon>& footprints,
                                                int padding,
                                                ExtractReport* report = nullptr) {
    if (!scene.transform)
        raise(ErrorCode::InvalidArgument, "scene is not georeferenced");
    if (padding < 0) raise(ErrorCode::InvalidArgument, "padding must be >= 0");
    if (scene.channels < 3)
        raise(ErrorCode::InvalidArgument, "object extraction expects an RGB scene");

    std::vector<ObjectPatch> patches;
    for (const FootprintPolygon& poly : footprints) {
        const auto bbox = footprint_pixel_bbox(poly, *scene.transform);
        auto skip = [&] {
            if (report) report->empty_mask_ids.push_back(poly.object_id);
        };
        if (!bbox) {
            skip();
            continue;
        }
        // Clamp the tight box to the scene before padding; a footprint fully
        // outside contributes nothing.
        int c0 = std::max(bbox->col_off, 0);
        int r0 = std::max(bbox->row_off, 0);
        int c1 = std::min(bbox->col_off + bbox->width, scene.width);
        int r1 = std::min(bbox->row_off + bbox->height, scene.height);
        if (c0 >= c1 || r0 >= r1) {
            skip();
            continue;
        }
        c0 = std::max(c0 - padding, 0);
        r0 = std::max(r0 - padding, 0);
        c1 = std::min(c1 + padding, scene.width);
        r1 = std::min(r1 + padding, scene.height);
        const PixelWindow window{c0, r0, c1 - c0, r1 - r0};

        GeoRaster mask = rasterize_polygon(poly, *scene.transform, window);
        if (mask_count(mask) == 0) {
            skip();
            continue;
        }
        GeoRaster crop = read_window(scene, window);
        if (crop.channels != 3) {
            GeoRaster rgb(crop.width, crop.height, 3);
            rgb.transform = crop.transform;
            for (int r = 0; r < crop.height; ++r)
                for (int c = 0; c < crop.width; ++c)
                    for (int i = 0; i < 3; ++i) rgb.at(c, r, i) = crop.at(c, r, i);
            crop = std::move(rgb);
        }
        patches.push_back({poly.object_id, std::move(crop), std::move(mask), poly, window});
    }
    return patches;
}

/// Assemble the background pool. Labeled scenes get an exclusion mask equal
/// to the union of their rasterized footprints; extra scenes are taken as
/// object-free.
inline std::vector<BackgroundSource> build_background_pool(
    const std::vector<std::pair<GeoRaster, std::vector<FootprintPolygon>>>& labeled,
    const std::vector<GeoRaster>& extra) {
    std::vector<BackgroundSource> pool;
    for (const auto& [scene, footprints] : labeled) {
        GeoRaster exclusion(scene.width, scene.height, 1);
        if (!footprints.empty()) {
            if (!scene.transform)
                raise(ErrorCode::InvalidArgument, "labeled scene is not georeferenced");
            for (const auto& poly : footprints) {
                const auto bbox = footprint_pixel_bbox(poly, *scene.transform);
                if (!bbox) continue;
                const int c0 = std::max(bbox->col_off, 0);
                const int r0 = std::max(bbox->row_off, 0);
                const int c1 = std::min(bbox->col_off + bbox->width, scene.width);
                const int r1 = std::min(bbox->row_off + bbox->height, scene.height);
                if (c0 >= c1 || r0 >= r1) continue;
                const PixelWindow window{c0, r0, c1 - c0, r1 - r0};
                const GeoRaster mask = rasterize_polygon(poly, *scene.transform, window);
                for (int r = 0; r < window.height; ++r)
                    for (int c = 0; c < window.width; ++c)
                        if (mask.at(c, r)) exclusion.at(c0 + c, r0 + r) = 1;
            }
        }
        pool.push_back(make_background_source(scene, BackgroundKind::labeled_scene,
                                              std::move(exclusion)));
    }
    for (const GeoRaster& scene : extra) {
        GeoRaster exclusion(scene.width, scene.height, 1);
        pool.push_back(make_background_source(scene, BackgroundKind::extra_unlabeled,
                                              std::move(exclusion)));
    }
    return pool;
}

/// Draw one background crop. With probability use_extra_prob the source is
/// an extra-unlabeled scene, otherwise a labeled one (falling back to the
/// other kind when the preferred kind is empty). Candidate windows are drawn
/// uniformly; a window intersecting the exclusion mask is rejected and
/// redrawn up to `max_retries` times, after which the cleanest candidate
/// seen wins. In strict mode an unclean fallback is an error instead.
inline GeoRaster sample_background_crop(const std::vector<BackgroundSource>& pool,
                                        std::pair<int, int> size, double use_extra_prob,
                                        Rng& rng, bool strict = false,
                                        int max_retries = 100) {
    if (pool.empty()) raise(ErrorCode::PoolEmpty, "background pool is empty");
    if (!(use_extra_prob >= 0.0 && use_extra_prob <= 1.0))
        raise(ErrorCode::InvalidArgument, "use_extra_prob must be in [0,1]");

    std::vector<std::size_t> extras, labeled;
    for (std::size_t i = 0; i < pool.size(); ++i)
        (pool[i].kind == BackgroundKind::extra_unlabeled ? extras : labeled).push_back(i);

    const bool want_extra = rng.bernoulli(use_extra_prob);
    const std::vector<std::size_t>& candidates =
        want_extra ? (extras.empty() ? labeled : extras)
                   : (labeled.empty() ? extras : labeled);
    const BackgroundSource& src = pool[candidates[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1))]];

    const auto [w, h] = size;
    if (src.raster.width < w || src.raster.height < h)
        raise(ErrorCode::InvalidArgument, "background source smaller than crop size");

    PixelWindow best{};
    std::uint64_t best_overlap = std::numeric_limits<std::uint64_t>::max();
    for (int attempt = 0; attempt < max_retries; ++attempt) {
        const PixelWindow window{
            static_cast<int>(rng.uniform_int(0, src.raster.width - w)),
            static_cast<int>(rng.uniform_int(0, src.raster.height - h)), w, h};
        const std::uint64_t overlap = window_exclusion_sum(src, window);
        if (overlap == 0) return read_window(src.raster, window);
        if (overlap < best_overlap) {
            best_overlap = overlap;
            best = window;
        }
    }
    if (strict)
        raise(ErrorCode::NoCleanWindow,
              "no exclusion-free window found in " + std::to_string(max_retries) +
                  " attempts");
    return read_window(src.raster, best);
}

// ---------------------------------------------------------------------------
// Bank index and its on-disk manifest.
// ---------------------------------------------------------------------------

/// The two sampling pools the pipeline draws from, with a content digest so
/// generated data can be traced back to its inputs.
struct BankIndex {
    std::vector<ObjectPatch> objects;  // sorted by object_id, ids unique
    std::map<std::string, std::size_t> object_index;
    std::vector<BackgroundSource> backgrounds;
    std::string manifest_digest;
};

inline nlohmann::json footprint_to_json(const FootprintPolygon& poly) {
    nlohmann::json rings = nlohmann::json::array();
    for (const Ring& ring : poly.rings) {
        nlohmann::json r = nlohmann::json::array();
        for (const WorldPoint& v : ring) r.push_back({v.x, v.y});
        rings.push_back(r);
    }
    return {{"rings", rings}};
}

inline FootprintPolygon footprint_from_json(const nlohmann::json& j, const std::string& id,
                                            const std::string& cls) {
    FootprintPolygon poly;
    poly.object_id = id;
    poly.class_label = cls;
    for (const auto& ring_json : j.at("rings")) {
        Ring ring;
        for (const auto& pt : ring_json)
            ring.push_back({pt[0].get<double>(), pt[1].get<double>()});
        poly.rings.push_back(std::move(ring));
    }
    return poly;
}

/// Deterministic fingerprint over the bank's actual content (pixels and
/// geometry, not encoded bytes).
inline std::string compute_bank_digest(const std::vector<ObjectPatch>& objects,
                                       const std::vector<BackgroundSource>& backgrounds) {
    Fnv1a hash;
    for (const ObjectPatch& obj : objects) {
        hash.update(obj.object_id);
        const int meta[6] = {obj.bbox.col_off, obj.bbox.row_off, obj.bbox.width,
                             obj.bbox.height, obj.image.width, obj.image.height};
        hash.update(meta, sizeof(meta));
        hash.update(obj.image.data.data(), obj.image.data.size());
        hash.update(obj.mask.data.data(), obj.mask.data.size());
        for (const Ring& ring : obj.footprint.rings)
            hash.update(ring.data(), ring.size() * sizeof(WorldPoint));
    }
    for (const BackgroundSource& src : backgrounds) {
        hash.update(to_string(src.kind));
        const int meta[2] = {src.raster.width, src.raster.height};
        hash.update(meta, sizeof(meta));
        hash.update(src.raster.data.data(), src.raster.data.size());
        hash.update(src.exclusion_mask.data.data(), src.exclusion_mask.data.size());
    }
    return "fnv1a64:" + hash.hex();
}

inline BankIndex build_bank_index(std::vector<ObjectPatch> objects,
                                  std::vector<BackgroundSource> backgrounds) {
    std::sort(objects.begin(), objects.end(),
              [](const ObjectPatch& a, const ObjectPatch& b) {
                  return a.object_id < b.object_id;
              });
    BankIndex bank;
    bank.manifest_digest = compute_bank_digest(objects, backgrounds);
    bank.objects = std::move(objects);
    bank.backgrounds = std::move(backgrounds);
    for (std::size_t i = 0; i < bank.objects.size(); ++i) {
        if (!bank.object_index.emplace(bank.objects[i].object_id, i).second)
            raise(ErrorCode::InvalidArgument,
                  "duplicate object id '" + bank.objects[i].object_id + "'");
    }
    return bank;
}

struct BackgroundRef {
    std::string kind;             // "labeled_scene" | "extra_unlabeled"
    std::string image;            // path relative to the manifest
    std::string footprints;       // only for labeled scenes
};

/// Write patches as `<id>.png` / `<id>_mask.png` next to the manifest and
/// emit the manifest JSON listing objects, backgrounds, and the digest.
inline void save_bank_manifest(const std::filesystem::path& manifest_path,
                               const std::vector<ObjectPatch>& objects,
                               const std::vector<BackgroundRef>& backgrounds,
                               const std::string& source_label,
                               const std::string& digest,
                               const nlohmann::json& config_echo = {}) {
    const auto dir = manifest_path.parent_path();
    nlohmann::json objs = nlohmann::json::array();
    for (const ObjectPatch& obj : objects) {
        const std::string image_name = obj.object_id + ".png";
        const std::string mask_name = obj.object_id + "_mask.png";
        save_png(dir / image_name, obj.image);
        save_png(dir / mask_name, mask_to_image(obj.mask));
        objs.push_back({{"id", obj.object_id},
                        {"class", obj.footprint.class_label},
                        {"bbox",
                         {{"col", obj.bbox.col_off},
                          {"row", obj.bbox.row_off},
                          {"width", obj.bbox.width},
                          {"height", obj.bbox.height}}},
                        {"source", source_label},
                        {"image", image_name},
                        {"mask", mask_name},
                        {"footprint", footprint_to_json(obj.footprint)}});
    }
    nlohmann::json bgs = nlohmann::json::array();
    for (const BackgroundRef& ref : backgrounds) {
        nlohmann::json b = {{"kind", ref.kind}, {"image", ref.image}};
        if (!ref.footprints.empty()) b["footprints"] = ref.footprints;
        bgs.push_back(b);
    }
    nlohmann::json manifest = {{"format", "oba-bank-v1"},
                               {"objects", objs},
                               {"backgrounds", bgs},
                               {"digest", digest}};
    if (!config_echo.is_null() && !config_echo.empty()) manifest["config"] = config_echo;
    std::ofstream out(manifest_path);
    if (!out) raise(ErrorCode::IoError, "cannot write " + manifest_path.string());
    out << manifest.dump(2) << "\n";
}

/// Load a bank manifest plus everything it references. Relative paths
/// resolve against the manifest's directory.
inline BankIndex load_bank(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) raise(ErrorCode::IoError, "cannot open " + manifest_path.string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::ParseError, std::string("bad bank manifest: ") + e.what());
    }
    const auto dir = manifest_path.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : dir / fp;
    };

    std::vector<ObjectPatch> objects;
    for (const auto& entry : manifest.value("objects", nlohmann::json::array())) {
        ObjectPatch obj;
        obj.object_id = entry.at("id").get<std::string>();
        obj.image = load_raster(resolve(entry.at("image").get<std::string>()));
        obj.mask = image_to_mask(load_raster(resolve(entry.at("mask").get<std::string>())));
        if (!obj.mask.same_shape(GeoRaster(obj.image.width, obj.image.height, 1)))
            raise(ErrorCode::SizeMismatch,
                  "patch mask size mismatch for '" + obj.object_id + "'");
        const auto& bbox = entry.at("bbox");
        obj.bbox = {bbox.at("col").get<int>(), bbox.at("row").get<int>(),
                    bbox.at("width").get<int>(), bbox.at("height").get<int>()};
        obj.footprint = footprint_from_json(entry.at("footprint"), obj.object_id,
                                            entry.value("class", ""));
        objects.push_back(std::move(obj));
    }

    std::vector<std::pair<GeoRaster, std::vector<FootprintPolygon>>> labeled;
    std::vector<GeoRaster> extra;
    for (const auto& entry : manifest.value("backgrounds", nlohmann::json::array())) {
        const std::string kind = entry.at("kind").get<std::string>();
        GeoRaster scene = load_raster(resolve(entry.at("image").get<std::string>()));
        if (kind == "labeled_scene") {
            auto footprints = load_footprints(resolve(entry.at("footprints").get<std::string>()));
            labeled.emplace_back(std::move(scene), std::move(footprints));
        } else if (kind == "extra_unlabeled") {
            extra.push_back(std::move(scene));
        } else {
            raise(ErrorCode::ParseError, "unknown background kind '" + kind + "'");
        }
    }
    return build_bank_index(std::move(objects), build_background_pool(labeled, extra));
}

}  // namespace oba
