#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oba/errors.hpp"
#include "oba/polygon.hpp"

namespace oba {

namespace geojson_detail {

using nlohmann::json;

inline Ring parse_ring(const json& coords, const std::string& id) {
    if (!coords.is_array())
        raise(ErrorCode::ParseError, "ring of feature '" + id + "' is not an array");
    Ring ring;
    ring.reserve(coords.size());
    for (const auto& pt : coords) {
        if (!pt.is_array() || pt.size() < 2 || !pt[0].is_number() || !pt[1].is_number())
            raise(ErrorCode::ParseError, "bad coordinate in feature '" + id + "'");
        ring.push_back({pt[0].get<double>(), pt[1].get<double>()});
    }
    return ring;
}

inline std::vector<Ring> parse_polygon_rings(const json& coords, const std::string& id) {
    if (!coords.is_array() || coords.empty())
        raise(ErrorCode::ParseError, "polygon of feature '" + id + "' has no rings");
    std::vector<Ring> rings;
    for (const auto& ring : coords) rings.push_back(parse_ring(ring, id));
    return rings;
}

inline std::string feature_id(const json& feature, std::size_t index) {
    if (feature.contains("properties") && feature["properties"].is_object()) {
        const auto& props = feature["properties"];
        if (props.contains("id")) {
            const auto& id = props["id"];
            if (id.is_string()) return id.get<std::string>();
            if (id.is_number_integer()) return std::to_string(id.get<long long>());
            if (id.is_number()) return std::to_string(id.get<double>());
        }
    }
    return std::to_string(index);
}

inline std::string feature_class(const json& feature) {
    if (feature.contains("properties") && feature["properties"].is_object()) {
        const auto& props = feature["properties"];
        if (props.contains("class") && props["class"].is_string())
            return props["class"].get<std::string>();
    }
    return "";
}

}  // namespace geojson_detail

/// Parse a GeoJSON FeatureCollection of Polygon / MultiPolygon features.
/// Feature IDs come from the `id` property (sequential index as fallback);
/// MultiPolygon parts get `_0`, `_1`, ... suffixes. Every footprint is
/// validated (closed rings, >= 3 distinct vertices, simple exterior).
inline std::vector<FootprintPolygon> parse_footprints(const std::string& text) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, std::string("invalid GeoJSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
        !doc.contains("features") || !doc["features"].is_array())
        raise(ErrorCode::ParseError, "expected a GeoJSON FeatureCollection");

    std::vector<FootprintPolygon> out;
    std::size_t index = 0;
    for (const auto& feature : doc["features"]) {
        const std::string id = geojson_detail::feature_id(feature, index);
        const std::string cls = geojson_detail::feature_class(feature);
        ++index;
        if (!feature.is_object() || !feature.contains("geometry") ||
            !feature["geometry"].is_object())
            raise(ErrorCode::ParseError, "feature '" + id + "' has no geometry");
        const auto& geom = feature["geometry"];
        const std::string type = geom.value("type", "");
        if (!geom.contains("coordinates"))
            raise(ErrorCode::ParseError, "feature '" + id + "' has no coordinates");
        const auto& coords = geom["coordinates"];

        if (type == "Polygon") {
            FootprintPolygon poly{id, geojson_detail::parse_polygon_rings(coords, id), cls};
            validate_footprint(poly);
            out.push_back(std::move(poly));
        } else if (type == "MultiPolygon") {
            if (!coords.is_array())
                raise(ErrorCode::ParseError, "bad MultiPolygon in feature '" + id + "'");
            std::size_t part = 0;
            for (const auto& poly_coords : coords) {
                FootprintPolygon poly{id + "_" + std::to_string(part),
                                      geojson_detail::parse_polygon_rings(poly_coords, id),
                                      cls};
                validate_footprint(poly);
                out.push_back(std::move(poly));
                ++part;
            }
        } else {
            raise(ErrorCode::ParseError,
                  "feature '" + id + "' has unsupported geometry type '" + type + "'");
        }
    }
    return out;
}

inline std::vector<FootprintPolygon> load_footprints(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return parse_footprints(text);
}

}  // namespace oba
