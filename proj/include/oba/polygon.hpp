#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "oba/errors.hpp"
#include "oba/raster.hpp"

namespace oba {

struct WorldPoint {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const WorldPoint&) const = default;
};

/// Closed vertex loop in world coordinates; first vertex repeated at the end.
using Ring = std::vector<WorldPoint>;

/// Vector outline of one target object. Ring 0 is the exterior, any further
/// rings are holes. Interior membership uses the even-odd rule throughout.
struct FootprintPolygon {
    std::string object_id;
    std::vector<Ring> rings;
    std::string class_label;
};

namespace detail {

inline int distinct_vertex_count(const Ring& ring) {
    // The closing duplicate is excluded; consecutive duplicates collapse.
    if (ring.size() < 2) return static_cast<int>(ring.size());
    int n = 0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        if (!(ring[i] == ring[i + 1])) ++n;
    }
    return n;
}

inline double orient(const WorldPoint& a, const WorldPoint& b, const WorldPoint& c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

inline bool on_segment(const WorldPoint& a, const WorldPoint& b, const WorldPoint& p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

inline bool segments_intersect(const WorldPoint& a, const WorldPoint& b,
                               const WorldPoint& c, const WorldPoint& d) {
    const double o1 = orient(a, b, c);
    const double o2 = orient(a, b, d);
    const double o3 = orient(c, d, a);
    const double o4 = orient(c, d, b);
    if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 &&
        o3 != 0 && o4 != 0)
        return true;
    if (o1 == 0 && on_segment(a, b, c)) return true;
    if (o2 == 0 && on_segment(a, b, d)) return true;
    if (o3 == 0 && on_segment(c, d, a)) return true;
    if (o4 == 0 && on_segment(c, d, b)) return true;
    return false;
}

}  // namespace detail

/// Reject open rings, rings with fewer than three distinct vertices, and
/// self-intersecting exteriors.
inline void validate_footprint(const FootprintPolygon& poly) {
    if (poly.rings.empty())
        raise(ErrorCode::InvalidGeometry, "footprint '" + poly.object_id + "' has no rings");
    for (const Ring& ring : poly.rings) {
        if (ring.size() < 4 || !(ring.front() == ring.back()))
            raise(ErrorCode::InvalidGeometry,
                  "footprint '" + poly.object_id + "' has an open ring");
        if (detail::distinct_vertex_count(ring) < 3)
            raise(ErrorCode::InvalidGeometry,
                  "footprint '" + poly.object_id + "' ring has fewer than 3 distinct vertices");
    }
    // Exterior self-intersection: test every non-adjacent edge pair.
    const Ring& ext = poly.rings.front();
    const std::size_t n = ext.size() - 1;  // edge i = (v[i], v[i+1])
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) continue;
            if (detail::segments_intersect(ext[i], ext[i + 1], ext[j], ext[j + 1]))
                raise(ErrorCode::InvalidGeometry,
                      "footprint '" + poly.object_id + "' exterior ring self-intersects");
        }
    }
}

namespace detail {

/// Scanline edge in pixel coordinates, oriented so y0 <= y1. Canonical
/// orientation keeps crossing arithmetic identical under ring reversal.
struct PixelEdge {
    double x0, y0, x1, y1;
};

inline std::vector<PixelEdge> project_edges(const FootprintPolygon& poly,
                                            const AffineGeoTransform& transform) {
    std::vector<PixelEdge> edges;
    for (const Ring& ring : poly.rings) {
        std::vector<std::pair<double, double>> px;
        px.reserve(ring.size());
        for (const WorldPoint& v : ring) px.push_back(world_to_pixel(transform, v.x, v.y));
        for (std::size_t i = 0; i + 1 < px.size(); ++i) {
            auto [xa, ya] = px[i];
            auto [xb, yb] = px[i + 1];
            if (ya == yb) continue;  // horizontal edges never cross a scanline
            if (ya <= yb)
                edges.push_back({xa, ya, xb, yb});
            else
                edges.push_back({xb, yb, xa, ya});
        }
    }
    return edges;
}

}  // namespace detail

/// Rasterize a footprint over a window of the pixel grid defined by
/// `transform`. A pixel is set iff its center (integer pixel index, per the
/// world-file convention) is inside the polygon under the even-odd rule;
/// interior rings punch holes. The window lets callers rasterize a crop of
/// a large scene with bit-identical results to cropping the full mask.
inline GeoRaster rasterize_polygon(const FootprintPolygon& poly,
                                   const AffineGeoTransform& transform,
                                   const PixelWindow& window) {
    if (!transform.invertible())
        raise(ErrorCode::SingularTransform, "target geometry transform is singular");
    if (window.width <= 0 || window.height <= 0)
        raise(ErrorCode::InvalidArgument, "rasterization window must be non-empty");

    GeoRaster mask(window.width, window.height, 1);
    mask.transform = transform.translated(window.col_off, window.row_off);

    const auto edges = detail::project_edges(poly, transform);
    if (edges.empty()) return mask;

    std::vector<double> crossings;
    for (int r = 0; r < window.height; ++r) {
        const double cy = static_cast<double>(window.row_off + r);
        crossings.clear();
        for (const auto& e : edges) {
            if (e.y0 <= cy && cy < e.y1)
                crossings.push_back(e.x0 + (cy - e.y0) * (e.x1 - e.x0) / (e.y1 - e.y0));
        }
        if (crossings.empty()) continue;
        std::sort(crossings.begin(), crossings.end());
        for (int c = 0; c < window.width; ++c) {
            const double cx = static_cast<double>(window.col_off + c);
            // Inside iff an odd number of crossings lie strictly to the right.
            const auto first_right =
                std::upper_bound(crossings.begin(), crossings.end(), cx);
            if ((crossings.end() - first_right) % 2 != 0) mask.at(c, r) = 1;
        }
    }
    return mask;
}

inline GeoRaster rasterize_polygon(const FootprintPolygon& poly,
                                   const AffineGeoTransform& transform, int width,
                                   int height) {
    return rasterize_polygon(poly, transform, PixelWindow{0, 0, width, height});
}

/// Tight pixel-index bounding box of the footprint on the grid defined by
/// `transform`, before any clamping. Empty optional when the projection has
/// no pixel centers (degenerate span).
inline std::optional<PixelWindow> footprint_pixel_bbox(const FootprintPolygon& poly,
                                                       const AffineGeoTransform& transform) {
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();
    for (const Ring& ring : poly.rings) {
        for (const WorldPoint& v : ring) {
            auto [px, py] = world_to_pixel(transform, v.x, v.y);
            min_x = std::min(min_x, px);
            max_x = std::max(max_x, px);
            min_y = std::min(min_y, py);
            max_y = std::max(max_y, py);
        }
    }
    if (!(min_x <= max_x) || !(min_y <= max_y)) return std::nullopt;
    // Pixel centers are at integer indices: the covered index range is
    // [ceil(min), floor(max)].
    const int c0 = static_cast<int>(std::ceil(min_x));
    const int c1 = static_cast<int>(std::floor(max_x));
    const int r0 = static_cast<int>(std::ceil(min_y));
    const int r1 = static_cast<int>(std::floor(max_y));
    if (c1 < c0 || r1 < r0) return std::nullopt;
    return PixelWindow{c0, r0, c1 - c0 + 1, r1 - r0 + 1};
}

}  // namespace oba
