#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oba/errors.hpp"

namespace oba {

/// Six-coefficient affine map from pixel indices to world coordinates:
///   x = a*col + b*row + c
///   y = d*col + e*row + f
/// Follows the world-file convention: (c, f) is the world position of the
/// center of the upper-left pixel, so pixel centers sit at integer indices.
struct AffineGeoTransform {
    double a = 1.0, b = 0.0, c = 0.0;
    double d = 0.0, e = 1.0, f = 0.0;

    double det() const { return a * e - b * d; }
    bool invertible() const { return std::abs(det()) > 1e-15; }

    std::pair<double, double> pixel_to_world(double col, double row) const {
        return {a * col + b * row + c, d * col + e * row + f};
    }

    /// Shifted transform for a window whose pixel (0,0) is the parent's
    /// (col_off, row_off).
    AffineGeoTransform translated(int col_off, int row_off) const {
        AffineGeoTransform t = *this;
        t.c = a * col_off + b * row_off + c;
        t.f = d * col_off + e * row_off + f;
        return t;
    }

    bool operator==(const AffineGeoTransform&) const = default;
};

inline std::pair<double, double> world_to_pixel(const AffineGeoTransform& t, double x,
                                                double y) {
    const double det = t.det();
    if (!(std::abs(det) > 1e-15))
        raise(ErrorCode::SingularTransform, "affine transform is not invertible");
    const double dx = x - t.c;
    const double dy = y - t.f;
    return {(t.e * dx - t.b * dy) / det, (t.a * dy - t.d * dx) / det};
}

/// Rectangular pixel region, offsets in parent coordinates.
struct PixelWindow {
    int col_off = 0;
    int row_off = 0;
    int width = 0;
    int height = 0;

    bool operator==(const PixelWindow&) const = default;
};

/// In-memory 8-bit raster, row-major with interleaved channels, plus an
/// optional georeference. Immutable by convention once built; all pipeline
/// operations return fresh rasters.
struct GeoRaster {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> data;
    std::optional<AffineGeoTransform> transform;
    std::optional<std::string> crs_label;

    GeoRaster() = default;

    GeoRaster(int w, int h, int ch, std::uint8_t fill = 0)
        : width(w), height(h), channels(ch) {
        if (w <= 0 || h <= 0 || ch < 1 || ch > 4)
            raise(ErrorCode::InvalidArgument, "raster dimensions out of range");
        data.assign(static_cast<std::size_t>(w) * h * ch, fill);
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    std::uint8_t& at(int col, int row, int ch = 0) {
        return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }
    std::uint8_t at(int col, int row, int ch = 0) const {
        return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }

    bool in_bounds(int col, int row) const {
        return col >= 0 && col < width && row >= 0 && row < height;
    }

    bool same_shape(const GeoRaster& other) const {
        return width == other.width && height == other.height &&
               channels == other.channels;
    }

    /// Pixel-identical comparison (georeference included).
    bool operator==(const GeoRaster&) const = default;
};

inline bool window_inside(const PixelWindow& w, int parent_width, int parent_height) {
    return w.width > 0 && w.height > 0 && w.col_off >= 0 && w.row_off >= 0 &&
           w.col_off + w.width <= parent_width && w.row_off + w.height <= parent_height;
}

/// Crop a window out of a raster. The georeference is shifted so the crop
/// stays anchored to the same world coordinates.
inline GeoRaster read_window(const GeoRaster& r, const PixelWindow& w) {
    if (!window_inside(w, r.width, r.height))
        raise(ErrorCode::WindowOutOfBounds, "window " + std::to_string(w.col_off) + "," +
                                                std::to_string(w.row_off) + " " +
                                                std::to_string(w.width) + "x" +
                                                std::to_string(w.height) +
                                                " exceeds raster " +
                                                std::to_string(r.width) + "x" +
                                                std::to_string(r.height));
    GeoRaster out(w.width, w.height, r.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(w.width) * r.channels;
    for (int row = 0; row < w.height; ++row) {
        const std::uint8_t* src =
            &r.data[(static_cast<std::size_t>(w.row_off + row) * r.width + w.col_off) *
                    r.channels];
        std::uint8_t* dst = &out.data[static_cast<std::size_t>(row) * row_bytes];
        std::copy(src, src + row_bytes, dst);
    }
    if (r.transform) out.transform = r.transform->translated(w.col_off, w.row_off);
    out.crs_label = r.crs_label;
    return out;
}

inline std::uint8_t clamp_u8(double v) {
    if (v <= 0.0) return 0;
    if (v >= 255.0) return 255;
    return static_cast<std::uint8_t>(std::lround(v));
}

/// Count of nonzero pixels in a single-channel mask.
inline std::size_t mask_count(const GeoRaster& mask) {
    std::size_t n = 0;
    for (std::uint8_t v : mask.data) n += (v != 0);
    return n;
}

}  // namespace oba
