// Shared helpers for the test suites: independent brute-force oracles,
// deterministic fixture generators, and a scratch-directory guard.
#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "oba/oba.hpp"

namespace testutil {

// Brute-force even-odd point-in-polygon test at one pixel center. Written
// independently of the scanline rasterizer: per-point edge loop instead of
// row-wise crossing lists. Shares only the boundary convention (half-open
// vertical spans, strict right-side crossings).
inline bool point_in_polygon_pixel(const oba::FootprintPolygon& poly,
                                   const oba::AffineGeoTransform& transform, double cx,
                                   double cy) {
    bool inside = false;
    for (const oba::Ring& ring : poly.rings) {
        std::vector<std::pair<double, double>> px;
        px.reserve(ring.size());
        for (const oba::WorldPoint& v : ring)
            px.push_back(oba::world_to_pixel(transform, v.x, v.y));
        for (std::size_t i = 0; i + 1 < px.size(); ++i) {
            double x0 = px[i].first, y0 = px[i].second;
            double x1 = px[i + 1].first, y1 = px[i + 1].second;
            if (y0 == y1) continue;
            if (y0 > y1) {
                std::swap(x0, x1);
                std::swap(y0, y1);
            }
            if (y0 <= cy && cy < y1) {
                const double xc = x0 + (cy - y0) * (x1 - x0) / (y1 - y0);
                if (xc > cx) inside = !inside;
            }
        }
    }
    return inside;
}

inline oba::GeoRaster rasterize_oracle(const oba::FootprintPolygon& poly,
                                       const oba::AffineGeoTransform& transform, int width,
                                       int height) {
    oba::GeoRaster mask(width, height, 1);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            if (point_in_polygon_pixel(poly, transform, c, r)) mask.at(c, r) = 1;
    return mask;
}

// Star-shaped random polygon: radii at sorted angles around a center, which
// is simple by construction.
inline oba::FootprintPolygon random_polygon(oba::Rng& rng, double center_x, double center_y,
                                            double max_radius, int max_vertices = 12) {
    const int n = static_cast<int>(rng.uniform_int(3, max_vertices));
    std::vector<double> angles(static_cast<std::size_t>(n));
    for (double& a : angles) a = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    std::sort(angles.begin(), angles.end());
    oba::Ring ring;
    for (double a : angles) {
        const double r = rng.uniform(0.2 * max_radius, max_radius);
        ring.push_back({center_x + r * std::cos(a), center_y + r * std::sin(a)});
    }
    ring.push_back(ring.front());
    return {"poly", {ring}, ""};
}

inline oba::Ring rect_ring(double x0, double y0, double x1, double y1) {
    return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
}

// Direct dense convolution with reflect-101 borders, plain quadruple loop.
inline oba::GeoRaster convolve_oracle(const oba::GeoRaster& img,
                                      const std::vector<double>& kernel, int k) {
    auto reflect = [](int p, int n) {
        if (n == 1) return 0;
        while (p < 0 || p >= n) {
            if (p < 0) p = -p;
            if (p >= n) p = 2 * n - 2 - p;
        }
        return p;
    };
    const int half = k / 2;
    oba::GeoRaster out(img.width, img.height, img.channels);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            for (int i = 0; i < img.channels; ++i) {
                double acc = 0.0;
                for (int j = 0; j < k; ++j)
                    for (int m = 0; m < k; ++m)
                        acc += kernel[static_cast<std::size_t>(j) * k + m] *
                               img.at(reflect(c + m - half, img.width),
                                      reflect(r + j - half, img.height), i);
                out.at(c, r, i) = oba::clamp_u8(acc);
            }
    return out;
}

inline oba::GeoRaster constant_raster(int w, int h, int ch, std::uint8_t value) {
    return oba::GeoRaster(w, h, ch, value);
}

inline oba::GeoRaster noise_raster(int w, int h, int ch, oba::Rng& rng) {
    oba::GeoRaster img(w, h, ch);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

inline oba::GeoRaster random_mask(int w, int h, double density, oba::Rng& rng) {
    oba::GeoRaster mask(w, h, 1);
    for (auto& v : mask.data) v = rng.bernoulli(density) ? 1 : 0;
    return mask;
}

class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("oba_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

template <class Fn>
inline bool raises(Fn&& fn, oba::ErrorCode code) {
    try {
        fn();
    } catch (const oba::Error& e) {
        return e.code() == code;
    } catch (...) {
        return false;
    }
    return false;
}

// A tiny object bank for compositor tests: solid-color square objects with
// full masks and rectangular footprints.
inline oba::BankIndex tiny_bank(int n_objects, int obj_size, std::uint8_t base_value,
                                std::vector<oba::BackgroundSource> backgrounds) {
    std::vector<oba::ObjectPatch> patches;
    for (int i = 0; i < n_objects; ++i) {
        oba::ObjectPatch patch;
        patch.object_id = "obj" + std::to_string(i);
        patch.image = oba::GeoRaster(obj_size, obj_size, 3,
                                     static_cast<std::uint8_t>(base_value + i));
        patch.mask = oba::GeoRaster(obj_size, obj_size, 1, 1);
        patch.footprint = {
            patch.object_id,
            {rect_ring(0, 0, obj_size, obj_size)},
            ""};
        patch.bbox = {0, 0, obj_size, obj_size};
        patches.push_back(std::move(patch));
    }
    return oba::build_bank_index(std::move(patches), std::move(backgrounds));
}

}  // namespace testutil
