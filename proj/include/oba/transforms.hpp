#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "oba/errors.hpp"
#include "oba/raster.hpp"
#include "oba/rng.hpp"

namespace oba {

// ---------------------------------------------------------------------------
// Geometric transforms. These apply identically to image and mask.
// ---------------------------------------------------------------------------

/// Rotate by 90*k degrees. k=1 maps pixel (c,r) of a WxH raster to
/// (H-1-r, c) of the HxW result.
inline GeoRaster rotate90(const GeoRaster& img, int k) {
    k = ((k % 4) + 4) % 4;
    if (k == 0) return img;
    const int w = img.width, h = img.height, ch = img.channels;
    GeoRaster out(k == 2 ? w : h, k == 2 ? h : w, ch);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            int nc = 0, nr = 0;
            switch (k) {
                case 1: nc = h - 1 - r; nr = c; break;
                case 2: nc = w - 1 - c; nr = h - 1 - r; break;
                case 3: nc = r; nr = w - 1 - c; break;
            }
            for (int i = 0; i < ch; ++i) out.at(nc, nr, i) = img.at(c, r, i);
        }
    }
    return out;
}

enum class FlipMode { horizontal, vertical, both };

inline GeoRaster flip(const GeoRaster& img, FlipMode mode) {
    GeoRaster out(img.width, img.height, img.channels);
    const bool fh = mode != FlipMode::vertical;
    const bool fv = mode != FlipMode::horizontal;
    for (int r = 0; r < img.height; ++r) {
        const int sr = fv ? img.height - 1 - r : r;
        for (int c = 0; c < img.width; ++c) {
            const int sc = fh ? img.width - 1 - c : c;
            for (int i = 0; i < img.channels; ++i) out.at(c, r, i) = img.at(sc, sr, i);
        }
    }
    return out;
}

/// Barrel distortion: the source of destination pixel p is
/// center + (p - center) * (1 + k * r^2), with r the distance to the center
/// normalized by the half-diagonal. Bilinear resampling for images,
/// nearest-neighbor for masks (keeps them binary); samples outside the
/// source clamp to the edge.
inline GeoRaster barrel_distort(const GeoRaster& img, double k, bool nearest) {
    const int w = img.width, h = img.height, ch = img.channels;
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;
    const double half_diag = std::sqrt(cx * cx + cy * cy);
    if (half_diag == 0.0 || k == 0.0) return img;

    GeoRaster out(w, h, ch);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double dx = c - cx;
            const double dy = r - cy;
            const double rn = std::sqrt(dx * dx + dy * dy) / half_diag;
            const double factor = 1.0 + k * rn * rn;
            const double sx = cx + dx * factor;
            const double sy = cy + dy * factor;
            if (nearest) {
                const int ic = std::clamp(static_cast<int>(std::lround(sx)), 0, w - 1);
                const int ir = std::clamp(static_cast<int>(std::lround(sy)), 0, h - 1);
                for (int i = 0; i < ch; ++i) out.at(c, r, i) = img.at(ic, ir, i);
            } else {
                const double fx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
                const double fy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
                const int x0 = static_cast<int>(std::floor(fx));
                const int y0 = static_cast<int>(std::floor(fy));
                const int x1 = std::min(x0 + 1, w - 1);
                const int y1 = std::min(y0 + 1, h - 1);
                const double tx = fx - x0;
                const double ty = fy - y0;
                for (int i = 0; i < ch; ++i) {
                    const double v00 = img.at(x0, y0, i), v10 = img.at(x1, y0, i);
                    const double v01 = img.at(x0, y1, i), v11 = img.at(x1, y1, i);
                    const double v = (1 - ty) * ((1 - tx) * v00 + tx * v10) +
                                     ty * ((1 - tx) * v01 + tx * v11);
                    out.at(c, r, i) = clamp_u8(v);
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Photometric transforms. These leave masks untouched.
// ---------------------------------------------------------------------------

inline GeoRaster add_gaussian_noise(const GeoRaster& img, double sigma, Rng& rng) {
    GeoRaster out = img;
    if (sigma <= 0.0) return out;
    for (auto& v : out.data) v = clamp_u8(v + rng.normal(0.0, sigma));
    return out;
}

namespace color_detail {

struct Hsv {
    double h;  // degrees [0, 360)
    double s;  // [0, 1]
    double v;  // [0, 255]
};

inline Hsv rgb_to_hsv(double r, double g, double b) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    double h = 0.0;
    if (d > 0.0) {
        if (mx == r)
            h = 60.0 * std::fmod((g - b) / d, 6.0);
        else if (mx == g)
            h = 60.0 * ((b - r) / d + 2.0);
        else
            h = 60.0 * ((r - g) / d + 4.0);
        if (h < 0.0) h += 360.0;
    }
    return {h, mx > 0.0 ? d / mx : 0.0, mx};
}

inline void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b) {
    const double c = hsv.v * hsv.s;
    const double hp = hsv.h / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r1 = 0, g1 = 0, b1 = 0;
    if (hp < 1)       { r1 = c; g1 = x; }
    else if (hp < 2)  { r1 = x; g1 = c; }
    else if (hp < 3)  { g1 = c; b1 = x; }
    else if (hp < 4)  { g1 = x; b1 = c; }
    else if (hp < 5)  { r1 = x; b1 = c; }
    else              { r1 = c; b1 = x; }
    const double m = hsv.v - c;
    r = r1 + m;
    g = g1 + m;
    b = b1 + m;
}

inline double luma(double r, double g, double b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

}  // namespace color_detail

/// Shift hue (degrees, wraps), saturation and value (8-bit units, clamp).
inline GeoRaster hsv_shift_by(const GeoRaster& img, double dh, double ds, double dv) {
    if (img.channels != 3)
        raise(ErrorCode::InvalidArgument, "hsv_shift expects a 3-channel image");
    GeoRaster out = img;
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        auto hsv = color_detail::rgb_to_hsv(img.data[3 * p], img.data[3 * p + 1],
                                            img.data[3 * p + 2]);
        hsv.h = std::fmod(std::fmod(hsv.h + dh, 360.0) + 360.0, 360.0);
        hsv.s = std::clamp(hsv.s + ds / 255.0, 0.0, 1.0);
        hsv.v = std::clamp(hsv.v + dv, 0.0, 255.0);
        double r, g, b;
        color_detail::hsv_to_rgb(hsv, r, g, b);
        out.data[3 * p] = clamp_u8(r);
        out.data[3 * p + 1] = clamp_u8(g);
        out.data[3 * p + 2] = clamp_u8(b);
    }
    return out;
}

inline GeoRaster hsv_shift(const GeoRaster& img, double hue_limit, double sat_limit,
                           double val_limit, Rng& rng) {
    const double dh = rng.uniform(-hue_limit, hue_limit);
    const double ds = rng.uniform(-sat_limit, sat_limit);
    const double dv = rng.uniform(-val_limit, val_limit);
    return hsv_shift_by(img, dh, ds, dv);
}

namespace clahe_detail {

/// Clip a 256-bin histogram at clip_limit times the uniform bin height and
/// redistribute the excess evenly, iterating until no bin overflows (the
/// redistribution itself can push bins back over the limit). A fully
/// saturated histogram degenerates to uniform.
inline void clip_histogram(std::array<double, 256>& hist, double total,
                           double clip_limit) {
    const double limit = std::max(1.0, clip_limit * total / 256.0);
    for (int iter = 0; iter < 64; ++iter) {
        double excess = 0.0;
        for (double& h : hist) {
            if (h > limit) {
                excess += h - limit;
                h = limit;
            }
        }
        if (excess <= 1e-9) return;
        const double per_bin = excess / 256.0;
        bool room = false;
        for (double& h : hist) {
            h += per_bin;
            if (h < limit) room = true;
        }
        if (!room) return;  // every bin at/above the limit: uniform already
    }
}

/// Equalization lookup from a (possibly clipped) histogram. Flat histograms
/// map to the identity.
inline std::array<std::uint8_t, 256> equalize_lut(const std::array<double, 256>& hist) {
    std::array<std::uint8_t, 256> lut{};
    double total = 0.0;
    for (double h : hist) total += h;
    if (total <= 0.0) {
        for (int i = 0; i < 256; ++i) lut[i] = static_cast<std::uint8_t>(i);
        return lut;
    }
    double cdf_min = 0.0;
    double cdf = 0.0;
    bool found = false;
    for (int i = 0; i < 256; ++i) {
        cdf += hist[i];
        if (!found && hist[i] > 0.0) {
            cdf_min = cdf;
            found = true;
        }
    }
    const double denom = total - cdf_min;
    cdf = 0.0;
    for (int i = 0; i < 256; ++i) {
        cdf += hist[i];
        if (denom <= 0.0) {
            lut[i] = static_cast<std::uint8_t>(i);
        } else {
            const double v = (cdf - cdf_min) / denom * 255.0;
            lut[i] = clamp_u8(v);
        }
    }
    return lut;
}

inline std::vector<int> tile_bounds(int size, int tiles) {
    std::vector<int> bounds(static_cast<std::size_t>(tiles) + 1);
    for (int t = 0; t <= tiles; ++t)
        bounds[static_cast<std::size_t>(t)] =
            static_cast<int>(static_cast<std::int64_t>(t) * size / tiles);
    return bounds;
}

}  // namespace clahe_detail

/// Contrast-limited adaptive histogram equalization on the luma channel.
/// The image is split into a grid of tiles; each tile gets a clipped
/// equalization lookup; per-pixel values interpolate bilinearly between the
/// four nearest tile lookups. The luma delta is added back to every channel,
/// preserving chroma offsets.
inline GeoRaster clahe(const GeoRaster& img, double clip_limit,
                       std::pair<int, int> tile_grid) {
    using namespace clahe_detail;
    const int gx = std::max(1, std::min(tile_grid.first, img.width));
    const int gy = std::max(1, std::min(tile_grid.second, img.height));
    const int w = img.width, h = img.height, ch = img.channels;
    if (ch != 1 && ch != 3)
        raise(ErrorCode::InvalidArgument, "clahe expects a 1- or 3-channel image");

    // Quantized luma plane.
    std::vector<std::uint8_t> luma(img.pixel_count());
    if (ch == 1) {
        luma.assign(img.data.begin(), img.data.end());
    } else {
        for (std::size_t p = 0; p < img.pixel_count(); ++p)
            luma[p] = clamp_u8(color_detail::luma(img.data[3 * p], img.data[3 * p + 1],
                                                  img.data[3 * p + 2]));
    }

    const auto bx = tile_bounds(w, gx);
    const auto by = tile_bounds(h, gy);
    std::vector<std::array<std::uint8_t, 256>> luts(
        static_cast<std::size_t>(gx) * gy);
    std::vector<double> centers_x(gx), centers_y(gy);
    for (int ty = 0; ty < gy; ++ty) {
        for (int tx = 0; tx < gx; ++tx) {
            std::array<double, 256> hist{};
            int n = 0;
            for (int r = by[ty]; r < by[ty + 1]; ++r)
                for (int c = bx[tx]; c < bx[tx + 1]; ++c) {
                    hist[luma[static_cast<std::size_t>(r) * w + c]] += 1.0;
                    ++n;
                }
            clip_histogram(hist, n, clip_limit);
            luts[static_cast<std::size_t>(ty) * gx + tx] = equalize_lut(hist);
        }
    }
    for (int tx = 0; tx < gx; ++tx) centers_x[tx] = (bx[tx] + bx[tx + 1] - 1) / 2.0;
    for (int ty = 0; ty < gy; ++ty) centers_y[ty] = (by[ty] + by[ty + 1] - 1) / 2.0;

    auto neighbors = [](const std::vector<double>& centers, double pos, int& lo,
                        int& hi, double& t) {
        const int n = static_cast<int>(centers.size());
        lo = 0;
        while (lo + 1 < n && centers[lo + 1] <= pos) ++lo;
        hi = std::min(lo + 1, n - 1);
        if (pos <= centers[0]) { lo = hi = 0; }
        t = centers[hi] > centers[lo]
                ? std::clamp((pos - centers[lo]) / (centers[hi] - centers[lo]), 0.0, 1.0)
                : 0.0;
    };

    GeoRaster out = img;
    for (int r = 0; r < h; ++r) {
        int ty0, ty1;
        double wy;
        neighbors(centers_y, r, ty0, ty1, wy);
        for (int c = 0; c < w; ++c) {
            int tx0, tx1;
            double wx;
            neighbors(centers_x, c, tx0, tx1, wx);
            const std::uint8_t v = luma[static_cast<std::size_t>(r) * w + c];
            const double m00 = luts[static_cast<std::size_t>(ty0) * gx + tx0][v];
            const double m10 = luts[static_cast<std::size_t>(ty0) * gx + tx1][v];
            const double m01 = luts[static_cast<std::size_t>(ty1) * gx + tx0][v];
            const double m11 = luts[static_cast<std::size_t>(ty1) * gx + tx1][v];
            const double mapped =
                (1 - wy) * ((1 - wx) * m00 + wx * m10) + wy * ((1 - wx) * m01 + wx * m11);
            const double delta = mapped - v;
            for (int i = 0; i < ch; ++i)
                out.at(c, r, i) = clamp_u8(img.at(c, r, i) + delta);
        }
    }
    return out;
}

inline GeoRaster random_contrast_by(const GeoRaster& img, double alpha) {
    double mean = 0.0;
    if (img.channels == 3) {
        for (std::size_t p = 0; p < img.pixel_count(); ++p)
            mean += color_detail::luma(img.data[3 * p], img.data[3 * p + 1],
                                       img.data[3 * p + 2]);
        mean /= static_cast<double>(img.pixel_count());
    } else {
        for (std::uint8_t v : img.data) mean += v;
        mean /= static_cast<double>(img.data.size());
    }
    GeoRaster out = img;
    const double offset = mean * (1.0 - alpha);
    for (auto& v : out.data) v = clamp_u8(offset + alpha * v);
    return out;
}

inline GeoRaster random_contrast(const GeoRaster& img, double limit, Rng& rng) {
    return random_contrast_by(img, rng.uniform(1.0 - limit, 1.0 + limit));
}

inline GeoRaster random_brightness_by(const GeoRaster& img, double alpha) {
    GeoRaster out = img;
    for (auto& v : out.data) v = clamp_u8(alpha * v);
    return out;
}

inline GeoRaster random_brightness(const GeoRaster& img, double limit, Rng& rng) {
    return random_brightness_by(img, rng.uniform(1.0 - limit, 1.0 + limit));
}

namespace conv_detail {

inline int reflect_index(int p, int n) {
    if (n == 1) return 0;
    while (p < 0 || p >= n) {
        if (p < 0) p = -p;
        if (p >= n) p = 2 * n - 2 - p;
    }
    return p;
}

}  // namespace conv_detail

/// Dense k x k convolution with reflect-101 borders. Raw results are rounded
/// and clamped to [0, 255] per channel.
inline GeoRaster convolve(const GeoRaster& img, const std::vector<double>& kernel, int k) {
    if (k < 1 || k % 2 == 0 || kernel.size() != static_cast<std::size_t>(k) * k)
        raise(ErrorCode::InvalidArgument, "kernel must be odd-sized and square");
    const int half = k / 2;
    GeoRaster out(img.width, img.height, img.channels);
    out.transform = img.transform;
    out.crs_label = img.crs_label;
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            for (int i = 0; i < img.channels; ++i) {
                double acc = 0.0;
                for (int j = 0; j < k; ++j) {
                    const int rr = conv_detail::reflect_index(r + j - half, img.height);
                    for (int m = 0; m < k; ++m) {
                        const int cc = conv_detail::reflect_index(c + m - half, img.width);
                        acc += kernel[static_cast<std::size_t>(j) * k + m] *
                               img.at(cc, rr, i);
                    }
                }
                out.at(c, r, i) = clamp_u8(acc);
            }
        }
    }
    return out;
}

/// Emboss kernel: [[-1-s, -s, 0], [-s, 1, s], [0, s, 1+s]].
inline std::vector<double> emboss_kernel(double strength) {
    return {-1.0 - strength, -strength, 0.0, -strength, 1.0,
            strength,        0.0,       strength, 1.0 + strength};
}

inline GeoRaster emboss_by(const GeoRaster& img, double alpha, double strength) {
    const GeoRaster conv = convolve(img, emboss_kernel(strength), 3);
    GeoRaster out = img;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = clamp_u8((1.0 - alpha) * img.data[i] + alpha * conv.data[i]);
    return out;
}

inline GeoRaster emboss(const GeoRaster& img, std::pair<double, double> alpha_range,
                        std::pair<double, double> strength_range, Rng& rng) {
    const double alpha = rng.uniform(alpha_range.first, alpha_range.second);
    const double strength = rng.uniform(strength_range.first, strength_range.second);
    return emboss_by(img, alpha, strength);
}

/// Normalized 1-pixel-wide line kernel through the center of a k x k grid.
inline std::vector<double> motion_blur_kernel(int k, double angle_deg) {
    if (k < 1 || k % 2 == 0)
        raise(ErrorCode::InvalidArgument, "motion blur kernel size must be odd");
    std::vector<double> kernel(static_cast<std::size_t>(k) * k, 0.0);
    const int half = k / 2;
    const double rad = angle_deg * std::numbers::pi / 180.0;
    const double dx = std::cos(rad);
    const double dy = std::sin(rad);
    if (std::abs(dx) >= std::abs(dy)) {
        for (int i = -half; i <= half; ++i) {
            const int x = half + i;
            const int y = half + static_cast<int>(std::lround(i * dy / dx));
            kernel[static_cast<std::size_t>(std::clamp(y, 0, k - 1)) * k + x] += 1.0;
        }
    } else {
        for (int i = -half; i <= half; ++i) {
            const int y = half + i;
            const int x = half + static_cast<int>(std::lround(i * dx / dy));
            kernel[static_cast<std::size_t>(y) * k + std::clamp(x, 0, k - 1)] += 1.0;
        }
    }
    double total = 0.0;
    for (double v : kernel) total += v;
    for (double& v : kernel) v /= total;
    return kernel;
}

inline GeoRaster motion_blur(const GeoRaster& img, const std::vector<int>& kernel_sizes,
                             Rng& rng) {
    if (kernel_sizes.empty())
        raise(ErrorCode::InvalidArgument, "motion blur needs at least one kernel size");
    const int k = kernel_sizes[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(kernel_sizes.size()) - 1))];
    const double angle = rng.uniform(0.0, 180.0);
    if (k == 1) return img;
    return convolve(img, motion_blur_kernel(k, angle), k);
}

// ---------------------------------------------------------------------------
// Transform suite: togglable, seeded, order pinned geometric-first.
// ---------------------------------------------------------------------------

struct Rotate90Spec {
    double probability = 0.5;
};
struct FlipSpec {
    double probability = 0.5;
};
struct OpticalDistortionSpec {
    double probability = 0.5;
    std::pair<double, double> k_range{-0.05, 0.05};
};
struct GaussianNoiseSpec {
    double probability = 0.5;
    std::pair<double, double> sigma_range{2.55, 12.75};
};
struct HsvShiftSpec {
    double probability = 0.5;
    double hue_limit = 20.0;
    double sat_limit = 30.0;
    double val_limit = 20.0;
};
struct ClaheSpec {
    double probability = 0.5;
    double clip_limit = 4.0;
    std::pair<int, int> tile_grid{8, 8};
};
struct RandomContrastSpec {
    double probability = 0.5;
    double limit = 0.2;
};
struct RandomBrightnessSpec {
    double probability = 0.5;
    double limit = 0.2;
};
struct EmbossSpec {
    double probability = 0.5;
    std::pair<double, double> alpha_range{0.2, 0.5};
    std::pair<double, double> strength_range{0.2, 0.7};
};
struct MotionBlurSpec {
    double probability = 0.5;
    std::vector<int> kernel_sizes{3, 5, 7};
};

using TransformSpec =
    std::variant<Rotate90Spec, FlipSpec, OpticalDistortionSpec, GaussianNoiseSpec,
                 HsvShiftSpec, ClaheSpec, RandomContrastSpec, RandomBrightnessSpec,
                 EmbossSpec, MotionBlurSpec>;

inline bool is_geometric(const TransformSpec& spec) {
    return std::holds_alternative<Rotate90Spec>(spec) ||
           std::holds_alternative<FlipSpec>(spec) ||
           std::holds_alternative<OpticalDistortionSpec>(spec);
}

inline double spec_probability(const TransformSpec& spec) {
    return std::visit([](const auto& s) { return s.probability; }, spec);
}

/// Ordered list of togglable transforms, geometric before photometric, plus
/// a gate probability for the suite as a whole.
struct TransformSuite {
    std::vector<TransformSpec> specs;
    double suite_probability = 0.5;

    static TransformSuite defaults() {
        TransformSuite suite;
        suite.specs = {Rotate90Spec{},       FlipSpec{},
                       OpticalDistortionSpec{}, GaussianNoiseSpec{},
                       HsvShiftSpec{},       ClaheSpec{},
                       RandomContrastSpec{}, RandomBrightnessSpec{},
                       EmbossSpec{},         MotionBlurSpec{}};
        return suite;
    }
};

inline void validate_suite(const TransformSuite& suite) {
    auto check_prob = [](double p, const char* what) {
        if (!(p >= 0.0 && p <= 1.0))
            raise(ErrorCode::InvalidArgument, std::string(what) + " must be in [0,1]");
    };
    auto check_range = [](std::pair<double, double> r, const char* what) {
        if (!(r.first <= r.second))
            raise(ErrorCode::InvalidArgument, std::string(what) + " range is not ordered");
    };
    check_prob(suite.suite_probability, "suite_probability");
    for (const auto& spec : suite.specs) {
        check_prob(spec_probability(spec), "transform probability");
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, OpticalDistortionSpec>)
                    check_range(s.k_range, "optical_distortion k");
                else if constexpr (std::is_same_v<T, GaussianNoiseSpec>)
                    check_range(s.sigma_range, "gaussian_noise sigma");
                else if constexpr (std::is_same_v<T, EmbossSpec>) {
                    check_range(s.alpha_range, "emboss alpha");
                    check_range(s.strength_range, "emboss strength");
                } else if constexpr (std::is_same_v<T, MotionBlurSpec>) {
                    if (s.kernel_sizes.empty())
                        raise(ErrorCode::InvalidArgument, "motion_blur kernel set is empty");
                    for (int k : s.kernel_sizes)
                        if (k < 1 || k % 2 == 0)
                            raise(ErrorCode::InvalidArgument,
                                  "motion_blur kernel sizes must be odd");
                } else if constexpr (std::is_same_v<T, ClaheSpec>) {
                    if (s.tile_grid.first < 1 || s.tile_grid.second < 1)
                        raise(ErrorCode::InvalidArgument, "clahe tile grid must be positive");
                }
            },
            spec);
    }
}

/// Suite with geometric members removed; used where the mask must stay
/// bit-identical to the source labels.
inline TransformSuite photometric_only(const TransformSuite& suite) {
    TransformSuite out;
    out.suite_probability = suite.suite_probability;
    for (const auto& spec : suite.specs)
        if (!is_geometric(spec)) out.specs.push_back(spec);
    return out;
}

/// Apply the suite to an image and optional mask. Geometric transforms hit
/// both rasters identically; photometric ones leave the mask alone. With
/// probability 1 - suite_probability the inputs pass through unchanged.
/// Rotations that would change the raster shape are restricted to k in
/// {0, 2} on non-square inputs so output dimensions always match input.
inline std::pair<GeoRaster, std::optional<GeoRaster>> apply_suite(
    const TransformSuite& suite, GeoRaster image, std::optional<GeoRaster> mask,
    Rng& rng) {
    if (mask && (mask->width != image.width || mask->height != image.height))
        raise(ErrorCode::SizeMismatch, "mask size does not match image");
    if (!rng.bernoulli(suite.suite_probability)) return {std::move(image), std::move(mask)};

    for (const auto& spec : suite.specs) {
        if (!rng.bernoulli(spec_probability(spec))) continue;
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Rotate90Spec>) {
                    const bool square = image.width == image.height;
                    const int k = square ? static_cast<int>(rng.uniform_int(0, 3))
                                         : 2 * static_cast<int>(rng.uniform_int(0, 1));
                    image = rotate90(image, k);
                    if (mask) mask = rotate90(*mask, k);
                } else if constexpr (std::is_same_v<T, FlipSpec>) {
                    const auto mode = static_cast<FlipMode>(rng.uniform_int(0, 2));
                    image = flip(image, mode);
                    if (mask) mask = flip(*mask, mode);
                } else if constexpr (std::is_same_v<T, OpticalDistortionSpec>) {
                    const double k = rng.uniform(s.k_range.first, s.k_range.second);
                    image = barrel_distort(image, k, false);
                    if (mask) mask = barrel_distort(*mask, k, true);
                } else if constexpr (std::is_same_v<T, GaussianNoiseSpec>) {
                    const double sigma = rng.uniform(s.sigma_range.first, s.sigma_range.second);
                    image = add_gaussian_noise(image, sigma, rng);
                } else if constexpr (std::is_same_v<T, HsvShiftSpec>) {
                    image = hsv_shift(image, s.hue_limit, s.sat_limit, s.val_limit, rng);
                } else if constexpr (std::is_same_v<T, ClaheSpec>) {
                    image = clahe(image, s.clip_limit, s.tile_grid);
                } else if constexpr (std::is_same_v<T, RandomContrastSpec>) {
                    image = random_contrast(image, s.limit, rng);
                } else if constexpr (std::is_same_v<T, RandomBrightnessSpec>) {
                    image = random_brightness(image, s.limit, rng);
                } else if constexpr (std::is_same_v<T, EmbossSpec>) {
                    image = emboss(image, s.alpha_range, s.strength_range, rng);
                } else if constexpr (std::is_same_v<T, MotionBlurSpec>) {
                    image = motion_blur(image, s.kernel_sizes, rng);
                }
            },
            spec);
    }
    return {std::move(image), std::move(mask)};
}

// ---------------------------------------------------------------------------
// JSON (de)serialization for suites.
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const TransformSpec& spec) {
    using nlohmann::json;
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            json j;
            j["probability"] = s.probability;
            if constexpr (std::is_same_v<T, Rotate90Spec>) {
                j["kind"] = "rotate90";
            } else if constexpr (std::is_same_v<T, FlipSpec>) {
                j["kind"] = "flip";
            } else if constexpr (std::is_same_v<T, OpticalDistortionSpec>) {
                j["kind"] = "optical_distortion";
                j["k_range"] = {s.k_range.first, s.k_range.second};
            } else if constexpr (std::is_same_v<T, GaussianNoiseSpec>) {
                j["kind"] = "gaussian_noise";
                j["sigma_range"] = {s.sigma_range.first, s.sigma_range.second};
            } else if constexpr (std::is_same_v<T, HsvShiftSpec>) {
                j["kind"] = "hsv_shift";
                j["hue_limit"] = s.hue_limit;
                j["sat_limit"] = s.sat_limit;
                j["val_limit"] = s.val_limit;
            } else if constexpr (std::is_same_v<T, ClaheSpec>) {
                j["kind"] = "clahe";
                j["clip_limit"] = s.clip_limit;
                j["tile_grid"] = {s.tile_grid.first, s.tile_grid.second};
            } else if constexpr (std::is_same_v<T, RandomContrastSpec>) {
                j["kind"] = "random_contrast";
                j["limit"] = s.limit;
            } else if constexpr (std::is_same_v<T, RandomBrightnessSpec>) {
                j["kind"] = "random_brightness";
                j["limit"] = s.limit;
            } else if constexpr (std::is_same_v<T, EmbossSpec>) {
                j["kind"] = "emboss";
                j["alpha_range"] = {s.alpha_range.first, s.alpha_range.second};
                j["strength_range"] = {s.strength_range.first, s.strength_range.second};
            } else if constexpr (std::is_same_v<T, MotionBlurSpec>) {
                j["kind"] = "motion_blur";
                j["kernel_sizes"] = s.kernel_sizes;
            }
            return j;
        },
        spec);
}

inline TransformSpec transform_spec_from_json(const nlohmann::json& j) {
    const std::string kind = j.value("kind", "");
    auto pair_of = [&](const char* key, std::pair<double, double> def) {
        if (!j.contains(key)) return def;
        const auto& a = j.at(key);
        if (!a.is_array() || a.size() != 2)
            raise(ErrorCode::ParseError, std::string("bad range for ") + key);
        return std::pair<double, double>{a[0].get<double>(), a[1].get<double>()};
    };
    const double p = j.value("probability", 0.5);
    if (kind == "rotate90") return Rotate90Spec{p};
    if (kind == "flip") return FlipSpec{p};
    if (kind == "optical_distortion")
        return OpticalDistortionSpec{p, pair_of("k_range", {-0.05, 0.05})};
    if (kind == "gaussian_noise")
        return GaussianNoiseSpec{p, pair_of("sigma_range", {2.55, 12.75})};
    if (kind == "hsv_shift")
        return HsvShiftSpec{p, j.value("hue_limit", 20.0), j.value("sat_limit", 30.0),
                            j.value("val_limit", 20.0)};
    if (kind == "clahe") {
        ClaheSpec s;
        s.probability = p;
        s.clip_limit = j.value("clip_limit", 4.0);
        if (j.contains("tile_grid")) {
            const auto& g = j.at("tile_grid");
            if (!g.is_array() || g.size() != 2)
                raise(ErrorCode::ParseError, "bad clahe tile_grid");
            s.tile_grid = {g[0].get<int>(), g[1].get<int>()};
        }
        return s;
    }
    if (kind == "random_contrast") return RandomContrastSpec{p, j.value("limit", 0.2)};
    if (kind == "random_brightness") return RandomBrightnessSpec{p, j.value("limit", 0.2)};
    if (kind == "emboss")
        return EmbossSpec{p, pair_of("alpha_range", {0.2, 0.5}),
                          pair_of("strength_range", {0.2, 0.7})};
    if (kind == "motion_blur") {
        MotionBlurSpec s;
        s.probability = p;
        if (j.contains("kernel_sizes")) s.kernel_sizes = j.at("kernel_sizes").get<std::vector<int>>();
        return s;
    }
    raise(ErrorCode::ParseError, "unknown transform kind '" + kind + "'");
}

inline nlohmann::json to_json(const TransformSuite& suite) {
    nlohmann::json j;
    j["suite_probability"] = suite.suite_probability;
    auto specs = nlohmann::json::array();
    for (const auto& spec : suite.specs) specs.push_back(to_json(spec));
    j["specs"] = specs;
    return j;
}

inline TransformSuite transform_suite_from_json(const nlohmann::json& j) {
    TransformSuite suite;
    suite.suite_probability = j.value("suite_probability", 0.5);
    if (j.contains("specs")) {
        if (!j.at("specs").is_array()) raise(ErrorCode::ParseError, "suite specs must be an array");
        for (const auto& spec : j.at("specs"))
            suite.specs.push_back(transform_spec_from_json(spec));
    } else {
        suite.specs = TransformSuite::defaults().specs;
    }
    validate_suite(suite);
    return suite;
}

}  // namespace oba
