#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oba/oba.hpp"
#include "test_util.hpp"

using namespace oba;

TEST_CASE("world_to_pixel inverts the affine map") {
    SUBCASE("identity transform is a passthrough") {
        AffineGeoTransform t;
        const auto [c, r] = world_to_pixel(t, 3.5, 7.25);
        CHECK(c == doctest::Approx(3.5).epsilon(1e-12));
        CHECK(r == doctest::Approx(7.25).epsilon(1e-12));
    }
    SUBCASE("scaled-and-offset transform") {
        AffineGeoTransform t{2, 0, 10, 0, 2, 20};
        const auto [c, r] = world_to_pixel(t, 14.0, 26.0);
        CHECK(c == doctest::Approx(2.0));
        CHECK(r == doctest::Approx(3.0));
    }
    SUBCASE("singular transform is rejected") {
        AffineGeoTransform t{1, 2, 0, 2, 4, 0};  // det = 0
        CHECK(testutil::raises([&] { world_to_pixel(t, 1.0, 1.0); },
                               ErrorCode::SingularTransform));
    }
}

TEST_CASE("pixel -> world -> pixel round-trips within 1e-9") {
    Rng rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        AffineGeoTransform t{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1e4, 1e4),
                             rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1e4, 1e4)};
        if (std::abs(t.det()) < 1e-3) continue;
        const double col = rng.uniform(0, 4096);
        const double row = rng.uniform(0, 4096);
        const auto [x, y] = t.pixel_to_world(col, row);
        const auto [c2, r2] = world_to_pixel(t, x, y);
        CHECK(std::abs(c2 - col) < 1e-9);
        CHECK(std::abs(r2 - row) < 1e-9);
    }
}

TEST_CASE("rasterize_polygon: axis-aligned square covering 16 centers") {
    AffineGeoTransform identity;
    FootprintPolygon square{"sq", {testutil::rect_ring(-0.4, -0.4, 3.4, 3.4)}, ""};
    const GeoRaster mask = rasterize_polygon(square, identity, 10, 10);
    CHECK(mask_count(mask) == 16);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) CHECK(mask.at(c, r) == 1);
    // Matches the brute-force oracle exactly.
    CHECK(mask.data == testutil::rasterize_oracle(square, identity, 10, 10).data);
}

TEST_CASE("rasterize_polygon: polygon fully outside the raster") {
    AffineGeoTransform identity;
    FootprintPolygon far{"far", {testutil::rect_ring(100, 100, 120, 120)}, ""};
    const GeoRaster mask = rasterize_polygon(far, identity, 10, 10);
    CHECK(mask_count(mask) == 0);
}

TEST_CASE("rasterize_polygon: square with a centered hole") {
    AffineGeoTransform identity;
    FootprintPolygon donut{"donut",
                           {testutil::rect_ring(-0.5, -0.5, 9.5, 9.5),
                            testutil::rect_ring(2.5, 2.5, 6.5, 6.5)},
                           ""};
    const GeoRaster mask = rasterize_polygon(donut, identity, 12, 12);
    const GeoRaster oracle = testutil::rasterize_oracle(donut, identity, 12, 12);
    CHECK(mask.data == oracle.data);
    CHECK(mask.at(5, 5) == 0);  // inside the hole
    CHECK(mask.at(1, 1) == 1);  // in the ring
    CHECK(mask_count(mask) == 100 - 16);
}

TEST_CASE("rasterize_polygon agrees with the oracle on random polygons") {
    Rng rng(1234);
    for (int trial = 0; trial < 30; ++trial) {
        AffineGeoTransform t;
        if (trial % 3 == 1) t = {0.5, 0.1, -3.0, -0.05, 0.4, 7.0};  // rotated/scaled grid
        if (trial % 3 == 2) t = {2.0, 0.0, 100.0, 0.0, -2.0, 50.0};
        auto poly = testutil::random_polygon(rng, rng.uniform(10, 54), rng.uniform(10, 54),
                                             rng.uniform(2, 25));
        if (trial % 3 != 0) {
            // Express vertices in world coordinates of the chosen grid.
            for (auto& ring : poly.rings)
                for (auto& v : ring) {
                    const auto [x, y] = t.pixel_to_world(v.x, v.y);
                    v = {x, y};
                }
        }
        const GeoRaster mask = rasterize_polygon(poly, t, 64, 64);
        const GeoRaster oracle = testutil::rasterize_oracle(poly, t, 64, 64);
        REQUIRE(mask.data == oracle.data);
    }
}

TEST_CASE("rasterization is invariant under vertex-order reversal") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        auto poly = testutil::random_polygon(rng, rng.uniform(8, 56), rng.uniform(8, 56),
                                             rng.uniform(2, 20));
        FootprintPolygon reversed = poly;
        for (auto& ring : reversed.rings) std::reverse(ring.begin(), ring.end());
        AffineGeoTransform identity;
        const GeoRaster a = rasterize_polygon(poly, identity, 64, 64);
        const GeoRaster b = rasterize_polygon(reversed, identity, 64, 64);
        REQUIRE(a.data == b.data);
    }
}

TEST_CASE("windowed rasterization equals the cropped full mask bit-exactly") {
    Rng rng(99);
    AffineGeoTransform t{0.7, 0.2, -13.0, -0.1, 0.9, 4.0};
    for (int trial = 0; trial < 20; ++trial) {
        auto poly = testutil::random_polygon(rng, 32, 32, 20);
        for (auto& ring : poly.rings)
            for (auto& v : ring) {
                const auto [x, y] = t.pixel_to_world(v.x, v.y);
                v = {x, y};
            }
        const GeoRaster full = rasterize_polygon(poly, t, 64, 64);
        const PixelWindow w{11, 7, 40, 33};
        const GeoRaster part = rasterize_polygon(poly, t, w);
        const GeoRaster cropped = read_window(full, w);
        REQUIRE(part.data == cropped.data);
    }
}

TEST_CASE("read_window basics") {
    Rng rng(5);
    GeoRaster img = testutil::noise_raster(16, 12, 3, rng);
    img.transform = AffineGeoTransform{2, 0, 100, 0, -2, 50};

    SUBCASE("full-size window is the identity") {
        const GeoRaster crop = read_window(img, {0, 0, 16, 12});
        CHECK(crop == img);
    }
    SUBCASE("1x1 window picks the source pixel") {
        const GeoRaster crop = read_window(img, {5, 7, 1, 1});
        CHECK(crop.width == 1);
        for (int i = 0; i < 3; ++i) CHECK(crop.at(0, 0, i) == img.at(5, 7, i));
    }
    SUBCASE("overhanging window is rejected") {
        CHECK(testutil::raises([&] { read_window(img, {10, 0, 8, 12}); },
                               ErrorCode::WindowOutOfBounds));
        CHECK(testutil::raises([&] { read_window(img, {-1, 0, 4, 4}); },
                               ErrorCode::WindowOutOfBounds));
    }
    SUBCASE("crop keeps the georeference anchored") {
        const GeoRaster crop = read_window(img, {3, 2, 4, 4});
        const auto [x0, y0] = img.transform->pixel_to_world(3, 2);
        const auto [x1, y1] = crop.transform->pixel_to_world(0, 0);
        CHECK(x0 == doctest::Approx(x1));
        CHECK(y0 == doctest::Approx(y1));
    }
}

TEST_CASE("read_window composes associatively, bit-exact") {
    Rng rng(6);
    const GeoRaster img = [&] {
        GeoRaster r = testutil::noise_raster(40, 30, 3, rng);
        r.transform = AffineGeoTransform{1.5, 0, -7, 0, 1.5, 9};
        return r;
    }();
    const PixelWindow outer{4, 3, 30, 22};
    const PixelWindow inner{5, 6, 12, 10};
    const GeoRaster two_step = read_window(read_window(img, outer), inner);
    const GeoRaster one_step = read_window(
        img, {outer.col_off + inner.col_off, outer.row_off + inner.row_off, inner.width,
              inner.height});
    CHECK(two_step == one_step);
}

TEST_CASE("footprint validation") {
    SUBCASE("open ring") {
        FootprintPolygon open{"o", {{{0, 0}, {4, 0}, {4, 4}, {0, 4}}}, ""};
        CHECK(testutil::raises([&] { validate_footprint(open); }, ErrorCode::InvalidGeometry));
    }
    SUBCASE("too few distinct vertices") {
        FootprintPolygon degenerate{"d", {{{0, 0}, {4, 0}, {0, 0}}}, ""};
        CHECK(testutil::raises([&] { validate_footprint(degenerate); },
                               ErrorCode::InvalidGeometry));
    }
    SUBCASE("self-intersecting exterior (bowtie)") {
        FootprintPolygon bowtie{"b", {{{0, 0}, {4, 4}, {4, 0}, {0, 4}, {0, 0}}}, ""};
        CHECK(testutil::raises([&] { validate_footprint(bowtie); },
                               ErrorCode::InvalidGeometry));
    }
    SUBCASE("valid square passes") {
        FootprintPolygon sq{"s", {testutil::rect_ring(0, 0, 4, 4)}, ""};
        CHECK_NOTHROW(validate_footprint(sq));
    }
}
