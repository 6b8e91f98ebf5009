#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <zlib.h>

#include <fstream>

#include "oba/oba.hpp"
#include "test_util.hpp"

using namespace oba;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

// Minimal little-endian baseline TIFF writer, test-local so the reader is
// exercised against independently produced bytes.
std::vector<std::uint8_t> make_tiff(const GeoRaster& img, bool deflate) {
    std::vector<std::uint8_t> out;
    auto put8 = [&](std::uint8_t v) { out.push_back(v); };
    auto put16 = [&](std::uint16_t v) {
        put8(static_cast<std::uint8_t>(v & 0xFF));
        put8(static_cast<std::uint8_t>(v >> 8));
    };
    auto put32 = [&](std::uint32_t v) {
        put16(static_cast<std::uint16_t>(v & 0xFFFF));
        put16(static_cast<std::uint16_t>(v >> 16));
    };

    std::vector<std::uint8_t> pixels = img.data;
    if (deflate) {
        uLongf bound = compressBound(static_cast<uLong>(img.data.size()));
        std::vector<std::uint8_t> packed(bound);
        REQUIRE(compress2(packed.data(), &bound, img.data.data(),
                          static_cast<uLong>(img.data.size()), 6) == Z_OK);
        packed.resize(bound);
        pixels = std::move(packed);
    }

    put8('I'); put8('I'); put16(42);
    const std::uint32_t data_offset = 8;
    const std::uint32_t ifd_offset = data_offset + static_cast<std::uint32_t>(pixels.size());
    put32(ifd_offset);
    out.insert(out.end(), pixels.begin(), pixels.end());

    struct Entry { std::uint16_t tag, type; std::uint32_t count, value; };
    const std::uint16_t spp = static_cast<std::uint16_t>(img.channels);
    std::vector<Entry> entries = {
        {256, 3, 1, static_cast<std::uint32_t>(img.width)},
        {257, 3, 1, static_cast<std::uint32_t>(img.height)},
        {259, 3, 1, deflate ? 8u : 1u},
        {262, 3, 1, img.channels >= 3 ? 2u : 1u},
        {273, 4, 1, data_offset},
        {277, 3, 1, spp},
        {278, 3, 1, static_cast<std::uint32_t>(img.height)},
        {279, 4, 1, static_cast<std::uint32_t>(pixels.size())},
        {284, 3, 1, 1},
    };
    // BitsPerSample needs an array when spp > 2 (values larger than 4 bytes).
    std::uint32_t bits_extra_offset = 0;
    if (spp <= 2) {
        std::uint32_t packed = 0;
        for (int i = 0; i < spp; ++i) packed |= 8u << (16 * i);
        entries.push_back({258, 3, spp, packed});
    } else {
        bits_extra_offset = ifd_offset + 2 + 12 * static_cast<std::uint32_t>(entries.size() + 1) + 4;
        entries.push_back({258, 3, spp, bits_extra_offset});
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.tag < b.tag; });

    put16(static_cast<std::uint16_t>(entries.size()));
    for (const Entry& e : entries) {
        put16(e.tag);
        put16(e.type);
        put32(e.count);
        if (e.type == 3 && e.count == 1) {
            put16(static_cast<std::uint16_t>(e.value));
            put16(0);
        } else {
            put32(e.value);
        }
    }
    put32(0);  // no next IFD
    if (bits_extra_offset != 0)
        for (int i = 0; i < spp; ++i) put16(8);
    return out;
}

}  // namespace

TEST_CASE("PNG encode/decode round-trips all channel counts") {
    Rng rng(3);
    for (int ch : {1, 2, 3, 4}) {
        const GeoRaster img = testutil::noise_raster(23, 17, ch, rng);
        const GeoRaster back = decode_png(encode_png(img));
        REQUIRE(back == img);
    }
}

TEST_CASE("PNG decoder handles all five filter types") {
    // Encoders commonly mix filters; synthesize rows with each filter byte by
    // filtering a known image manually.
    Rng rng(9);
    const GeoRaster img = testutil::noise_raster(8, 5, 3, rng);
    const int stride = 8 * 3;
    std::vector<std::uint8_t> raw;
    auto paeth = [](int a, int b, int c) {
        const int p = a + b - c, pa = std::abs(p - a), pb = std::abs(p - b),
                  pc = std::abs(p - c);
        if (pa <= pb && pa <= pc) return a;
        if (pb <= pc) return b;
        return c;
    };
    for (int row = 0; row < 5; ++row) {
        const int filter = row;  // 0..4
        raw.push_back(static_cast<std::uint8_t>(filter));
        for (int i = 0; i < stride; ++i) {
            const int x = img.data[static_cast<std::size_t>(row) * stride + i];
            const int a = i >= 3 ? img.data[static_cast<std::size_t>(row) * stride + i - 3] : 0;
            const int b = row > 0 ? img.data[static_cast<std::size_t>(row - 1) * stride + i] : 0;
            const int c = (row > 0 && i >= 3)
                              ? img.data[static_cast<std::size_t>(row - 1) * stride + i - 3]
                              : 0;
            int v = 0;
            switch (filter) {
                case 0: v = x; break;
                case 1: v = x - a; break;
                case 2: v = x - b; break;
                case 3: v = x - (a + b) / 2; break;
                case 4: v = x - paeth(a, b, c); break;
            }
            raw.push_back(static_cast<std::uint8_t>(v & 0xFF));
        }
    }
    // Wrap the raw stream into a PNG by reusing the encoder's container and
    // swapping the IDAT payload.
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> packed(bound);
    REQUIRE(compress2(packed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                      6) == Z_OK);
    packed.resize(bound);

    std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    auto put_be32 = [&](std::uint32_t v) {
        png.push_back(static_cast<std::uint8_t>(v >> 24));
        png.push_back(static_cast<std::uint8_t>(v >> 16));
        png.push_back(static_cast<std::uint8_t>(v >> 8));
        png.push_back(static_cast<std::uint8_t>(v));
    };
    auto put_chunk = [&](const char* type, const std::vector<std::uint8_t>& data) {
        put_be32(static_cast<std::uint32_t>(data.size()));
        const std::size_t type_pos = png.size();
        png.insert(png.end(), type, type + 4);
        png.insert(png.end(), data.begin(), data.end());
        put_be32(static_cast<std::uint32_t>(
            crc32(0L, &png[type_pos], static_cast<uInt>(4 + data.size()))));
    };
    std::vector<std::uint8_t> ihdr;
    const std::uint32_t w = 8, h = 5;
    ihdr.push_back(w >> 24); ihdr.push_back(w >> 16); ihdr.push_back(w >> 8); ihdr.push_back(w);
    ihdr.push_back(h >> 24); ihdr.push_back(h >> 16); ihdr.push_back(h >> 8); ihdr.push_back(h);
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
    put_chunk("IHDR", ihdr);
    put_chunk("IDAT", packed);
    put_chunk("IEND", {});

    const GeoRaster back = decode_png(png);
    REQUIRE(back.data == img.data);
}

TEST_CASE("PNG error paths") {
    SUBCASE("corrupted CRC") {
        GeoRaster img(4, 4, 3, 100);
        auto bytes = encode_png(img);
        bytes[20] ^= 0xFF;  // inside IHDR payload, invalidates its CRC
        CHECK(testutil::raises([&] { decode_png(bytes); }, ErrorCode::CorruptFile));
    }
    SUBCASE("16-bit depth is unsupported") {
        GeoRaster img(4, 4, 1, 7);
        auto bytes = encode_png(img);
        // Patch bit depth in IHDR (offset: 8 sig + 8 len/type + 8 w/h) and fix CRC.
        bytes[24] = 16;
        const std::uint32_t crc =
            static_cast<std::uint32_t>(crc32(0L, &bytes[12], 4 + 13));
        bytes[29] = static_cast<std::uint8_t>(crc >> 24);
        bytes[30] = static_cast<std::uint8_t>(crc >> 16);
        bytes[31] = static_cast<std::uint8_t>(crc >> 8);
        bytes[32] = static_cast<std::uint8_t>(crc);
        CHECK(testutil::raises([&] { decode_png(bytes); }, ErrorCode::UnsupportedFormat));
    }
    SUBCASE("truncated file") {
        GeoRaster img(4, 4, 3, 100);
        auto bytes = encode_png(img);
        bytes.resize(bytes.size() / 2);
        CHECK(testutil::raises([&] { decode_png(bytes); }, ErrorCode::CorruptFile));
    }
}

TEST_CASE("TIFF reader handles uncompressed and deflate strips") {
    Rng rng(11);
    for (const bool deflate : {false, true}) {
        for (const int ch : {1, 3}) {
            const GeoRaster img = testutil::noise_raster(19, 13, ch, rng);
            const GeoRaster back = decode_tiff(make_tiff(img, deflate));
            REQUIRE(back.data == img.data);
            REQUIRE(back.channels == ch);
        }
    }
}

TEST_CASE("load_raster") {
    testutil::ScratchDir dir("io");

    SUBCASE("PNG without sidecar has no transform") {
        const GeoRaster img(10, 10, 3, 42);
        save_png(dir.path() / "plain.png", img);
        const GeoRaster back = load_raster(dir.path() / "plain.png");
        CHECK(back.width == 10);
        CHECK(back.height == 10);
        CHECK(back.channels == 3);
        CHECK_FALSE(back.transform.has_value());
    }

    SUBCASE("world-file sidecar populates the transform") {
        save_png(dir.path() / "geo.png", GeoRaster(4, 4, 1, 0));
        write_text(dir.path() / "geo.wld", "1\n0\n0\n-1\n100\n200\n");
        const GeoRaster back = load_raster(dir.path() / "geo.png");
        REQUIRE(back.transform.has_value());
        const auto [x, y] = back.transform->pixel_to_world(0, 0);
        CHECK(x == doctest::Approx(100.0));
        CHECK(y == doctest::Approx(200.0));
        const auto [x1, y1] = back.transform->pixel_to_world(1, 1);
        CHECK(x1 == doctest::Approx(101.0));
        CHECK(y1 == doctest::Approx(199.0));
    }

    SUBCASE("five-line world file is malformed") {
        save_png(dir.path() / "bad.png", GeoRaster(4, 4, 1, 0));
        write_text(dir.path() / "bad.wld", "1\n0\n0\n-1\n100\n");
        CHECK(testutil::raises([&] { load_raster(dir.path() / "bad.png"); },
                               ErrorCode::WorldFileMalformed));
    }

    SUBCASE("non-numeric world file line is malformed") {
        save_png(dir.path() / "nan.png", GeoRaster(4, 4, 1, 0));
        write_text(dir.path() / "nan.wld", "1\n0\nzero\n-1\n100\n200\n");
        CHECK(testutil::raises([&] { load_raster(dir.path() / "nan.png"); },
                               ErrorCode::WorldFileMalformed));
    }

    SUBCASE("TIFF loads by magic regardless of extension") {
        const GeoRaster img = GeoRaster(6, 4, 3, 9);
        write_bytes(dir.path() / "scene.tif", make_tiff(img, true));
        const GeoRaster back = load_raster(dir.path() / "scene.tif");
        CHECK(back.data == img.data);
    }

    SUBCASE("unrecognized format") {
        write_text(dir.path() / "notes.txt", "not a raster");
        CHECK(testutil::raises([&] { load_raster(dir.path() / "notes.txt"); },
                               ErrorCode::UnsupportedFormat));
    }

    SUBCASE("missing file") {
        CHECK(testutil::raises([&] { load_raster(dir.path() / "absent.png"); },
                               ErrorCode::IoError));
    }
}

TEST_CASE("world file writer round-trips") {
    const AffineGeoTransform t{0.25, 0.0, -1234.5, 0.0, -0.25, 9876.5};
    const AffineGeoTransform back = parse_world_file(format_world_file(t));
    CHECK(back == t);
}

TEST_CASE("mask conversions") {
    GeoRaster mask(3, 1, 1);
    mask.at(1, 0) = 1;
    const GeoRaster img = mask_to_image(mask);
    CHECK(img.at(0, 0) == 0);
    CHECK(img.at(1, 0) == 255);
    CHECK(image_to_mask(img).data == mask.data);
}
