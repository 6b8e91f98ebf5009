#pragma once

#include <zlib.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oba/errors.hpp"
#include "oba/raster.hpp"

namespace oba {

namespace io_detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) raise(ErrorCode::IoError, "short write to " + path.string());
}

inline std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* data, std::size_t size,
                                              std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) raise(ErrorCode::IoError, "inflateInit failed");
    zs.next_in = const_cast<Bytef*>(data);
    zs.avail_in = static_cast<uInt>(size);
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    const std::size_t produced = out.size() - zs.avail_out;
    inflateEnd(&zs);
    if ((rc != Z_STREAM_END && rc != Z_OK) || produced != expected)
        raise(ErrorCode::CorruptFile, "deflate stream is truncated or damaged");
    return out;
}

inline std::vector<std::uint8_t> zlib_deflate(const std::uint8_t* data, std::size_t size) {
    uLongf bound = compressBound(static_cast<uLong>(size));
    std::vector<std::uint8_t> out(bound);
    if (compress2(out.data(), &bound, data, static_cast<uLong>(size), 6) != Z_OK)
        raise(ErrorCode::IoError, "deflate failed");
    out.resize(bound);
    return out;
}

inline int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a);
    const int pb = std::abs(p - b);
    const int pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// PNG — 8-bit gray/gray+alpha/RGB/RGBA, non-interlaced.
// ---------------------------------------------------------------------------

inline bool looks_like_png(const std::vector<std::uint8_t>& bytes) {
    static const std::array<std::uint8_t, 8> sig = {0x89, 'P', 'N', 'G', 0x0D, 0x0A,
                                                    0x1A, 0x0A};
    return bytes.size() >= 8 && std::equal(sig.begin(), sig.end(), bytes.begin());
}

inline GeoRaster decode_png(const std::vector<std::uint8_t>& bytes) {
    using namespace io_detail;
    if (!looks_like_png(bytes)) raise(ErrorCode::CorruptFile, "bad PNG signature");

    std::size_t pos = 8;
    int width = 0, height = 0, channels = 0;
    bool saw_ihdr = false, saw_iend = false;
    std::vector<std::uint8_t> idat;

    while (pos + 12 <= bytes.size() && !saw_iend) {
        const std::uint32_t len = be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size())
            raise(ErrorCode::CorruptFile, "truncated PNG chunk");
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const std::uint8_t* data = &bytes[pos + 8];
        const std::uint32_t stored_crc = be32(&bytes[pos + 8 + len]);
        const std::uint32_t crc = static_cast<std::uint32_t>(
            crc32(crc32(0L, &bytes[pos + 4], 4), data, len));
        if (crc != stored_crc) raise(ErrorCode::CorruptFile, "PNG chunk CRC mismatch");

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) raise(ErrorCode::CorruptFile, "bad IHDR length");
            width = static_cast<int>(be32(data));
            height = static_cast<int>(be32(data + 4));
            const int bit_depth = data[8];
            const int color_type = data[9];
            const int compression = data[10];
            const int filter = data[11];
            const int interlace = data[12];
            if (width <= 0 || height <= 0) raise(ErrorCode::CorruptFile, "bad PNG size");
            if (bit_depth != 8)
                raise(ErrorCode::UnsupportedFormat, "only 8-bit PNG is supported");
            switch (color_type) {
                case 0: channels = 1; break;
                case 2: channels = 3; break;
                case 4: channels = 2; break;
                case 6: channels = 4; break;
                default:
                    raise(ErrorCode::UnsupportedFormat,
                          "unsupported PNG color type " + std::to_string(color_type));
            }
            if (compression != 0 || filter != 0 || interlace != 0)
                raise(ErrorCode::UnsupportedFormat, "unsupported PNG encoding options");
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
        }
        pos += 12 + len;
    }
    if (!saw_ihdr || !saw_iend || idat.empty())
        raise(ErrorCode::CorruptFile, "PNG missing required chunks");

    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    const std::size_t raw_size = (stride + 1) * height;
    const auto raw = zlib_inflate(idat.data(), idat.size(), raw_size);

    GeoRaster out(width, height, channels);
    std::vector<std::uint8_t> prev(stride, 0);
    for (int row = 0; row < height; ++row) {
        const std::uint8_t* src = &raw[static_cast<std::size_t>(row) * (stride + 1)];
        const int filter = src[0];
        std::uint8_t* dst = &out.data[static_cast<std::size_t>(row) * stride];
        const int bpp = channels;
        for (std::size_t i = 0; i < stride; ++i) {
            const int x = src[1 + i];
            const int a = i >= static_cast<std::size_t>(bpp) ? dst[i - bpp] : 0;
            const int b = prev[i];
            const int c = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
            int v = 0;
            switch (filter) {
                case 0: v = x; break;
                case 1: v = x + a; break;
                case 2: v = x + b; break;
                case 3: v = x + (a + b) / 2; break;
                case 4: v = x + io_detail::paeth(a, b, c); break;
                default: raise(ErrorCode::CorruptFile, "bad PNG filter type");
            }
            dst[i] = static_cast<std::uint8_t>(v & 0xFF);
        }
        std::copy(dst, dst + stride, prev.begin());
    }
    return out;
}

inline std::vector<std::uint8_t> encode_png(const GeoRaster& raster) {
    using namespace io_detail;
    int color_type = 0;
    switch (raster.channels) {
        case 1: color_type = 0; break;
        case 2: color_type = 4; break;
        case 3: color_type = 2; break;
        case 4: color_type = 6; break;
        default: raise(ErrorCode::InvalidArgument, "unsupported channel count");
    }
    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};

    auto put_chunk = [&out](const char* type, const std::vector<std::uint8_t>& data) {
        put_be32(out, static_cast<std::uint32_t>(data.size()));
        const std::size_t type_pos = out.size();
        out.insert(out.end(), type, type + 4);
        out.insert(out.end(), data.begin(), data.end());
        const std::uint32_t crc = static_cast<std::uint32_t>(
            crc32(0L, &out[type_pos], static_cast<uInt>(4 + data.size())));
        put_be32(out, crc);
    };

    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(raster.width));
    put_be32(ihdr, static_cast<std::uint32_t>(raster.height));
    ihdr.push_back(8);                                   // bit depth
    ihdr.push_back(static_cast<std::uint8_t>(color_type));
    ihdr.push_back(0);                                   // compression
    ihdr.push_back(0);                                   // filter
    ihdr.push_back(0);                                   // interlace
    put_chunk("IHDR", ihdr);

    const std::size_t stride = static_cast<std::size_t>(raster.width) * raster.channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * raster.height);
    for (int row = 0; row < raster.height; ++row) {
        raw.push_back(0);  // filter: none
        const std::uint8_t* src = &raster.data[static_cast<std::size_t>(row) * stride];
        raw.insert(raw.end(), src, src + stride);
    }
    put_chunk("IDAT", zlib_deflate(raw.data(), raw.size()));
    put_chunk("IEND", {});
    return out;
}

// ---------------------------------------------------------------------------
// TIFF — baseline 8-bit reader, chunky planar layout, compression none or
// deflate. Tiled layouts, palettes and other bit depths are rejected.
// ---------------------------------------------------------------------------

inline bool looks_like_tiff(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8) return false;
    const bool le = bytes[0] == 'I' && bytes[1] == 'I';
    const bool be = bytes[0] == 'M' && bytes[1] == 'M';
    if (!le && !be) return false;
    const int magic = le ? bytes[2] | (bytes[3] << 8) : (bytes[2] << 8) | bytes[3];
    return magic == 42;
}

inline GeoRaster decode_tiff(const std::vector<std::uint8_t>& bytes) {
    using namespace io_detail;
    if (!looks_like_tiff(bytes)) raise(ErrorCode::CorruptFile, "bad TIFF header");
    const bool le = bytes[0] == 'I';

    auto rd16 = [&](std::size_t off) -> std::uint32_t {
        if (off + 2 > bytes.size()) raise(ErrorCode::CorruptFile, "truncated TIFF");
        return le ? bytes[off] | (bytes[off + 1] << 8)
                  : (bytes[off] << 8) | bytes[off + 1];
    };
    auto rd32 = [&](std::size_t off) -> std::uint32_t {
        if (off + 4 > bytes.size()) raise(ErrorCode::CorruptFile, "truncated TIFF");
        return le ? (std::uint32_t(bytes[off]) | (std::uint32_t(bytes[off + 1]) << 8) |
                     (std::uint32_t(bytes[off + 2]) << 16) |
                     (std::uint32_t(bytes[off + 3]) << 24))
                  : ((std::uint32_t(bytes[off]) << 24) |
                     (std::uint32_t(bytes[off + 1]) << 16) |
                     (std::uint32_t(bytes[off + 2]) << 8) | std::uint32_t(bytes[off + 3]));
    };

    const std::size_t ifd = rd32(4);
    const std::uint32_t entry_count = rd16(ifd);
    if (ifd + 2 + entry_count * 12 > bytes.size())
        raise(ErrorCode::CorruptFile, "truncated TIFF IFD");

    // Tag values we care about, with TIFF defaults.
    std::uint32_t width = 0, height = 0, compression = 1, photometric = 1;
    std::uint32_t samples_per_pixel = 1, rows_per_strip = 0xFFFFFFFFu, planar = 1;
    std::uint32_t sample_format = 1;
    std::vector<std::uint32_t> bits_per_sample, strip_offsets, strip_byte_counts;

    auto read_values = [&](std::uint32_t type, std::uint32_t count,
                           std::size_t value_off) {
        std::vector<std::uint32_t> vals;
        const std::size_t elem = type == 1 ? 1 : type == 3 ? 2 : 4;
        const std::size_t total = elem * count;
        const std::size_t src = total <= 4 ? value_off : rd32(value_off);
        for (std::uint32_t i = 0; i < count; ++i) {
            if (type == 1) {
                if (src + i >= bytes.size()) raise(ErrorCode::CorruptFile, "truncated TIFF");
                vals.push_back(bytes[src + i]);
            } else if (type == 3) {
                vals.push_back(rd16(src + 2 * i));
            } else if (type == 4) {
                vals.push_back(rd32(src + 4 * i));
            } else {
                raise(ErrorCode::UnsupportedFormat, "unsupported TIFF tag type");
            }
        }
        return vals;
    };

    for (std::uint32_t i = 0; i < entry_count; ++i) {
        const std::size_t e = ifd + 2 + i * 12;
        const std::uint32_t tag = rd16(e);
        const std::uint32_t type = rd16(e + 2);
        const std::uint32_t count = rd32(e + 4);
        const std::size_t value_off = e + 8;
        switch (tag) {
            case 256: width = read_values(type, 1, value_off)[0]; break;
            case 257: height = read_values(type, 1, value_off)[0]; break;
            case 258: bits_per_sample = read_values(type, count, value_off); break;
            case 259: compression = read_values(type, 1, value_off)[0]; break;
            case 262: photometric = read_values(type, 1, value_off)[0]; break;
            case 273: strip_offsets = read_values(type, count, value_off); break;
            case 277: samples_per_pixel = read_values(type, 1, value_off)[0]; break;
            case 278: rows_per_strip = read_values(type, 1, value_off)[0]; break;
            case 279: strip_byte_counts = read_values(type, count, value_off); break;
            case 284: planar = read_values(type, 1, value_off)[0]; break;
            case 322:
            case 323:
                raise(ErrorCode::UnsupportedFormat, "tiled TIFF is not supported");
            case 339: sample_format = read_values(type, 1, value_off)[0]; break;
            default: break;
        }
    }

    if (width == 0 || height == 0 || strip_offsets.empty())
        raise(ErrorCode::CorruptFile, "TIFF missing required tags");
    if (samples_per_pixel < 1 || samples_per_pixel > 4)
        raise(ErrorCode::UnsupportedFormat, "unsupported TIFF sample count");
    if (bits_per_sample.empty()) bits_per_sample.assign(samples_per_pixel, 1);
    for (std::uint32_t b : bits_per_sample)
        if (b != 8) raise(ErrorCode::UnsupportedFormat, "only 8-bit TIFF is supported");
    if (compression != 1 && compression != 8 && compression != 32946)
        raise(ErrorCode::UnsupportedFormat,
              "unsupported TIFF compression " + std::to_string(compression));
    if (photometric > 2) raise(ErrorCode::UnsupportedFormat, "unsupported TIFF photometric");
    if (planar != 1) raise(ErrorCode::UnsupportedFormat, "planar TIFF is not supported");
    if (sample_format != 1)
        raise(ErrorCode::UnsupportedFormat, "non-integer TIFF samples are not supported");
    if (strip_byte_counts.size() != strip_offsets.size())
        raise(ErrorCode::CorruptFile, "TIFF strip tables disagree");

    const std::size_t stride = static_cast<std::size_t>(width) * samples_per_pixel;
    GeoRaster out(static_cast<int>(width), static_cast<int>(height),
                  static_cast<int>(samples_per_pixel));

    const std::uint32_t rps = std::min<std::uint32_t>(rows_per_strip, height);
    std::size_t row = 0;
    for (std::size_t s = 0; s < strip_offsets.size(); ++s) {
        const std::uint32_t rows_here =
            static_cast<std::uint32_t>(std::min<std::size_t>(rps, height - row));
        if (rows_here == 0) break;
        const std::size_t expect = stride * rows_here;
        const std::size_t off = strip_offsets[s];
        const std::size_t len = strip_byte_counts[s];
        if (off + len > bytes.size()) raise(ErrorCode::CorruptFile, "TIFF strip out of range");
        std::vector<std::uint8_t> strip;
        if (compression == 1) {
            if (len != expect) raise(ErrorCode::CorruptFile, "TIFF strip size mismatch");
            strip.assign(bytes.begin() + off, bytes.begin() + off + len);
        } else {
            strip = zlib_inflate(&bytes[off], len, expect);
        }
        std::copy(strip.begin(), strip.end(), out.data.begin() + row * stride);
        row += rows_here;
    }
    if (row != height) raise(ErrorCode::CorruptFile, "TIFF strips do not cover the image");

    if (photometric == 0) {
        // WhiteIsZero: normalize to the usual min-is-black convention.
        for (auto& v : out.data) v = static_cast<std::uint8_t>(255 - v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// World files and top-level load/save.
// ---------------------------------------------------------------------------

/// Parse a 6-line world file (line order a, d, b, e, c, f).
inline AffineGeoTransform parse_world_file(const std::string& text) {
    std::istringstream in(text);
    std::vector<double> vals;
    std::string line;
    while (std::getline(in, line)) {
        // Trim whitespace; blank trailing lines are tolerated.
        const auto begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos) {
            if (vals.size() == 6) continue;
            raise(ErrorCode::WorldFileMalformed, "blank line in world file");
        }
        const auto end = line.find_last_not_of(" \t\r");
        const std::string token = line.substr(begin, end - begin + 1);
        try {
            std::size_t used = 0;
            const double v = std::stod(token, &used);
            if (used != token.size())
                raise(ErrorCode::WorldFileMalformed, "non-numeric world-file line");
            vals.push_back(v);
        } catch (const Error&) {
            throw;
        } catch (...) {
            raise(ErrorCode::WorldFileMalformed, "non-numeric world-file line");
        }
    }
    if (vals.size() != 6)
        raise(ErrorCode::WorldFileMalformed,
              "expected 6 lines, found " + std::to_string(vals.size()));
    AffineGeoTransform t;
    t.a = vals[0];
    t.d = vals[1];
    t.b = vals[2];
    t.e = vals[3];
    t.c = vals[4];
    t.f = vals[5];
    return t;
}

inline std::string format_world_file(const AffineGeoTransform& t) {
    std::ostringstream out;
    out.precision(17);
    out << t.a << "\n" << t.d << "\n" << t.b << "\n" << t.e << "\n" << t.c << "\n"
        << t.f << "\n";
    return out.str();
}

inline std::filesystem::path world_file_path(const std::filesystem::path& raster_path) {
    std::filesystem::path p = raster_path;
    p.replace_extension(".wld");
    return p;
}

/// Load a PNG or TIFF raster. If a `<stem>.wld` sidecar exists next to it,
/// the georeference is attached.
inline GeoRaster load_raster(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) raise(ErrorCode::IoError, "no such file: " + path.string());
    const auto bytes = io_detail::read_file(path);
    GeoRaster raster;
    if (looks_like_png(bytes)) {
        raster = decode_png(bytes);
    } else if (looks_like_tiff(bytes)) {
        raster = decode_tiff(bytes);
    } else {
        raise(ErrorCode::UnsupportedFormat,
              "unrecognized raster format: " + path.string());
    }
    const auto wld = world_file_path(path);
    if (std::filesystem::exists(wld)) {
        const auto text = io_detail::read_file(wld);
        raster.transform =
            parse_world_file(std::string(text.begin(), text.end()));
    }
    return raster;
}

inline void save_png(const std::filesystem::path& path, const GeoRaster& raster) {
    io_detail::write_file(path, encode_png(raster));
}

/// PNG plus a world-file sidecar when the raster is georeferenced.
inline void save_raster(const std::filesystem::path& path, const GeoRaster& raster) {
    save_png(path, raster);
    if (raster.transform) {
        const std::string text = format_world_file(*raster.transform);
        std::vector<std::uint8_t> bytes(text.begin(), text.end());
        io_detail::write_file(world_file_path(path), bytes);
    }
}

/// Scale a {0,1} mask to {0,255} for viewable output.
inline GeoRaster mask_to_image(const GeoRaster& mask) {
    GeoRaster out = mask;
    for (auto& v : out.data) v = v ? 255 : 0;
    return out;
}

/// Binarize an 8-bit raster into a {0,1} mask (values above 127 are set).
inline GeoRaster image_to_mask(const GeoRaster& image) {
    GeoRaster out = image;
    for (auto& v : out.data) v = v > 127 ? 1 : 0;
    return out;
}

}  // namespace oba
