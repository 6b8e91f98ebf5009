#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oba/oba.hpp"

TEST_CASE("headers compile and a raster round-trips through PNG") {
    oba::GeoRaster img(4, 3, 3);
    img.at(1, 2, 0) = 200;
    const auto bytes = oba::encode_png(img);
    const auto back = oba::decode_png(bytes);
    CHECK(back == img);
}
