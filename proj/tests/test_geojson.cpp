#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oba/oba.hpp"
#include "test_util.hpp"

using namespace oba;

TEST_CASE("single closed square polygon") {
    const std::string text = R"({
      "type": "FeatureCollection",
      "features": [{
        "type": "Feature",
        "properties": {"id": "a1", "class": "building"},
        "geometry": {"type": "Polygon",
                     "coordinates": [[[0,0],[4,0],[4,4],[0,4],[0,0]]]}
      }]
    })";
    const auto footprints = parse_footprints(text);
    REQUIRE(footprints.size() == 1);
    CHECK(footprints[0].object_id == "a1");
    CHECK(footprints[0].class_label == "building");
    REQUIRE(footprints[0].rings.size() == 1);
    CHECK(footprints[0].rings[0].size() == 5);
    CHECK(footprints[0].rings[0].front() == footprints[0].rings[0].back());
}

TEST_CASE("multipolygon parts get suffixed ids") {
    const std::string text = R"({
      "type": "FeatureCollection",
      "features": [{
        "type": "Feature",
        "properties": {"id": "b7"},
        "geometry": {"type": "MultiPolygon",
                     "coordinates": [
                       [[[0,0],[2,0],[2,2],[0,2],[0,0]]],
                       [[[5,5],[7,5],[7,7],[5,7],[5,5]]]]}
      }]
    })";
    const auto footprints = parse_footprints(text);
    REQUIRE(footprints.size() == 2);
    CHECK(footprints[0].object_id == "b7_0");
    CHECK(footprints[1].object_id == "b7_1");
}

TEST_CASE("missing id falls back to the feature index") {
    const std::string text = R"({
      "type": "FeatureCollection",
      "features": [
        {"type": "Feature", "properties": {},
         "geometry": {"type": "Polygon", "coordinates": [[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
        {"type": "Feature",
         "geometry": {"type": "Polygon", "coordinates": [[[2,2],[3,2],[3,3],[2,3],[2,2]]]}}
      ]
    })";
    const auto footprints = parse_footprints(text);
    REQUIRE(footprints.size() == 2);
    CHECK(footprints[0].object_id == "0");
    CHECK(footprints[1].object_id == "1");
}

TEST_CASE("numeric ids are stringified") {
    const std::string text = R"({
      "type": "FeatureCollection",
      "features": [{
        "type": "Feature", "properties": {"id": 42},
        "geometry": {"type": "Polygon", "coordinates": [[[0,0],[1,0],[1,1],[0,1],[0,0]]]}
      }]
    })";
    CHECK(parse_footprints(text)[0].object_id == "42");
}

TEST_CASE("two-vertex ring is invalid geometry") {
    const std::string text = R"({
      "type": "FeatureCollection",
      "features": [{
        "type": "Feature", "properties": {"id": "x"},
        "geometry": {"type": "Polygon", "coordinates": [[[0,0],[1,1],[0,0]]]}
      }]
    })";
    CHECK(testutil::raises([&] { parse_footprints(text); }, ErrorCode::InvalidGeometry));
}

TEST_CASE("open ring is invalid geometry") {
    const std::string text = R"({
      "type": "FeatureCollection",
      "features": [{
        "type": "Feature", "properties": {"id": "x"},
        "geometry": {"type": "Polygon", "coordinates": [[[0,0],[4,0],[4,4],[0,4]]]}
      }]
    })";
    CHECK(testutil::raises([&] { parse_footprints(text); }, ErrorCode::InvalidGeometry));
}

TEST_CASE("parse errors") {
    CHECK(testutil::raises([&] { parse_footprints("{not json"); }, ErrorCode::ParseError));
    CHECK(testutil::raises([&] { parse_footprints(R"({"type": "Feature"})"); },
                           ErrorCode::ParseError));
    const std::string point = R"({
      "type": "FeatureCollection",
      "features": [{
        "type": "Feature", "properties": {"id": "p"},
        "geometry": {"type": "Point", "coordinates": [1, 2]}
      }]
    })";
    CHECK(testutil::raises([&] { parse_footprints(point); }, ErrorCode::ParseError));
}
