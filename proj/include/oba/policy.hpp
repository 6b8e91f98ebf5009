#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "json.hpp"
#include "oba/errors.hpp"
#include "oba/transforms.hpp"

namespace oba {

/// Synthetic shadow knobs: direction, drop length in pixels, and blend
/// strength (1 = fully black).
struct ShadowParams {
    std::pair<double, double> angle_range{0.0, 360.0};    // degrees
    std::pair<double, double> length_range{5.0, 20.0};    // pixels
    std::pair<double, double> intensity_range{0.3, 0.7};  // blend alpha
};

/// Every knob of the augmentation pipeline. This is the unit the search
/// module optimizes and the schema behind the CLI's --policy flag.
struct AugPolicy {
    std::pair<int, int> extra_objects{0, 3};
    double oba_prob = 0.6;
    double use_extra_background_prob = 0.6;
    double color_aug_prob = 0.5;
    ShadowParams shadow;
    std::pair<int, int> crop_size{128, 128};
    std::uint64_t base_seed = 0;
    std::optional<TransformSuite> suite_override;

    /// Materialized transform suite: the configured specs (defaults unless
    /// overridden) gated by color_aug_prob.
    TransformSuite suite() const {
        TransformSuite s = suite_override ? *suite_override : TransformSuite::defaults();
        s.suite_probability = color_aug_prob;
        return s;
    }
};

inline void validate_policy(const AugPolicy& p) {
    auto check_prob = [](double v, const char* what) {
        if (!(v >= 0.0 && v <= 1.0))
            raise(ErrorCode::InvalidArgument, std::string(what) + " must be in [0,1]");
    };
    check_prob(p.oba_prob, "oba_prob");
    check_prob(p.use_extra_background_prob, "use_extra_background_prob");
    check_prob(p.color_aug_prob, "color_aug_prob");
    if (p.extra_objects.first < 0 || p.extra_objects.first > p.extra_objects.second)
        raise(ErrorCode::InvalidArgument, "extra_objects range must satisfy 0 <= lo <= hi");
    if (p.crop_size.first <= 0 || p.crop_size.second <= 0)
        raise(ErrorCode::InvalidArgument, "crop_size must be positive");
    if (p.shadow.length_range.first < 0 ||
        p.shadow.length_range.first > p.shadow.length_range.second)
        raise(ErrorCode::InvalidArgument, "shadow length range must be ordered and >= 0");
    if (p.shadow.intensity_range.first < 0.0 || p.shadow.intensity_range.second > 1.0 ||
        p.shadow.intensity_range.first > p.shadow.intensity_range.second)
        raise(ErrorCode::InvalidArgument, "shadow intensity range must be within [0,1]");
    if (p.shadow.angle_range.first > p.shadow.angle_range.second)
        raise(ErrorCode::InvalidArgument, "shadow angle range must be ordered");
    if (p.suite_override) validate_suite(*p.suite_override);
}

inline nlohmann::json to_json(const ShadowParams& s) {
    return {{"angle_range", {s.angle_range.first, s.angle_range.second}},
            {"length_range", {s.length_range.first, s.length_range.second}},
            {"intensity_range", {s.intensity_range.first, s.intensity_range.second}}};
}

inline ShadowParams shadow_params_from_json(const nlohmann::json& j) {
    ShadowParams s;
    auto pair_of = [&](const char* key, std::pair<double, double> def) {
        if (!j.contains(key)) return def;
        const auto& a = j.at(key);
        if (!a.is_array() || a.size() != 2)
            raise(ErrorCode::ParseError, std::string("bad shadow range for ") + key);
        return std::pair<double, double>{a[0].get<double>(), a[1].get<double>()};
    };
    s.angle_range = pair_of("angle_range", s.angle_range);
    s.length_range = pair_of("length_range", s.length_range);
    s.intensity_range = pair_of("intensity_range", s.intensity_range);
    return s;
}

inline nlohmann::json to_json(const AugPolicy& p) {
    nlohmann::json j;
    j["extra_objects"] = {p.extra_objects.first, p.extra_objects.second};
    j["oba_prob"] = p.oba_prob;
    j["use_extra_background_prob"] = p.use_extra_background_prob;
    j["color_aug_prob"] = p.color_aug_prob;
    j["shadow"] = to_json(p.shadow);
    j["crop_size"] = {p.crop_size.first, p.crop_size.second};
    j["base_seed"] = p.base_seed;
    if (p.suite_override) j["suite"] = to_json(*p.suite_override);
    return j;
}

inline AugPolicy policy_from_json(const nlohmann::json& j) {
    AugPolicy p;
    if (j.contains("extra_objects")) {
        const auto& a = j.at("extra_objects");
        if (!a.is_array() || a.size() != 2) raise(ErrorCode::ParseError, "bad extra_objects");
        p.extra_objects = {a[0].get<int>(), a[1].get<int>()};
    }
    p.oba_prob = j.value("oba_prob", p.oba_prob);
    p.use_extra_background_prob =
        j.value("use_extra_background_prob", p.use_extra_background_prob);
    p.color_aug_prob = j.value("color_aug_prob", p.color_aug_prob);
    if (j.contains("shadow")) p.shadow = shadow_params_from_json(j.at("shadow"));
    if (j.contains("crop_size")) {
        const auto& a = j.at("crop_size");
        if (!a.is_array() || a.size() != 2) raise(ErrorCode::ParseError, "bad crop_size");
        p.crop_size = {a[0].get<int>(), a[1].get<int>()};
    }
    p.base_seed = j.value("base_seed", p.base_seed);
    if (j.contains("suite")) p.suite_override = transform_suite_from_json(j.at("suite"));
    validate_policy(p);
    return p;
}

}  // namespace oba
