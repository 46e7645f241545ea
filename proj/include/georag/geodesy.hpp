// Copyright 2026 The GeoRAG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// WGS-84 geodesic distance and the five distance-threshold accuracy levels
// used to score geolocation predictions.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>

#include "georag/error.hpp"

namespace georag {

struct GeoCoord {
    double lat = 0.0;  // degrees, [-90, 90]
    double lon = 0.0;  // degrees, [-180, 180]

    friend bool operator==(const GeoCoord&, const GeoCoord&) = default;
};

inline bool is_valid(const GeoCoord& c) {
    return std::isfinite(c.lat) && std::isfinite(c.lon) && c.lat >= -90.0 && c.lat <= 90.0 &&
           c.lon >= -180.0 && c.lon <= 180.0;
}

inline std::string describe(const GeoCoord& c) {
    return "(" + std::to_string(c.lat) + ", " + std::to_string(c.lon) + ")";
}

inline void validate(const GeoCoord& c) {
    if (!is_valid(c)) {
        throw Error(ErrorCode::kOutOfRange, "coordinate " + describe(c) +
                                                " outside lat [-90, 90] / lon [-180, 180]");
    }
}

enum class AccuracyLevel : std::uint8_t { kStreet = 0, kCity, kRegion, kCountry, kContinent };

inline constexpr std::array<AccuracyLevel, 5> kAccuracyLevels = {
    AccuracyLevel::kStreet, AccuracyLevel::kCity, AccuracyLevel::kRegion, AccuracyLevel::kCountry,
    AccuracyLevel::kContinent};

inline constexpr std::array<double, 5> kThresholdsKm = {1.0, 25.0, 200.0, 750.0, 2500.0};

constexpr double threshold_km(AccuracyLevel level) {
    return kThresholdsKm[static_cast<std::size_t>(level)];
}

constexpr std::string_view level_name(AccuracyLevel level) {
    constexpr std::array<std::string_view, 5> kNames = {"street", "city", "region", "country",
                                                        "continent"};
    return kNames[static_cast<std::size_t>(level)];
}

inline std::optional<AccuracyLevel> level_from_name(std::string_view name) {
    for (auto level : kAccuracyLevels) {
        if (level_name(level) == name) return level;
    }
    return std::nullopt;
}

/// Small bit set of accuracy levels. Bit i corresponds to kAccuracyLevels[i].
class LevelSet {
public:
    constexpr LevelSet() = default;

    constexpr void insert(AccuracyLevel level) { bits_ |= mask(level); }
    constexpr bool contains(AccuracyLevel level) const { return (bits_ & mask(level)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
    constexpr std::uint8_t bits() const { return bits_; }
    constexpr bool is_subset_of(LevelSet other) const { return (bits_ & ~other.bits_) == 0; }

    static constexpr LevelSet from_bits(std::uint8_t bits) {
        LevelSet s;
        s.bits_ = bits & 0x1f;
        return s;
    }

    friend constexpr bool operator==(LevelSet, LevelSet) = default;

private:
    static constexpr std::uint8_t mask(AccuracyLevel level) {
        return static_cast<std::uint8_t>(1u << static_cast<unsigned>(level));
    }
    std::uint8_t bits_ = 0;
};

/// Levels whose threshold is >= distance_km. A distance exactly on a
/// threshold counts as within that level.
inline LevelSet bucket(double distance_km) {
    if (!std::isfinite(distance_km) || distance_km < 0.0) {
        throw Error(ErrorCode::kInvalidArgument,
                    "distance must be finite and non-negative, got " + std::to_string(distance_km));
    }
    LevelSet set;
    for (auto level : kAccuracyLevels) {
        if (distance_km <= threshold_km(level)) set.insert(level);
    }
    return set;
}

struct GeodesicResult {
    double km = 0.0;
    bool fallback_used = false;  // Vincenty did not converge; haversine value returned
    int iterations = 0;
};

namespace wgs84 {
inline constexpr double kSemiMajorM = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;
inline constexpr double kSemiMinorM = kSemiMajorM * (1.0 - kFlattening);
}  // namespace wgs84

inline constexpr double kMeanEarthRadiusKm = 6371.0088;
inline constexpr double kVincentyTolerance = 1e-12;
inline constexpr int kVincentyMaxIterations = 200;

inline double haversine_km(const GeoCoord& a, const GeoCoord& b) {
    constexpr double kDeg = std::numbers::pi / 180.0;
    const double phi1 = a.lat * kDeg;
    const double phi2 = b.lat * kDeg;
    const double dphi = (b.lat - a.lat) * kDeg;
    const double dlambda = (b.lon - a.lon) * kDeg;
    const double s = std::sin(dphi / 2.0);
    const double t = std::sin(dlambda / 2.0);
    const double h = std::min(1.0, s * s + std::cos(phi1) * std::cos(phi2) * t * t);
    return 2.0 * kMeanEarthRadiusKm * std::asin(std::sqrt(h));
}

namespace detail {

// Vincenty inverse on WGS-84. Returns nullopt when the lambda iteration
// does not converge (near-antipodal points).
inline std::optional<GeodesicResult> vincenty_inverse(const GeoCoord& p, const GeoCoord& q) {
    using namespace wgs84;
    constexpr double kDeg = std::numbers::pi / 180.0;
    const double f = kFlattening;

    const double L = std::remainder(q.lon - p.lon, 360.0) * kDeg;
    const double U1 = std::atan((1.0 - f) * std::tan(p.lat * kDeg));
    const double U2 = std::atan((1.0 - f) * std::tan(q.lat * kDeg));
    const double sinU1 = std::sin(U1), cosU1 = std::cos(U1);
    const double sinU2 = std::sin(U2), cosU2 = std::cos(U2);

    double lambda = L;
    double sin_sigma = 0, cos_sigma = 0, sigma = 0, cos_sq_alpha = 0, cos_2sigma_m = 0;
    for (int iter = 1; iter <= kVincentyMaxIterations; ++iter) {
        const double sin_lambda = std::sin(lambda);
        const double cos_lambda = std::cos(lambda);
        const double t1 = cosU2 * sin_lambda;
        const double t2 = cosU1 * sinU2 - sinU1 * cosU2 * cos_lambda;
        sin_sigma = std::sqrt(t1 * t1 + t2 * t2);
        if (sin_sigma == 0.0) {
            return GeodesicResult{0.0, false, iter};  // coincident points
        }
        cos_sigma = sinU1 * sinU2 + cosU1 * cosU2 * cos_lambda;
        sigma = std::atan2(sin_sigma, cos_sigma);
        const double sin_alpha = cosU1 * cosU2 * sin_lambda / sin_sigma;
        cos_sq_alpha = 1.0 - sin_alpha * sin_alpha;
        // Both points on the equator: cos^2(alpha) = 0 and the 2*sigma_m term vanishes.
        cos_2sigma_m = cos_sq_alpha != 0.0 ? cos_sigma - 2.0 * sinU1 * sinU2 / cos_sq_alpha : 0.0;
        const double C = f / 16.0 * cos_sq_alpha * (4.0 + f * (4.0 - 3.0 * cos_sq_alpha));
        const double prev = lambda;
        lambda = L + (1.0 - C) * f * sin_alpha *
                         (sigma + C * sin_sigma *
                                      (cos_2sigma_m +
                                       C * cos_sigma * (-1.0 + 2.0 * cos_2sigma_m * cos_2sigma_m)));
        if (!std::isfinite(lambda) || std::abs(lambda) > std::numbers::pi) {
            return std::nullopt;
        }
        if (std::abs(lambda - prev) < kVincentyTolerance) {
            const double u_sq = cos_sq_alpha * (kSemiMajorM * kSemiMajorM - kSemiMinorM * kSemiMinorM) /
                                (kSemiMinorM * kSemiMinorM);
            const double A =
                1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
            const double B = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
            const double c2 = cos_2sigma_m * cos_2sigma_m;
            const double delta_sigma =
                B * sin_sigma *
                (cos_2sigma_m +
                 B / 4.0 *
                     (cos_sigma * (-1.0 + 2.0 * c2) -
                      B / 6.0 * cos_2sigma_m * (-3.0 + 4.0 * sin_sigma * sin_sigma) * (-3.0 + 4.0 * c2)));
            const double meters = kSemiMinorM * A * (sigma - delta_sigma);
            return GeodesicResult{meters / 1000.0, false, iter};
        }
    }
    return std::nullopt;
}

}  // namespace detail

/// Ellipsoidal distance in kilometers. Symmetric by construction: the pair
/// is put in a canonical order before solving, so (a, b) and (b, a) take the
/// same floating-point path.
inline GeodesicResult geodesic_km(const GeoCoord& a, const GeoCoord& b) {
    validate(a);
    validate(b);
    if (a == b) return {};
    const bool swap = std::tie(b.lat, b.lon) < std::tie(a.lat, a.lon);
    const GeoCoord& p = swap ? b : a;
    const GeoCoord& q = swap ? a : b;
    if (auto result = detail::vincenty_inverse(p, q)) {
        return *result;
    }
    return GeodesicResult{haversine_km(p, q), true, kVincentyMaxIterations};
}

}  // namespace georag
