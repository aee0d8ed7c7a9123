/**
 * @file common.hpp
 * @brief Physical constants, unit conversions and the error hierarchy shared
 *        by every stage of the ground-station pipeline.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qgs {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kEarthGravParam = 398600.4418;  // km^3 / s^2
inline constexpr double kSpeedOfLightKmPerS = 299792.458;
inline constexpr double kUradPerArcsec = kPi / 648000.0 * 1e6;
inline constexpr double kPsPerSecond = 1e12;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }
constexpr double deg2urad(double deg) { return deg2rad(deg) * 1e6; }
constexpr double urad2deg(double urad) { return rad2deg(urad * 1e-6); }

/// One-way light travel time for a slant range, in picoseconds.
inline double light_time_ps(double range_km) {
    return range_km / kSpeedOfLightKmPerS * kPsPerSecond;
}

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or input violates its documented domain.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)), detail_(what) {}

    const std::string& field() const noexcept { return field_; }
    /// Message without the field prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string field_;
    std::string detail_;
};

/// Malformed input file. `offset` is the byte offset (binary) or line number (text).
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

/// Filesystem failure (open/read/write).
class IoError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& field, const std::string& what) {
    if (!cond) throw ValidationError(field, what);
}

inline void require_finite(double v, const std::string& field) {
    if (!std::isfinite(v)) throw ValidationError(field, "must be finite");
}

}  // namespace qgs
