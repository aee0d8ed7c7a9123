#include "qgs/pass_geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "qgs/common.hpp"

namespace qgs {

namespace {

constexpr double kAcquisitionElevationDeg = 5.0;

}  // namespace

std::string to_string(Environment env) {
    switch (env) {
        case Environment::rural: return "rural";
        case Environment::urban: return "urban";
        case Environment::coastal: return "coastal";
        case Environment::high_altitude: return "high-altitude";
    }
    return "rural";
}

std::string to_string(PassDirection dir) {
    return dir == PassDirection::ascending ? "ascending" : "descending";
}

Environment environment_from_string(const std::string& s) {
    if (s == "rural") return Environment::rural;
    if (s == "urban") return Environment::urban;
    if (s == "coastal") return Environment::coastal;
    if (s == "high-altitude" || s == "high_altitude") return Environment::high_altitude;
    throw ValidationError("", "unknown environment '" + s + "'");
}

PassDirection pass_direction_from_string(const std::string& s) {
    if (s == "ascending") return PassDirection::ascending;
    if (s == "descending") return PassDirection::descending;
    throw ValidationError("", "unknown pass direction '" + s + "'");
}

void GroundSite::validate() const {
    require_finite(latitude_deg, "latitude_deg");
    require_finite(longitude_deg, "longitude_deg");
    require_finite(altitude_m, "altitude_m");
    require(latitude_deg >= -90.0 && latitude_deg <= 90.0, "latitude_deg", "must be in [-90, 90]");
    require(longitude_deg >= -180.0 && longitude_deg <= 180.0, "longitude_deg", "must be in [-180, 180]");
    require(altitude_m >= 0.0, "altitude_m", "must be >= 0");
}

void OrbitParams::validate() const {
    require_finite(altitude_km, "altitude_km");
    require_finite(max_elevation_deg, "max_elevation_deg");
    require(altitude_km >= 200.0 && altitude_km <= 2000.0, "altitude_km", "must be in [200, 2000]");
    require(max_elevation_deg > kAcquisitionElevationDeg && max_elevation_deg <= 90.0, "max_elevation_deg",
            "must be in (5, 90]; lower culminations give no usable pass");
}

PassGeometry::PassGeometry(std::vector<PassSample> samples, double step_s)
    : samples_(std::move(samples)), step_s_(step_s) {
    if (samples_.empty()) return;
    require(step_s_ > 0.0, "step_s", "must be > 0");
    for (std::size_t i = 1; i < samples_.size(); ++i) {
        if (!(samples_[i].t_s > samples_[i - 1].t_s))
            throw ValidationError("samples", "time must be strictly increasing");
    }
    auto it = std::max_element(samples_.begin(), samples_.end(),
                               [](const PassSample& a, const PassSample& b) {
                                   return a.elevation_deg < b.elevation_deg;
                               });
    culmination_ = static_cast<std::size_t>(it - samples_.begin());
}

double PassGeometry::interpolate(double t_s, double PassSample::*field) const {
    if (samples_.empty()) throw ValidationError("pass", "empty pass geometry");
    const double u = (t_s - samples_.front().t_s) / step_s_;
    if (u <= 0.0) return samples_.front().*field;
    const auto last = samples_.size() - 1;
    if (u >= static_cast<double>(last)) return samples_.back().*field;
    const auto i = static_cast<std::size_t>(u);
    const double f = u - static_cast<double>(i);
    return samples_[i].*field + f * (samples_[i + 1].*field - samples_[i].*field);
}

double PassGeometry::range_at(double t_s) const { return interpolate(t_s, &PassSample::range_km); }

double PassGeometry::elevation_at(double t_s) const {
    return interpolate(t_s, &PassSample::elevation_deg);
}

double slant_range_km(double elevation_deg, double altitude_km) {
    const double r = kEarthRadiusKm;
    const double s = std::sin(deg2rad(elevation_deg));
    return std::sqrt(r * r * s * s + 2.0 * r * altitude_km + altitude_km * altitude_km) - r * s;
}

double central_angle_rad(double elevation_deg, double altitude_km) {
    const double e = deg2rad(elevation_deg);
    const double c = kEarthRadiusKm * std::cos(e) / (kEarthRadiusKm + altitude_km);
    return std::max(0.0, std::acos(std::clamp(c, -1.0, 1.0)) - e);
}

PassGeometry propagate_pass(const GroundSite& site, const OrbitParams& orbit, double step_s) {
    site.validate();
    orbit.validate();
    require(step_s > 0.0 && std::isfinite(step_s), "step_s", "must be > 0");

    const double rs = kEarthRadiusKm + orbit.altitude_km;
    const double omega = std::sqrt(kEarthGravParam / (rs * rs * rs));
    const double psi_min = central_angle_rad(orbit.max_elevation_deg, orbit.altitude_km);
    const double psi_edge = central_angle_rad(kAcquisitionElevationDeg, orbit.altitude_km);
    const double theta_edge = std::acos(std::clamp(std::cos(psi_edge) / std::cos(psi_min), -1.0, 1.0));
    const auto half = static_cast<long>(std::floor(theta_edge / (omega * step_s)));

    // Local frame at the site: x east, y north, z up; Earth centre at (0, 0, -R).
    const std::array<double, 3> closest{std::sin(psi_min), 0.0, std::cos(psi_min)};
    const double north = orbit.direction == PassDirection::ascending ? 1.0 : -1.0;

    std::vector<PassSample> samples;
    samples.reserve(static_cast<std::size_t>(2 * half + 1));
    for (long k = -half; k <= half; ++k) {
        const double theta = omega * step_s * static_cast<double>(k);
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        const double x = rs * closest[0] * c;
        const double y = rs * north * s;
        const double z = rs * closest[2] * c - kEarthRadiusKm;
        const double range = std::sqrt(x * x + y * y + z * z);
        double el = rad2deg(std::asin(std::clamp(z / range, -1.0, 1.0)));
        double az = rad2deg(std::atan2(x, y));
        if (az < 0.0) az += 360.0;
        if (k == 0) el = orbit.max_elevation_deg;
        samples.push_back({static_cast<double>(k + half) * step_s, el, az, range});
    }
    return PassGeometry(std::move(samples), step_s);
}

TimeWindow efficient_window(const PassGeometry& pass, double min_elevation_deg) {
    require(min_elevation_deg >= kAcquisitionElevationDeg, "min_elevation_deg", "must be >= 5");
    TimeWindow w;
    if (pass.empty()) return w;
    const auto& s = pass.samples();
    std::size_t lo = pass.culmination_index();
    if (s[lo].elevation_deg < min_elevation_deg) return w;
    std::size_t hi = lo;
    while (lo > 0 && s[lo - 1].elevation_deg >= min_elevation_deg) --lo;
    while (hi + 1 < s.size() && s[hi + 1].elevation_deg >= min_elevation_deg) ++hi;
    w.t_start_s = s[lo].t_s;
    w.t_end_s = s[hi].t_s;
    w.empty = false;
    return w;
}

double min_elevation_for_duration(const PassGeometry& pass, double duration_s) {
    require(duration_s >= 0.0, "duration_s", "must be >= 0");
    double lo = kAcquisitionElevationDeg;
    double hi = pass.culmination().elevation_deg;
    if (efficient_window(pass, lo).duration_s() <= duration_s) return lo;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (efficient_window(pass, mid).duration_s() <= duration_s)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

void write_pass_csv(std::ostream& os, const PassGeometry& pass) {
    os << "t_s,elevation_deg,azimuth_deg,range_km\n";
    char buf[160];
    for (const auto& s : pass.samples()) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", s.t_s, s.elevation_deg, s.azimuth_deg,
                      s.range_km);
        os << buf;
    }
}

PassGeometry read_pass_csv(std::istream& is) {
    std::string line;
    std::uint64_t lineno = 1;
    if (!std::getline(is, line) || line.rfind("t_s,elevation_deg,azimuth_deg,range_km", 0) != 0)
        throw FormatError("pass CSV: missing header 't_s,elevation_deg,azimuth_deg,range_km'", lineno);
    std::vector<PassSample> samples;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        PassSample s{};
        char tail = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf%c", &s.t_s, &s.elevation_deg, &s.azimuth_deg,
                        &s.range_km, &tail) != 4)
            throw FormatError("pass CSV: expected four numeric fields", lineno);
        samples.push_back(s);
    }
    if (samples.size() < 2) throw FormatError("pass CSV: need at least two samples", lineno);
    const double step = samples[1].t_s - samples[0].t_s;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const double d = samples[i].t_s - samples[i - 1].t_s;
        if (std::abs(d - step) > 1e-6 * step)
            throw FormatError("pass CSV: samples must be uniformly spaced", i + 1);
    }
    return PassGeometry(std::move(samples), step);
}

}  // namespace qgs
