/**
 * @file pass_geometry.hpp
 * @brief Look angles and slant range of one satellite pass over a ground site.
 *
 * The orbit is circular, the Earth spherical (R = 6371 km) and non-rotating.
 * A pass is parameterized by its culmination elevation: the ground track is
 * the great circle whose closest approach to the site produces that
 * elevation. Time t = 0 is the first sample at or above 5 degrees.
 */

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace qgs {

enum class Environment { rural, urban, coastal, high_altitude };
enum class PassDirection { ascending, descending };

std::string to_string(Environment env);
std::string to_string(PassDirection dir);
Environment environment_from_string(const std::string& s);
PassDirection pass_direction_from_string(const std::string& s);

struct GroundSite {
    std::string name;
    double latitude_deg = 0.0;
    double longitude_deg = 0.0;
    double altitude_m = 0.0;
    Environment environment = Environment::rural;

    void validate() const;
};

struct OrbitParams {
    double altitude_km = 500.0;
    double max_elevation_deg = 60.0;
    PassDirection direction = PassDirection::ascending;

    void validate() const;
};

struct PassSample {
    double t_s;
    double elevation_deg;
    double azimuth_deg;  // [0, 360), clockwise from north
    double range_km;
};

/// Closed interval [t_start_s, t_end_s]; `empty` when no sample qualifies.
struct TimeWindow {
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    bool empty = true;

    double duration_s() const { return empty ? 0.0 : t_end_s - t_start_s; }
    bool contains(double t_s) const { return !empty && t_s >= t_start_s && t_s <= t_end_s; }
};

class PassGeometry {
public:
    PassGeometry() = default;
    /// Samples must be uniformly spaced by `step_s` with strictly increasing t.
    PassGeometry(std::vector<PassSample> samples, double step_s);

    const std::vector<PassSample>& samples() const { return samples_; }
    double step_s() const { return step_s_; }
    bool empty() const { return samples_.empty(); }
    std::size_t culmination_index() const { return culmination_; }
    const PassSample& culmination() const { return samples_.at(culmination_); }
    double start_s() const { return samples_.front().t_s; }
    double end_s() const { return samples_.back().t_s; }

    /// Linearly interpolated slant range, clamped to the sampled span.
    double range_at(double t_s) const;
    double elevation_at(double t_s) const;

private:
    double interpolate(double t_s, double PassSample::*field) const;

    std::vector<PassSample> samples_;
    double step_s_ = 0.0;
    std::size_t culmination_ = 0;
};

/// Slant range for a given elevation: sqrt(R^2 sin^2 E + 2 R h + h^2) - R sin E.
double slant_range_km(double elevation_deg, double altitude_km);

/// Earth central angle between site and sub-satellite point at a given elevation.
double central_angle_rad(double elevation_deg, double altitude_km);

PassGeometry propagate_pass(const GroundSite& site, const OrbitParams& orbit, double step_s = 0.1);

/// Contiguous span of samples with elevation >= min_elevation_deg.
TimeWindow efficient_window(const PassGeometry& pass, double min_elevation_deg);

/// Lowest threshold elevation whose efficient window is no longer than `duration_s`.
double min_elevation_for_duration(const PassGeometry& pass, double duration_s);

void write_pass_csv(std::ostream& os, const PassGeometry& pass);
PassGeometry read_pass_csv(std::istream& is);

}  // namespace qgs
