/**
 * @file tracking.hpp
 * @brief Two-axis direct-drive mount with a double closed-loop servo.
 *
 * Outer loop: position. Each tracking-camera frame refreshes a correction to
 * the predicted trajectory, (encoder reading + measured offset - predicted
 * target); between frames the correction is held. The position error
 * (predicted target + correction - encoder) becomes a proportional rate
 * command on top of the trajectory rate feed-forward.
 *
 * Inner loop: speed. A second-order rate follower with natural frequency
 * `speed_loop_gain` and damping `speed_loop_damping`, with trajectory
 * acceleration feed-forward, saturated at `max_accel` and `max_rate`.
 *
 * Camera X is cross-elevation (dAz cos el), camera Y is elevation.
 */

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "qgs/common.hpp"
#include "qgs/pass_geometry.hpp"

namespace qgs {

struct ServoParams {
    double position_loop_gain = 5.0;   // 1/s
    double speed_loop_gain = 50.0;     // rad/s
    double speed_loop_damping = 1.0;
    double max_accel_deg_s2 = 30.0;
    double max_rate_deg_s = 20.0;
    int encoder_bits = 26;
    double camera_noise_rms_urad = 5.0;
    double camera_rate_hz = 50.0;
    double disturbance_rms_urad = 10.0;
    double disturbance_bandwidth_hz = 2.0;
    double loop_dt_s = 1e-3;
    double record_interval_s = 0.01;
    /// Pointing offset left after beacon acquisition, before closed-loop tracking.
    double initial_offset_deg = 0.1;

    void validate() const;
    double encoder_step_deg() const;
};

/// Pointing error beyond which the beacon leaves the guiding field.
inline constexpr double kLostTrackDeg = 0.5;

class LimitError : public Error {
public:
    using Error::Error;
};

struct AxisState {
    double position_deg = 0.0;
    double rate_deg_s = 0.0;
    double accel_deg_s2 = 0.0;
    /// Measured minus predicted target, refreshed on every camera frame.
    double correction_deg = 0.0;
};

struct ServoState {
    AxisState az;
    AxisState el;
    double time_s = 0.0;
    /// Set once the position error seen by the servo exceeds kLostTrackDeg.
    bool lost_track = false;
};

/// Reference trajectory sample with feed-forward derivatives (zero if unknown).
struct TargetSample {
    double az_deg = 0.0;
    double el_deg = 0.0;
    double az_rate_deg_s = 0.0;
    double el_rate_deg_s = 0.0;
    double az_accel_deg_s2 = 0.0;
    double el_accel_deg_s2 = 0.0;
};

struct CameraOffset {
    double x_urad;
    double y_urad;
};

/// Encoder reading of an axis angle.
double quantize_encoder(double angle_deg, const ServoParams& p);

/// Mount at rest at (az, el) with no trajectory correction.
ServoState make_servo_state(double az_deg, double el_deg, const ServoParams& p);

/// Advance the servo by dt. `camera` is present on frames where the tracking
/// camera delivered a new offset measurement. Throws LimitError when the
/// target lies outside the mount's travel.
ServoState step_servo(const ServoState& state, const ServoParams& p, const TargetSample& target,
                      const std::optional<CameraOffset>& camera, double dt);

/// Line-of-sight error (target minus mount) in camera coordinates, urad.
CameraOffset pointing_error(const ServoState& state, const TargetSample& target);

struct TrackingSample {
    double t_s;
    double err_x_urad;
    double err_y_urad;
    double elevation_deg;
};

struct TrackingRecord {
    std::vector<TrackingSample> samples;
    double rms_x_urad = 0.0;
    double rms_y_urad = 0.0;
    std::optional<double> lost_track_s;

    /// Combined pointing error nearest to `t_s` (0 when outside the record).
    double error_at(double t_s) const;
};

/// Per-axis RMS of a sample column set.
void compute_rms(TrackingRecord& rec);

/// Track the whole pass; samples are kept only inside `window`.
TrackingRecord simulate_tracking(const PassGeometry& pass, const ServoParams& p, const TimeWindow& window,
                                 std::uint64_t seed);

struct HwpSample {
    double t_s;
    double angle_deg;  // commanded half-wave-plate angle, unwrapped
    double drift_deg;  // open-loop residual
};

/// Half-wave-plate program compensating the rotation of the satellite's
/// polarization frame (referenced to its velocity vector) as seen in the
/// telescope frame, plus a linear open-loop drift reaching +-max_drift_deg at
/// the pass ends.
std::vector<HwpSample> hwp_trajectory(const PassGeometry& pass, double max_drift_deg = 0.3);

/// QBER contribution of a half-wave-plate misalignment: sin^2(2 drift).
double hwp_error_probability(double drift_deg);

void write_tracking_csv(std::ostream& os, const TrackingRecord& rec);

}  // namespace qgs
