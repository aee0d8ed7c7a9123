#include "qgs/tracking.hpp"

#include <algorithm>
#include <array>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "qgs/rng.hpp"

namespace qgs {

namespace {

constexpr double kElMin = -3.0;
constexpr double kElMax = 93.0;
constexpr double kAzLimit = 270.0;

void check_limits(const TargetSample& t) {
    if (!(t.el_deg > kElMin && t.el_deg < kElMax))
        throw LimitError("target elevation " + std::to_string(t.el_deg) + " deg outside mount range (-3, 93)");
    if (!(t.az_deg > -kAzLimit && t.az_deg < kAzLimit))
        throw LimitError("target azimuth " + std::to_string(t.az_deg) + " deg outside mount range (-270, 270)");
}

void step_axis(AxisState& a, const ServoParams& p, double target, double target_rate, double target_accel,
               std::optional<double> measured_offset, double dt) {
    const double enc = quantize_encoder(a.position_deg, p);
    if (measured_offset) a.correction_deg = enc + *measured_offset - target;
    const double pos_err = target + a.correction_deg - enc;
    const double rate_cmd = target_rate + p.position_loop_gain * pos_err;

    const double wn = p.speed_loop_gain;
    const double jerk =
        wn * wn * (rate_cmd - a.rate_deg_s) - 2.0 * p.speed_loop_damping * wn * (a.accel_deg_s2 - target_accel);
    a.accel_deg_s2 = std::clamp(a.accel_deg_s2 + jerk * dt, -p.max_accel_deg_s2, p.max_accel_deg_s2);
    a.rate_deg_s = std::clamp(a.rate_deg_s + a.accel_deg_s2 * dt, -p.max_rate_deg_s, p.max_rate_deg_s);
    a.position_deg += a.rate_deg_s * dt;
}

// Wrap an azimuth sequence onto a continuous branch.
std::vector<double> unwrap_deg(const std::vector<double>& a, double period) {
    std::vector<double> out(a.size());
    if (a.empty()) return out;
    out[0] = a[0];
    for (std::size_t i = 1; i < a.size(); ++i) {
        double v = a[i];
        while (v - out[i - 1] > 0.5 * period) v -= period;
        while (v - out[i - 1] < -0.5 * period) v += period;
        out[i] = v;
    }
    return out;
}

class Trajectory {
public:
    explicit Trajectory(const PassGeometry& pass) {
        const auto& s = pass.samples();
        std::vector<double> az(s.size());
        std::vector<double> el(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            az[i] = s[i].azimuth_deg;
            el[i] = s[i].elevation_deg;
        }
        az = unwrap_deg(az, 360.0);
        // Keep the branch inside the mount's azimuth travel.
        const double mid = 0.5 * (*std::min_element(az.begin(), az.end()) + *std::max_element(az.begin(), az.end()));
        const double shift = 360.0 * std::round(mid / 360.0);
        for (auto& v : az) v -= shift;
        az_ = Spline(az.begin(), az.end(), pass.start_s(), pass.step_s());
        el_ = Spline(el.begin(), el.end(), pass.start_s(), pass.step_s());
    }

    TargetSample at(double t) const {
        return {az_(t), el_(t), az_.prime(t), el_.prime(t), az_.double_prime(t), el_.double_prime(t)};
    }

private:
    using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;
    Spline az_;
    Spline el_;
};

// First-order Gauss-Markov process with a given stationary RMS and corner.
class Disturbance {
public:
    Disturbance(double rms, double corner_hz, double dt)
        : a_(std::exp(-2.0 * kPi * corner_hz * dt)), drive_(rms * std::sqrt(1.0 - a_ * a_)), x_(0.0) {}

    void start(rng::Engine& g) { x_ = drive_ > 0.0 ? std::sqrt(1.0 / (1.0 - a_ * a_)) * drive_ * n_(g) : 0.0; }
    double next(rng::Engine& g) {
        if (drive_ > 0.0) x_ = a_ * x_ + drive_ * n_(g);
        return x_;
    }

private:
    double a_;
    double drive_;
    double x_;
    std::normal_distribution<double> n_{0.0, 1.0};
};

}  // namespace

void ServoParams::validate() const {
    require(position_loop_gain > 0.0 && std::isfinite(position_loop_gain), "servo.position_loop_gain", "must be > 0");
    require(speed_loop_gain > 0.0 && std::isfinite(speed_loop_gain), "servo.speed_loop_gain", "must be > 0");
    require(speed_loop_damping > 0.0 && std::isfinite(speed_loop_damping), "servo.speed_loop_damping",
            "must be > 0");
    require(max_accel_deg_s2 > 0.0 && std::isfinite(max_accel_deg_s2), "servo.max_accel_deg_s2", "must be > 0");
    require(max_rate_deg_s > 0.0 && std::isfinite(max_rate_deg_s), "servo.max_rate_deg_s", "must be > 0");
    require(encoder_bits >= 16 && encoder_bits <= 32, "servo.encoder_bits", "must be in [16, 32]");
    require(camera_noise_rms_urad >= 0.0 && std::isfinite(camera_noise_rms_urad), "servo.camera_noise_rms_urad",
            "must be >= 0");
    require(camera_rate_hz > 0.0 && std::isfinite(camera_rate_hz), "servo.camera_rate_hz", "must be > 0");
    require(disturbance_rms_urad >= 0.0 && std::isfinite(disturbance_rms_urad), "servo.disturbance_rms_urad",
            "must be >= 0");
    require(disturbance_bandwidth_hz > 0.0 && std::isfinite(disturbance_bandwidth_hz),
            "servo.disturbance_bandwidth_hz", "must be > 0");
    require(loop_dt_s > 0.0 && loop_dt_s <= 0.1, "servo.loop_dt_s", "must be in (0, 0.1]");
    require(camera_rate_hz * loop_dt_s <= 1.0, "servo.camera_rate_hz", "must not exceed the loop rate");
    require(record_interval_s >= loop_dt_s && std::isfinite(record_interval_s), "servo.record_interval_s",
            "must be >= loop_dt_s");
    require(initial_offset_deg >= 0.0 && initial_offset_deg < kLostTrackDeg, "servo.initial_offset_deg",
            "must be in [0, 0.5)");
}

double ServoParams::encoder_step_deg() const { return 360.0 / std::ldexp(1.0, encoder_bits); }

double quantize_encoder(double angle_deg, const ServoParams& p) {
    const double q = p.encoder_step_deg();
    return std::round(angle_deg / q) * q;
}

ServoState make_servo_state(double az_deg, double el_deg, const ServoParams&) {
    ServoState s;
    s.az.position_deg = az_deg;
    s.el.position_deg = el_deg;
    return s;
}

ServoState step_servo(const ServoState& state, const ServoParams& p, const TargetSample& target,
                      const std::optional<CameraOffset>& camera, double dt) {
    require(dt > 0.0, "dt", "must be > 0");
    check_limits(target);
    ServoState s = state;
    const double cos_el = std::max(std::cos(deg2rad(target.el_deg)), 1e-6);
    std::optional<double> daz;
    std::optional<double> del;
    if (camera) {
        daz = urad2deg(camera->x_urad) / cos_el;
        del = urad2deg(camera->y_urad);
    }
    step_axis(s.az, p, target.az_deg, target.az_rate_deg_s, target.az_accel_deg_s2, daz, dt);
    step_axis(s.el, p, target.el_deg, target.el_rate_deg_s, target.el_accel_deg_s2, del, dt);
    s.time_s += dt;

    const double ex = (target.az_deg + s.az.correction_deg - quantize_encoder(s.az.position_deg, p)) * cos_el;
    const double ey = target.el_deg + s.el.correction_deg - quantize_encoder(s.el.position_deg, p);
    if (std::hypot(ex, ey) > kLostTrackDeg) s.lost_track = true;
    return s;
}

CameraOffset pointing_error(const ServoState& state, const TargetSample& target) {
    const double cos_el = std::cos(deg2rad(target.el_deg));
    return {deg2urad(target.az_deg - state.az.position_deg) * cos_el,
            deg2urad(target.el_deg - state.el.position_deg)};
}

double TrackingRecord::error_at(double t_s) const {
    if (samples.empty() || t_s < samples.front().t_s || t_s > samples.back().t_s) return 0.0;
    auto it = std::lower_bound(samples.begin(), samples.end(), t_s,
                               [](const TrackingSample& s, double t) { return s.t_s < t; });
    if (it == samples.end()) it = std::prev(samples.end());
    if (it != samples.begin() && (t_s - std::prev(it)->t_s) < (it->t_s - t_s)) it = std::prev(it);
    return std::hypot(it->err_x_urad, it->err_y_urad);
}

void compute_rms(TrackingRecord& rec) {
    if (rec.samples.empty()) {
        rec.rms_x_urad = rec.rms_y_urad = 0.0;
        return;
    }
    double sx = 0.0;
    double sy = 0.0;
    for (const auto& s : rec.samples) {
        sx += s.err_x_urad * s.err_x_urad;
        sy += s.err_y_urad * s.err_y_urad;
    }
    const auto n = static_cast<double>(rec.samples.size());
    rec.rms_x_urad = std::sqrt(sx / n);
    rec.rms_y_urad = std::sqrt(sy / n);
}

TrackingRecord simulate_tracking(const PassGeometry& pass, const ServoParams& p, const TimeWindow& window,
                                 std::uint64_t seed) {
    require(pass.samples().size() >= 4, "pass", "needs at least 4 samples");
    p.validate();
    const Trajectory traj(pass);
    auto gen = rng::engine(seed, rng::kStreamTracking);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 2.0 * kPi);

    const double dt = p.loop_dt_s;
    const auto frame_every = std::max<long>(1, std::lround(1.0 / (p.camera_rate_hz * dt)));
    const auto record_every = std::max<long>(1, std::lround(p.record_interval_s / dt));

    // Residual offset left by acquisition.
    TargetSample tgt = traj.at(pass.start_s());
    const double phase = uniform(gen);
    const double cos_el0 = std::cos(deg2rad(tgt.el_deg));
    ServoState state = make_servo_state(tgt.az_deg + p.initial_offset_deg * std::cos(phase) / cos_el0,
                                        tgt.el_deg + p.initial_offset_deg * std::sin(phase), p);

    Disturbance dist_x(p.disturbance_rms_urad, p.disturbance_bandwidth_hz, dt);
    Disturbance dist_y(p.disturbance_rms_urad, p.disturbance_bandwidth_hz, dt);
    dist_x.start(gen);
    dist_y.start(gen);
    double jx = 0.0;
    double jy = 0.0;

    TrackingRecord rec;
    const auto steps = static_cast<long>(std::floor((pass.end_s() - pass.start_s()) / dt));
    for (long k = 0; k <= steps; ++k) {
        const double t = pass.start_s() + static_cast<double>(k) * dt;
        tgt = traj.at(t);
        // Line-of-sight error including the optical disturbance.
        const auto mech = pointing_error(state, tgt);
        const double ex = mech.x_urad - jx;
        const double ey = mech.y_urad - jy;

        if (!rec.lost_track_s && std::hypot(ex, ey) > deg2urad(kLostTrackDeg)) rec.lost_track_s = t;
        if (k % record_every == 0 && window.contains(t)) rec.samples.push_back({t, ex, ey, tgt.el_deg});

        std::optional<CameraOffset> cam;
        if (k % frame_every == 0)
            cam = CameraOffset{ex + p.camera_noise_rms_urad * normal(gen), ey + p.camera_noise_rms_urad * normal(gen)};
        state = step_servo(state, p, tgt, cam, dt);
        jx = dist_x.next(gen);
        jy = dist_y.next(gen);
    }
    compute_rms(rec);
    return rec;
}

std::vector<HwpSample> hwp_trajectory(const PassGeometry& pass, double max_drift_deg) {
    require(!pass.empty(), "pass", "must not be empty");
    require(max_drift_deg >= 0.0 && max_drift_deg < 45.0, "max_drift_deg", "must be in [0, 45)");
    const auto& s = pass.samples();
    const std::size_t n = s.size();
    using Vec = std::array<double, 3>;
    auto cross = [](const Vec& a, const Vec& b) -> Vec {
        return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
    };
    auto dot = [](const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; };

    std::vector<Vec> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double el = deg2rad(s[i].elevation_deg);
        const double az = deg2rad(s[i].azimuth_deg);
        const double r = s[i].range_km;
        pos[i] = {r * std::cos(el) * std::sin(az), r * std::cos(el) * std::cos(az), r * std::sin(el)};
    }

    const double tc = pass.culmination().t_s;
    const double half = std::max({tc - pass.start_s(), pass.end_s() - tc, 1e-9});
    std::vector<HwpSample> out;
    out.reserve(n);
    Vec h_prev{1.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i == 0 ? 0 : i - 1;
        const std::size_t hi = i + 1 == n ? i : i + 1;
        Vec v{pos[hi][0] - pos[lo][0], pos[hi][1] - pos[lo][1], pos[hi][2] - pos[lo][2]};
        const double r = std::sqrt(dot(pos[i], pos[i]));
        const Vec u{pos[i][0] / r, pos[i][1] / r, pos[i][2] / r};
        // Horizontal axis of the telescope image; undefined exactly at zenith.
        Vec h{-u[1], u[0], 0.0};
        const double hn = std::hypot(h[0], h[1]);
        if (hn < 1e-9) {
            h = h_prev;
        } else {
            h = {h[0] / hn, h[1] / hn, 0.0};
        }
        h_prev = h;
        const Vec vert = cross(u, h);
        const double vu = dot(v, u);
        for (int k = 0; k < 3; ++k) v[k] -= vu * u[k];
        const double phi = rad2deg(std::atan2(dot(v, vert), dot(v, h)));

        double angle = -0.5 * phi;
        if (!out.empty()) {
            const double prev = out.back().angle_deg;
            while (angle - prev > 45.0) angle -= 90.0;
            while (angle - prev < -45.0) angle += 90.0;
        }
        out.push_back({s[i].t_s, angle, max_drift_deg * (s[i].t_s - tc) / half});
    }
    return out;
}

double hwp_error_probability(double drift_deg) {
    const double x = std::sin(2.0 * deg2rad(drift_deg));
    return x * x;
}

void write_tracking_csv(std::ostream& os, const TrackingRecord& rec) {
    os << "t_s,err_x_urad,err_y_urad,elevation_deg\n";
    char buf[160];
    for (const auto& s : rec.samples) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", s.t_s, s.err_x_urad, s.err_y_urad,
                      s.elevation_deg);
        os << buf;
    }
}

}  // namespace qgs
