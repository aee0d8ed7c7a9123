/**
 * @file quantum_layer.hpp
 * @brief Decoy-state BB84 downlink: pulse thinning, detection, background,
 *        synchronization beacon and the ground time tagger.
 *
 * Time bases. "True" time t is the pass time of PassGeometry. The satellite
 * clock is true time; pulse k leaves at k * period and arrives after the
 * light time for the range at emission. The ground tagger reads
 *
 *     g = round_tdc(t * (1 + drift) + offset)
 *
 * Slots are simulated in 10 ms slices. Within a slice the channel is frozen
 * and detections are drawn by exact thinning: candidate slots are placed with
 * the largest per-pulse detection probability, then kept with probability
 * q_i / q_max once their intensity i is drawn. Only slots that matter for the
 * ground record are ever instantiated; the rest are counted per intensity.
 */

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "qgs/link_channel.hpp"
#include "qgs/pass_geometry.hpp"
#include "qgs/tracking.hpp"

namespace qgs {

inline constexpr std::size_t kIntensities = 3;
enum IntensityId : std::uint8_t { kSignal = 0, kDecoy = 1, kVacuum = 2 };

struct DecoyScheme {
    std::array<double, kIntensities> mu{0.8, 0.1, 0.0};
    std::array<double, kIntensities> prob{0.5, 0.25, 0.25};
    double pulse_rate_hz = 1e8;

    void validate() const;
    double period_ps() const { return kPsPerSecond / pulse_rate_hz; }
};

struct DetectorParams {
    double efficiency = 1.0;
    double dark_cps = 20.0;
    double dead_time_ns = 50.0;
    double jitter_rms_ps = 300.0;
    double tdc_resolution_ps = 50.0;

    void validate() const;
};

struct PolarizationModel {
    double intrinsic_error = 0.002;
    /// Largest open-loop half-wave-plate drift, reached at the pass ends.
    double hwp_max_drift_deg = 0.3;

    void validate() const;
    /// Detector-side bit-flip probability at a given HWP drift.
    double error_at(double drift_deg) const;
};

/// Ground clock relative to true time.
struct ClockModel {
    double offset_ps = 0.0;
    double drift = 0.0;

    void validate() const;
    double ground_time(double true_ps) const { return true_ps * (1.0 + drift) + offset_ps; }
};

struct SyncParams {
    double rate_hz = 1e4;
    double detection_prob = 1.0;
    double dark_cps = 200.0;
    double jitter_rms_ps = 300.0;
    bool pps = true;
    double pps_jitter_ps = 20000.0;
    /// Extra beacon coverage on both sides of the efficient window.
    double margin_s = 1.0;
    double dead_time_ns = 50.0;
    double tdc_resolution_ps = 50.0;

    void validate() const;
    double period_ps() const { return kPsPerSecond / rate_hz; }
};

enum class Channel : std::uint8_t { H = 0, V = 1, D = 2, A = 3, sync = 4, pps = 5 };
inline constexpr std::uint8_t kChannelCount = 6;

struct TimeTag {
    std::uint64_t time_ps;
    std::uint8_t channel;

    friend bool operator==(const TimeTag&, const TimeTag&) = default;
};
using TimeTagStream = std::vector<TimeTag>;

/// Ground truth for one event, for oracle tests only.
struct EventTruth {
    std::int64_t slot;  // -1 for sync/pps
    bool from_signal;
};

struct SatelliteEntry {
    std::uint64_t pulse_index;
    std::uint8_t basis;  // 0 = H/V, 1 = D/A
    std::uint8_t bit;
    std::uint8_t intensity;

    friend bool operator==(const SatelliteEntry&, const SatelliteEntry&) = default;
};

/// What the satellite discloses for one pass: the slot range it transmitted
/// in, how many pulses of each intensity, and the state of every slot the
/// ground reported a detection in.
struct SatelliteRecord {
    std::uint64_t first_slot = 0;
    std::uint64_t last_slot = 0;
    std::array<std::uint64_t, kIntensities> sent{};
    std::vector<SatelliteEntry> entries;  // sorted by pulse_index, unique

    const SatelliteEntry* find(std::uint64_t slot) const;
};

struct QuantumOutput {
    TimeTagStream events;        // quantum channels only, sorted
    std::vector<EventTruth> truth;  // parallel to events
    SatelliteRecord satellite;
};

/// Satellite beacon schedule: pulse k is emitted at k * period_ps.
struct SyncSchedule {
    std::uint64_t first_pulse = 0;
    std::uint64_t pulse_count = 0;
    double period_ps = 1e8;
};

struct SyncOutput {
    TimeTagStream events;  // sync and pps channels, sorted
    SyncSchedule schedule;
};

/// Channel state on one slice.
struct SliceChannel {
    double eta;          // total transmittance incl. detector efficiency
    double noise_cps;    // per detector
    double error_prob;   // bit flip when bases match
};

/// Everything the photon simulation needs besides the geometry.
struct QuantumConfig {
    DecoyScheme scheme;
    LinkBudgetParams link;
    BackgroundModel background;
    DetectorParams detectors;
    PolarizationModel polarization;
    ClockModel clock;
    double slice_s = 0.01;
};

/// Evaluate the channel at true time t. Pointing error from `tracking` if given.
SliceChannel slice_channel(const PassGeometry& pass, const TrackingRecord* tracking,
                           const std::vector<HwpSample>& hwp, const QuantumConfig& cfg, double t_s);

/// Per-pulse detection probability excluding background: 1 - exp(-mu eta).
double signal_gain(double mu, double eta);

/// Simulate every pulse emitted inside `window` (emission time).
QuantumOutput simulate_pass(const PassGeometry& pass, const TimeWindow& window, const TrackingRecord* tracking,
                            const QuantumConfig& cfg, std::uint64_t seed);

/// Beacon pulses covering the window plus margin, clipped to the pass.
SyncSchedule sync_schedule(const PassGeometry& pass, const TimeWindow& window, const SyncParams& sync);

/// Beacon train over sync_schedule(), and PPS markers.
SyncOutput generate_sync(const PassGeometry& pass, const TimeWindow& window, const SyncParams& sync,
                         const ClockModel& clock, std::uint64_t seed);

/// Stable merge of sorted streams by (time, channel).
TimeTagStream merge_streams(const TimeTagStream& a, const TimeTagStream& b);

/// Signal pulse emission to ground arrival in true time, ps.
double arrival_true_ps(const PassGeometry& pass, double emit_ps);

/// Inverse of arrival_true_ps.
double emission_true_ps(const PassGeometry& pass, double arrival_ps);

/// Expected post-sifting counts, without Monte Carlo noise.
struct ExpectedCounts {
    std::array<double, kIntensities> sent{};
    std::array<double, kIntensities> sifted{};
    std::array<double, kIntensities> errors{};
};

ExpectedCounts expected_counts(const PassGeometry& pass, const TimeWindow& window, const TrackingRecord* tracking,
                               const QuantumConfig& cfg, double coincidence_window_ps);

}  // namespace qgs
