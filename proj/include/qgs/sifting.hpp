/**
 * @file sifting.hpp
 * @brief Clock recovery from the beacon, slot matching, basis sifting and the
 *        per-intensity tally.
 */

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qgs/pass_geometry.hpp"
#include "qgs/quantum_layer.hpp"

namespace qgs {

struct ClockSolution {
    double offset_ps = 0.0;
    double drift = 0.0;
    double residual_rms_ps = 0.0;
    std::size_t pairs = 0;

    /// Ground tag to true time.
    double to_true(double ground_ps) const { return (ground_ps - offset_ps) / (1.0 + drift); }
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class AmbiguousLockError : public Error {
public:
    using Error::Error;
};

class UndefinedQberError : public Error {
public:
    using Error::Error;
};

inline constexpr std::size_t kMinSyncPairs = 100;

/// Coarse lock (PPS when present, then a 1 us histogram of beacon residuals
/// modulo the beacon period), then iterated gated regression of ground tag on
/// true arrival time.
ClockSolution solve_clock(const TimeTagStream& ground, const SyncSchedule& schedule, const PassGeometry& pass);

enum class ErrorEstimation { sidecar, sampled };
std::string to_string(ErrorEstimation e);
ErrorEstimation error_estimation_from_string(const std::string& s);

struct SiftParams {
    double window_ps = 2000.0;
    /// `sidecar` compares every sifted bit (simulation only); `sampled`
    /// discloses a random fraction of signal bits and drops them from the key.
    ErrorEstimation error_estimation = ErrorEstimation::sidecar;
    double sample_fraction = 0.1;

    void validate(double pulse_period_ps) const;
};

struct IntensityTally {
    std::uint64_t n_sent = 0;
    std::uint64_t n_detected = 0;         // matched slots before sifting
    std::uint64_t n_detected_sifted = 0;  // bases agree
    std::uint64_t n_errors_sifted = 0;    // among checked bits
    std::uint64_t n_checked = 0;          // sifted bits compared with the satellite

    friend bool operator==(const IntensityTally&, const IntensityTally&) = default;
};

struct TallyCounts {
    std::array<IntensityTally, kIntensities> per{};
    std::array<double, kIntensities> mu{0.8, 0.1, 0.0};
    double window_ps = 2000.0;
    ErrorEstimation error_estimation = ErrorEstimation::sidecar;
    std::uint64_t key_bits = 0;  // signal-state sifted bits kept for the key

    void validate() const;
    std::uint64_t sifted_total() const;

    friend bool operator==(const TallyCounts&, const TallyCounts&) = default;
};

struct SiftResult {
    TallyCounts tally;
    std::vector<std::uint8_t> key;  // one bit per element
    std::uint64_t unmatched = 0;    // quantum events outside every window
};

/// Map each ground event to its nearest pulse slot, keep it if inside the
/// coincidence window, resolve multi-click slots at random and sift.
SiftResult match_and_sift(const TimeTagStream& ground, const SatelliteRecord& sat, const ClockSolution& clock,
                          const PassGeometry& pass, const DecoyScheme& scheme, const SiftParams& params,
                          std::uint64_t seed);

/// Error fraction among checked bits of one intensity.
double qber(const TallyCounts& tally, std::size_t intensity);

void write_tally(std::ostream& os, const TallyCounts& t);
TallyCounts read_tally(std::istream& is);

/// Pack bits MSB first, zero padded to a whole byte.
void write_key(std::ostream& os, const std::vector<std::uint8_t>& bits);

}  // namespace qgs
