/**
 * @file mission.hpp
 * @brief End-to-end pass runs, batches and post-processing of recorded data.
 *
 * Run directory layout:
 *
 *     pass.csv  tracking.csv  tags.bin  satellite.csv  tally.txt  sifted.key  report.txt
 *
 * tags.bin holds the full ground record: the four quantum channels plus the
 * sync beacon and PPS.
 */

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qgs/keyrate.hpp"
#include "qgs/scenario.hpp"
#include "qgs/sifting.hpp"

namespace qgs {

struct PassReport {
    std::string label;
    std::string site;
    std::string date;
    double max_elevation_deg = 0.0;
    double min_elevation_deg = 0.0;  // threshold that defined the window
    double efficient_time_s = 0.0;
    std::uint64_t sifted_bits = 0;       // all intensities
    std::uint64_t key_bits = 0;          // signal-state bits entering the key
    std::optional<double> qber_signal;   // empty when nothing was checked
    std::uint64_t final_key_bits = 0;
    std::optional<double> tracking_rms_x_urad;  // empty for ingested data
    std::optional<double> tracking_rms_y_urad;
    std::optional<double> lost_track_s;
    std::optional<double> pointing_rms_urad;
    bool clock_locked = false;
    double clock_residual_ps = 0.0;
    double clock_offset_ps = 0.0;
    double clock_drift = 0.0;
    double link_loss_db_at_culmination = 0.0;
    double Y1_lower = 0.0;
    double e1_upper = 0.5;
    std::string no_key_reason;  // empty when a key was produced
};

void write_report(std::ostream& os, const PassReport& r);
PassReport read_report(std::istream& is);

/// Threshold elevation of the efficient window for this scenario.
double window_threshold(const PassGeometry& pass, const WindowSpec& w);

/// Geometry, star calibration and tracking of a scenario: everything that
/// precedes the photon simulation.
struct PassSetup {
    PassGeometry pass;
    double threshold_deg = 0.0;
    TimeWindow window;
    double pointing_rms_urad = 0.0;
    TrackingRecord tracking;
};

PassSetup prepare_pass(const Scenario& s);

/// Clock recovery, sifting and key length on a recorded pass.
struct PostResult {
    std::optional<ClockSolution> clock;
    SiftResult sift;
    DecoyBounds bounds;
    std::uint64_t final_key_bits = 0;
    std::string no_key_reason;
};

PostResult postprocess(const PassGeometry& pass, const TimeWindow& window, const TimeTagStream& ground,
                       const SatelliteRecord& sat, const Scenario& s);

/// Full simulation of one pass. Artifacts go to `out_dir` when given.
PassReport run_scenario(const Scenario& s, const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Post-process externally supplied files; the scenario supplies site, orbit,
/// window rule, scheme, sifting and security settings.
PassReport ingest(const std::filesystem::path& tags, const std::filesystem::path& satellite, const Scenario& s,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// All scenarios are validated (and labels checked for uniqueness) before the
/// first run starts. Each run writes to out_dir/<label>; summary.csv is written
/// to out_dir after all runs finish. Reports come back in input order.
std::vector<PassReport> run_batch(const std::vector<Scenario>& scenarios,
                                  const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                  unsigned jobs = 1);

/// Every *.json file in `dir`, sorted by file name.
std::vector<Scenario> load_scenario_dir(const std::filesystem::path& dir);

/// `label,site,date,max_elev_deg,T_s,S_bits,QBER,K_bits`
void write_summary_csv(std::ostream& os, const std::vector<PassReport>& reports);

}  // namespace qgs
