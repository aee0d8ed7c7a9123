/**
 * @file scenario.hpp
 * @brief One pass worth of configuration, read from a versioned JSON file.
 *
 * Every section is optional and falls back to the library defaults; unknown
 * keys are rejected. The background model defaults to the preset of the
 * site's environment, and its dark-count term always comes from `detectors`.
 */

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "qgs/keyrate.hpp"
#include "qgs/link_channel.hpp"
#include "qgs/pass_geometry.hpp"
#include "qgs/pointing.hpp"
#include "qgs/quantum_layer.hpp"
#include "qgs/sifting.hpp"
#include "qgs/tracking.hpp"

namespace qgs {

inline constexpr int kScenarioFormatVersion = 1;

/// Efficient-window rule: a fixed elevation threshold, or the threshold that
/// yields a given duration.
struct WindowSpec {
    double min_elevation_deg = 20.0;
    std::optional<double> target_duration_s;
};

/// Synthetic star calibration run before the pass.
struct PointingSetup {
    std::size_t n_stars = 20;
    std::size_t holdout_stars = 78;
    double noise_urad = 30.0;
    PointingCoefficients truth{120.0, -45.0, 30.0, 15.0, 25.0, -20.0, 10.0};
};

/// Published figures the scenario is meant to reproduce (comparison only).
struct ReferenceFigures {
    std::optional<double> T_s;
    std::optional<double> S_bits;
    std::optional<double> qber;
    std::optional<double> K_bits;
};

struct Scenario {
    std::string label;
    std::string date;
    std::string calibration_note;
    std::uint64_t seed = 1;
    GroundSite site;
    OrbitParams orbit;
    WindowSpec window;
    LinkBudgetParams link;
    BackgroundModel background;
    DecoyScheme scheme;
    DetectorParams detectors;
    PolarizationModel polarization;
    ServoParams servo;
    SyncParams sync;
    ClockModel clock;
    SiftParams sifting;
    SecurityParams security;
    PointingSetup pointing;
    ReferenceFigures reference;

    /// Throws ValidationError naming the offending field path.
    void validate() const;
    QuantumConfig quantum() const;
};

Scenario parse_scenario(const std::string& json_text);
std::string scenario_to_json(const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const std::filesystem::path& path, const Scenario& s);

}  // namespace qgs
