/**
 * @file link_channel.hpp
 * @brief Downlink transmittance, sky background and the star-based
 *        efficiency self-test.
 */

#pragma once

#include "qgs/pass_geometry.hpp"

namespace qgs {

struct LinkBudgetParams {
    double tx_divergence_urad = 10.0;  // full angle, top-hat far field
    double rx_aperture_m = 0.28;
    double receiver_efficiency = 0.40;
    double zenith_transmittance = 0.75;
    double fov_urad = 100.0;
    double filter_bandwidth_nm = 1.0;
    /// I-band photon irradiance of a magnitude-0 star, photons / (s cm^2 A).
    double star_zero_point = 2550.0;

    void validate() const;
};

struct BackgroundModel {
    double base_rate_cps = 50.0;
    double low_elevation_rate_cps = 100.0;
    double elevation_knee_deg = 15.0;
    double detector_dark_cps = 20.0;

    void validate() const;

    /// Per-detector sky background typical of each site class (dark counts
    /// supplied separately).
    static BackgroundModel preset(Environment env, double detector_dark_cps);
};

/// Multiplicative terms of the link. `total()` is their product.
struct LinkTerms {
    double geometric = 1.0;
    double atmospheric = 1.0;
    double receiver = 1.0;
    double pointing = 1.0;

    double total() const { return geometric * atmospheric * receiver * pointing; }
};

LinkTerms link_terms(double range_km, double elevation_deg, const LinkBudgetParams& p, double pointing_err_urad);

double channel_transmittance(double range_km, double elevation_deg, const LinkBudgetParams& p,
                             double pointing_err_urad);

/// Loss in dB (positive) for a transmittance in (0, 1]; +inf for zero.
double loss_db(double transmittance);

/// Noise counts per detector, dark counts included.
double background_rate(double elevation_deg, const BackgroundModel& m);

/// Detector count rate expected when the telescope is pointed at a star of the
/// given I-band magnitude.
double star_calibration_rate(double i_band_magnitude, const LinkBudgetParams& p, double elevation_deg);

}  // namespace qgs
