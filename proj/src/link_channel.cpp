#include "qgs/link_channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qgs/common.hpp"

namespace qgs {

namespace {

void require_fraction(double v, const char* field) {
    require_finite(v, field);
    require(v > 0.0 && v <= 1.0, field, "must be in (0, 1]");
}

double airmass_transmittance(double zenith_transmittance, double elevation_deg) {
    return std::pow(zenith_transmittance, 1.0 / std::sin(deg2rad(elevation_deg)));
}

}  // namespace

void LinkBudgetParams::validate() const {
    require_finite(tx_divergence_urad, "tx_divergence_urad");
    require(tx_divergence_urad > 0.0, "tx_divergence_urad", "must be > 0");
    require_finite(rx_aperture_m, "rx_aperture_m");
    require(rx_aperture_m > 0.0, "rx_aperture_m", "must be > 0");
    require_fraction(receiver_efficiency, "receiver_efficiency");
    require_fraction(zenith_transmittance, "zenith_transmittance");
    require_finite(fov_urad, "fov_urad");
    require(fov_urad > 0.0, "fov_urad", "must be > 0");
    require_finite(filter_bandwidth_nm, "filter_bandwidth_nm");
    require(filter_bandwidth_nm > 0.0, "filter_bandwidth_nm", "must be > 0");
    require_finite(star_zero_point, "star_zero_point");
    require(star_zero_point > 0.0, "star_zero_point", "must be > 0");
}

void BackgroundModel::validate() const {
    for (auto [v, name] : {std::pair{base_rate_cps, "base_rate_cps"},
                           std::pair{low_elevation_rate_cps, "low_elevation_rate_cps"},
                           std::pair{detector_dark_cps, "detector_dark_cps"}}) {
        require_finite(v, name);
        require(v >= 0.0, name, "must be >= 0");
    }
    require(low_elevation_rate_cps >= base_rate_cps, "low_elevation_rate_cps", "must be >= base_rate_cps");
    require_finite(elevation_knee_deg, "elevation_knee_deg");
    require(elevation_knee_deg > 0.0 && elevation_knee_deg <= 45.0, "elevation_knee_deg", "must be in (0, 45]");
}

BackgroundModel BackgroundModel::preset(Environment env, double detector_dark_cps) {
    switch (env) {
        case Environment::rural: return {50.0, 100.0, 15.0, detector_dark_cps};
        case Environment::urban: return {80.0, 2000.0 - detector_dark_cps, 15.0, detector_dark_cps};
        case Environment::coastal: return {70.0, 600.0, 15.0, detector_dark_cps};
        case Environment::high_altitude: return {40.0, 100.0, 15.0, detector_dark_cps};
    }
    return {};
}

LinkTerms link_terms(double range_km, double elevation_deg, const LinkBudgetParams& p, double pointing_err_urad) {
    if (!(elevation_deg > 0.0)) throw ValidationError("elevation_deg", "target is below the horizon");
    require(range_km > 0.0, "range_km", "must be > 0");
    require(pointing_err_urad >= 0.0, "pointing_err_urad", "must be >= 0");
    LinkTerms t;
    const double beam_diameter_m = p.tx_divergence_urad * 1e-6 * range_km * 1e3;
    const double ratio = p.rx_aperture_m / beam_diameter_m;
    t.geometric = std::min(1.0, ratio * ratio);
    t.atmospheric = airmass_transmittance(p.zenith_transmittance, elevation_deg);
    t.receiver = p.receiver_efficiency;
    t.pointing = pointing_err_urad <= 0.5 * p.fov_urad ? 1.0 : 0.0;
    return t;
}

double channel_transmittance(double range_km, double elevation_deg, const LinkBudgetParams& p,
                             double pointing_err_urad) {
    return link_terms(range_km, elevation_deg, p, pointing_err_urad).total();
}

double loss_db(double transmittance) {
    if (transmittance <= 0.0) return std::numeric_limits<double>::infinity();
    return transmittance >= 1.0 ? 0.0 : -10.0 * std::log10(transmittance);
}

double background_rate(double elevation_deg, const BackgroundModel& m) {
    require(elevation_deg > 0.0 && elevation_deg <= 90.0, "elevation_deg", "must be in (0, 90]");
    const double knee = m.elevation_knee_deg;
    double sky;
    if (elevation_deg < knee) {
        sky = m.low_elevation_rate_cps;
    } else if (elevation_deg < 2.0 * knee) {
        const double f = (elevation_deg - knee) / knee;
        sky = m.low_elevation_rate_cps + f * (m.base_rate_cps - m.low_elevation_rate_cps);
    } else {
        sky = m.base_rate_cps;
    }
    return sky + m.detector_dark_cps;
}

double star_calibration_rate(double i_band_magnitude, const LinkBudgetParams& p, double elevation_deg) {
    require_finite(i_band_magnitude, "i_band_magnitude");
    if (!(elevation_deg > 0.0)) throw ValidationError("elevation_deg", "star is below the horizon");
    const double radius_cm = 0.5 * p.rx_aperture_m * 100.0;
    const double area_cm2 = kPi * radius_cm * radius_cm;
    const double bandwidth_angstrom = p.filter_bandwidth_nm * 10.0;
    return p.star_zero_point * std::pow(10.0, -0.4 * i_band_magnitude) * area_cm2 * bandwidth_angstrom *
           p.receiver_efficiency * airmass_transmittance(p.zenith_transmittance, elevation_deg);
}

}  // namespace qgs
