/**
 * @file pointing.hpp
 * @brief Alt-az mount pointing model and its least-squares calibration from
 *        star observations.
 *
 * Seven geometric terms (arcsec):
 *
 *     dAz cos(el) = IA cos(el) - CA - NPAE sin(el) - AN sin(az) sin(el) - AW cos(az) sin(el)
 *     dEl         = IE + AN cos(az) - AW sin(az) + TF cos(el)
 *
 * Camera offsets are reported as (dx, dy) = (dAz cos(el), dEl) in microradians.
 * Refraction is not modeled.
 */

#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qgs/common.hpp"

namespace qgs {

struct PointingCoefficients {
    double IA = 0.0;
    double IE = 0.0;
    double CA = 0.0;
    double NPAE = 0.0;
    double AN = 0.0;
    double AW = 0.0;
    double TF = 0.0;

    static constexpr std::size_t kTerms = 7;
    static const std::array<const char*, kTerms>& names();

    std::array<double, kTerms> as_array() const { return {IA, IE, CA, NPAE, AN, AW, TF}; }
    static PointingCoefficients from_array(const std::array<double, kTerms>& a);

    void validate() const;
};

struct MountCorrection {
    double daz_urad;
    double del_urad;
};

struct StarObservation {
    double az_deg;
    double el_deg;
    double dx_urad;
    double dy_urad;

    void validate() const;
};

struct PointingFit {
    PointingCoefficients coefficients;
    double rms_residual_urad;
};

/// Thrown when the star geometry cannot separate some combination of terms.
class DegenerateGeometryError : public Error {
public:
    DegenerateGeometryError(const std::string& combination)
        : Error("degenerate star geometry: cannot separate " + combination),
          combination_(combination) {}
    const std::string& combination() const noexcept { return combination_; }

private:
    std::string combination_;
};

/// Model corrections at (az, el). Throws ValidationError for el >= 89.5 deg.
MountCorrection apply_model(const PointingCoefficients& c, double az_deg, double el_deg);

/// Offsets (dx, dy) the tracking camera would report for a perfectly known star.
StarObservation predict_observation(const PointingCoefficients& c, double az_deg, double el_deg);

PointingFit fit_model(std::span<const StarObservation> obs);

/// RMS over stars of the residual offset magnitude sqrt(rx^2 + ry^2).
double pointing_rms(const PointingCoefficients& c, std::span<const StarObservation> holdout);

/// Stars scattered uniformly over the sky (azimuth in [-180, 180)) between 10 and 85 degrees elevation,
/// observed through mount `truth` with Gaussian camera noise per axis.
std::vector<StarObservation> synthetic_stars(const PointingCoefficients& truth, std::size_t count,
                                             double noise_urad, std::mt19937_64& gen);

void write_star_csv(std::ostream& os, std::span<const StarObservation> obs);
std::vector<StarObservation> read_star_csv(std::istream& is);

void write_coefficients(std::ostream& os, const PointingCoefficients& c);
PointingCoefficients read_coefficients(std::istream& is);

}  // namespace qgs
