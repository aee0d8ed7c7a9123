/**
 * @file keyrate.hpp
 * @brief Vacuum + weak decoy bounds and the finite-key length.
 *
 * Gains are per pulse sent and taken after sifting, so every yield below is a
 * sifted yield. Deviated quantities (in their pessimistic direction):
 * Q_nu lower, Q_mu upper, Y0 upper and lower, E_nu Q_nu upper. Half of
 * epsilon_total is split equally over these four; the key-length formula gets
 * a quarter each for smoothing and privacy amplification.
 */

#pragma once

#include <cstdint>
#include <string>

#include "qgs/sifting.hpp"

namespace qgs {

/// How observed frequencies are widened into confidence bounds.
enum class Concentration {
    kl,        // Chernoff-Hoeffding relative-entropy bound
    additive,  // Hoeffding: p +- sqrt(ln(2/eps) / 2n)
    none,      // infinite statistics
};
std::string to_string(Concentration c);
Concentration concentration_from_string(const std::string& s);

struct SecurityParams {
    double epsilon_total = 1e-5;
    double f_ec = 1.16;
    double qber_abort = 0.11;
    Concentration concentration = Concentration::kl;

    void validate() const;
    double epsilon_deviation() const { return epsilon_total / 8.0; }
    double epsilon_smooth() const { return epsilon_total / 4.0; }
    double epsilon_pa() const { return epsilon_total / 4.0; }
};

struct DecoyBounds {
    double Y0 = 0.0;
    double Y1_lower = 0.0;
    double e1_upper = 0.5;
    double Q1_lower = 0.0;
    double Qmu = 0.0;
    double Qnu = 0.0;
    double Emu = 0.0;
    double Enu = 0.0;
    bool key_possible = false;
    std::string no_key_reason;
};

/// Observed sifted rates of one pass.
struct ObservedRates {
    double mu = 0.8;
    double nu = 0.1;
    double Qmu = 0.0;
    double Qnu = 0.0;
    double Y0 = 0.0;
    double Emu = 0.0;
    double Enu = 0.0;
    double n_mu = 0.0;  // pulses sent per intensity
    double n_nu = 0.0;
    double n_0 = 0.0;
};

/// Binary entropy in bits; throws ValidationError outside [0, 1].
double binary_entropy(double x);

/// One-sided bounds on a Bernoulli rate observed as p_hat over n trials.
double rate_upper(double p_hat, double n, double eps, Concentration c);
double rate_lower(double p_hat, double n, double eps, Concentration c);

ObservedRates observed_rates(const TallyCounts& tally);

DecoyBounds decoy_bounds(const ObservedRates& obs, const SecurityParams& sec);
DecoyBounds decoy_bounds(const TallyCounts& tally, const SecurityParams& sec);

/// Final key length in bits for `n_sift` signal-state key bits.
std::uint64_t final_key_length(double n_sift, const DecoyBounds& b, const SecurityParams& sec);
std::uint64_t final_key_length(const TallyCounts& tally, const DecoyBounds& b, const SecurityParams& sec);

}  // namespace qgs
