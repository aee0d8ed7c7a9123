#pragma once

// Ideal decoy experiment with exact statistics, and the vacuum + weak decoy
// bounds summed photon number by photon number instead of through the gains.
// Yields are sifted (basis factor 1/2); background yield y0 has error 1/2.

#include <cmath>

#include "qgs/keyrate.hpp"

namespace qgs::test {

inline constexpr double kMu = 0.8;
inline constexpr double kNu = 0.1;

inline long double yield(int n, long double eta, long double y0) {
    return 0.5L * (1.0L - (1.0L - y0) * std::pow(1.0L - eta, n));
}

inline long double error_yield(int n, long double eta, long double y0, long double e_det) {
    const long double b = 0.5L * y0;
    return 0.5L * b + e_det * (yield(n, eta, y0) - b);
}

// Y1_lower = Y1 + sum_{n>=2} Y_n (nu^n - nu^2 mu^(n-2)) / n! / (nu - nu^2/mu)
inline long double y1_series(long double eta, long double y0) {
    const long double mu = kMu;
    const long double nu = kNu;
    long double s = yield(1, eta, y0);
    long double fact = 1.0L;
    for (int n = 2; n < 80; ++n) {
        fact *= n;
        s += yield(n, eta, y0) * (std::pow(nu, n) - nu * nu * std::pow(mu, n - 2)) / fact / (nu - nu * nu / mu);
    }
    return s;
}

// e1_upper = sum_{n>=1} (eY)_n nu^(n-1) / n! / Y1_lower; the n = 0 term cancels.
inline long double e1_series(long double eta, long double y0, long double e_det) {
    const long double nu = kNu;
    long double s = 0.0L;
    long double fact = 1.0L;
    for (int n = 1; n < 80; ++n) {
        fact *= n;
        s += error_yield(n, eta, y0, e_det) * std::pow(nu, n - 1) / fact;
    }
    return s / y1_series(eta, y0);
}

inline ObservedRates exact_rates(double eta, double y0, double e_det) {
    ObservedRates o;
    o.mu = kMu;
    o.nu = kNu;
    const double b = 0.5 * y0;
    // 1 - (1 - y0) e^(-x eta) without the cancellation
    auto gain = [&](double x) { return 0.5 * (-std::expm1(-x * eta) + y0 * std::exp(-x * eta)); };
    auto err_gain = [&](double x) { return 0.5 * b + e_det * (gain(x) - b); };
    o.Qmu = gain(kMu);
    o.Qnu = gain(kNu);
    o.Y0 = b;
    o.Emu = err_gain(kMu) / o.Qmu;
    o.Enu = err_gain(kNu) / o.Qnu;
    o.n_mu = o.n_nu = o.n_0 = 1e9;
    return o;
}

inline SecurityParams infinite_statistics() {
    SecurityParams s;
    s.concentration = Concentration::none;
    return s;
}

}  // namespace qgs::test
