#include "qgs/keyrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qgs {

namespace {

// Relative entropy D(a || b) in nats.
double kl_divergence(double a, double b) {
    double d = 0.0;
    if (a > 0.0) d += a * std::log(a / b);
    if (a < 1.0) d += (1.0 - a) * (std::log1p(-a) - std::log1p(-b));
    return d;
}

// Bisect for the point where n * D(p_hat || p) reaches `target`, between
// p_hat and `far` (which must satisfy the inequality strictly).
double kl_solve(double p_hat, double n, double target, double far) {
    double lo = p_hat;
    double hi = far;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (n * kl_divergence(p_hat, mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return hi;
}

double frac(std::uint64_t a, std::uint64_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
}

DecoyBounds no_key(DecoyBounds b, std::string why) {
    b.key_possible = false;
    b.Y1_lower = 0.0;
    b.Q1_lower = 0.0;
    b.e1_upper = 0.5;
    b.no_key_reason = std::move(why);
    return b;
}

}  // namespace

std::string to_string(Concentration c) {
    switch (c) {
        case Concentration::kl: return "kl";
        case Concentration::additive: return "additive";
        case Concentration::none: return "none";
    }
    return "kl";
}

Concentration concentration_from_string(const std::string& s) {
    if (s == "kl") return Concentration::kl;
    if (s == "additive") return Concentration::additive;
    if (s == "none") return Concentration::none;
    throw ValidationError("security.concentration", "must be 'kl', 'additive' or 'none', got '" + s + "'");
}

void SecurityParams::validate() const {
    require(epsilon_total > 0.0 && epsilon_total < 1.0, "security.epsilon_total", "must be in (0, 1)");
    require(f_ec >= 1.0 && std::isfinite(f_ec), "security.f_ec", "must be >= 1");
    require(qber_abort > 0.0 && qber_abort <= 0.5, "security.qber_abort", "must be in (0, 0.5]");
}

double binary_entropy(double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("x", "binary entropy needs x in [0, 1]");
    if (x == 0.0 || x == 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

double rate_upper(double p_hat, double n, double eps, Concentration c) {
    if (c == Concentration::none) return p_hat;
    if (n <= 0.0) return 1.0;
    const double t = std::log(2.0 / eps);
    if (c == Concentration::additive) return std::min(1.0, p_hat + std::sqrt(t / (2.0 * n)));
    if (p_hat >= 1.0) return 1.0;
    if (n * kl_divergence(p_hat, std::nextafter(1.0, 0.0)) < t) return 1.0;
    return kl_solve(p_hat, n, t, std::nextafter(1.0, 0.0));
}

double rate_lower(double p_hat, double n, double eps, Concentration c) {
    if (c == Concentration::none) return p_hat;
    if (n <= 0.0) return 0.0;
    const double t = std::log(2.0 / eps);
    if (c == Concentration::additive) return std::max(0.0, p_hat - std::sqrt(t / (2.0 * n)));
    if (p_hat <= 0.0) return 0.0;
    if (n * kl_divergence(p_hat, std::numeric_limits<double>::denorm_min()) < t) return 0.0;
    return kl_solve(p_hat, n, t, 0.0);
}

ObservedRates observed_rates(const TallyCounts& tally) {
    const auto& s = tally.per[kSignal];
    const auto& d = tally.per[kDecoy];
    const auto& v = tally.per[kVacuum];
    ObservedRates o;
    o.mu = tally.mu[kSignal];
    o.nu = tally.mu[kDecoy];
    o.Qmu = frac(s.n_detected_sifted, s.n_sent);
    o.Qnu = frac(d.n_detected_sifted, d.n_sent);
    o.Y0 = frac(v.n_detected_sifted, v.n_sent);
    o.Emu = frac(s.n_errors_sifted, s.n_checked);
    o.Enu = frac(d.n_errors_sifted, d.n_checked);
    o.n_mu = static_cast<double>(s.n_sent);
    o.n_nu = static_cast<double>(d.n_sent);
    o.n_0 = static_cast<double>(v.n_sent);
    return o;
}

DecoyBounds decoy_bounds(const ObservedRates& o, const SecurityParams& sec) {
    sec.validate();
    const double mu = o.mu;
    const double nu = o.nu;
    if (!(nu > 0.0 && mu > 0.0)) throw ValidationError("scheme.mu_decoy", "signal and decoy intensities must be > 0");
    if (nu >= mu) throw ValidationError("scheme.mu_decoy", "decoy intensity must be below signal intensity");

    DecoyBounds b;
    b.Qmu = o.Qmu;
    b.Qnu = o.Qnu;
    b.Emu = o.Emu;
    b.Enu = o.Enu;
    b.Y0 = o.Y0;
    if (o.n_mu <= 0.0 || o.Qmu <= 0.0) return no_key(b, "no signal-state detections");
    if (o.n_nu <= 0.0 || o.Qnu <= 0.0) return no_key(b, "no decoy-state detections");

    const double eps = sec.epsilon_deviation();
    const auto c = sec.concentration;
    const double qnu_lo = rate_lower(o.Qnu, o.n_nu, eps, c);
    const double qmu_hi = rate_upper(o.Qmu, o.n_mu, eps, c);
    const double eqnu_hi = rate_upper(o.Enu * o.Qnu, o.n_nu, eps, c);
    double y0_hi;
    double y0_lo;
    if (o.n_0 > 0.0) {
        y0_hi = rate_upper(o.Y0, o.n_0, eps, c);
        y0_lo = rate_lower(o.Y0, o.n_0, eps, c);
    } else {
        // Without vacuum pulses only Q_nu >= Y0 exp(-nu) constrains Y0.
        y0_hi = std::exp(nu) * rate_upper(o.Qnu, o.n_nu, eps, c);
        y0_lo = 0.0;
    }

    const double y1 = (mu / (mu * nu - nu * nu)) *
                      (qnu_lo * std::exp(nu) - qmu_hi * std::exp(mu) * nu * nu / (mu * mu) -
                       ((mu * mu - nu * nu) / (mu * mu)) * y0_hi);
    if (!(y1 > 0.0)) return no_key(b, "single-photon yield bound is not positive");
    b.Y1_lower = std::min(1.0, y1);
    b.e1_upper = std::clamp((eqnu_hi * std::exp(nu) - 0.5 * y0_lo) / (b.Y1_lower * nu), 0.0, 0.5);
    b.Q1_lower = std::min(b.Y1_lower * mu * std::exp(-mu), b.Qmu);
    b.key_possible = true;
    return b;
}

DecoyBounds decoy_bounds(const TallyCounts& tally, const SecurityParams& sec) {
    return decoy_bounds(observed_rates(tally), sec);
}

std::uint64_t final_key_length(double n_sift, const DecoyBounds& b, const SecurityParams& sec) {
    sec.validate();
    if (!b.key_possible || n_sift <= 0.0 || b.Qmu <= 0.0) return 0;
    if (b.Emu >= sec.qber_abort) return 0;
    const double n1 = n_sift * b.Q1_lower / b.Qmu;
    const double l = n1 * (1.0 - binary_entropy(b.e1_upper)) - sec.f_ec * n_sift * binary_entropy(b.Emu) -
                     7.0 * std::sqrt(n_sift * std::log2(2.0 / sec.epsilon_smooth())) -
                     2.0 * std::log2(1.0 / sec.epsilon_pa());
    if (!(l > 0.0)) return 0;
    return static_cast<std::uint64_t>(std::floor(std::min(l, n_sift)));
}

std::uint64_t final_key_length(const TallyCounts& tally, const DecoyBounds& b, const SecurityParams& sec) {
    return final_key_length(static_cast<double>(tally.key_bits), b, sec);
}

}  // namespace qgs
