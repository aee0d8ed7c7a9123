#include <doctest.h>

#include <cmath>
#include <random>

#include "decoy_oracle.hpp"

using namespace qgs;
using namespace qgs::test;

namespace {

SecurityParams infinite() { return test::infinite_statistics(); }

DecoyBounds bounds_for(double Qmu, double Q1, double Emu, double e1) {
    DecoyBounds b;
    b.Qmu = Qmu;
    b.Q1_lower = Q1;
    b.Emu = Emu;
    b.e1_upper = e1;
    b.key_possible = true;
    return b;
}

}  // namespace

TEST_CASE("binary entropy") {
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(1.0) == 0.0);
    CHECK(binary_entropy(0.5) == 1.0);
    CHECK(binary_entropy(0.11) == doctest::Approx(0.499916).epsilon(1e-6));
    CHECK(binary_entropy(0.3) == doctest::Approx(binary_entropy(0.7)).epsilon(1e-15));
    CHECK_THROWS_AS(binary_entropy(-0.01), ValidationError);
    CHECK_THROWS_AS(binary_entropy(1.5), ValidationError);
    CHECK_THROWS_AS(binary_entropy(std::nan("")), ValidationError);
}

TEST_CASE("concentration bounds") {
    const double eps = 1e-6;
    SUBCASE("none is the identity") {
        CHECK(rate_upper(0.01, 100, eps, Concentration::none) == 0.01);
        CHECK(rate_lower(0.01, 100, eps, Concentration::none) == 0.01);
    }
    SUBCASE("additive is p +- sqrt(ln(2/eps) / 2n), clipped") {
        const double d = std::sqrt(std::log(2.0 / eps) / 2e6);
        CHECK(rate_upper(0.3, 1e6, eps, Concentration::additive) == doctest::Approx(0.3 + d).epsilon(1e-14));
        CHECK(rate_lower(0.3, 1e6, eps, Concentration::additive) == doctest::Approx(0.3 - d).epsilon(1e-14));
        CHECK(rate_lower(1e-4, 1e6, eps, Concentration::additive) == 0.0);
    }
    SUBCASE("relative entropy bound solves n D(p_hat || p) = ln(2/eps)") {
        const double p = 1e-3;
        const double n = 1e7;
        for (double b : {rate_upper(p, n, eps, Concentration::kl), rate_lower(p, n, eps, Concentration::kl)}) {
            const double d = p * std::log(p / b) + (1 - p) * std::log((1 - p) / (1 - b));
            CHECK(n * d == doctest::Approx(std::log(2.0 / eps)).epsilon(1e-9));
        }
        CHECK(rate_upper(p, n, eps, Concentration::kl) < rate_upper(p, n, eps, Concentration::additive));
        CHECK(rate_upper(0.0, 1e3, eps, Concentration::kl) > 0.0);
        CHECK(rate_lower(0.0, 1e3, eps, Concentration::kl) == 0.0);
        CHECK(rate_upper(1.0, 1e3, eps, Concentration::kl) == 1.0);
    }
    SUBCASE("bounds tighten with n") {
        for (auto c : {Concentration::kl, Concentration::additive}) {
            double prev_hi = 1.0;
            double prev_lo = 0.0;
            for (double n : {1e5, 1e7, 1e9, 1e11}) {
                const double hi = rate_upper(2e-4, n, eps, c);
                const double lo = rate_lower(2e-4, n, eps, c);
                CHECK(hi <= prev_hi);
                CHECK(lo >= prev_lo);
                CHECK(lo <= 2e-4);
                CHECK(hi >= 2e-4);
                prev_hi = hi;
                prev_lo = lo;
            }
        }
    }
}

TEST_CASE("infinite-statistics Y1 bound matches the photon-number series") {
    for (double eta : {1e-5, 1e-4, 1e-3, 1e-2})
        for (double y0 : {0.0, 1e-6, 1e-4}) {
            CAPTURE(eta);
            CAPTURE(y0);
            const auto b = decoy_bounds(exact_rates(eta, y0, 0.0), infinite());
            REQUIRE(b.key_possible);
            const auto want = static_cast<double>(y1_series(eta, y0));
            CHECK(std::abs(b.Y1_lower - want) <= 1e-12 * want);
            // the bound sits below the true single-photon yield
            CHECK(b.Y1_lower <= 0.5 * (y0 + (1 - y0) * eta));
            CHECK(b.Q1_lower == doctest::Approx(b.Y1_lower * kMu * std::exp(-kMu)).epsilon(1e-15));
        }
}

TEST_CASE("infinite-statistics e1 bound matches the photon-number series") {
    for (double eta : {1e-4, 1e-3})
        for (double y0 : {0.0, 1e-5})
            for (double e : {0.0, 0.01, 0.03}) {
                const auto b = decoy_bounds(exact_rates(eta, y0, e), infinite());
                const auto want = static_cast<double>(e1_series(eta, y0, e));
                CHECK(std::abs(b.e1_upper - want) <= 1e-12 * std::max(want, 1e-300));
                CHECK(b.e1_upper >= static_cast<double>(error_yield(1, eta, y0, e) / yield(1, eta, y0)) - 1e-15);
            }
}

TEST_CASE("error-free channel with exact statistics has e1 = 0") {
    const auto b = decoy_bounds(exact_rates(1e-3, 0.0, 0.0), infinite());
    CHECK(b.e1_upper == 0.0);
    CHECK(b.Emu == 0.0);
}

TEST_CASE("finite statistics approach the infinite-statistics bound from below") {
    const auto base = exact_rates(1e-3, 1e-5, 0.01);
    const double inf_y1 = decoy_bounds(base, infinite()).Y1_lower;
    const double inf_e1 = decoy_bounds(base, infinite()).e1_upper;
    for (auto c : {Concentration::kl, Concentration::additive}) {
        SecurityParams sec;
        sec.concentration = c;
        double prev_y1 = 0.0;
        double prev_e1 = 1.0;
        for (double n : {1e7, 1e9, 1e11}) {
            auto o = base;
            o.n_mu = o.n_nu = o.n_0 = n;
            const auto b = decoy_bounds(o, sec);
            CHECK(b.Y1_lower < inf_y1);
            CHECK(b.Y1_lower >= prev_y1);
            CHECK(b.e1_upper > inf_e1);
            CHECK(b.e1_upper <= prev_e1);
            prev_y1 = b.Y1_lower;
            prev_e1 = b.e1_upper;
        }
        CHECK(prev_y1 == doctest::Approx(inf_y1).epsilon(0.01));
    }
}

TEST_CASE("decoy bounds stay in range for adversarial tallies") {
    const SecurityParams sec;
    SUBCASE("no decoy detections") {
        auto o = exact_rates(1e-3, 0.0, 0.0);
        o.Qnu = 0.0;
        const auto b = decoy_bounds(o, sec);
        CHECK_FALSE(b.key_possible);
        CHECK_FALSE(b.no_key_reason.empty());
        CHECK(b.Y1_lower == 0.0);
        CHECK(b.e1_upper == 0.5);
    }
    SUBCASE("decoy gain too low for the signal gain") {
        auto o = exact_rates(1e-3, 0.0, 0.0);
        o.Qnu = 0.01 * o.Qmu;
        const auto b = decoy_bounds(o, sec);
        CHECK_FALSE(b.key_possible);
        CHECK(final_key_length(1e6, b, sec) == 0);
    }
    SUBCASE("huge error rates clamp e1 to one half") {
        auto o = exact_rates(1e-3, 0.0, 0.0);
        o.Enu = 0.9;
        const auto b = decoy_bounds(o, infinite());
        CHECK(b.e1_upper == 0.5);
    }
    SUBCASE("tally with every count zero") {
        TallyCounts t;
        const auto b = decoy_bounds(t, sec);
        CHECK_FALSE(b.key_possible);
        CHECK(std::isfinite(b.Y1_lower));
        CHECK(final_key_length(t, b, sec) == 0);
    }
    SUBCASE("nu >= mu is a parameter error") {
        auto o = exact_rates(1e-3, 0.0, 0.0);
        o.nu = 0.8;
        CHECK_THROWS_AS(decoy_bounds(o, sec), ValidationError);
    }
    SUBCASE("security parameters") {
        SecurityParams s;
        s.epsilon_total = 1.0;
        CHECK_THROWS_AS(s.validate(), ValidationError);
        s = {};
        s.f_ec = 0.9;
        CHECK_THROWS_AS(s.validate(), ValidationError);
        CHECK(concentration_from_string("additive") == Concentration::additive);
        CHECK_THROWS_AS(concentration_from_string("gauss"), ValidationError);
    }
}

TEST_CASE("key length") {
    SecurityParams sec;
    SUBCASE("error-free channel, frozen from an independent script (tests/oracles/key_length.py)") {
        const double eta = 1e-3;
        const double Qmu = -std::expm1(-kMu * eta);
        const double Q1 = eta * kMu * std::exp(-kMu);
        CHECK(final_key_length(1e6, bounds_for(Qmu, Q1, 0.0, 0.0), sec) == 418473);
    }
    SUBCASE("QBER at or above the abort threshold gives nothing") {
        const auto ok = bounds_for(1e-3, 5e-4, 0.02, 0.03);
        CHECK(final_key_length(1e8, ok, sec) > 0);
        for (double e : {0.11, 0.2, 0.5}) CHECK(final_key_length(1e8, bounds_for(1e-3, 1e-3, e, 0.0), sec) == 0);
    }
    SUBCASE("no key without positive bounds") {
        auto b = bounds_for(1e-3, 5e-4, 0.01, 0.01);
        b.key_possible = false;
        CHECK(final_key_length(1e8, b, sec) == 0);
        CHECK(final_key_length(0.0, bounds_for(1e-3, 5e-4, 0.01, 0.01), sec) == 0);
    }
    SUBCASE("short blocks are eaten by the finite-size terms") {
        CHECK(final_key_length(1e3, bounds_for(1e-3, 5e-4, 0.0, 0.0), sec) == 0);
    }
    SUBCASE("never more than the sifted bits") {
        CHECK(final_key_length(1e6, bounds_for(1e-3, 1e-3, 0.0, 0.0), sec) <= 1000000);
    }
    SUBCASE("finite-key length never exceeds the infinite-statistics one") {
        for (double eta : {1e-4, 1e-3})
            for (double e : {0.005, 0.02}) {
                auto o = exact_rates(eta, 1e-6, e);
                o.n_mu = 5e9;
                o.n_nu = o.n_0 = 2.5e9;
                const double n_sift = o.Qmu * o.n_mu;
                const auto fin = final_key_length(n_sift, decoy_bounds(o, sec), sec);
                const auto inf = final_key_length(n_sift, decoy_bounds(o, infinite()), infinite());
                CHECK(fin <= inf);
            }
    }
}

TEST_CASE("key length monotonicity on a 5x5 grid") {
    const SecurityParams sec;
    const double Qmu = 1e-3;
    const double Q1 = 5e-4;
    const double es[] = {0.0, 0.01, 0.02, 0.04, 0.08};
    const double ns[] = {1e5, 3e5, 1e6, 3e6, 1e7};
    for (double n : ns) {
        std::uint64_t prev = UINT64_MAX;
        for (double e : es) {
            const auto k = final_key_length(n, bounds_for(Qmu, Q1, e, 0.02), sec);
            CHECK(k <= prev);
            prev = k;
        }
        prev = UINT64_MAX;
        for (double e1 : es) {
            const auto k = final_key_length(n, bounds_for(Qmu, Q1, 0.01, e1), sec);
            CHECK(k <= prev);
            prev = k;
        }
    }
    for (double e : es) {
        std::uint64_t prev = 0;
        for (double n : ns) {
            const auto k = final_key_length(n, bounds_for(Qmu, Q1, e, e), sec);
            CHECK(k >= prev);
            prev = k;
        }
    }
}

TEST_CASE("bounds hold on sampled experiments (1000 instances)") {
    // Counts drawn from the true photon-number mixture; the bounds must cover
    // the true single-photon yield and error nearly always.
    const double eta = 2e-3;
    const double y0 = 2e-5;
    const double e_det = 0.01;
    const double n = 1e8;
    const double y1_true = 0.5 * (1 - (1 - y0) * (1 - eta));
    const double e1_true = (0.5 * 0.5 * y0 + e_det * (y1_true - 0.5 * y0)) / y1_true;
    const auto exact = exact_rates(eta, y0, e_det);
    std::mt19937_64 g(99);
    const SecurityParams sec;
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
        auto o = exact;
        o.n_mu = o.n_nu = o.n_0 = n;
        auto draw = [&](double p) {
            return static_cast<double>(std::binomial_distribution<std::uint64_t>(static_cast<std::uint64_t>(n), p)(g)) / n;
        };
        const double em = draw(exact.Emu * exact.Qmu);
        const double en = draw(exact.Enu * exact.Qnu);
        o.Qmu = em + draw(exact.Qmu * (1 - exact.Emu));
        o.Qnu = en + draw(exact.Qnu * (1 - exact.Enu));
        o.Emu = em / o.Qmu;
        o.Enu = en / o.Qnu;
        o.Y0 = draw(exact.Y0);
        const auto b = decoy_bounds(o, sec);
        if (!(b.Y1_lower <= y1_true && b.e1_upper >= e1_true)) ++bad;
    }
    CHECK(bad <= 1);
}
