#include <doctest.h>

#include <cmath>
#include <sstream>

#include "flat_channel.hpp"
#include "qgs/sifting.hpp"

using namespace qgs;
using namespace qgs::test;

namespace {

SyncOutput beacon(const PassGeometry& pass, double seconds, const ClockModel& clock, std::uint64_t seed,
                  SyncParams s = {}) {
    return generate_sync(pass, around_culmination(pass, seconds), s, clock, seed);
}

ClockSolution exact_clock() { return ClockSolution{}; }

}  // namespace

TEST_CASE("clock recovery") {
    const auto pass = test_pass();
    SUBCASE("no offset, drift or jitter") {
        SyncParams s;
        s.jitter_rms_ps = 0.0;
        s.pps_jitter_ps = 0.0;
        s.dark_cps = 0.0;
        const auto out = beacon(pass, 5.0, ClockModel{}, 1, s);
        const auto c = solve_clock(out.events, out.schedule, pass);
        CHECK(std::abs(c.offset_ps) <= s.tdc_resolution_ps);
        CHECK(std::abs(c.drift) < 1e-12);
        CHECK(c.residual_rms_ps < s.tdc_resolution_ps);
    }
    SUBCASE("injected offset 1 234 567 890 ps and drift 5e-8 are recovered") {
        const ClockModel truth{1234567890.0, 5e-8};
        const auto out = beacon(pass, 10.0, truth, 2);
        const auto c = solve_clock(out.events, out.schedule, pass);
        CHECK(std::abs(c.offset_ps - truth.offset_ps) < 1000.0);
        CHECK(std::abs(c.drift - truth.drift) < 1e-9);
        CHECK(c.residual_rms_ps < 1000.0);
        CHECK(c.pairs > 90000);
    }
    SUBCASE("offsets at every phase of the beacon period") {
        for (double off : {3.3e6, 49.9e6, 50.1e6, 99.2e6, 99.7e6, 99.999e6, 4.2e9 + 99.9e6}) {
            CAPTURE(off);
            const auto out = beacon(pass, 2.0, ClockModel{off, 0.0}, 3);
            const auto c = solve_clock(out.events, out.schedule, pass);
            CHECK(std::abs(c.offset_ps - off) < 1000.0);
            CHECK(c.residual_rms_ps < 1000.0);
        }
    }
    SUBCASE("without PPS, offsets within half a beacon period") {
        // Beyond P/2 the beacon alone cannot tell which pulse is which.
        SyncParams s;
        s.pps = false;
        // negative offsets put the peak in the last histogram bin
        for (double off : {0.0, 3.3e6, 49.9e6, -0.3e6, -1e3, -49.9e6}) {
            CAPTURE(off);
            const auto out = beacon(pass, 2.0, ClockModel{off, 0.0}, 3, s);
            const auto c = solve_clock(out.events, out.schedule, pass);
            CHECK(std::abs(c.offset_ps - off) < 1000.0);
            CHECK(c.residual_rms_ps < 1000.0);
        }
    }
    SUBCASE("negative offset with PPS") {
        const ClockModel truth{-7.5e9, -3e-8};
        const auto out = beacon(pass, 10.0, truth, 4);
        const auto c = solve_clock(out.events, out.schedule, pass);
        CHECK(std::abs(c.offset_ps - truth.offset_ps) < 1000.0);
        CHECK(std::abs(c.drift - truth.drift) < 1e-9);
    }
    SUBCASE("fifty beacon pulses are not enough") {
        SyncParams s;
        s.margin_s = 0.0;
        const auto out = beacon(pass, 49.5 / 1e4, ClockModel{}, 5, s);
        CHECK(out.schedule.pulse_count < 100);
        CHECK_THROWS_AS(solve_clock(out.events, out.schedule, pass), InsufficientDataError);
    }
    SUBCASE("two equal beacon phases are ambiguous") {
        SyncParams s;
        s.pps = false;
        s.dark_cps = 0.0;
        const auto a = beacon(pass, 2.0, ClockModel{}, 6, s);
        const auto b = beacon(pass, 2.0, ClockModel{40e6, 0.0}, 7, s);
        CHECK_THROWS_AS(solve_clock(merge_streams(a.events, b.events), a.schedule, pass), AmbiguousLockError);
    }
}

TEST_CASE("to_true inverts the clock model") {
    const ClockSolution c{1e9, 2e-8, 0.0, 0};
    const ClockModel m{1e9, 2e-8};
    for (double t : {0.0, 1e12, 3.3e14}) CHECK(c.to_true(m.ground_time(t)) == doctest::Approx(t).epsilon(1e-15));
}

TEST_CASE("sift parameters") {
    SiftParams p;
    CHECK_NOTHROW(p.validate(10000.0));
    p.window_ps = 10000.0;
    CHECK_THROWS_AS(p.validate(10000.0), ValidationError);
    p.window_ps = 0.0;
    CHECK_THROWS_AS(p.validate(10000.0), ValidationError);
    p = {};
    p.sample_fraction = 0.0;
    CHECK_THROWS_AS(p.validate(10000.0), ValidationError);

    const auto pass = test_pass();
    const auto cfg = flat_config(1e-3, 0.0);
    const auto q = simulate_pass(pass, around_culmination(pass, 0.1), nullptr, cfg, 1);
    SiftParams wide;
    wide.window_ps = 12000.0;
    CHECK_THROWS_AS(match_and_sift(q.events, q.satellite, exact_clock(), pass, cfg.scheme, wide, 1), ValidationError);
    ClockSolution noisy;
    noisy.residual_rms_ps = 1500.0;
    CHECK_THROWS_AS(match_and_sift(q.events, q.satellite, noisy, pass, cfg.scheme, SiftParams{}, 1), ValidationError);
}

TEST_CASE("sifting a noiseless stream") {
    const auto pass = test_pass();
    auto cfg = flat_config(1e-3, 0.0);
    cfg.detectors.dead_time_ns = 50.0;
    const auto q = simulate_pass(pass, around_culmination(pass, 2.0), nullptr, cfg, 2);
    const auto r = match_and_sift(q.events, q.satellite, exact_clock(), pass, cfg.scheme, SiftParams{}, 2);
    const auto& t = r.tally;
    SUBCASE("half of the matched signal detections survive the basis check") {
        CHECK(binomial_z(t.per[kSignal].n_detected_sifted, t.per[kSignal].n_detected, 0.5) < 3.0);
    }
    SUBCASE("at least 99% of pulse-borne detections are matched at 2 ns") {
        std::uint64_t from_signal = 0;
        for (const auto& e : q.truth) from_signal += e.from_signal;
        std::uint64_t matched = 0;
        for (const auto& p : t.per) matched += p.n_detected;
        CHECK(static_cast<double>(matched) >= 0.99 * static_cast<double>(from_signal));
    }
    SUBCASE("tally arithmetic") {
        CHECK(t.per[0].n_sent + t.per[1].n_sent + t.per[2].n_sent ==
              q.satellite.last_slot - q.satellite.first_slot + 1);
        CHECK(t.per[kVacuum].n_detected == 0);
        CHECK(t.key_bits == t.per[kSignal].n_detected_sifted);
        CHECK(r.key.size() == t.key_bits);
        CHECK_NOTHROW(t.validate());
        for (const auto& p : t.per) CHECK(p.n_checked == p.n_detected_sifted);
    }
    SUBCASE("sampled error estimation spends about a tenth of the signal bits") {
        SiftParams sp;
        sp.error_estimation = ErrorEstimation::sampled;
        const auto s = match_and_sift(q.events, q.satellite, exact_clock(), pass, cfg.scheme, sp, 2);
        const auto& sig = s.tally.per[kSignal];
        CHECK(sig.n_detected_sifted == t.per[kSignal].n_detected_sifted);
        CHECK(binomial_z(sig.n_checked, sig.n_detected_sifted, 0.1) < 3.0);
        CHECK(s.tally.key_bits == sig.n_detected_sifted - sig.n_checked);
        CHECK(s.tally.per[kDecoy].n_checked == s.tally.per[kDecoy].n_detected_sifted);
    }
}

TEST_CASE("background-only stream") {
    const auto pass = test_pass();
    auto cfg = flat_config(1e-3, 20000.0);
    cfg.scheme.prob = {0.5, 0.5, 0.0};
    cfg.scheme.mu = {0.8, 0.1, 0.0};
    // signal off; the link rejects eta = 0, so use a vanishing receiver efficiency
    cfg.link.receiver_efficiency = 1e-300;
    const auto q = simulate_pass(pass, around_culmination(pass, 5.0), nullptr, cfg, 3);
    const auto n_bg = q.events.size();
    REQUIRE(n_bg > 300000);
    SUBCASE("2 ns window keeps window / period of the noise") {
        const auto r = match_and_sift(q.events, q.satellite, exact_clock(), pass, cfg.scheme, SiftParams{}, 3);
        CHECK(binomial_z(n_bg - r.unmatched, n_bg, 0.2) < 3.0);
    }
    SUBCASE("QBER of random coincidences is one half") {
        const auto r = match_and_sift(q.events, q.satellite, exact_clock(), pass, cfg.scheme, SiftParams{}, 3);
        const auto& s = r.tally.per[kSignal];
        CHECK(binomial_z(s.n_errors_sifted, s.n_checked, 0.5) < 3.0);
        CHECK(qber(r.tally, kSignal) == doctest::Approx(0.5).epsilon(0.02));
    }
}

TEST_CASE("narrower windows accept less noise and never raise the QBER (mean over seeds)") {
    const auto pass = test_pass();
    auto cfg = flat_config(2e-4, 3000.0);
    double prev_noise = 1e300;
    double prev_qber = 1.0;
    for (double w : {8000.0, 4000.0, 2000.0, 1000.0}) {
        double noise = 0.0;
        double err = 0.0;
        double sift = 0.0;
        for (std::uint64_t seed = 10; seed < 13; ++seed) {
            const auto q = simulate_pass(pass, around_culmination(pass, 1.0), nullptr, cfg, seed);
            SiftParams p;
            p.window_ps = w;
            const auto r = match_and_sift(q.events, q.satellite, exact_clock(), pass, cfg.scheme, p, seed);
            noise += static_cast<double>(r.tally.per[kVacuum].n_detected);
            err += static_cast<double>(r.tally.per[kSignal].n_errors_sifted);
            sift += static_cast<double>(r.tally.per[kSignal].n_checked);
        }
        CAPTURE(w);
        CHECK(noise < prev_noise);
        CHECK(err / sift <= prev_qber);
        prev_noise = noise;
        prev_qber = err / sift;
    }
}

TEST_CASE("qber") {
    TallyCounts t;
    t.per[kSignal] = {100, 80, 40, 0, 40};
    CHECK(qber(t, kSignal) == 0.0);
    t.per[kSignal].n_errors_sifted = 2;
    CHECK(qber(t, kSignal) == doctest::Approx(0.05));
    CHECK_THROWS_AS(qber(t, kDecoy), UndefinedQberError);
    CHECK_THROWS_AS(qber(t, 7), ValidationError);
}

TEST_CASE("tally file") {
    TallyCounts t;
    t.per[0] = {1000000, 900, 450, 7, 450};
    t.per[1] = {500000, 60, 31, 1, 31};
    t.per[2] = {500000, 3, 2, 1, 2};
    t.window_ps = 1500.0;
    t.key_bits = 450;
    std::stringstream ss;
    write_tally(ss, t);
    CHECK(ss.str().rfind("format=qgs-tally-1\n", 0) == 0);
    CHECK(read_tally(ss) == t);

    std::stringstream bad("format=qgs-tally-1\nwindow_ps=abc\n");
    CHECK_THROWS_AS(read_tally(bad), FormatError);
    std::stringstream noeq("format=qgs-tally-1\nnonsense\n");
    try {
        read_tally(noeq);
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 2);
    }
    auto inconsistent = t;
    inconsistent.per[0].n_errors_sifted = 451;
    std::stringstream s2;
    write_tally(s2, inconsistent);
    CHECK_THROWS_AS(read_tally(s2), ValidationError);
}

TEST_CASE("sifted key is packed MSB first, zero padded") {
    std::stringstream ss;
    write_key(ss, {1, 0, 1, 1, 0, 0, 0, 0, 1});
    const auto s = ss.str();
    REQUIRE(s.size() == 2);
    CHECK(static_cast<unsigned char>(s[0]) == 0xB0);
    CHECK(static_cast<unsigned char>(s[1]) == 0x80);
    std::stringstream empty;
    write_key(empty, {});
    CHECK(empty.str().empty());
}
