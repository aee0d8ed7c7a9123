// Builds scenarios/table1/*.json: one scenario per published pass, with the
// zenith transmittance and sky background fitted so that the expected sifted
// count and signal QBER land on the published values. K is never fitted.
//
// usage: calibrate_table1 <out_dir>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "qgs/keyrate.hpp"
#include "qgs/mission.hpp"

namespace {

struct Site {
    const char* name;
    double lat;
    double lon;
    double alt_m;
    qgs::Environment env;
};

const Site kShanghai{"Shanghai", 31.1263, 121.5424, 25.0, qgs::Environment::urban};
const Site kBeijing{"Beijing", 39.8853, 116.3514, 120.0, qgs::Environment::urban};
const Site kJinan{"Jinan", 36.6768, 117.1233, 85.0, qgs::Environment::urban};
const Site kWeihai{"Weihai", 37.5340, 122.0513, 46.0, qgs::Environment::coastal};
const Site kMohe{"Mohe", 53.4852, 122.3537, 300.0, qgs::Environment::rural};
const Site kLijiang{"Lijiang", 26.6939, 100.0293, 3233.0, qgs::Environment::high_altitude};

struct Row {
    const Site* site;
    const char* date;  // ISO
    double A_deg;
    double T_s;
    double S_kb;
    double qber_pct;
    double K_bits;
};

const std::vector<Row> kRows = {
    {&kShanghai, "2018-10-03", 72, 78, 345.9, 1.36, 63791},
    {&kShanghai, "2018-10-23", 78, 106, 301.1, 2.90, 25163},
    {&kShanghai, "2019-04-26", 50, 114, 172.5, 2.00, 15488},
    {&kShanghai, "2019-05-01", 84, 107, 213.0, 1.90, 31296},
    {&kShanghai, "2019-05-04", 38, 168, 296.9, 1.37, 51829},
    {&kShanghai, "2019-05-22", 80, 71, 225.2, 0.80, 45888},
    {&kBeijing, "2020-08-07", 52, 110, 657.7, 1.20, 80640},
    {&kJinan, "2020-09-02", 73, 168, 598.2, 2.20, 70928},
    {&kJinan, "2020-09-06", 81, 227, 661.5, 1.95, 124351},
    {&kJinan, "2020-09-11", 41, 245, 624.9, 2.38, 68868},
    {&kWeihai, "2019-05-17", 65, 174, 312.5, 2.91, 33024},
    {&kWeihai, "2019-05-21", 56, 280, 490.4, 2.05, 67734},
    {&kWeihai, "2019-05-23", 33, 259, 316.6, 2.40, 12800},
    {&kWeihai, "2019-07-01", 30, 345, 526.6, 1.65, 93296},
    {&kMohe, "2019-08-24", 55, 175, 262.2, 1.73, 45599},
    {&kMohe, "2019-08-25", 85, 186, 330.8, 2.50, 31997},
    {&kLijiang, "2019-03-25", 72, 145, 271.7, 2.11, 30735},
};

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

struct Expect {
    double S;
    double qber;
    qgs::ExpectedCounts counts;
};

Expect evaluate(const qgs::Scenario& s, const qgs::PassSetup& setup) {
    const auto c = qgs::expected_counts(setup.pass, setup.window, &setup.tracking, s.quantum(), s.sifting.window_ps);
    Expect e{0.0, 0.0, c};
    for (double v : c.sifted) e.S += v;
    e.qber = c.sifted[qgs::kSignal] > 0 ? c.errors[qgs::kSignal] / c.sifted[qgs::kSignal] : 0.0;
    return e;
}

// Key length the expected counts would give, for the printed overview only.
std::uint64_t expected_key(const qgs::Scenario& s, const qgs::ExpectedCounts& c) {
    qgs::TallyCounts t;
    t.mu = s.scheme.mu;
    for (std::size_t i = 0; i < qgs::kIntensities; ++i) {
        auto& p = t.per[i];
        p.n_sent = static_cast<std::uint64_t>(std::llround(c.sent[i]));
        p.n_detected_sifted = static_cast<std::uint64_t>(std::llround(c.sifted[i]));
        p.n_detected = 2 * p.n_detected_sifted;
        p.n_checked = p.n_detected_sifted;
        p.n_errors_sifted = static_cast<std::uint64_t>(std::llround(c.errors[i]));
    }
    t.key_bits = t.per[qgs::kSignal].n_detected_sifted;
    const auto b = qgs::decoy_bounds(t, s.security);
    return qgs::final_key_length(t, b, s.security);
}

// Sky background as a multiple of the site preset.
qgs::Scenario with_background(qgs::Scenario s, const qgs::BackgroundModel& preset, double k) {
    s.background.base_rate_cps = k * preset.base_rate_cps;
    s.background.low_elevation_rate_cps = k * preset.low_elevation_rate_cps;
    return s;
}

// Monotone bisection of f(x) = target on [lo, hi]; f increasing.
template <class F>
double bisect(F f, double target, double lo, double hi, bool log_scale) {
    for (int i = 0; i < 26; ++i) {
        const double mid = log_scale ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
        if (f(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return log_scale ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <out_dir>\n", argv[0]);
        return 2;
    }
    const std::filesystem::path out = argv[1];
    std::filesystem::create_directories(out);

    std::printf("%-22s %6s %6s %8s %9s %9s %8s %8s %9s %9s\n", "label", "T", "T_sim", "T0", "base_cps", "S_exp",
                "S_ref", "QBER", "K_exp", "K_ref");
    for (std::size_t i = 0; i < kRows.size(); ++i) {
        const auto& r = kRows[i];
        qgs::Scenario s;
        s.label = lower(r.site->name) + "_" + r.date;
        s.date = r.date;
        s.seed = 1000 + i;
        s.site = {r.site->name, r.site->lat, r.site->lon, r.site->alt_m, r.site->env};
        s.orbit.altitude_km = 500.0;
        s.orbit.max_elevation_deg = r.A_deg;
        s.orbit.direction = i % 2 ? qgs::PassDirection::descending : qgs::PassDirection::ascending;
        s.window.target_duration_s = r.T_s;
        s.background = qgs::BackgroundModel::preset(s.site.environment, s.detectors.dark_cps);
        // Arbitrary but distinct clock errors, well inside the recoverable range.
        s.clock.offset_ps = (std::fmod(1.37 * static_cast<double>(i + 1), 10.0) - 5.0) * 1e9;
        s.clock.drift = (static_cast<double>(i) - 8.0) * 1e-8;
        s.reference.T_s = r.T_s;
        s.reference.S_bits = r.S_kb * 1e3;
        s.reference.qber = r.qber_pct / 100.0;
        s.reference.K_bits = r.K_bits;

        const auto setup = qgs::prepare_pass(s);
        const double S_ref = r.S_kb * 1e3;
        const double q_ref = r.qber_pct / 100.0;

        std::string note = "Weather for this pass is not published. zenith_transmittance and "
                           "the sky background (site preset times one factor) were fitted so the expected sifted count and signal QBER "
                           "match the reference row; K is not fitted.";
        bool qber_floor = false;
        const auto preset = s.background;
        double bg_scale = 1.0;
        for (int iter = 0; iter < 4; ++iter) {
            s.link.zenith_transmittance = bisect(
                [&](double t0) {
                    auto c = s;
                    c.link.zenith_transmittance = t0;
                    return evaluate(c, setup).S;
                },
                S_ref, 1e-4, 1.0, true);
            auto at_zero = with_background(s, preset, 0.0);
            if (evaluate(at_zero, setup).qber >= q_ref) {
                bg_scale = 0.0;
                qber_floor = true;
            } else {
                qber_floor = false;
                bg_scale = bisect([&](double k) { return evaluate(with_background(s, preset, k), setup).qber; },
                                  q_ref, 0.0, 200.0, false);
            }
            s = with_background(s, preset, bg_scale);
        }
        if (qber_floor) note += " The QBER floor of the model exceeds the reference; sky background set to zero.";
        const double dur = setup.window.duration_s();
        if (std::abs(dur - r.T_s) > 2.0) {
            char buf[160];
            std::snprintf(buf, sizeof buf, " A 500 km pass at this culmination cannot give %.0f s; window is %.0f s.",
                          r.T_s, dur);
            note += buf;
        }
        s.calibration_note = note;
        s.validate();

        const auto e = evaluate(s, setup);
        std::printf("%-22s %6.0f %6.0f %8.4f %9.1f %9.0f %8.0f %7.3f%% %9llu %9.0f\n", s.label.c_str(), r.T_s, dur,
                    s.link.zenith_transmittance, s.background.base_rate_cps, e.S, S_ref, 100.0 * e.qber,
                    static_cast<unsigned long long>(expected_key(s, e.counts)), r.K_bits);
        char name[64];
        std::snprintf(name, sizeof name, "%02zu_%s.json", i + 1, s.label.c_str());
        qgs::save_scenario(out / name, s);
    }
    return 0;
}
