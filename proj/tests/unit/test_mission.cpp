#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "qgs/mission.hpp"
#include "qgs/timetag_io.hpp"

using namespace qgs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int n = 0;
        path = fs::temp_directory_path() / ("qgs_mission_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// A 25 s window on a 45 deg pass: a few seconds of wall time.
Scenario short_pass(const std::string& label = "short", std::uint64_t seed = 5) {
    auto s = parse_scenario(R"({
        "format_version": 1,
        "label": "short",
        "site": {"name": "testsite", "latitude_deg": 36.0, "longitude_deg": 117.0, "altitude_m": 80, "environment": "rural"},
        "orbit": {"altitude_km": 500, "max_elevation_deg": 45},
        "window": {"target_duration_s": 25},
        "clock": {"offset_ps": 2.5e9, "drift": 3e-8}
    })");
    s.label = label;
    s.seed = seed;
    return s;
}

fs::path scenario_dir() {
    const char* d = std::getenv("QGS_SCENARIO_DIR");
    return d ? fs::path(d) : fs::path("scenarios");
}

void expect_field(const std::string& json, const std::string& field) {
    try {
        parse_scenario(json);
        FAIL("expected a validation error on " << field);
    } catch (const ValidationError& e) {
        CHECK(e.field() == field);
    }
}

}  // namespace

TEST_CASE("scenario parsing") {
    SUBCASE("defaults fill every missing section") {
        const auto s = parse_scenario(R"({"format_version": 1, "label": "x"})");
        CHECK(s.orbit.altitude_km == 500.0);
        CHECK(s.scheme.mu[kSignal] == 0.8);
        CHECK(s.security.epsilon_total == 1e-5);
        CHECK(s.sifting.window_ps == 2000.0);
        CHECK(s.quantum().background.detector_dark_cps == s.detectors.dark_cps);
    }
    SUBCASE("environment preset sets the background unless overridden") {
        const auto u = parse_scenario(R"({"format_version": 1, "label": "x", "site": {"environment": "urban"}})");
        const auto p = BackgroundModel::preset(Environment::urban, u.detectors.dark_cps);
        CHECK(u.background.low_elevation_rate_cps == p.low_elevation_rate_cps);
        const auto o = parse_scenario(
            R"({"format_version": 1, "label": "x", "site": {"environment": "urban"}, "background": {"base_rate_cps": 77}})");
        CHECK(o.background.base_rate_cps == 77.0);
        CHECK(o.background.low_elevation_rate_cps == p.low_elevation_rate_cps);
    }
    SUBCASE("errors carry the field path") {
        expect_field(R"({"label": "x"})", "format_version");
        expect_field(R"({"format_version": 2, "label": "x"})", "format_version");
        expect_field(R"({"format_version": 1, "label": "x", "colour": 1})", "colour");
        expect_field(R"({"format_version": 1, "label": "x", "link": {"aperture": 1}})", "link.aperture");
        expect_field(R"({"format_version": 1, "label": "x", "orbit": {"max_elevation_deg": "high"}})",
                     "orbit.max_elevation_deg");
        expect_field(R"({"format_version": 1, "label": "x", "orbit": {"max_elevation_deg": 95}})",
                     "orbit.max_elevation_deg");
        expect_field(R"({"format_version": 1, "label": "x", "scheme": {"p_signal": 0.9}})", "scheme.p_vacuum");
        expect_field(R"({"format_version": 1, "label": "x", "link": {"receiver_efficiency": 1.5}})",
                     "link.receiver_efficiency");
        expect_field(R"({"format_version": 1, "label": "x", "pointing": {"truth": {"XX": 1}}})", "pointing.truth.XX");
        expect_field(R"({"format_version": 1, "label": "a/b"})", "label");
        expect_field(R"({"format_version": 1, "label": ""})", "label");
        expect_field(R"({"format_version": 1, "label": "x", "sifting": {"window_ps": 10000}})", "sifting.window_ps");
        expect_field(R"({"format_version": 1, "label": "x", "site": {"environment": "lunar"}})", "site.environment");
    }
    SUBCASE("malformed JSON is a format error with its byte offset") {
        try {
            parse_scenario("{\"format_version\": 1,,}");
            FAIL("expected a format error");
        } catch (const FormatError& e) {
            CHECK(e.offset() == 22);
        }
    }
    SUBCASE("writing and reading back is lossless") {
        auto s = short_pass();
        s.reference.S_bits = 12345.0;
        s.calibration_note = "note";
        const auto text = scenario_to_json(s);
        CHECK(scenario_to_json(parse_scenario(text)) == text);
    }
}

TEST_CASE("end-to-end run of a short pass") {
    TempDir tmp;
    const auto s = short_pass();
    const auto r = run_scenario(s, tmp.path / "a");

    SUBCASE("report") {
        CHECK(r.efficient_time_s == doctest::Approx(25.0).epsilon(0.05));
        CHECK(r.clock_locked);
        CHECK(r.clock_residual_ps < 1000.0);
        CHECK(std::abs(r.clock_offset_ps - 2.5e9) < 1000.0);
        CHECK(r.sifted_bits > 10000);
        REQUIRE(r.qber_signal.has_value());
        CHECK(*r.qber_signal < 0.05);
        CHECK(r.final_key_bits <= r.sifted_bits);
        CHECK(r.tracking_rms_x_urad.value() < 15.0);
        CHECK_FALSE(r.lost_track_s.has_value());
        CHECK(r.link_loss_db_at_culmination > 20.0);
    }
    SUBCASE("run directory has the fixed layout") {
        for (const char* f : {"pass.csv", "tracking.csv", "tags.bin", "satellite.csv", "tally.txt", "sifted.key", "report.txt"})
            CHECK(fs::exists(tmp.path / "a" / f));
        CHECK(fs::file_size(tmp.path / "a" / "tags.bin") % kTagRecordBytes == 0);
    }
    SUBCASE("every report field is recomputable from the artifacts") {
        std::ifstream rf(tmp.path / "a" / "report.txt");
        const auto back = read_report(rf);
        CHECK(back.label == r.label);
        CHECK(back.sifted_bits == r.sifted_bits);
        CHECK(back.final_key_bits == r.final_key_bits);
        CHECK(back.qber_signal == r.qber_signal);
        CHECK(back.clock_residual_ps == r.clock_residual_ps);
        CHECK(back.tracking_rms_y_urad == r.tracking_rms_y_urad);

        std::ifstream tf(tmp.path / "a" / "tally.txt");
        const auto tally = read_tally(tf);
        CHECK(tally.sifted_total() == r.sifted_bits);
        CHECK(qber(tally, kSignal) == r.qber_signal);
        CHECK(final_key_length(tally, decoy_bounds(tally, s.security), s.security) == r.final_key_bits);
        CHECK(fs::file_size(tmp.path / "a" / "sifted.key") == (tally.key_bits + 7) / 8);

        std::ifstream pf(tmp.path / "a" / "pass.csv");
        CHECK(read_pass_csv(pf).culmination().elevation_deg == doctest::Approx(r.max_elevation_deg));

        std::ifstream kf(tmp.path / "a" / "tracking.csv");
        std::string line;
        std::getline(kf, line);
        double sx = 0.0;
        std::size_t n = 0;
        while (std::getline(kf, line)) {
            std::stringstream ls(line);
            std::string t, x;
            std::getline(ls, t, ',');
            std::getline(ls, x, ',');
            sx += std::stod(x) * std::stod(x);
            ++n;
        }
        CHECK(std::sqrt(sx / static_cast<double>(n)) == doctest::Approx(*r.tracking_rms_x_urad).epsilon(1e-6));
    }
    SUBCASE("same seed, byte-identical directory") {
        run_scenario(s, tmp.path / "b");
        for (const auto& e : fs::directory_iterator(tmp.path / "a")) {
            CAPTURE(e.path().filename());
            CHECK(slurp(e.path()) == slurp(tmp.path / "b" / e.path().filename()));
        }
    }
    SUBCASE("ingesting the recorded files reproduces the run") {
        const auto g = ingest(tmp.path / "a" / "tags.bin", tmp.path / "a" / "satellite.csv", s, tmp.path / "c");
        CHECK(slurp(tmp.path / "a" / "tally.txt") == slurp(tmp.path / "c" / "tally.txt"));
        CHECK(slurp(tmp.path / "a" / "sifted.key") == slurp(tmp.path / "c" / "sifted.key"));
        CHECK(g.final_key_bits == r.final_key_bits);
        CHECK(g.qber_signal == r.qber_signal);
        CHECK_FALSE(g.tracking_rms_x_urad.has_value());
    }
    SUBCASE("a 1 us shift of the ground clock changes nothing downstream") {
        auto tags = load_tags(tmp.path / "a" / "tags.bin");
        for (auto& t : tags) t.time_ps += 1000000;
        save_tags(tmp.path / "shifted.bin", tags);
        const auto g = ingest(tmp.path / "shifted.bin", tmp.path / "a" / "satellite.csv", s);
        CHECK(std::abs(g.clock_offset_ps - r.clock_offset_ps - 1e6) < 100.0);
        CHECK(g.final_key_bits == r.final_key_bits);
        CHECK(g.sifted_bits == r.sifted_bits);
    }
    SUBCASE("truncated tag file") {
        const auto bytes = slurp(tmp.path / "a" / "tags.bin");
        const std::size_t cut = bytes.size() - 21;
        std::ofstream(tmp.path / "cut.bin", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(cut));
        try {
            ingest(tmp.path / "cut.bin", tmp.path / "a" / "satellite.csv", s);
            FAIL("expected a format error");
        } catch (const FormatError& e) {
            CHECK(e.offset() == cut / kTagRecordBytes * kTagRecordBytes);
        }
        CHECK_THROWS_AS(ingest(tmp.path / "missing.bin", tmp.path / "a" / "satellite.csv", s), IoError);
    }
    SUBCASE("an empty tag file is a lock failure, reported as no key") {
        std::ofstream(tmp.path / "empty.bin", std::ios::binary).flush();
        const auto g = ingest(tmp.path / "empty.bin", tmp.path / "a" / "satellite.csv", s);
        CHECK_FALSE(g.clock_locked);
        CHECK(g.final_key_bits == 0);
        CHECK(g.no_key_reason.find("clock") != std::string::npos);
    }
}

TEST_CASE("vacuum-only transmission") {
    auto s = short_pass("vac");
    s.scheme.prob = {0.0, 0.0, 1.0};
    SUBCASE("dark sky: nothing is sifted") {
        s.background = BackgroundModel{0.0, 0.0, 15.0, 0.0};
        s.detectors.dark_cps = 0.0;
        const auto r = run_scenario(s);
        CHECK(r.sifted_bits == 0);
        CHECK(r.final_key_bits == 0);
        CHECK_FALSE(r.no_key_reason.empty());
    }
    SUBCASE("with background, noise clicks are sifted but no key bit exists") {
        const auto r = run_scenario(s);
        CHECK(r.key_bits == 0);
        CHECK(r.final_key_bits == 0);
        CHECK_FALSE(r.qber_signal.has_value());
    }
}

TEST_CASE("batch") {
    TempDir tmp;
    SUBCASE("empty list") {
        const auto r = run_batch({}, tmp.path / "out");
        CHECK(r.empty());
        CHECK(slurp(tmp.path / "out" / "summary.csv") == "label,site,date,max_elev_deg,T_s,S_bits,QBER,K_bits\n");
    }
    SUBCASE("duplicate labels abort before anything runs") {
        try {
            run_batch({short_pass("same"), short_pass("same")}, tmp.path / "dup");
            FAIL("expected a validation error");
        } catch (const ValidationError& e) {
            CHECK(e.field() == "label");
        }
        CHECK_FALSE(fs::exists(tmp.path / "dup"));
    }
    SUBCASE("one invalid scenario aborts before anything runs") {
        auto bad = short_pass("bad");
        bad.link.rx_aperture_m = -1.0;
        CHECK_THROWS_AS(run_batch({short_pass("good"), bad}, tmp.path / "inv"), ValidationError);
        CHECK_FALSE(fs::exists(tmp.path / "inv"));
    }
    SUBCASE("results do not depend on order or thread count") {
        std::vector<Scenario> list{short_pass("p1", 1), short_pass("p2", 2), short_pass("p3", 3)};
        const auto a = run_batch(list, tmp.path / "seq", 1);
        std::reverse(list.begin(), list.end());
        const auto b = run_batch(list, tmp.path / "par", 3);
        for (const char* l : {"p1", "p2", "p3"})
            for (const auto& e : fs::directory_iterator(tmp.path / "seq" / l))
                CHECK(slurp(e.path()) == slurp(tmp.path / "par" / l / e.path().filename()));
        std::map<std::string, std::uint64_t> ka;
        for (const auto& r : a) ka[r.label] = r.final_key_bits;
        for (const auto& r : b) CHECK(ka.at(r.label) == r.final_key_bits);

        std::ifstream f(tmp.path / "seq" / "summary.csv");
        std::string line;
        std::getline(f, line);
        CHECK(line == "label,site,date,max_elev_deg,T_s,S_bits,QBER,K_bits");
        std::getline(f, line);
        CHECK(line.rfind("p1,testsite,,45.00,", 0) == 0);
    }
}

TEST_CASE("bundled Table 1 scenarios") {
    const auto dir = scenario_dir() / "table1";
    REQUIRE(fs::is_directory(dir));
    const auto all = load_scenario_dir(dir);
    REQUIRE(all.size() == 17);
    std::map<std::string, const Scenario*> by;
    for (const auto& s : all) by[s.label] = &s;

    SUBCASE("Shanghai 2019-05-22: S within a factor 2 of 225.2 kb, QBER near 0.8%") {
        const auto r = run_scenario(*by.at("shanghai_2019-05-22"));
        CHECK(r.efficient_time_s == doctest::Approx(71.0).epsilon(0.03));
        CHECK(r.sifted_bits >= 225200 / 2);
        CHECK(r.sifted_bits <= 225200 * 2);
        REQUIRE(r.qber_signal.has_value());
        CHECK(std::abs(*r.qber_signal - 0.008) <= 0.01);
    }
    SUBCASE("Shanghai 2018-10-03: S of order 1e5 over 78 s, K within a factor 3 of 63 791") {
        const auto r = run_scenario(*by.at("shanghai_2018-10-03"));
        CHECK(r.efficient_time_s == doctest::Approx(78.0).epsilon(0.03));
        CHECK(r.sifted_bits >= 345900 / 2);
        CHECK(r.sifted_bits <= 345900 * 2);
        CHECK(r.final_key_bits >= 63791 / 3);
        CHECK(r.final_key_bits <= 63791 * 3);
    }
    SUBCASE("the six Shanghai passes sum to within a factor 2 of 1.81 Mb") {
        std::vector<Scenario> sh;
        for (const auto& s : all)
            if (s.site.name == "Shanghai") sh.push_back(s);
        REQUIRE(sh.size() == 6);
        std::uint64_t total = 0;
        for (const auto& r : run_batch(sh)) total += r.sifted_bits;
        CHECK(total >= 1810000 / 2);
        CHECK(total <= 1810000 * 2);
    }
}
