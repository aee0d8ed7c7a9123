// qgs: command-line front end for the ground-station pipeline.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "qgs/keyrate.hpp"
#include "qgs/link_channel.hpp"
#include "qgs/mission.hpp"
#include "qgs/pointing.hpp"
#include "qgs/scenario.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> window_ps;
    std::optional<double> min_elevation;

    void add_to(CLI::App* cmd, bool with_seed = true) {
        if (with_seed) cmd->add_option("--seed", seed, "Override the scenario seed");
        cmd->add_option("--window-ps", window_ps, "Coincidence window (ps)");
        cmd->add_option("--min-elevation", min_elevation, "Efficient-window threshold (deg)");
    }

    void apply(qgs::Scenario& s) const {
        if (seed) s.seed = *seed;
        if (window_ps) s.sifting.window_ps = *window_ps;
        if (min_elevation) {
            s.window.min_elevation_deg = *min_elevation;
            s.window.target_duration_s.reset();
        }
        s.validate();
    }
};

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw qgs::IoError("cannot open " + path);
    return f;
}

void print_report(const qgs::PassReport& r) { qgs::write_report(std::cout, r); }

void print_db(const char* name, double t) { std::printf("%-12s %10.3f dB  (%.6g)\n", name, qgs::loss_db(t), t); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Portable QKD ground station: pass simulation and post-processing"};
    app.require_subcommand(1);

    // run
    std::string run_path;
    std::string run_out;
    Overrides run_ov;
    auto* run = app.add_subcommand("run", "Simulate one pass end to end");
    run->add_option("scenario", run_path, "Scenario JSON")->required();
    run->add_option("--out", run_out, "Run directory (default runs/<label>)");
    run_ov.add_to(run);

    // batch
    std::string batch_dir;
    std::string batch_out = "runs";
    unsigned jobs = 1;
    Overrides batch_ov;
    auto* batch = app.add_subcommand("batch", "Run every scenario in a directory");
    batch->add_option("dir", batch_dir, "Directory of scenario JSON files")->required();
    batch->add_option("--out", batch_out, "Output directory (one subdirectory per label)")->capture_default_str();
    batch->add_option("--jobs", jobs, "Parallel runs")->check(CLI::Range(1u, 256u));
    batch_ov.add_to(batch, false);

    // ingest
    std::string ing_tags;
    std::string ing_sat;
    std::string ing_config;
    std::string ing_out;
    Overrides ing_ov;
    auto* ing = app.add_subcommand("ingest", "Post-process recorded time tags");
    ing->add_option("tags", ing_tags, "Ground time tags (.bin or .csv)")->required();
    ing->add_option("satrec", ing_sat, "Satellite record CSV")->required();
    ing->add_option("--config", ing_config, "Scenario JSON")->required();
    ing->add_option("--out", ing_out, "Write tally, key and report here");
    ing_ov.add_to(ing);

    // link-budget
    std::string lb_config;
    double lb_elev = 60.0;
    std::optional<double> lb_range;
    double lb_point = 0.0;
    auto* lb = app.add_subcommand("link-budget", "Loss breakdown at one elevation and range");
    lb->add_option("--config", lb_config, "Scenario JSON (defaults otherwise)");
    lb->add_option("--elevation", lb_elev, "Elevation (deg)")->capture_default_str();
    lb->add_option("--range", lb_range, "Slant range (km); default from the orbit altitude");
    lb->add_option("--pointing-error", lb_point, "Pointing error (urad)")->capture_default_str();

    // keyrate
    std::string kr_tally;
    std::string kr_config;
    std::optional<double> kr_eps;
    std::optional<double> kr_fec;
    std::optional<std::string> kr_conc;
    auto* kr = app.add_subcommand("keyrate", "Decoy bounds and key length from a tally file");
    kr->add_option("tally", kr_tally, "Tally file")->required();
    kr->add_option("--config", kr_config, "Scenario JSON supplying security settings");
    kr->add_option("--epsilon", kr_eps, "Total security parameter");
    kr->add_option("--f-ec", kr_fec, "Error-correction inefficiency");
    kr->add_option("--concentration", kr_conc, "kl, additive or none");

    // fit-pointing
    std::string fp_stars;
    std::string fp_holdout;
    std::string fp_out;
    auto* fp = app.add_subcommand("fit-pointing", "Fit the mount model to star offsets");
    fp->add_option("stars", fp_stars, "Star CSV az_deg,el_deg,dx_urad,dy_urad")->required();
    fp->add_option("--holdout", fp_holdout, "Star CSV for the holdout RMS");
    fp->add_option("--out", fp_out, "Write coefficients here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*run) {
            auto s = qgs::load_scenario(run_path);
            run_ov.apply(s);
            const fs::path out = run_out.empty() ? fs::path("runs") / s.label : fs::path(run_out);
            print_report(qgs::run_scenario(s, out));
        } else if (*batch) {
            auto list = qgs::load_scenario_dir(batch_dir);
            for (auto& s : list) batch_ov.apply(s);
            const auto reports = qgs::run_batch(list, fs::path(batch_out), jobs);
            qgs::write_summary_csv(std::cout, reports);
        } else if (*ing) {
            auto s = qgs::load_scenario(ing_config);
            ing_ov.apply(s);
            std::optional<fs::path> out;
            if (!ing_out.empty()) out = ing_out;
            print_report(qgs::ingest(ing_tags, ing_sat, s, out));
        } else if (*lb) {
            qgs::Scenario s;
            if (!lb_config.empty()) s = qgs::load_scenario(lb_config);
            qgs::require(lb_elev > 0.0 && lb_elev <= 90.0, "elevation", "must be in (0, 90]");
            const double range = lb_range ? *lb_range : qgs::slant_range_km(lb_elev, s.orbit.altitude_km);
            qgs::require(range > 0.0, "range", "must be > 0");
            const auto t = qgs::link_terms(range, lb_elev, s.link, lb_point);
            auto bg = s.background;
            bg.detector_dark_cps = s.detectors.dark_cps;
            std::printf("elevation    %10.3f deg\nrange        %10.3f km\n", lb_elev, range);
            print_db("geometric", t.geometric);
            print_db("atmospheric", t.atmospheric);
            print_db("receiver", t.receiver);
            print_db("pointing", t.pointing);
            print_db("total", t.total());
            std::printf("background   %10.3f cps per detector\n", qgs::background_rate(lb_elev, bg));
        } else if (*kr) {
            qgs::SecurityParams sec;
            if (!kr_config.empty()) sec = qgs::load_scenario(kr_config).security;
            if (kr_eps) sec.epsilon_total = *kr_eps;
            if (kr_fec) sec.f_ec = *kr_fec;
            if (kr_conc) sec.concentration = qgs::concentration_from_string(*kr_conc);
            auto in = open_in(kr_tally);
            const auto tally = qgs::read_tally(in);
            const auto b = qgs::decoy_bounds(tally, sec);
            const auto k = qgs::final_key_length(tally, b, sec);
            std::printf("Qmu=%.9g\nQnu=%.9g\nY0=%.9g\nEmu=%.9g\nEnu=%.9g\n", b.Qmu, b.Qnu, b.Y0, b.Emu, b.Enu);
            std::printf("Y1_lower=%.9g\ne1_upper=%.9g\nQ1_lower=%.9g\n", b.Y1_lower, b.e1_upper, b.Q1_lower);
            std::printf("key_bits=%llu\nfinal_key_bits=%llu\n", static_cast<unsigned long long>(tally.key_bits),
                        static_cast<unsigned long long>(k));
            if (!b.key_possible) std::printf("no_key_reason=%s\n", b.no_key_reason.c_str());
        } else if (*fp) {
            auto in = open_in(fp_stars);
            const auto stars = qgs::read_star_csv(in);
            const auto fit = qgs::fit_model(stars);
            if (fp_out.empty()) {
                qgs::write_coefficients(std::cout, fit.coefficients);
            } else {
                std::ofstream f(fp_out);
                if (!f) throw qgs::IoError("cannot write " + fp_out);
                qgs::write_coefficients(f, fit.coefficients);
            }
            std::fprintf(stderr, "fit residual rms: %.3f urad over %zu stars\n", fit.rms_residual_urad, stars.size());
            if (!fp_holdout.empty()) {
                auto h = open_in(fp_holdout);
                const auto hold = qgs::read_star_csv(h);
                std::fprintf(stderr, "holdout rms: %.3f urad over %zu stars\n",
                             qgs::pointing_rms(fit.coefficients, hold), hold.size());
            }
        }
    } catch (const qgs::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const qgs::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitIo;
    } catch (const qgs::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return 0;
}
