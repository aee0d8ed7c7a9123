#include "qgs/mission.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "qgs/rng.hpp"
#include "qgs/timetag_io.hpp"

namespace qgs {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "none"; }

template <class F>
void write_file(const fs::path& path, F body, bool binary = false) {
    std::ofstream f(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    body(f);
    f.flush();
    if (!f) throw IoError("write failed: " + path.string());
}

void write_results(const fs::path& dir, const PostResult& post, const PassReport& report) {
    write_file(dir / "tally.txt", [&](std::ostream& os) { write_tally(os, post.sift.tally); });
    write_file(dir / "sifted.key", [&](std::ostream& os) { write_key(os, post.sift.key); }, true);
    write_file(dir / "report.txt", [&](std::ostream& os) { write_report(os, report); });
}

void fill_from_post(PassReport& r, const PostResult& post) {
    const auto& t = post.sift.tally;
    r.sifted_bits = t.sifted_total();
    r.key_bits = t.key_bits;
    if (t.per[kSignal].n_checked > 0) r.qber_signal = qber(t, kSignal);
    r.final_key_bits = post.final_key_bits;
    r.clock_locked = post.clock.has_value();
    if (post.clock) {
        r.clock_residual_ps = post.clock->residual_rms_ps;
        r.clock_offset_ps = post.clock->offset_ps;
        r.clock_drift = post.clock->drift;
    }
    r.Y1_lower = post.bounds.Y1_lower;
    r.e1_upper = post.bounds.e1_upper;
    r.no_key_reason = post.no_key_reason;
}

PassReport base_report(const Scenario& s, const PassGeometry& pass, const TimeWindow& window, double threshold) {
    PassReport r;
    r.label = s.label;
    r.site = s.site.name;
    r.date = s.date;
    const auto& c = pass.culmination();
    r.max_elevation_deg = c.elevation_deg;
    r.min_elevation_deg = threshold;
    r.efficient_time_s = window.duration_s();
    r.link_loss_db_at_culmination = loss_db(channel_transmittance(c.range_km, c.elevation_deg, s.link, 0.0));
    return r;
}

}  // namespace

void write_report(std::ostream& os, const PassReport& r) {
    os << "format=qgs-report-1\n"
       << "label=" << r.label << "\n"
       << "site=" << r.site << "\n"
       << "date=" << r.date << "\n"
       << "max_elevation_deg=" << fmt(r.max_elevation_deg) << "\n"
       << "min_elevation_deg=" << fmt(r.min_elevation_deg) << "\n"
       << "efficient_time_s=" << fmt(r.efficient_time_s) << "\n"
       << "sifted_bits=" << r.sifted_bits << "\n"
       << "key_bits=" << r.key_bits << "\n"
       << "qber_signal=" << fmt(r.qber_signal) << "\n"
       << "final_key_bits=" << r.final_key_bits << "\n"
       << "tracking_rms_x_urad=" << fmt(r.tracking_rms_x_urad) << "\n"
       << "tracking_rms_y_urad=" << fmt(r.tracking_rms_y_urad) << "\n"
       << "lost_track_s=" << fmt(r.lost_track_s) << "\n"
       << "pointing_rms_urad=" << fmt(r.pointing_rms_urad) << "\n"
       << "clock_locked=" << (r.clock_locked ? "true" : "false") << "\n"
       << "clock_residual_ps=" << fmt(r.clock_residual_ps) << "\n"
       << "clock_offset_ps=" << fmt(r.clock_offset_ps) << "\n"
       << "clock_drift=" << fmt(r.clock_drift) << "\n"
       << "link_loss_db_at_culmination=" << fmt(r.link_loss_db_at_culmination) << "\n"
       << "Y1_lower=" << fmt(r.Y1_lower) << "\n"
       << "e1_upper=" << fmt(r.e1_upper) << "\n"
       << "no_key_reason=" << r.no_key_reason << "\n";
}

PassReport read_report(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("report line without '='", lineno);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (kv["format"] != "qgs-report-1") throw FormatError("not a qgs report", 1);
    auto need = [&](const char* k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw FormatError(std::string("report is missing ") + k, lineno);
        return it->second;
    };
    auto num = [&](const char* k) {
        const auto& v = need(k);
        try {
            std::size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw FormatError(std::string("bad number for ") + k, lineno);
        }
    };
    auto opt = [&](const char* k) -> std::optional<double> {
        if (need(k) == "none") return std::nullopt;
        return num(k);
    };
    auto count = [&](const char* k) {
        const auto& v = need(k);
        if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
            throw FormatError(std::string("bad count for ") + k, lineno);
        return static_cast<std::uint64_t>(std::stoull(v));
    };
    PassReport r;
    r.label = need("label");
    r.site = need("site");
    r.date = need("date");
    r.max_elevation_deg = num("max_elevation_deg");
    r.min_elevation_deg = num("min_elevation_deg");
    r.efficient_time_s = num("efficient_time_s");
    r.sifted_bits = count("sifted_bits");
    r.key_bits = count("key_bits");
    r.qber_signal = opt("qber_signal");
    r.final_key_bits = count("final_key_bits");
    r.tracking_rms_x_urad = opt("tracking_rms_x_urad");
    r.tracking_rms_y_urad = opt("tracking_rms_y_urad");
    r.lost_track_s = opt("lost_track_s");
    r.pointing_rms_urad = opt("pointing_rms_urad");
    r.clock_locked = need("clock_locked") == "true";
    r.clock_residual_ps = num("clock_residual_ps");
    r.clock_offset_ps = num("clock_offset_ps");
    r.clock_drift = num("clock_drift");
    r.link_loss_db_at_culmination = num("link_loss_db_at_culmination");
    r.Y1_lower = num("Y1_lower");
    r.e1_upper = num("e1_upper");
    r.no_key_reason = need("no_key_reason");
    return r;
}

double window_threshold(const PassGeometry& pass, const WindowSpec& w) {
    if (w.target_duration_s) return min_elevation_for_duration(pass, *w.target_duration_s);
    return w.min_elevation_deg;
}

PostResult postprocess(const PassGeometry& pass, const TimeWindow& window, const TimeTagStream& ground,
                       const SatelliteRecord& sat, const Scenario& s) {
    PostResult post;
    post.sift.tally.mu = s.scheme.mu;
    post.sift.tally.window_ps = s.sifting.window_ps;
    post.sift.tally.error_estimation = s.sifting.error_estimation;
    for (std::size_t i = 0; i < kIntensities; ++i) post.sift.tally.per[i].n_sent = sat.sent[i];

    try {
        post.clock = solve_clock(ground, sync_schedule(pass, window, s.sync), pass);
    } catch (const InsufficientDataError& e) {
        post.no_key_reason = std::string("clock lock failed: ") + e.what();
        return post;
    } catch (const AmbiguousLockError& e) {
        post.no_key_reason = std::string("clock lock failed: ") + e.what();
        return post;
    }
    if (!(post.clock->residual_rms_ps < 0.5 * s.sifting.window_ps)) {
        post.no_key_reason = "clock residual " + fmt(post.clock->residual_rms_ps) +
                             " ps is not below half the coincidence window";
        return post;
    }
    post.sift = match_and_sift(ground, sat, *post.clock, pass, s.scheme, s.sifting, s.seed);
    post.bounds = decoy_bounds(post.sift.tally, s.security);
    post.final_key_bits = final_key_length(post.sift.tally, post.bounds, s.security);
    if (post.final_key_bits == 0) {
        const auto& sig = post.sift.tally.per[kSignal];
        if (!post.bounds.key_possible)
            post.no_key_reason = post.bounds.no_key_reason;
        else if (sig.n_checked > 0 && qber(post.sift.tally, kSignal) >= s.security.qber_abort)
            post.no_key_reason = "signal QBER above abort threshold";
        else
            post.no_key_reason = "finite-size penalties exceed the extractable key";
    }
    return post;
}

PassSetup prepare_pass(const Scenario& s) {
    s.validate();
    PassSetup p;
    p.pass = propagate_pass(s.site, s.orbit);
    p.threshold_deg = window_threshold(p.pass, s.window);
    p.window = efficient_window(p.pass, p.threshold_deg);

    // Star calibration sets how far off the mount is when the beacon is acquired.
    auto gen = rng::engine(s.seed, rng::kStreamPointing);
    const auto stars = synthetic_stars(s.pointing.truth, s.pointing.n_stars, s.pointing.noise_urad, gen);
    const auto holdout = synthetic_stars(s.pointing.truth, s.pointing.holdout_stars, s.pointing.noise_urad, gen);
    const auto fit = fit_model(stars);
    p.pointing_rms_urad = pointing_rms(fit.coefficients, holdout);
    ServoParams servo = s.servo;
    servo.initial_offset_deg = std::min(servo.initial_offset_deg, urad2deg(p.pointing_rms_urad));

    p.tracking = simulate_tracking(p.pass, servo, p.window, s.seed);
    return p;
}

PassReport run_scenario(const Scenario& s, const std::optional<fs::path>& out_dir) {
    const PassSetup setup = prepare_pass(s);
    const auto& pass = setup.pass;
    const auto& window = setup.window;
    const auto& tracking = setup.tracking;
    PassReport report = base_report(s, pass, window, setup.threshold_deg);
    report.pointing_rms_urad = setup.pointing_rms_urad;
    report.tracking_rms_x_urad = tracking.rms_x_urad;
    report.tracking_rms_y_urad = tracking.rms_y_urad;
    report.lost_track_s = tracking.lost_track_s;

    const QuantumConfig cfg = s.quantum();
    QuantumOutput q = simulate_pass(pass, window, &tracking, cfg, s.seed);
    const SyncOutput sync = generate_sync(pass, window, s.sync, s.clock, s.seed);
    const TimeTagStream ground = merge_streams(q.events, sync.events);

    const PostResult post = postprocess(pass, window, ground, q.satellite, s);
    fill_from_post(report, post);

    if (out_dir) {
        fs::create_directories(*out_dir);
        write_file(*out_dir / "pass.csv", [&](std::ostream& os) { write_pass_csv(os, pass); });
        write_file(*out_dir / "tracking.csv", [&](std::ostream& os) { write_tracking_csv(os, tracking); });
        save_tags(*out_dir / "tags.bin", ground);
        save_satellite(*out_dir / "satellite.csv", q.satellite);
        write_results(*out_dir, post, report);
    }
    return report;
}

PassReport ingest(const fs::path& tags, const fs::path& satellite, const Scenario& s,
                  const std::optional<fs::path>& out_dir) {
    s.validate();
    const TimeTagStream ground = load_tags(tags);
    const SatelliteRecord sat = load_satellite(satellite);
    const PassGeometry pass = propagate_pass(s.site, s.orbit);
    const double threshold = window_threshold(pass, s.window);
    const TimeWindow window = efficient_window(pass, threshold);
    PassReport report = base_report(s, pass, window, threshold);
    const PostResult post = postprocess(pass, window, ground, sat, s);
    fill_from_post(report, post);
    if (out_dir) {
        fs::create_directories(*out_dir);
        write_results(*out_dir, post, report);
    }
    return report;
}

std::vector<PassReport> run_batch(const std::vector<Scenario>& scenarios, const std::optional<fs::path>& out_dir,
                                  unsigned jobs) {
    std::set<std::string> labels;
    for (const auto& s : scenarios) {
        s.validate();
        if (!labels.insert(s.label).second) throw ValidationError("label", "duplicate label '" + s.label + "'");
    }
    std::vector<PassReport> reports(scenarios.size());
    std::vector<std::exception_ptr> errors(scenarios.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < scenarios.size();) {
            try {
                std::optional<fs::path> dir;
                if (out_dir) dir = *out_dir / scenarios[i].label;
                reports[i] = run_scenario(scenarios[i], dir);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, scenarios.size()))));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    if (out_dir) {
        fs::create_directories(*out_dir);
        write_file(*out_dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, reports); });
    }
    return reports;
}

std::vector<Scenario> load_scenario_dir(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<Scenario> out;
    for (const auto& f : files) {
        try {
            out.push_back(load_scenario(f));
        } catch (const ValidationError& e) {
            throw ValidationError(e.field(), f.filename().string() + ": " + e.detail());
        }
    }
    return out;
}

void write_summary_csv(std::ostream& os, const std::vector<PassReport>& reports) {
    os << "label,site,date,max_elev_deg,T_s,S_bits,QBER,K_bits\n";
    char buf[64];
    for (const auto& r : reports) {
        os << r.label << ',' << r.site << ',' << r.date << ',';
        std::snprintf(buf, sizeof buf, "%.2f,%.1f,", r.max_elevation_deg, r.efficient_time_s);
        os << buf << r.sifted_bits << ',';
        if (r.qber_signal) {
            std::snprintf(buf, sizeof buf, "%.5f", *r.qber_signal);
            os << buf;
        }
        os << ',' << r.final_key_bits << '\n';
    }
}

}  // namespace qgs
