#include "qgs/scenario.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <cctype>
#include <cmath>
#include <sstream>

namespace qgs {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "size_t fields are read as uint64");

class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ValidationError(path_, "must be an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return j_.contains(key); }

    void get(const std::string& key, double& out) {
        if (const json* v = take(key)) {
            if (!v->is_number()) throw ValidationError(field(key), "must be a number");
            out = v->get<double>();
        }
    }
    void get(const std::string& key, std::optional<double>& out) {
        double d = 0.0;
        if (has(key)) {
            get(key, d);
            out = d;
        }
    }
    void get(const std::string& key, int& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_integer()) throw ValidationError(field(key), "must be an integer");
            out = v->get<int>();
        }
    }
    void get(const std::string& key, std::uint64_t& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
                throw ValidationError(field(key), "must be a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void get(const std::string& key, bool& out) {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) throw ValidationError(field(key), "must be true or false");
            out = v->get<bool>();
        }
    }
    void get(const std::string& key, std::string& out) {
        if (const json* v = take(key)) {
            if (!v->is_string()) throw ValidationError(field(key), "must be a string");
            out = v->get<std::string>();
        }
    }
    template <class E, class F>
    void get_enum(const std::string& key, E& out, F parse) {
        std::string s;
        if (has(key)) {
            get(key, s);
            try {
                out = parse(s);
            } catch (const ValidationError& e) {
                throw ValidationError(field(key), e.detail());
            } catch (const std::exception& e) {
                throw ValidationError(field(key), e.what());
            }
        }
    }

    std::optional<Section> sub(const std::string& key) {
        if (const json* v = take(key)) return Section(*v, field(key));
        return std::nullopt;
    }

    void done() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ValidationError(field(it.key()), "unknown key");
    }

private:
    const json* take(const std::string& key) {
        auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        used_.insert(key);
        return &*it;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

template <class F>
void within(const std::string& prefix, F f) {
    try {
        f();
    } catch (const ValidationError& e) {
        if (e.field().rfind(prefix + ".", 0) == 0) throw;
        throw ValidationError(prefix + "." + e.field(), e.detail());
    }
}

void read_coefficients(Section& s, PointingCoefficients& c) {
    s.get("IA", c.IA);
    s.get("IE", c.IE);
    s.get("CA", c.CA);
    s.get("NPAE", c.NPAE);
    s.get("AN", c.AN);
    s.get("AW", c.AW);
    s.get("TF", c.TF);
    s.done();
}

}  // namespace

void Scenario::validate() const {
    require(!label.empty(), "label", "must not be empty");
    for (char c : label)
        require(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.', "label",
                "may only contain letters, digits, '_', '-' and '.'");
    require(label != "." && label != "..", "label", "must name a directory");
    within("site", [&] { site.validate(); });
    within("orbit", [&] { orbit.validate(); });
    require(window.min_elevation_deg >= 5.0 && window.min_elevation_deg < 90.0, "window.min_elevation_deg",
            "must be in [5, 90)");
    if (window.target_duration_s)
        require(*window.target_duration_s > 0.0 && std::isfinite(*window.target_duration_s),
                "window.target_duration_s", "must be > 0");
    within("link", [&] { link.validate(); });
    within("background", [&] { background.validate(); });
    within("scheme", [&] { scheme.validate(); });
    within("detectors", [&] { detectors.validate(); });
    within("polarization", [&] { polarization.validate(); });
    within("servo", [&] { servo.validate(); });
    within("sync", [&] { sync.validate(); });
    within("clock", [&] { clock.validate(); });
    within("sifting", [&] { sifting.validate(scheme.period_ps()); });
    within("security", [&] { security.validate(); });
    require(pointing.n_stars >= PointingCoefficients::kTerms, "pointing.n_stars", "must be >= 7");
    require(pointing.holdout_stars >= 1, "pointing.holdout_stars", "must be >= 1");
    require(pointing.noise_urad >= 0.0 && std::isfinite(pointing.noise_urad), "pointing.noise_urad", "must be >= 0");
    within("pointing.truth", [&] { pointing.truth.validate(); });
}

QuantumConfig Scenario::quantum() const {
    QuantumConfig q;
    q.scheme = scheme;
    q.link = link;
    q.background = background;
    q.background.detector_dark_cps = detectors.dark_cps;
    q.detectors = detectors;
    q.polarization = polarization;
    q.clock = clock;
    return q;
}

Scenario parse_scenario(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("scenario is not valid JSON: ") + e.what(), e.byte);
    }
    Section r(root, "");
    int version = 0;
    if (!r.has("format_version")) throw ValidationError("format_version", "missing");
    r.get("format_version", version);
    if (version != kScenarioFormatVersion)
        throw ValidationError("format_version", "unsupported version " + std::to_string(version) + " (expected " +
                                                    std::to_string(kScenarioFormatVersion) + ")");
    Scenario s;
    r.get("label", s.label);
    r.get("date", s.date);
    r.get("calibration_note", s.calibration_note);
    r.get("seed", s.seed);

    if (auto x = r.sub("site")) {
        x->get("name", s.site.name);
        x->get("latitude_deg", s.site.latitude_deg);
        x->get("longitude_deg", s.site.longitude_deg);
        x->get("altitude_m", s.site.altitude_m);
        x->get_enum("environment", s.site.environment, environment_from_string);
        x->done();
    }
    if (auto x = r.sub("orbit")) {
        x->get("altitude_km", s.orbit.altitude_km);
        x->get("max_elevation_deg", s.orbit.max_elevation_deg);
        x->get_enum("direction", s.orbit.direction, pass_direction_from_string);
        x->done();
    }
    if (auto x = r.sub("window")) {
        x->get("min_elevation_deg", s.window.min_elevation_deg);
        x->get("target_duration_s", s.window.target_duration_s);
        x->done();
    }
    if (auto x = r.sub("link")) {
        x->get("tx_divergence_urad", s.link.tx_divergence_urad);
        x->get("rx_aperture_m", s.link.rx_aperture_m);
        x->get("receiver_efficiency", s.link.receiver_efficiency);
        x->get("zenith_transmittance", s.link.zenith_transmittance);
        x->get("fov_urad", s.link.fov_urad);
        x->get("filter_bandwidth_nm", s.link.filter_bandwidth_nm);
        x->get("star_zero_point", s.link.star_zero_point);
        x->done();
    }
    if (auto x = r.sub("detectors")) {
        x->get("efficiency", s.detectors.efficiency);
        x->get("dark_cps", s.detectors.dark_cps);
        x->get("dead_time_ns", s.detectors.dead_time_ns);
        x->get("jitter_rms_ps", s.detectors.jitter_rms_ps);
        x->get("tdc_resolution_ps", s.detectors.tdc_resolution_ps);
        x->done();
    }
    s.background = BackgroundModel::preset(s.site.environment, s.detectors.dark_cps);
    if (auto x = r.sub("background")) {
        x->get("base_rate_cps", s.background.base_rate_cps);
        x->get("low_elevation_rate_cps", s.background.low_elevation_rate_cps);
        x->get("elevation_knee_deg", s.background.elevation_knee_deg);
        x->done();
    }
    if (auto x = r.sub("scheme")) {
        x->get("mu_signal", s.scheme.mu[kSignal]);
        x->get("mu_decoy", s.scheme.mu[kDecoy]);
        x->get("mu_vacuum", s.scheme.mu[kVacuum]);
        x->get("p_signal", s.scheme.prob[kSignal]);
        x->get("p_decoy", s.scheme.prob[kDecoy]);
        x->get("p_vacuum", s.scheme.prob[kVacuum]);
        x->get("pulse_rate_hz", s.scheme.pulse_rate_hz);
        x->done();
    }
    if (auto x = r.sub("polarization")) {
        x->get("intrinsic_error", s.polarization.intrinsic_error);
        x->get("hwp_max_drift_deg", s.polarization.hwp_max_drift_deg);
        x->done();
    }
    if (auto x = r.sub("servo")) {
        auto& v = s.servo;
        x->get("position_loop_gain", v.position_loop_gain);
        x->get("speed_loop_gain", v.speed_loop_gain);
        x->get("speed_loop_damping", v.speed_loop_damping);
        x->get("max_accel_deg_s2", v.max_accel_deg_s2);
        x->get("max_rate_deg_s", v.max_rate_deg_s);
        x->get("encoder_bits", v.encoder_bits);
        x->get("camera_noise_rms_urad", v.camera_noise_rms_urad);
        x->get("camera_rate_hz", v.camera_rate_hz);
        x->get("disturbance_rms_urad", v.disturbance_rms_urad);
        x->get("disturbance_bandwidth_hz", v.disturbance_bandwidth_hz);
        x->get("loop_dt_s", v.loop_dt_s);
        x->get("record_interval_s", v.record_interval_s);
        x->get("initial_offset_deg", v.initial_offset_deg);
        x->done();
    }
    if (auto x = r.sub("sync")) {
        auto& v = s.sync;
        x->get("rate_hz", v.rate_hz);
        x->get("detection_prob", v.detection_prob);
        x->get("dark_cps", v.dark_cps);
        x->get("jitter_rms_ps", v.jitter_rms_ps);
        x->get("pps", v.pps);
        x->get("pps_jitter_ps", v.pps_jitter_ps);
        x->get("margin_s", v.margin_s);
        x->get("dead_time_ns", v.dead_time_ns);
        x->done();
    }
    s.sync.tdc_resolution_ps = s.detectors.tdc_resolution_ps;
    if (auto x = r.sub("clock")) {
        x->get("offset_ps", s.clock.offset_ps);
        x->get("drift", s.clock.drift);
        x->done();
    }
    if (auto x = r.sub("sifting")) {
        x->get("window_ps", s.sifting.window_ps);
        x->get_enum("error_estimation", s.sifting.error_estimation, error_estimation_from_string);
        x->get("sample_fraction", s.sifting.sample_fraction);
        x->done();
    }
    if (auto x = r.sub("security")) {
        x->get("epsilon_total", s.security.epsilon_total);
        x->get("f_ec", s.security.f_ec);
        x->get("qber_abort", s.security.qber_abort);
        x->get_enum("concentration", s.security.concentration, concentration_from_string);
        x->done();
    }
    if (auto x = r.sub("pointing")) {
        x->get("n_stars", s.pointing.n_stars);
        x->get("holdout_stars", s.pointing.holdout_stars);
        x->get("noise_urad", s.pointing.noise_urad);
        if (auto t = x->sub("truth")) read_coefficients(*t, s.pointing.truth);
        x->done();
    }
    if (auto x = r.sub("reference")) {
        x->get("T_s", s.reference.T_s);
        x->get("S_bits", s.reference.S_bits);
        x->get("qber", s.reference.qber);
        x->get("K_bits", s.reference.K_bits);
        x->done();
    }
    r.done();
    s.validate();
    return s;
}

std::string scenario_to_json(const Scenario& s) {
    ordered_json j;
    j["format_version"] = kScenarioFormatVersion;
    j["label"] = s.label;
    if (!s.date.empty()) j["date"] = s.date;
    j["seed"] = s.seed;
    j["site"] = {{"name", s.site.name},
                 {"latitude_deg", s.site.latitude_deg},
                 {"longitude_deg", s.site.longitude_deg},
                 {"altitude_m", s.site.altitude_m},
                 {"environment", to_string(s.site.environment)}};
    j["orbit"] = {{"altitude_km", s.orbit.altitude_km},
                  {"max_elevation_deg", s.orbit.max_elevation_deg},
                  {"direction", to_string(s.orbit.direction)}};
    j["window"] = {{"min_elevation_deg", s.window.min_elevation_deg}};
    if (s.window.target_duration_s) j["window"]["target_duration_s"] = *s.window.target_duration_s;
    j["link"] = {{"tx_divergence_urad", s.link.tx_divergence_urad},
                 {"rx_aperture_m", s.link.rx_aperture_m},
                 {"receiver_efficiency", s.link.receiver_efficiency},
                 {"zenith_transmittance", s.link.zenith_transmittance},
                 {"fov_urad", s.link.fov_urad},
                 {"filter_bandwidth_nm", s.link.filter_bandwidth_nm},
                 {"star_zero_point", s.link.star_zero_point}};
    j["background"] = {{"base_rate_cps", s.background.base_rate_cps},
                       {"low_elevation_rate_cps", s.background.low_elevation_rate_cps},
                       {"elevation_knee_deg", s.background.elevation_knee_deg}};
    j["scheme"] = {{"mu_signal", s.scheme.mu[kSignal]},     {"mu_decoy", s.scheme.mu[kDecoy]},
                   {"mu_vacuum", s.scheme.mu[kVacuum]},     {"p_signal", s.scheme.prob[kSignal]},
                   {"p_decoy", s.scheme.prob[kDecoy]},      {"p_vacuum", s.scheme.prob[kVacuum]},
                   {"pulse_rate_hz", s.scheme.pulse_rate_hz}};
    j["detectors"] = {{"efficiency", s.detectors.efficiency},
                      {"dark_cps", s.detectors.dark_cps},
                      {"dead_time_ns", s.detectors.dead_time_ns},
                      {"jitter_rms_ps", s.detectors.jitter_rms_ps},
                      {"tdc_resolution_ps", s.detectors.tdc_resolution_ps}};
    j["polarization"] = {{"intrinsic_error", s.polarization.intrinsic_error},
                         {"hwp_max_drift_deg", s.polarization.hwp_max_drift_deg}};
    const auto& v = s.servo;
    j["servo"] = {{"position_loop_gain", v.position_loop_gain},
                  {"speed_loop_gain", v.speed_loop_gain},
                  {"speed_loop_damping", v.speed_loop_damping},
                  {"max_accel_deg_s2", v.max_accel_deg_s2},
                  {"max_rate_deg_s", v.max_rate_deg_s},
                  {"encoder_bits", v.encoder_bits},
                  {"camera_noise_rms_urad", v.camera_noise_rms_urad},
                  {"camera_rate_hz", v.camera_rate_hz},
                  {"disturbance_rms_urad", v.disturbance_rms_urad},
                  {"disturbance_bandwidth_hz", v.disturbance_bandwidth_hz},
                  {"loop_dt_s", v.loop_dt_s},
                  {"record_interval_s", v.record_interval_s},
                  {"initial_offset_deg", v.initial_offset_deg}};
    j["sync"] = {{"rate_hz", s.sync.rate_hz},           {"detection_prob", s.sync.detection_prob},
                 {"dark_cps", s.sync.dark_cps},         {"jitter_rms_ps", s.sync.jitter_rms_ps},
                 {"pps", s.sync.pps},                   {"pps_jitter_ps", s.sync.pps_jitter_ps},
                 {"margin_s", s.sync.margin_s},         {"dead_time_ns", s.sync.dead_time_ns}};
    j["clock"] = {{"offset_ps", s.clock.offset_ps}, {"drift", s.clock.drift}};
    j["sifting"] = {{"window_ps", s.sifting.window_ps},
                    {"error_estimation", to_string(s.sifting.error_estimation)},
                    {"sample_fraction", s.sifting.sample_fraction}};
    j["security"] = {{"epsilon_total", s.security.epsilon_total},
                     {"f_ec", s.security.f_ec},
                     {"qber_abort", s.security.qber_abort},
                     {"concentration", to_string(s.security.concentration)}};
    const auto& t = s.pointing.truth;
    j["pointing"] = {{"n_stars", s.pointing.n_stars},
                     {"holdout_stars", s.pointing.holdout_stars},
                     {"noise_urad", s.pointing.noise_urad},
                     {"truth",
                      {{"IA", t.IA}, {"IE", t.IE}, {"CA", t.CA}, {"NPAE", t.NPAE}, {"AN", t.AN}, {"AW", t.AW}, {"TF", t.TF}}}};
    ordered_json ref = ordered_json::object();
    if (s.reference.T_s) ref["T_s"] = *s.reference.T_s;
    if (s.reference.S_bits) ref["S_bits"] = *s.reference.S_bits;
    if (s.reference.qber) ref["qber"] = *s.reference.qber;
    if (s.reference.K_bits) ref["K_bits"] = *s.reference.K_bits;
    if (!ref.empty()) j["reference"] = ref;
    if (!s.calibration_note.empty()) j["calibration_note"] = s.calibration_note;
    return j.dump(2) + "\n";
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open scenario " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_scenario(ss.str());
}

void save_scenario(const std::filesystem::path& path, const Scenario& s) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f << scenario_to_json(s);
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace qgs
