#include "qgs/sifting.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>

#include "qgs/rng.hpp"

namespace qgs {

namespace {

constexpr double kCoarseBinPs = 1e6;
constexpr double kInitialGatePs = 2e6;
constexpr double kMinGatePs = 2000.0;
constexpr int kMaxRefinements = 8;

struct Fit {
    double a;
    double b;
    double rms;
};

// Least squares y = a + b x, centered in extended precision.
Fit linear_fit(const std::vector<std::pair<double, double>>& xy) {
    const auto n = static_cast<long double>(xy.size());
    long double mx = 0;
    long double my = 0;
    for (const auto& [x, y] : xy) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    long double sxx = 0;
    long double sxy = 0;
    for (const auto& [x, y] : xy) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    const long double b = sxx > 0 ? sxy / sxx : 1.0L;
    const long double a = my - b * mx;
    long double ss = 0;
    for (const auto& [x, y] : xy) {
        const long double r = y - (a + b * x);
        ss += r * r;
    }
    return {static_cast<double>(a), static_cast<double>(b), static_cast<double>(std::sqrt(ss / n))};
}

double positive_mod(double x, double m) {
    double r = std::fmod(x, m);
    if (r < 0) r += m;
    return r;
}

}  // namespace

std::string to_string(ErrorEstimation e) { return e == ErrorEstimation::sidecar ? "sidecar" : "sampled"; }

ErrorEstimation error_estimation_from_string(const std::string& s) {
    if (s == "sidecar") return ErrorEstimation::sidecar;
    if (s == "sampled") return ErrorEstimation::sampled;
    throw ValidationError("error_estimation", "must be 'sidecar' or 'sampled', got '" + s + "'");
}

void SiftParams::validate(double pulse_period_ps) const {
    require_finite(window_ps, "sifting.window_ps");
    require(window_ps > 0.0, "sifting.window_ps", "must be > 0");
    if (window_ps >= pulse_period_ps)
        throw ValidationError("sifting.window_ps", "window " + std::to_string(window_ps) +
                                                       " ps is not shorter than the pulse period; slot is ambiguous");
    require(sample_fraction > 0.0 && sample_fraction < 1.0, "sifting.sample_fraction", "must be in (0, 1)");
}

void TallyCounts::validate() const {
    for (std::size_t i = 0; i < kIntensities; ++i) {
        const auto& t = per[i];
        const auto f = "tally[" + std::to_string(i) + "]";
        require(t.n_detected <= t.n_sent, f + ".n_detected", "exceeds n_sent");
        require(t.n_detected_sifted <= t.n_detected, f + ".n_detected_sifted", "exceeds n_detected");
        require(t.n_checked <= t.n_detected_sifted, f + ".n_checked", "exceeds n_detected_sifted");
        require(t.n_errors_sifted <= t.n_checked, f + ".n_errors_sifted", "exceeds n_checked");
    }
    require(key_bits <= per[kSignal].n_detected_sifted, "tally.key_bits", "exceeds signal sifted count");
}

std::uint64_t TallyCounts::sifted_total() const {
    std::uint64_t s = 0;
    for (const auto& t : per) s += t.n_detected_sifted;
    return s;
}

ClockSolution solve_clock(const TimeTagStream& ground, const SyncSchedule& schedule, const PassGeometry& pass) {
    require(schedule.period_ps > 0.0, "sync.period_ps", "must be > 0");
    std::vector<double> sync;
    std::vector<double> pps;
    for (const auto& t : ground) {
        if (t.channel == static_cast<std::uint8_t>(Channel::sync)) sync.push_back(static_cast<double>(t.time_ps));
        if (t.channel == static_cast<std::uint8_t>(Channel::pps)) pps.push_back(static_cast<double>(t.time_ps));
    }
    if (sync.size() < kMinSyncPairs || schedule.pulse_count < kMinSyncPairs)
        throw InsufficientDataError("need at least " + std::to_string(kMinSyncPairs) + " sync pulses, have " +
                                    std::to_string(std::min<std::uint64_t>(sync.size(), schedule.pulse_count)));

    // Absolute time from the PPS markers.
    ClockSolution sol;
    if (pps.size() >= 2) {
        std::vector<std::pair<double, double>> xy;
        for (double g : pps) xy.emplace_back(std::round(g / kPsPerSecond) * kPsPerSecond, g);
        const auto f = linear_fit(xy);
        sol.offset_ps = f.a;
        sol.drift = f.b - 1.0;
    } else if (pps.size() == 1) {
        sol.offset_ps = pps[0] - std::round(pps[0] / kPsPerSecond) * kPsPerSecond;
    }

    const double P = schedule.period_ps;
    const std::uint64_t k_first = schedule.first_pulse;
    const std::uint64_t k_last = schedule.first_pulse + schedule.pulse_count - 1;

    // Phase of the beacon modulo its period.
    const auto nbins = static_cast<std::size_t>(std::ceil(P / kCoarseBinPs));
    std::vector<std::uint64_t> hist(nbins, 0);
    std::vector<double> phase(sync.size());
    for (std::size_t i = 0; i < sync.size(); ++i) {
        const double s = emission_true_ps(pass, sol.to_true(sync[i]));
        phase[i] = positive_mod(s, P);
        ++hist[std::min(nbins - 1, static_cast<std::size_t>(phase[i] / kCoarseBinPs))];
    }
    const auto peak = static_cast<std::size_t>(std::max_element(hist.begin(), hist.end()) - hist.begin());
    std::uint64_t second = 0;
    for (std::size_t b = 0; b < nbins; ++b) {
        const std::size_t d = std::min((b + nbins - peak) % nbins, (peak + nbins - b) % nbins);
        if (d > 1) second = std::max(second, hist[b]);
    }
    if (nbins > 3 && 2 * second >= hist[peak])
        throw AmbiguousLockError("beacon correlation has two peaks within 3 dB (" + std::to_string(hist[peak]) +
                                 " vs " + std::to_string(second) + " counts)");
    double centre = 0.0;
    {
        const double c0 = (static_cast<double>(peak) + 0.5) * kCoarseBinPs;
        double sum = 0.0;
        std::size_t n = 0;
        for (double ph : phase) {
            double d = ph - c0;
            if (d > 0.5 * P) d -= P;
            if (d < -0.5 * P) d += P;
            if (std::abs(d) <= 1.5 * kCoarseBinPs) {
                sum += d;
                ++n;
            }
        }
        centre = c0 + (n ? sum / static_cast<double>(n) : 0.0);
        if (centre > 0.5 * P) centre -= P;
    }

    // Gated regression, narrowing the gate as the residual shrinks.
    double gate = kInitialGatePs;
    std::size_t last_pairs = 0;
    std::vector<std::pair<double, double>> xy;
    for (int iter = 0; iter < kMaxRefinements; ++iter) {
        xy.clear();
        for (double g : sync) {
            const double s = emission_true_ps(pass, sol.to_true(g)) - centre;
            const double kf = std::round(s / P);
            if (kf < static_cast<double>(k_first) || kf > static_cast<double>(k_last)) continue;
            if (std::abs(s - kf * P) > gate) continue;
            xy.emplace_back(arrival_true_ps(pass, kf * P), g);
        }
        if (xy.size() < kMinSyncPairs)
            throw InsufficientDataError("only " + std::to_string(xy.size()) + " sync pulses matched the beacon schedule");
        const auto f = linear_fit(xy);
        sol.offset_ps = f.a;
        sol.drift = f.b - 1.0;
        sol.residual_rms_ps = f.rms;
        sol.pairs = xy.size();
        centre = 0.0;
        const double next = std::max(5.0 * f.rms, kMinGatePs);
        if (xy.size() == last_pairs && next >= 0.9 * gate) break;
        last_pairs = xy.size();
        gate = std::min(gate, next);
    }
    if (!(std::abs(sol.drift) < 1e-5))
        throw AmbiguousLockError("recovered clock drift " + std::to_string(sol.drift) + " is implausible");
    return sol;
}

SiftResult match_and_sift(const TimeTagStream& ground, const SatelliteRecord& sat, const ClockSolution& clock,
                          const PassGeometry& pass, const DecoyScheme& scheme, const SiftParams& params,
                          std::uint64_t seed) {
    const double T = scheme.period_ps();
    params.validate(T);
    if (!(clock.residual_rms_ps < 0.5 * params.window_ps))
        throw ValidationError("sifting.window_ps", "clock residual " + std::to_string(clock.residual_rms_ps) +
                                                       " ps is not below half the window");

    SiftResult res;
    auto& tally = res.tally;
    tally.mu = scheme.mu;
    tally.window_ps = params.window_ps;
    tally.error_estimation = params.error_estimation;
    for (std::size_t i = 0; i < kIntensities; ++i) tally.per[i].n_sent = sat.sent[i];

    struct Hit {
        std::uint64_t slot;
        std::size_t order;
        std::uint8_t channel;
    };
    std::vector<Hit> hits;
    const double half = 0.5 * params.window_ps;
    for (std::size_t i = 0; i < ground.size(); ++i) {
        const auto& e = ground[i];
        if (e.channel > static_cast<std::uint8_t>(Channel::A)) continue;
        const double s = emission_true_ps(pass, clock.to_true(static_cast<double>(e.time_ps)));
        const double kf = std::round(s / T);
        if (std::abs(s - kf * T) > half || kf < static_cast<double>(sat.first_slot) ||
            kf > static_cast<double>(sat.last_slot)) {
            ++res.unmatched;
            continue;
        }
        hits.push_back({static_cast<std::uint64_t>(kf), i, e.channel});
    }
    std::sort(hits.begin(), hits.end(),
              [](const Hit& a, const Hit& b) { return a.slot != b.slot ? a.slot < b.slot : a.order < b.order; });

    for (std::size_t a = 0; a < hits.size();) {
        std::size_t b = a;
        while (b < hits.size() && hits[b].slot == hits[a].slot) ++b;
        const std::uint64_t slot = hits[a].slot;
        const SatelliteEntry* entry = sat.find(slot);
        if (!entry) {
            res.unmatched += b - a;
            a = b;
            continue;
        }
        std::size_t pick = a;
        if (b - a > 1) {
            const double u = rng::hash_unit(seed, rng::kStreamSiftTieBreak, slot);
            pick = a + std::min(b - a - 1, static_cast<std::size_t>(u * static_cast<double>(b - a)));
        }
        const std::uint8_t rb = hits[pick].channel / 2;
        const std::uint8_t rbit = hits[pick].channel % 2;
        auto& t = tally.per[entry->intensity];
        ++t.n_detected;
        if (rb == entry->basis) {
            ++t.n_detected_sifted;
            const bool err = rbit != entry->bit;
            const bool signal = entry->intensity == kSignal;
            bool check = true;
            if (params.error_estimation == ErrorEstimation::sampled && signal)
                check = rng::hash_unit(seed, rng::kStreamErrorSample, slot) < params.sample_fraction;
            if (check) {
                ++t.n_checked;
                t.n_errors_sifted += err ? 1 : 0;
            }
            if (signal && (params.error_estimation == ErrorEstimation::sidecar || !check)) res.key.push_back(rbit);
        }
        a = b;
    }
    tally.key_bits = res.key.size();
    return res;
}

double qber(const TallyCounts& tally, std::size_t intensity) {
    require(intensity < kIntensities, "intensity", "out of range");
    const auto& t = tally.per[intensity];
    if (t.n_checked == 0)
        throw UndefinedQberError("QBER undefined: no checked detections for intensity " + std::to_string(intensity));
    return static_cast<double>(t.n_errors_sifted) / static_cast<double>(t.n_checked);
}

void write_tally(std::ostream& os, const TallyCounts& t) {
    char buf[128];
    os << "format=qgs-tally-1\n";
    std::snprintf(buf, sizeof buf, "window_ps=%.17g\n", t.window_ps);
    os << buf << "error_estimation=" << to_string(t.error_estimation) << "\n";
    for (std::size_t i = 0; i < kIntensities; ++i) {
        const auto& p = t.per[i];
        std::snprintf(buf, sizeof buf, "mu_%zu=%.17g\n", i, t.mu[i]);
        os << buf;
        std::snprintf(buf, sizeof buf,
                      "n_sent_%zu=%" PRIu64 "\nn_detected_%zu=%" PRIu64 "\nn_detected_sifted_%zu=%" PRIu64
                      "\nn_errors_sifted_%zu=%" PRIu64 "\nn_checked_%zu=%" PRIu64 "\n",
                      i, p.n_sent, i, p.n_detected, i, p.n_detected_sifted, i, p.n_errors_sifted, i, p.n_checked);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "key_bits=%" PRIu64 "\n", t.key_bits);
    os << buf;
}

TallyCounts read_tally(std::istream& is) {
    std::map<std::string, std::pair<std::string, std::uint64_t>> kv;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("tally: expected key=value", lineno);
        kv[line.substr(0, eq)] = {line.substr(eq + 1), lineno};
    }
    auto get = [&](const std::string& k) -> const std::pair<std::string, std::uint64_t>& {
        auto it = kv.find(k);
        if (it == kv.end()) throw FormatError("tally: missing key '" + k + "'", lineno);
        return it->second;
    };
    auto num = [&](const std::string& k) {
        const auto& [v, ln] = get(k);
        try {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw FormatError("tally: bad number for '" + k + "'", ln);
        }
    };
    auto count = [&](const std::string& k) -> std::uint64_t {
        const auto& [v, ln] = get(k);
        if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
            throw FormatError("tally: bad count for '" + k + "'", ln);
        return std::stoull(v);
    };
    if (get("format").first != "qgs-tally-1") throw FormatError("tally: unsupported format", get("format").second);
    TallyCounts t;
    t.window_ps = num("window_ps");
    t.error_estimation = error_estimation_from_string(get("error_estimation").first);
    for (std::size_t i = 0; i < kIntensities; ++i) {
        const auto s = std::to_string(i);
        t.mu[i] = num("mu_" + s);
        auto& p = t.per[i];
        p.n_sent = count("n_sent_" + s);
        p.n_detected = count("n_detected_" + s);
        p.n_detected_sifted = count("n_detected_sifted_" + s);
        p.n_errors_sifted = count("n_errors_sifted_" + s);
        p.n_checked = count("n_checked_" + s);
    }
    t.key_bits = count("key_bits");
    t.validate();
    return t;
}

void write_key(std::ostream& os, const std::vector<std::uint8_t>& bits) {
    std::vector<char> bytes((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) bytes[i / 8] = static_cast<char>(static_cast<unsigned char>(bytes[i / 8]) | (0x80U >> (i % 8)));
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace qgs
