#include "qgs/quantum_layer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qgs/rng.hpp"

namespace qgs {

namespace {

constexpr std::uint64_t kPpsIndexBase = 1ULL << 40;

struct RawEvent {
    double true_ps;
    std::uint8_t channel;
    std::int64_t slot;      // emitting slot (signal) or nearest slot (background)
    std::int64_t alt_slot;  // neighbouring slot for background near a slot edge, else -1
    bool from_signal;
};

std::uint8_t slot_intensity_hash(std::uint64_t seed, std::uint64_t slot, const DecoyScheme& s) {
    const double u = rng::hash_unit(seed, rng::kStreamSlotIntensity, slot);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < kIntensities; ++i) {
        acc += s.prob[i];
        if (u < acc) return static_cast<std::uint8_t>(i);
    }
    return static_cast<std::uint8_t>(kIntensities - 1);
}

std::uint8_t slot_basis(std::uint64_t seed, std::uint64_t slot) {
    return rng::hash_unit(seed, rng::kStreamSlotBasis, slot) < 0.5 ? 0 : 1;
}

std::uint8_t slot_bit(std::uint64_t seed, std::uint64_t slot) {
    return rng::hash_unit(seed, rng::kStreamSlotBit, slot) < 0.5 ? 0 : 1;
}

std::uint64_t to_tag(double ground_ps, double tdc_ps) {
    return static_cast<std::uint64_t>(std::llround(ground_ps / tdc_ps)) * static_cast<std::uint64_t>(tdc_ps);
}

// Sort by tag then channel, keep the first event of each channel after every
// dead interval. Returns indices of survivors in output order.
template <class TagOf, class ChannelOf>
std::vector<std::size_t> sort_and_deadtime(std::size_t n, TagOf tag_of, ChannelOf ch_of, double dead_ps) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto ta = tag_of(a);
        const auto tb = tag_of(b);
        return ta != tb ? ta < tb : ch_of(a) < ch_of(b);
    });
    std::array<std::optional<std::uint64_t>, kChannelCount> last{};
    std::vector<std::size_t> keep;
    keep.reserve(n);
    for (auto i : idx) {
        const auto t = tag_of(i);
        auto& l = last[ch_of(i)];
        if (l && static_cast<double>(t - *l) < dead_ps) continue;
        l = t;
        keep.push_back(i);
    }
    return keep;
}

// Split `n` trials over categories with probabilities `p` (sums to 1).
std::array<std::uint64_t, kIntensities> multinomial(std::uint64_t n, const std::array<double, kIntensities>& p,
                                                   rng::Engine& g) {
    std::array<std::uint64_t, kIntensities> out{};
    double rest = 1.0;
    for (std::size_t i = 0; i + 1 < kIntensities; ++i) {
        if (n == 0) break;
        const double pi = rest > 0.0 ? std::clamp(p[i] / rest, 0.0, 1.0) : 0.0;
        std::binomial_distribution<std::uint64_t> b(n, pi);
        out[i] = pi >= 1.0 ? n : (pi <= 0.0 ? 0 : b(g));
        n -= out[i];
        rest -= p[i];
    }
    out[kIntensities - 1] += n;
    return out;
}

double interp_drift(const std::vector<HwpSample>& hwp, double t_s) {
    if (hwp.empty()) return 0.0;
    if (t_s <= hwp.front().t_s) return hwp.front().drift_deg;
    if (t_s >= hwp.back().t_s) return hwp.back().drift_deg;
    auto it = std::lower_bound(hwp.begin(), hwp.end(), t_s, [](const HwpSample& h, double t) { return h.t_s < t; });
    const auto& b = *it;
    const auto& a = *std::prev(it);
    const double f = (t_s - a.t_s) / (b.t_s - a.t_s);
    return a.drift_deg + f * (b.drift_deg - a.drift_deg);
}

}  // namespace

void DecoyScheme::validate() const {
    static const char* mu_names[] = {"scheme.mu_signal", "scheme.mu_decoy", "scheme.mu_vacuum"};
    static const char* p_names[] = {"scheme.p_signal", "scheme.p_decoy", "scheme.p_vacuum"};
    double sum = 0.0;
    for (std::size_t i = 0; i < kIntensities; ++i) {
        require_finite(mu[i], mu_names[i]);
        require(mu[i] >= 0.0, mu_names[i], "must be >= 0");
        require_finite(prob[i], p_names[i]);
        require(prob[i] >= 0.0 && prob[i] <= 1.0, p_names[i], "must be in [0, 1]");
        sum += prob[i];
    }
    require(std::abs(sum - 1.0) < 1e-9, "scheme.p_vacuum", "probabilities must sum to 1");
    require(mu[kVacuum] == 0.0, "scheme.mu_vacuum", "must be 0");
    require(mu[kDecoy] < mu[kSignal], "scheme.mu_decoy", "must be < mu_signal");
    require(pulse_rate_hz > 0.0 && pulse_rate_hz <= 1e10, "scheme.pulse_rate_hz", "must be in (0, 1e10]");
}

void DetectorParams::validate() const {
    require(efficiency > 0.0 && efficiency <= 1.0, "detectors.efficiency", "must be in (0, 1]");
    require(dark_cps >= 0.0 && std::isfinite(dark_cps), "detectors.dark_cps", "must be >= 0");
    require(dead_time_ns >= 0.0 && std::isfinite(dead_time_ns), "detectors.dead_time_ns", "must be >= 0");
    require(jitter_rms_ps >= 0.0 && std::isfinite(jitter_rms_ps), "detectors.jitter_rms_ps", "must be >= 0");
    require(tdc_resolution_ps >= 1.0 && tdc_resolution_ps <= 1e6 && tdc_resolution_ps == std::floor(tdc_resolution_ps),
            "detectors.tdc_resolution_ps", "must be a whole number of ps in [1, 1e6]");
}

void PolarizationModel::validate() const {
    require(intrinsic_error >= 0.0 && intrinsic_error <= 0.05, "polarization.intrinsic_error", "must be in [0, 0.05]");
    require(hwp_max_drift_deg >= 0.0 && hwp_error_probability(hwp_max_drift_deg) <= 0.05,
            "polarization.hwp_max_drift_deg", "drift error must be in [0, 0.05]");
}

double PolarizationModel::error_at(double drift_deg) const {
    return intrinsic_error + hwp_error_probability(drift_deg);
}

void ClockModel::validate() const {
    require_finite(offset_ps, "clock.offset_ps");
    require(std::abs(offset_ps) < 0.5 * kPsPerSecond, "clock.offset_ps", "must be within +-0.5 s");
    require_finite(drift, "clock.drift");
    require(std::abs(drift) < 1e-5, "clock.drift", "must be within +-1e-5");
}

void SyncParams::validate() const {
    require(rate_hz > 0.0 && rate_hz <= 1e6, "sync.rate_hz", "must be in (0, 1e6]");
    require(detection_prob >= 0.0 && detection_prob <= 1.0, "sync.detection_prob", "must be in [0, 1]");
    require(dark_cps >= 0.0 && std::isfinite(dark_cps), "sync.dark_cps", "must be >= 0");
    require(jitter_rms_ps >= 0.0 && std::isfinite(jitter_rms_ps), "sync.jitter_rms_ps", "must be >= 0");
    require(pps_jitter_ps >= 0.0 && pps_jitter_ps < 1e8, "sync.pps_jitter_ps", "must be in [0, 1e8)");
    require(margin_s >= 0.0 && std::isfinite(margin_s), "sync.margin_s", "must be >= 0");
    require(dead_time_ns >= 0.0 && std::isfinite(dead_time_ns), "sync.dead_time_ns", "must be >= 0");
    require(tdc_resolution_ps >= 1.0 && tdc_resolution_ps <= 1e6 && tdc_resolution_ps == std::floor(tdc_resolution_ps),
            "sync.tdc_resolution_ps", "must be a whole number of ps in [1, 1e6]");
}

const SatelliteEntry* SatelliteRecord::find(std::uint64_t slot) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), slot,
                               [](const SatelliteEntry& e, std::uint64_t s) { return e.pulse_index < s; });
    return it != entries.end() && it->pulse_index == slot ? &*it : nullptr;
}

double signal_gain(double mu, double eta) { return -std::expm1(-mu * eta); }

double arrival_true_ps(const PassGeometry& pass, double emit_ps) {
    return emit_ps + light_time_ps(pass.range_at(emit_ps / kPsPerSecond));
}

double emission_true_ps(const PassGeometry& pass, double arrival_ps) {
    double s = arrival_ps - light_time_ps(pass.range_at(arrival_ps / kPsPerSecond));
    for (int i = 0; i < 4; ++i) s = arrival_ps - light_time_ps(pass.range_at(s / kPsPerSecond));
    return s;
}

SliceChannel slice_channel(const PassGeometry& pass, const TrackingRecord* tracking,
                           const std::vector<HwpSample>& hwp, const QuantumConfig& cfg, double t_s) {
    const double el = pass.elevation_at(t_s);
    if (el <= 0.0) return {0.0, cfg.background.detector_dark_cps, cfg.polarization.error_at(0.0)};
    const double err = tracking ? tracking->error_at(t_s) : 0.0;
    const double eta = channel_transmittance(pass.range_at(t_s), el, cfg.link, err) * cfg.detectors.efficiency;
    return {eta, background_rate(el, cfg.background), cfg.polarization.error_at(interp_drift(hwp, t_s))};
}

QuantumOutput simulate_pass(const PassGeometry& pass, const TimeWindow& window, const TrackingRecord* tracking,
                            const QuantumConfig& cfg, std::uint64_t seed) {
    cfg.scheme.validate();
    cfg.detectors.validate();
    cfg.polarization.validate();
    cfg.clock.validate();
    cfg.background.validate();
    cfg.link.validate();
    require(cfg.slice_s > 0.0 && cfg.slice_s <= 1.0, "slice_s", "must be in (0, 1]");

    QuantumOutput out;
    if (pass.empty() || window.empty) return out;

    const auto& sch = cfg.scheme;
    const double T = sch.period_ps();
    const auto first = static_cast<std::uint64_t>(std::ceil(window.t_start_s * kPsPerSecond / T));
    const auto last = static_cast<std::uint64_t>(std::floor(window.t_end_s * kPsPerSecond / T));
    if (last < first) return out;
    out.satellite.first_slot = first;
    out.satellite.last_slot = last;

    const auto per_slice = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(cfg.slice_s * kPsPerSecond / T)));
    const std::uint64_t total = last - first + 1;
    const std::uint64_t n_slices = (total + per_slice - 1) / per_slice;
    const auto hwp = hwp_trajectory(pass, cfg.polarization.hwp_max_drift_deg);

    std::vector<RawEvent> raw;
    // Intensity of every instantiated slot, for the satellite's record.
    std::vector<std::pair<std::uint64_t, std::uint8_t>> slot_states;

    std::vector<std::pair<std::uint64_t, std::uint8_t>> cands;  // (slot, intensity), sorted
    std::vector<std::uint64_t> bg_slots;
    for (std::uint64_t j = 0; j < n_slices; ++j) {
        const std::uint64_t k0 = first + j * per_slice;
        const std::uint64_t k1 = std::min(last, k0 + per_slice - 1);
        const std::uint64_t m = k1 - k0 + 1;
        const double t_mid = (static_cast<double>(k0) + 0.5 * static_cast<double>(m)) * T / kPsPerSecond;
        const SliceChannel ch = slice_channel(pass, tracking, hwp, cfg, t_mid);

        std::array<double, kIntensities> q{};
        double q_max = 0.0;
        for (std::size_t i = 0; i < kIntensities; ++i) {
            q[i] = signal_gain(sch.mu[i], ch.eta);
            q_max = std::max(q_max, q[i]);
        }

        // Background and dark counts, uniform over the slice and the four detectors.
        auto gb = rng::engine(seed, rng::kStreamBackground, j);
        const double bg_mean = 4.0 * ch.noise_cps * static_cast<double>(m) * T / kPsPerSecond;
        const auto n_bg = bg_mean > 0.0 ? std::poisson_distribution<std::uint64_t>(bg_mean)(gb) : 0;
        std::uniform_real_distribution<double> u_slot(static_cast<double>(k0) - 0.5, static_cast<double>(k1) + 0.5);
        std::uniform_int_distribution<int> u_chan(0, 3);
        bg_slots.clear();
        for (std::uint64_t b = 0; b < n_bg; ++b) {
            const double u = u_slot(gb);
            const auto chn = static_cast<std::uint8_t>(u_chan(gb));
            auto k = static_cast<std::int64_t>(std::floor(u + 0.5));
            k = std::clamp(k, static_cast<std::int64_t>(k0), static_cast<std::int64_t>(k1));
            const double frac = u - static_cast<double>(k);
            std::int64_t alt = -1;
            if (std::abs(frac) > 0.4) {
                const std::int64_t n = k + (frac > 0 ? 1 : -1);
                if (n >= static_cast<std::int64_t>(k0) && n <= static_cast<std::int64_t>(k1)) alt = n;
            }
            raw.push_back({arrival_true_ps(pass, u * T), chn, k, alt, false});
            bg_slots.push_back(static_cast<std::uint64_t>(k));
            if (alt >= 0) bg_slots.push_back(static_cast<std::uint64_t>(alt));
        }

        // Signal detections by thinning.
        auto gp = rng::engine(seed, rng::kStreamPhotons, j);
        std::discrete_distribution<int> mark(sch.prob.begin(), sch.prob.end());
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> jitter(0.0, cfg.detectors.jitter_rms_ps);
        cands.clear();
        std::array<std::uint64_t, kIntensities> cand_count{};
        if (q_max > 0.0) {
            std::geometric_distribution<std::uint64_t> skip(q_max);
            for (std::uint64_t k = k0 + skip(gp); k <= k1; k += 1 + skip(gp)) {
                const auto i = static_cast<std::uint8_t>(mark(gp));
                ++cand_count[i];
                cands.emplace_back(k, i);
                if (unit(gp) >= q[i] / q_max) continue;
                const auto sb = slot_basis(seed, k);
                const auto sbit = slot_bit(seed, k);
                const std::uint8_t rb = unit(gp) < 0.5 ? 0 : 1;
                std::uint8_t rbit;
                if (rb == sb)
                    rbit = unit(gp) < ch.error_prob ? static_cast<std::uint8_t>(sbit ^ 1U) : sbit;
                else
                    rbit = unit(gp) < 0.5 ? 0 : 1;
                const double t = arrival_true_ps(pass, static_cast<double>(k) * T) + jitter(gp);
                raw.push_back({t, static_cast<std::uint8_t>(2 * rb + rbit), static_cast<std::int64_t>(k), -1, true});
                slot_states.emplace_back(k, i);
            }
        }

        // Slots touched only by background keep an independently drawn intensity.
        std::sort(bg_slots.begin(), bg_slots.end());
        bg_slots.erase(std::unique(bg_slots.begin(), bg_slots.end()), bg_slots.end());
        std::array<std::uint64_t, kIntensities> explicit_count{};
        std::uint64_t n_explicit = 0;
        for (auto k : bg_slots) {
            auto it = std::lower_bound(cands.begin(), cands.end(), std::make_pair(k, std::uint8_t{0}));
            if (it != cands.end() && it->first == k) {
                slot_states.emplace_back(k, it->second);
            } else {
                const auto i = slot_intensity_hash(seed, k, sch);
                ++explicit_count[i];
                ++n_explicit;
                slot_states.emplace_back(k, i);
            }
        }

        const auto rest = multinomial(m - cands.size() - n_explicit, sch.prob, gp);
        for (std::size_t i = 0; i < kIntensities; ++i)
            out.satellite.sent[i] += cand_count[i] + explicit_count[i] + rest[i];
    }

    // Ground tagger and detector dead time.
    const double tdc = cfg.detectors.tdc_resolution_ps;
    std::vector<std::uint64_t> tags(raw.size());
    std::vector<bool> valid(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double g = cfg.clock.ground_time(raw[i].true_ps);
        valid[i] = g >= 0.0;
        tags[i] = valid[i] ? to_tag(g, tdc) : 0;
    }
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (valid[i]) candidates.push_back(i);
    const auto keep = sort_and_deadtime(
        candidates.size(), [&](std::size_t a) { return tags[candidates[a]]; },
        [&](std::size_t a) { return raw[candidates[a]].channel; }, cfg.detectors.dead_time_ns * 1e3);

    std::vector<std::uint64_t> needed;
    out.events.reserve(keep.size());
    out.truth.reserve(keep.size());
    for (auto a : keep) {
        const auto& e = raw[candidates[a]];
        out.events.push_back({tags[candidates[a]], e.channel});
        out.truth.push_back({e.slot, e.from_signal});
        needed.push_back(static_cast<std::uint64_t>(e.slot));
        if (e.alt_slot >= 0) needed.push_back(static_cast<std::uint64_t>(e.alt_slot));
    }
    std::sort(needed.begin(), needed.end());
    needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
    std::sort(slot_states.begin(), slot_states.end());
    slot_states.erase(std::unique(slot_states.begin(), slot_states.end(),
                                  [](const auto& a, const auto& b) { return a.first == b.first; }),
                      slot_states.end());
    out.satellite.entries.reserve(needed.size());
    for (auto k : needed) {
        auto it = std::lower_bound(slot_states.begin(), slot_states.end(), std::make_pair(k, std::uint8_t{0}));
        const std::uint8_t i = (it != slot_states.end() && it->first == k) ? it->second : slot_intensity_hash(seed, k, sch);
        out.satellite.entries.push_back({k, slot_basis(seed, k), slot_bit(seed, k), i});
    }
    return out;
}

SyncSchedule sync_schedule(const PassGeometry& pass, const TimeWindow& window, const SyncParams& sync) {
    SyncSchedule sch;
    sch.period_ps = sync.period_ps();
    if (pass.empty() || window.empty) return sch;
    const double span0 = std::max(pass.start_s(), window.t_start_s - sync.margin_s);
    const double span1 = std::min(pass.end_s(), window.t_end_s + sync.margin_s);
    const auto first = static_cast<std::uint64_t>(std::ceil(span0 * kPsPerSecond / sch.period_ps));
    const auto last = static_cast<std::uint64_t>(std::floor(span1 * kPsPerSecond / sch.period_ps));
    if (last < first) return sch;
    sch.first_pulse = first;
    sch.pulse_count = last - first + 1;
    return sch;
}

SyncOutput generate_sync(const PassGeometry& pass, const TimeWindow& window, const SyncParams& sync,
                         const ClockModel& clock, std::uint64_t seed) {
    sync.validate();
    clock.validate();
    SyncOutput out;
    out.schedule = sync_schedule(pass, window, sync);
    if (out.schedule.pulse_count == 0) return out;
    const double span0 = std::max(pass.start_s(), window.t_start_s - sync.margin_s);
    const double span1 = std::min(pass.end_s(), window.t_end_s + sync.margin_s);
    const double P = out.schedule.period_ps;
    const std::uint64_t first = out.schedule.first_pulse;
    const std::uint64_t last = first + out.schedule.pulse_count - 1;

    struct Ev {
        double g;
        std::uint8_t ch;
    };
    std::vector<Ev> ev;
    ev.reserve(out.schedule.pulse_count + 16);
    const auto chunk = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(sync.rate_hz)));
    std::normal_distribution<double> jitter(0.0, sync.jitter_rms_ps);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto sync_ch = static_cast<std::uint8_t>(Channel::sync);
    for (std::uint64_t c0 = first; c0 <= last; c0 += chunk) {
        const std::uint64_t c1 = std::min(last, c0 + chunk - 1);
        auto g = rng::engine(seed, rng::kStreamSync, c0 / chunk);
        for (std::uint64_t k = c0; k <= c1; ++k) {
            if (sync.detection_prob < 1.0 && unit(g) >= sync.detection_prob) continue;
            const double t = arrival_true_ps(pass, static_cast<double>(k) * P) + jitter(g);
            ev.push_back({clock.ground_time(t), sync_ch});
        }
        const double t0 = (static_cast<double>(c0) - 0.5) * P;
        const double t1 = (static_cast<double>(c1) + 0.5) * P;
        const double mean = sync.dark_cps * (t1 - t0) / kPsPerSecond;
        const auto n = mean > 0.0 ? std::poisson_distribution<std::uint64_t>(mean)(g) : 0;
        std::uniform_real_distribution<double> ut(t0, t1);
        for (std::uint64_t i = 0; i < n; ++i) ev.push_back({clock.ground_time(arrival_true_ps(pass, ut(g))), sync_ch});
    }
    if (sync.pps) {
        const auto m0 = static_cast<std::uint64_t>(std::ceil(span0));
        const auto m1 = static_cast<std::uint64_t>(std::floor(span1));
        std::normal_distribution<double> pj(0.0, sync.pps_jitter_ps);
        for (std::uint64_t m = m0; m <= m1; ++m) {
            auto g = rng::engine(seed, rng::kStreamSync, kPpsIndexBase + m);
            ev.push_back({clock.ground_time(static_cast<double>(m) * kPsPerSecond) + pj(g),
                          static_cast<std::uint8_t>(Channel::pps)});
        }
    }

    std::vector<std::uint64_t> tags(ev.size());
    std::vector<std::size_t> ok;
    for (std::size_t i = 0; i < ev.size(); ++i) {
        if (ev[i].g < 0.0) continue;
        tags[i] = to_tag(ev[i].g, sync.tdc_resolution_ps);
        ok.push_back(i);
    }
    const auto keep = sort_and_deadtime(
        ok.size(), [&](std::size_t a) { return tags[ok[a]]; }, [&](std::size_t a) { return ev[ok[a]].ch; },
        sync.dead_time_ns * 1e3);
    out.events.reserve(keep.size());
    for (auto a : keep) out.events.push_back({tags[ok[a]], ev[ok[a]].ch});
    return out;
}

TimeTagStream merge_streams(const TimeTagStream& a, const TimeTagStream& b) {
    TimeTagStream out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out),
               [](const TimeTag& x, const TimeTag& y) {
                   return x.time_ps != y.time_ps ? x.time_ps < y.time_ps : x.channel < y.channel;
               });
    return out;
}

ExpectedCounts expected_counts(const PassGeometry& pass, const TimeWindow& window, const TrackingRecord* tracking,
                               const QuantumConfig& cfg, double coincidence_window_ps) {
    ExpectedCounts out;
    if (pass.empty() || window.empty) return out;
    const auto& sch = cfg.scheme;
    const double T = sch.period_ps();
    const double first = std::ceil(window.t_start_s * kPsPerSecond / T);
    const double last = std::floor(window.t_end_s * kPsPerSecond / T);
    const double per_slice = std::max(1.0, std::round(cfg.slice_s * kPsPerSecond / T));
    const auto hwp = hwp_trajectory(pass, cfg.polarization.hwp_max_drift_deg);
    const double sigma = cfg.detectors.jitter_rms_ps;
    const double accept = sigma > 0.0 ? std::erf(0.5 * coincidence_window_ps / (sigma * std::sqrt(2.0))) : 1.0;

    for (double k0 = first; k0 <= last; k0 += per_slice) {
        const double m = std::min(per_slice, last - k0 + 1.0);
        const auto ch = slice_channel(pass, tracking, hwp, cfg, (k0 + 0.5 * m) * T / kPsPerSecond);
        const double p_bg = -std::expm1(-4.0 * ch.noise_cps * coincidence_window_ps / kPsPerSecond);
        for (std::size_t i = 0; i < kIntensities; ++i) {
            const double n = m * sch.prob[i];
            const double sig = signal_gain(sch.mu[i], ch.eta) * accept;
            const double det = 1.0 - (1.0 - sig) * (1.0 - p_bg);
            const double share = sig + p_bg > 0.0 ? sig / (sig + p_bg) : 0.0;
            out.sent[i] += n;
            out.sifted[i] += 0.5 * n * det;
            out.errors[i] += 0.5 * n * det * (share * ch.error_prob + (1.0 - share) * 0.5);
        }
    }
    return out;
}

}  // namespace qgs
