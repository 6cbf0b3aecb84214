#include "dronerid/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "dronerid/dsp.hpp"
#include "dronerid/error.hpp"
#include "dronerid/tf_analysis.hpp"

namespace dronerid::eval {

// ---------------------------------------------------------------------------
// Metrics

double iou(const BoundingBox& a, const BoundingBox& b) {
    const double dt = std::min(a.t_max_s, b.t_max_s) - std::max(a.t_min_s, b.t_min_s);
    const double df = std::min(a.f_max_hz, b.f_max_hz) - std::max(a.f_min_hz, b.f_min_hz);
    const double inter = (dt > 0.0 && df > 0.0) ? dt * df : 0.0;
    const double uni = a.area() + b.area() - inter;
    if (!(uni > 0.0)) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

namespace {

auto box_key(const BoundingBox& b) { return std::make_tuple(b.t_min_s, b.t_max_s, b.f_min_hz, b.f_max_hz); }

}  // namespace

MatchScore match_and_score(const std::vector<BoundingBox>& dets, const std::vector<BoundingBox>& truths,
                           double iou_thresh) {
    require(iou_thresh > 0.0 && iou_thresh < 1.0, ErrorCode::configuration, "iou threshold must lie in (0, 1)");
    struct Pair {
        double v;
        std::size_t d, t;
    };
    std::vector<Pair> pairs;
    for (std::size_t d = 0; d < dets.size(); ++d)
        for (std::size_t t = 0; t < truths.size(); ++t) {
            const double v = iou(dets[d], truths[t]);
            if (v > 0.0) pairs.push_back({v, d, t});
        }
    std::sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
        if (a.v != b.v) return a.v > b.v;
        const auto ka = box_key(dets[a.d]), kb = box_key(dets[b.d]);
        if (ka != kb) return ka < kb;
        return box_key(truths[a.t]) < box_key(truths[b.t]);
    });

    std::vector<char> d_used(dets.size(), 0), t_used(truths.size(), 0);
    std::vector<double> partner(truths.size(), 0.0);
    MatchScore s;
    for (const auto& p : pairs) {
        if (d_used[p.d] || t_used[p.t]) continue;
        d_used[p.d] = t_used[p.t] = 1;
        partner[p.t] = p.v;
        if (p.v >= iou_thresh) ++s.tp;
    }
    s.fp = static_cast<int>(dets.size()) - s.tp;
    s.fn = static_cast<int>(truths.size()) - s.tp;
    if (s.tp + s.fp > 0)
        s.precision = static_cast<double>(s.tp) / (s.tp + s.fp);
    else
        s.precision_undefined = true;
    if (s.tp + s.fn > 0)
        s.recall = static_cast<double>(s.tp) / (s.tp + s.fn);
    else
        s.recall_undefined = true;
    // Summed in sorted order so the result is bit-identical under permutation.
    std::sort(partner.begin(), partner.end());
    if (!truths.empty()) s.mean_iou = std::accumulate(partner.begin(), partner.end(), 0.0) / truths.size();
    s.wem = (s.mean_iou + s.precision + s.recall) / 3.0;
    return s;
}

// ---------------------------------------------------------------------------
// Variants and configuration

Variant parse_variant(const std::string& name) {
    if (name == "baseline") return Variant::baseline;
    if (name == "f_only") return Variant::f_only;
    if (name == "tf_full") return Variant::tf_full;
    if (name == "direct_refine") return Variant::direct_refine;
    fail(ErrorCode::configuration, "unknown variant '" + name + "'");
}

const char* to_string(Variant v) {
    switch (v) {
        case Variant::baseline: return "baseline";
        case Variant::f_only: return "f_only";
        case Variant::tf_full: return "tf_full";
        case Variant::direct_refine: return "direct_refine";
    }
    return "unknown";
}

std::vector<Variant> all_variants() {
    return {Variant::baseline, Variant::f_only, Variant::tf_full, Variant::direct_refine};
}

void SweepConfig::validate() const {
    const auto cfg = ErrorCode::configuration;
    require(num_scenarios >= 0, cfg, "num_scenarios must be >= 0");
    require(!snr_db.empty() && !noise_kinds.empty() && !attenuation_db.empty() && !duration_ms.empty(), cfg,
            "sweep axes must not be empty");
    for (double d : duration_ms) require(d > 0.0, cfg, "durations must be positive");
    for (double a : attenuation_db) require(a >= 0.0, cfg, "attenuation must be >= 0");
    require(!variants.empty(), cfg, "no variants selected");
    frame.validate();
    refine.validate();
    require(iou_thresh > 0.0 && iou_thresh < 1.0, cfg, "iou_thresh must lie in (0, 1)");
    require(stft_size > 0 && stft_hop > 0 && max_time_bins >= 2, cfg, "bad STFT settings");
    require(max_cfo_hz >= 0.0, cfg, "max_cfo_hz must be >= 0");
    const auto& in = interference;
    require(in.fhss_probability >= 0.0 && in.fhss_probability <= 1.0 && in.video_probability >= 0.0 &&
                in.video_probability <= 1.0 && in.fhss_in_band_probability >= 0.0 &&
                in.fhss_in_band_probability <= 1.0,
            cfg, "interference probabilities must lie in [0, 1]");
    require(in.fhss_min_ms > 0.0 && in.fhss_min_ms <= in.fhss_max_ms, cfg, "bad FHSS duration range");
    require(in.fhss_min_bw_hz > 0.0 && in.fhss_min_bw_hz <= in.fhss_max_bw_hz, cfg, "bad FHSS bandwidth range");
    preset_prior(bank_preset);
    for (const auto& s : scenarios) {
        require(s.duration_ms > 0.0, cfg, "scenario duration must be positive");
        require(s.attenuation_db >= 0.0, cfg, "scenario attenuation must be >= 0");
    }
}

namespace {

using json = nlohmann::json;

template <typename T>
std::vector<T> axis(const json& j, const char* key, std::vector<T> def) {
    if (!j.contains(key)) return def;
    if (j[key].is_array()) return j[key].get<std::vector<T>>();
    return {j[key].get<T>()};
}

std::vector<double> range_or_list(const json& j, const char* key, std::vector<double> def) {
    if (!j.contains(key)) return def;
    const auto& v = j[key];
    if (v.is_object()) {
        const double lo = v.at("start").get<double>(), hi = v.at("stop").get<double>(),
                     step = v.at("step").get<double>();
        require(step > 0.0 && hi >= lo, ErrorCode::parse_failed, std::string(key) + ": bad range");
        std::vector<double> out;
        for (int i = 0; lo + i * step <= hi + 1e-9; ++i) out.push_back(lo + i * step);
        return out;
    }
    return axis<double>(j, key, def);
}

}  // namespace

SweepConfig sweep_config_from_json(const std::string& text, const std::string& source) {
    SweepConfig c;
    static const std::set<std::string> known{"master_seed", "num_scenarios", "snr_db", "noise_kinds",
                                             "attenuation_db", "duration_ms", "variants", "bank_preset",
                                             "frame", "interference", "max_cfo_hz", "detector",
                                             "refine", "iou_thresh", "stft_size", "stft_hop",
                                             "max_time_bins", "scenarios"};
    try {
        const auto j = json::parse(text);
        require(j.is_object(), ErrorCode::parse_failed, source + ": top level must be an object");
        for (const auto& [k, _] : j.items())
            require(known.count(k) > 0, ErrorCode::parse_failed, source + ": unknown key '" + k + "'");
        c.master_seed = j.value("master_seed", c.master_seed);
        c.num_scenarios = j.value("num_scenarios", c.num_scenarios);
        c.snr_db = range_or_list(j, "snr_db", c.snr_db);
        c.attenuation_db = range_or_list(j, "attenuation_db", c.attenuation_db);
        c.duration_ms = range_or_list(j, "duration_ms", c.duration_ms);
        if (j.contains("noise_kinds")) {
            c.noise_kinds.clear();
            for (const auto& n : axis<std::string>(j, "noise_kinds", {})) c.noise_kinds.push_back(parse_noise_kind(n));
        }
        if (j.contains("variants")) {
            c.variants.clear();
            for (const auto& n : axis<std::string>(j, "variants", {})) c.variants.push_back(parse_variant(n));
        }
        c.bank_preset = j.value("bank_preset", c.bank_preset);
        c.max_cfo_hz = j.value("max_cfo_hz", c.max_cfo_hz);
        c.iou_thresh = j.value("iou_thresh", c.iou_thresh);
        c.stft_size = j.value("stft_size", c.stft_size);
        c.stft_hop = j.value("stft_hop", c.stft_hop);
        c.max_time_bins = j.value("max_time_bins", c.max_time_bins);
        if (j.contains("frame")) {
            const auto& f = j["frame"];
            auto& s = c.frame;
            s.fft_size = f.value("fft_size", s.fft_size);
            s.used_subcarriers = f.value("used_subcarriers", s.used_subcarriers);
            s.subcarrier_spacing_hz = f.value("subcarrier_spacing_hz", s.subcarrier_spacing_hz);
            s.cp_normal = f.value("cp_normal", s.cp_normal);
            s.cp_extend = f.value("cp_extend", s.cp_extend);
            s.num_symbols = f.value("num_symbols", s.num_symbols);
        }
        if (j.contains("interference")) {
            const auto& i = j["interference"];
            auto& in = c.interference;
            in.fhss_probability = i.value("fhss_probability", in.fhss_probability);
            in.fhss_rel_db = i.value("fhss_rel_db", in.fhss_rel_db);
            in.fhss_in_band_probability = i.value("fhss_in_band_probability", in.fhss_in_band_probability);
            in.fhss_min_ms = i.value("fhss_min_ms", in.fhss_min_ms);
            in.fhss_max_ms = i.value("fhss_max_ms", in.fhss_max_ms);
            in.fhss_min_bw_hz = i.value("fhss_min_bw_hz", in.fhss_min_bw_hz);
            in.fhss_max_bw_hz = i.value("fhss_max_bw_hz", in.fhss_max_bw_hz);
            in.video_probability = i.value("video_probability", in.video_probability);
            in.video_rel_db = i.value("video_rel_db", in.video_rel_db);
            in.video_bw_hz = i.value("video_bw_hz", in.video_bw_hz);
        }
        if (j.contains("detector")) {
            const auto& d = j["detector"];
            auto& p = c.detector;
            p.energy_percentile = d.value("energy_percentile", p.energy_percentile);
            p.min_area = d.value("min_area", p.min_area);
            p.smooth_time = d.value("smooth_time", p.smooth_time);
            p.smooth_freq = d.value("smooth_freq", p.smooth_freq);
            p.grow_db = d.value("grow_db", p.grow_db);
            p.range_db = d.value("range_db", p.range_db);
            p.floor_percentile = d.value("floor_percentile", p.floor_percentile);
            p.reference_duration_s = d.value("reference_duration_s", p.reference_duration_s);
            p.reference_bandwidth_hz = d.value("reference_bandwidth_hz", p.reference_bandwidth_hz);
        }
        if (j.contains("refine")) {
            const auto& r = j["refine"];
            auto& p = c.refine;
            p.alpha = r.value("alpha", p.alpha);
            p.beta = r.value("beta", p.beta);
            p.segment_len = r.value("segment_len", p.segment_len);
            p.tau_conf = r.value("tau_conf", p.tau_conf);
        }
        if (j.contains("scenarios")) {
            int next_id = 0;
            for (const auto& s : j["scenarios"]) {
                Scenario sc;
                sc.id = s.value("id", next_id);
                next_id = sc.id + 1;
                sc.snr_db = s.value("snr_db", 0.0);
                sc.noise_kind = parse_noise_kind(s.value("noise_kind", std::string("awgn")));
                sc.attenuation_db = s.value("attenuation_db", 0.0);
                sc.duration_ms = s.value("duration_ms", 2.0);
                sc.seed = scenario_seed(c.master_seed, sc.id);
                c.scenarios.push_back(sc);
            }
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::parse_failed, source + ": " + e.what());
    }
    c.validate();
    return c;
}

SweepConfig load_sweep_config(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorCode::io_failed, "cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return sweep_config_from_json(ss.str(), path);
}

std::uint64_t scenario_seed(std::uint64_t master_seed, int scenario_id) {
    // splitmix64 finalizer over the pair
    std::uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(scenario_id) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<Scenario> expand_scenarios(const SweepConfig& cfg) {
    if (!cfg.scenarios.empty()) return cfg.scenarios;
    std::vector<Scenario> out;
    const std::size_t n_snr = cfg.snr_db.size(), n_noise = cfg.noise_kinds.size(),
                      n_att = cfg.attenuation_db.size(), n_dur = cfg.duration_ms.size();
    for (int i = 0; i < cfg.num_scenarios; ++i) {
        std::size_t k = static_cast<std::size_t>(i);
        Scenario s;
        s.id = i;
        s.seed = scenario_seed(cfg.master_seed, i);
        s.snr_db = cfg.snr_db[k % n_snr];
        k /= n_snr;
        s.noise_kind = cfg.noise_kinds[k % n_noise];
        k /= n_noise;
        s.attenuation_db = cfg.attenuation_db[k % n_att];
        k /= n_att;
        s.duration_ms = cfg.duration_ms[k % n_dur];
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scenario synthesis

ScenarioCapture build_scenario(const SweepConfig& cfg, const Scenario& sc) {
    double fs = 0.0;
    const FreqPrior prior = preset_prior(cfg.bank_preset, &fs);
    std::mt19937_64 rng(sc.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

    const auto capture_len = static_cast<std::size_t>(std::llround(sc.duration_ms * 1e-3 * fs));
    codec::CodecConfig codec;
    const auto payload = random_payload(rng());
    const Bits bits = codec::encode_payload(payload, codec.payload_bits());

    ScenarioCapture out{sc, CaptureTruth{ComplexSignal(ComplexVec(1), fs), {}}, 0.0, 0, false, false};
    const std::size_t band = static_cast<std::size_t>(rng() % prior.freq_set_hz.size());
    out.frame_center_hz = prior.freq_set_hz[band];
    auto frame = make_frame_event(cfg.frame, bits, fs, 0, out.frame_center_hz);
    const auto frame_len = static_cast<std::int64_t>(frame.signal.size());
    require(static_cast<std::int64_t>(capture_len) >= frame_len, ErrorCode::configuration,
            "capture of " + std::to_string(sc.duration_ms) + " ms is shorter than a frame");
    const std::int64_t slack = static_cast<std::int64_t>(capture_len) - frame_len;
    out.frame_start = static_cast<std::int64_t>(std::floor(u01(rng) * static_cast<double>(slack + 1)));
    out.frame_start = std::min(out.frame_start, slack);
    frame.start_sample = out.frame_start;
    const double frame_power = mean_power(frame.signal.samples());
    const double in_band_noise = frame_power / dsp::db_to_lin(sc.snr_db);

    ChannelParams ch;
    ch.snr_db = sc.snr_db;
    ch.noise_kind = sc.noise_kind;
    ch.attenuation_db = sc.attenuation_db;
    ch.cfo_hz = uni(-cfg.max_cfo_hz, cfg.max_cfo_hz);
    ch.rng_seed = rng();

    std::vector<CaptureEvent> events;
    events.push_back(std::move(frame));

    const auto& in = cfg.interference;
    const double dur_s = static_cast<double>(capture_len) / fs;
    // Draws are taken unconditionally so every scenario consumes the same stream.
    const double p_fhss = u01(rng), p_inband = u01(rng), p_video = u01(rng);
    const double fhss_ms = uni(in.fhss_min_ms, in.fhss_max_ms), fhss_bw = uni(in.fhss_min_bw_hz, in.fhss_max_bw_hz);
    const double r_pos = u01(rng), r_freq = u01(rng), r_other = u01(rng);
    const std::uint64_t fhss_seed = rng(), video_seed = rng();
    const double half_used = cfg.frame.used_subcarriers * cfg.frame.subcarrier_spacing_hz / 2.0;

    const double fhss_s = std::min(fhss_ms * 1e-3, dur_s);
    if (p_fhss < in.fhss_probability && fhss_s >= 0.5e-3) {
        out.has_fhss = true;
        out.fhss_in_band = p_inband < in.fhss_in_band_probability;
        double center = 0.0;
        if (out.fhss_in_band) {
            const double room = std::max(0.0, half_used - fhss_bw / 2.0);
            center = out.frame_center_hz + (2.0 * r_freq - 1.0) * room;
        } else {
            const double lim = fs / 2.0 - fhss_bw / 2.0 - 0.5e6;
            center = (2.0 * r_freq - 1.0) * lim;
            // keep it out of the frame band
            if (std::abs(center - out.frame_center_hz) < prior.bandwidth_hz / 2.0 + fhss_bw / 2.0)
                center = r_other < 0.5 ? -lim : lim;
        }
        InterferenceParams ip;
        ip.sample_rate_hz = fs;
        ip.duration_s = fhss_s;
        ip.bandwidth_hz = fhss_bw;
        ip.center_offset_hz = center;
        ip.power = in_band_noise * dsp::db_to_lin(in.fhss_rel_db);
        auto sig = synth_interference(InterferenceKind::fhss_burst, ip, fhss_seed);
        const auto n = static_cast<std::int64_t>(sig.size());
        // overlap the frame somewhere
        const std::int64_t lo = std::max<std::int64_t>(0, out.frame_start - n + 1);
        const std::int64_t hi = std::min<std::int64_t>(static_cast<std::int64_t>(capture_len) - n,
                                                       out.frame_start + frame_len - 1);
        std::int64_t start = lo;
        if (hi > lo) start = lo + static_cast<std::int64_t>(r_pos * static_cast<double>(hi - lo));
        start = std::clamp<std::int64_t>(start, 0, static_cast<std::int64_t>(capture_len) - n);
        events.push_back(CaptureEvent{std::move(sig), start, 0.0, false, 0.0, 0.0, {}});
    }
    if (p_video < in.video_probability) {
        // An OFDM video link parked outside every prior band, at a capture edge.
        const double edge = fs / 2.0 - in.video_bw_hz / 2.0 - 0.5e6;
        double center = edge;
        for (double c : {edge, -edge}) {
            bool clear = true;
            for (double f : prior.freq_set_hz)
                if (std::abs(c - f) < prior.bandwidth_hz / 2.0 + in.video_bw_hz / 2.0) clear = false;
            if (clear) {
                center = c;
                break;
            }
        }
        InterferenceParams ip;
        ip.sample_rate_hz = fs;
        ip.duration_s = dur_s;
        ip.bandwidth_hz = in.video_bw_hz;
        ip.center_offset_hz = center;
        ip.power = frame_power * dsp::db_to_lin(in.video_rel_db);
        auto sig = synth_interference(InterferenceKind::ofdm_video, ip, video_seed);
        if (sig.size() <= capture_len) events.push_back(CaptureEvent{std::move(sig), 0, 0.0, false, 0.0, 0.0, {}});
    }

    out.truth = compose_capture(std::move(events), capture_len, fs, ch);
    return out;
}

// ---------------------------------------------------------------------------
// Pipelines

ProtocolPriors priors_for(const SweepConfig& cfg) {
    ProtocolPriors p;
    p.freq_prior = preset_prior(cfg.bank_preset);
    p.frame_spec = cfg.frame;
    return p;
}

namespace {

int adaptive_hop(const SweepConfig& cfg, std::size_t len) {
    if (len <= static_cast<std::size_t>(cfg.stft_size)) return cfg.stft_hop;
    const std::size_t span = len - static_cast<std::size_t>(cfg.stft_size);
    const auto need = static_cast<int>((span + cfg.max_time_bins - 2) / (cfg.max_time_bins - 1));
    return std::max(cfg.stft_hop, need);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<BoundingBox> detect(const ComplexSignal& x, const SweepConfig& cfg) {
    const auto tfi = stft(x, cfg.stft_size, adaptive_hop(cfg, x.size()));
    return baseline_detect(tfi, cfg.detector);
}

}  // namespace

std::vector<PipelineOutput> run_variants(const ComplexSignal& capture, const FilterBank& bank,
                                         const ProtocolPriors& priors, const SweepConfig& cfg,
                                         const std::vector<Variant>& variants) {
    std::vector<PipelineOutput> out(variants.size());
    const bool need_bank = std::any_of(variants.begin(), variants.end(), [](Variant v) { return v != Variant::baseline; });

    std::optional<ComplexSignal> filtered;
    std::vector<BoundingBox> bank_boxes;
    double bank_latency = 0.0;
    if (need_bank) {
        const auto t0 = Clock::now();
        filtered = apply_filter_bank(capture, bank);
        bank_boxes = detect(*filtered, cfg);
        bank_latency = seconds_since(t0);
    }
    const double duration = static_cast<double>(capture.size()) / capture.sample_rate_hz();

    for (std::size_t i = 0; i < variants.size(); ++i) {
        const auto t0 = Clock::now();
        auto& o = out[i];
        switch (variants[i]) {
            case Variant::baseline: o.boxes = detect(capture, cfg); break;
            case Variant::f_only:
                for (const auto& b : bank_boxes) o.boxes.push_back(correct_frequency(b, priors.freq_prior));
                break;
            case Variant::tf_full:
            case Variant::direct_refine: {
                CorrectionOptions opts;
                opts.refine = cfg.refine;
                opts.mode = variants[i] == Variant::tf_full ? RefineMode::segmented : RefineMode::direct;
                TimeCorrector corrector(*filtered, priors);
                for (const auto& b : bank_boxes) o.boxes.push_back(correct_box(b, corrector, priors, opts, duration));
                break;
            }
        }
        o.latency_s = seconds_since(t0) + (variants[i] == Variant::baseline ? 0.0 : bank_latency);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string EvalReport::to_csv(bool include_timing) const {
    std::ostringstream os;
    os << "scenario_id,snr_db,noise_kind,attenuation_db,duration_ms,variant,num_truth,num_dets,tp,fp,fn,"
          "precision,recall,mean_iou,wem,precision_undefined,recall_undefined,error";
    if (include_timing) os << ",latency_s,fps";
    os << "\n";
    for (const auto& r : rows) {
        const auto& s = r.score;
        os << r.scenario_id << ',' << fmt(r.snr_db) << ',' << to_string(r.noise_kind) << ',' << fmt(r.attenuation_db)
           << ',' << fmt(r.duration_ms) << ',' << to_string(r.variant) << ',' << r.num_truth << ',' << r.num_dets << ','
           << s.tp << ',' << s.fp << ',' << s.fn << ',' << fmt(s.precision) << ',' << fmt(s.recall) << ','
           << fmt(s.mean_iou) << ',' << fmt(s.wem) << ',' << (s.precision_undefined ? 1 : 0) << ','
           << (s.recall_undefined ? 1 : 0) << ',' << csv_escape(r.error);
        if (include_timing) os << ',' << fmt(r.latency_s) << ',' << fmt(r.fps);
        os << "\n";
    }
    return os.str();
}

std::string EvalReport::summary_json() const {
    struct Acc {
        int n = 0;
        int errors = 0;
        double iou = 0, precision = 0, recall = 0, wem = 0, latency = 0;
        void add(const ReportRow& r) {
            ++n;
            if (!r.error.empty()) ++errors;
            iou += r.score.mean_iou;
            precision += r.score.precision;
            recall += r.score.recall;
            wem += r.score.wem;
            latency += r.latency_s;
        }
        nlohmann::ordered_json to_json() const {
            const double d = n > 0 ? n : 1;
            return {{"rows", n},           {"errors", errors},          {"mean_iou", iou / d},
                    {"precision", precision / d}, {"recall", recall / d}, {"wem", wem / d},
                    {"mean_latency_s", latency / d}};
        }
    };
    std::map<std::string, Acc> per_variant;
    std::map<std::string, std::map<std::string, std::map<std::string, Acc>>> per_axis;
    for (const auto& r : rows) {
        const std::string v = to_string(r.variant);
        per_variant[v].add(r);
        per_axis["snr_db"][fmt(r.snr_db)][v].add(r);
        per_axis["noise_kind"][to_string(r.noise_kind)][v].add(r);
        per_axis["attenuation_db"][fmt(r.attenuation_db)][v].add(r);
        per_axis["duration_ms"][fmt(r.duration_ms)][v].add(r);
    }
    nlohmann::ordered_json j;
    j["num_rows"] = rows.size();
    j["variants"] = nlohmann::ordered_json::object();
    for (const auto& [v, a] : per_variant) j["variants"][v] = a.to_json();
    j["axes"] = nlohmann::ordered_json::object();
    for (const auto& [ax, vals] : per_axis)
        for (const auto& [val, vs] : vals)
            for (const auto& [v, a] : vs) j["axes"][ax][val][v] = a.to_json();
    return j.dump(2) + "\n";
}

double EvalReport::mean_iou(Variant v) const {
    const auto col = iou_column(v);
    if (col.empty()) return 0.0;
    return std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
}

std::vector<double> EvalReport::iou_column(Variant v) const {
    std::vector<double> out;
    for (const auto& r : rows)
        if (r.variant == v) out.push_back(r.score.mean_iou);
    return out;
}

EvalReport run_sweep(const SweepConfig& cfg, int workers) {
    cfg.validate();
    require(workers >= 1, ErrorCode::configuration, "workers must be >= 1");
    const auto scenarios = expand_scenarios(cfg);
    const FilterBank bank = preset_filter_bank(cfg.bank_preset);
    const ProtocolPriors priors = priors_for(cfg);
    std::vector<std::vector<ReportRow>> slots(scenarios.size());
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < scenarios.size(); i = next++) {
            const auto& sc = scenarios[i];
            auto& rows = slots[i];
            auto base_row = [&](Variant v) {
                ReportRow r;
                r.scenario_id = sc.id;
                r.snr_db = sc.snr_db;
                r.noise_kind = sc.noise_kind;
                r.attenuation_db = sc.attenuation_db;
                r.duration_ms = sc.duration_ms;
                r.variant = v;
                return r;
            };
            try {
                const auto cap = build_scenario(cfg, sc);
                const auto truths = cap.truth.truth_boxes();
                const auto outs = run_variants(cap.truth.signal, bank, priors, cfg, cfg.variants);
                for (std::size_t k = 0; k < cfg.variants.size(); ++k) {
                    auto r = base_row(cfg.variants[k]);
                    r.num_truth = static_cast<int>(truths.size());
                    r.num_dets = static_cast<int>(outs[k].boxes.size());
                    r.score = match_and_score(outs[k].boxes, truths, cfg.iou_thresh);
                    r.latency_s = outs[k].latency_s;
                    r.fps = r.latency_s > 0.0 ? 1.0 / r.latency_s : 0.0;
                    rows.push_back(r);
                }
            } catch (const std::exception& e) {
                rows.clear();
                for (auto v : cfg.variants) {
                    auto r = base_row(v);
                    r.error = e.what();
                    rows.push_back(r);
                }
            }
        }
    };
    const int n = std::max(1, std::min<int>(workers, static_cast<int>(scenarios.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < n; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    EvalReport rep;
    for (auto& s : slots)
        for (auto& r : s) rep.rows.push_back(std::move(r));
    return rep;
}

double bootstrap_mean_diff_lower(const std::vector<double>& a, const std::vector<double>& b, double level,
                                 int resamples, std::uint64_t seed) {
    require(a.size() == b.size() && !a.empty(), ErrorCode::configuration, "bootstrap needs paired, non-empty samples");
    require(level > 0.0 && level < 1.0 && resamples > 0, ErrorCode::configuration, "bad bootstrap settings");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (auto& m : means) {
        double acc = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) acc += d[pick(rng)];
        m = acc / static_cast<double>(d.size());
    }
    return dsp::percentile(std::move(means), 100.0 * (1.0 - level));
}

// ---------------------------------------------------------------------------
// Time-refinement corpus

RefineCase build_refine_case(const RefineCaseConfig& cfg, std::uint64_t seed, double snr_db) {
    double fs = 0.0;
    const FreqPrior prior = preset_prior(cfg.bank_preset, &fs);
    const FrameSpec& spec = cfg.frame;
    const double b = spec.sample_rate_hz();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

    const auto capture_len = static_cast<std::int64_t>(std::llround(cfg.capture_ms * 1e-3 * fs));
    codec::CodecConfig codec;
    const Bits bits = codec::encode_payload(random_payload(rng()), codec.payload_bits());
    const double f_c = prior.freq_set_hz[rng() % prior.freq_set_hz.size()];
    auto frame = make_frame_event(spec, bits, fs, 0, f_c);
    const auto frame_len = static_cast<std::int64_t>(frame.signal.size());
    const double frame_power = mean_power(frame.signal.samples());
    const double r = fs / b;

    RefineCase out;
    out.snr_db = snr_db;
    out.burst_at_head = u01(rng) < 0.5;
    const double burst_s = uni(cfg.burst_min_ms, cfg.burst_max_ms) * 1e-3;
    const double burst_bw = uni(cfg.burst_min_bw_hz, cfg.burst_max_bw_hz);
    const double half_used = spec.used_subcarriers * spec.subcarrier_spacing_hz / 2.0;
    const double burst_fc = f_c + (2.0 * u01(rng) - 1.0) * std::max(0.0, half_used - burst_bw / 2.0);
    const double r_edge = u01(rng), r_start = u01(rng);
    const std::uint64_t burst_seed = rng();

    // ZC region of the frame at the capture rate, kept clear of the burst.
    const auto zc_lo = static_cast<std::int64_t>(std::floor(spec.symbol_start(spec.zc_symbol_indices[0]) * r));
    const auto zc_hi = static_cast<std::int64_t>(std::ceil(spec.symbol_start(spec.zc_symbol_indices[1] + 1) * r));
    const auto burst_len = static_cast<std::int64_t>(std::llround(burst_s * fs));

    std::int64_t frame_start = 0, burst_start = 0;
    if (out.burst_at_head) {
        // burst ends inside [0.2, 0.9] of the pre-ZC part of the frame
        const auto end_off = static_cast<std::int64_t>((0.2 + 0.7 * r_edge) * static_cast<double>(zc_lo));
        const std::int64_t lo = std::max<std::int64_t>(0, burst_len - end_off);
        const std::int64_t hi = capture_len - frame_len;
        require(hi >= lo, ErrorCode::configuration, "capture too short for the refinement corpus");
        frame_start = lo + static_cast<std::int64_t>(r_start * static_cast<double>(hi - lo));
        burst_start = frame_start + end_off - burst_len;
    } else {
        const auto start_off =
            zc_hi + static_cast<std::int64_t>((0.1 + 0.7 * r_edge) * static_cast<double>(frame_len - zc_hi));
        const std::int64_t lo = 0;
        const std::int64_t hi = std::min(capture_len - frame_len, capture_len - burst_len - start_off);
        require(hi >= lo, ErrorCode::configuration, "capture too short for the refinement corpus");
        frame_start = lo + static_cast<std::int64_t>(r_start * static_cast<double>(hi - lo));
        burst_start = frame_start + start_off;
    }
    frame.start_sample = frame_start;

    ChannelParams ch;
    ch.snr_db = snr_db;
    ch.rng_seed = rng();
    std::vector<CaptureEvent> events;
    events.push_back(std::move(frame));
    if (cfg.with_burst) {
        InterferenceParams ip;
        ip.sample_rate_hz = fs;
        ip.duration_s = static_cast<double>(burst_len) / fs;
        ip.bandwidth_hz = burst_bw;
        ip.center_offset_hz = burst_fc;
        ip.power = frame_power / dsp::db_to_lin(snr_db) * dsp::db_to_lin(cfg.burst_rel_db);
        auto sig = synth_interference(InterferenceKind::fhss_burst, ip, burst_seed);
        events.push_back(CaptureEvent{std::move(sig), burst_start, 0.0, false, 0.0, 0.0, {}});
    }
    const auto cap = compose_capture(std::move(events), static_cast<std::size_t>(capture_len), fs, ch);
    const FilterBank bank = preset_filter_bank(cfg.bank_preset);
    const auto filtered = apply_filter_bank(cap.signal, bank);
    out.traces = band_traces(filtered, spec, f_c);
    out.true_start = std::llround(static_cast<double>(frame_start) / r);
    return out;
}

bool refine_case_success(const RefineCase& c, const FrameSpec& spec, RefineMode mode, const RefineParams& params) {
    const auto res = locate_frame(c.traces, spec, mode, params);
    return res.ok && std::llabs(res.frame_start - c.true_start) <= spec.cp_normal;
}

// ---------------------------------------------------------------------------
// Speed

std::vector<SpeedRow> measure_speed(const Pipeline& pipeline, const std::vector<double>& durations_ms, int repeats,
                                    const SweepConfig& cfg) {
    require(repeats >= 1, ErrorCode::configuration, "repeats must be >= 1");
    std::vector<SpeedRow> out;
    for (std::size_t i = 0; i < durations_ms.size(); ++i) {
        Scenario sc;
        sc.id = static_cast<int>(i);
        sc.seed = scenario_seed(cfg.master_seed, sc.id);
        sc.snr_db = 10.0;
        sc.duration_ms = durations_ms[i];
        const auto cap = build_scenario(cfg, sc);
        pipeline(cap.truth.signal);  // warm-up
        std::vector<double> t(static_cast<std::size_t>(repeats));
        for (auto& v : t) {
            const auto t0 = Clock::now();
            pipeline(cap.truth.signal);
            v = seconds_since(t0);
        }
        const double mean = std::accumulate(t.begin(), t.end(), 0.0) / t.size();
        double var = 0.0;
        for (double v : t) var += (v - mean) * (v - mean);
        var /= static_cast<double>(t.size());
        SpeedRow row;
        row.duration_ms = durations_ms[i];
        row.latency_s = dsp::median(t);
        row.fps = row.latency_s > 0.0 ? 1.0 / row.latency_s : 0.0;
        row.latency_per_signal_s = row.latency_s / (durations_ms[i] * 1e-3);
        row.latency_cv = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
        out.push_back(row);
    }
    return out;
}

Pipeline full_pipeline(const SweepConfig& cfg) {
    auto bank = std::make_shared<FilterBank>(preset_filter_bank(cfg.bank_preset));
    const ProtocolPriors priors = priors_for(cfg);
    return [bank, priors, cfg](const ComplexSignal& x) {
        const auto filtered = apply_filter_bank(x, *bank);
        const auto boxes = detect(filtered, cfg);
        CorrectionOptions opts;
        opts.refine = cfg.refine;
        correct_all(filtered, boxes, priors, opts);
    };
}

std::string speed_to_csv(const std::vector<SpeedRow>& rows) {
    std::ostringstream os;
    os << "duration_ms,latency_s,fps,latency_per_signal_s,latency_cv\n";
    for (const auto& r : rows)
        os << fmt(r.duration_ms) << ',' << fmt(r.latency_s) << ',' << fmt(r.fps) << ','
           << fmt(r.latency_per_signal_s) << ',' << fmt(r.latency_cv) << "\n";
    return os.str();
}

}  // namespace dronerid::eval
