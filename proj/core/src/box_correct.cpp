#include "dronerid/box_correct.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dronerid/dsp.hpp"
#include "dronerid/tf_analysis.hpp"

namespace dronerid {

void ProtocolPriors::validate() const {
    frame_spec.validate();
    require(!freq_prior.freq_set_hz.empty(), ErrorCode::configuration, "priors need a frequency set");
    require(freq_prior.bandwidth_hz > 0.0, ErrorCode::configuration, "priors need a positive bandwidth");
}

std::string priors_to_json(const ProtocolPriors& p) {
    const auto& s = p.frame_spec;
    nlohmann::ordered_json j;
    j["freq_set_hz"] = p.freq_prior.freq_set_hz;
    j["bandwidth_hz"] = p.freq_prior.bandwidth_hz;
    j["frame"] = {{"fft_size", s.fft_size},
                  {"used_subcarriers", s.used_subcarriers},
                  {"subcarrier_spacing_hz", s.subcarrier_spacing_hz},
                  {"cp_normal", s.cp_normal},
                  {"cp_extend", s.cp_extend},
                  {"num_symbols", s.num_symbols},
                  {"zc_symbol_indices", {s.zc_symbol_indices[0], s.zc_symbol_indices[1]}},
                  {"zc_roots", {s.zc_roots[0], s.zc_roots[1]}}};
    return j.dump(2) + "\n";
}

ProtocolPriors priors_from_json(const std::string& text, const std::string& source) {
    ProtocolPriors p;
    try {
        const auto j = nlohmann::json::parse(text);
        p.freq_prior.freq_set_hz = j.at("freq_set_hz").get<std::vector<double>>();
        p.freq_prior.bandwidth_hz = j.value("bandwidth_hz", p.frame_spec.sample_rate_hz());
        if (j.contains("frame")) {
            const auto& f = j["frame"];
            auto& s = p.frame_spec;
            s.fft_size = f.value("fft_size", s.fft_size);
            s.used_subcarriers = f.value("used_subcarriers", s.used_subcarriers);
            s.subcarrier_spacing_hz = f.value("subcarrier_spacing_hz", s.subcarrier_spacing_hz);
            s.cp_normal = f.value("cp_normal", s.cp_normal);
            s.cp_extend = f.value("cp_extend", s.cp_extend);
            s.num_symbols = f.value("num_symbols", s.num_symbols);
            if (f.contains("zc_symbol_indices")) {
                const auto v = f["zc_symbol_indices"].get<std::vector<int>>();
                require(v.size() == 2, ErrorCode::parse_failed, source + ": zc_symbol_indices needs two entries");
                s.zc_symbol_indices[0] = v[0];
                s.zc_symbol_indices[1] = v[1];
            }
            if (f.contains("zc_roots")) {
                const auto v = f["zc_roots"].get<std::vector<int>>();
                require(v.size() == 2, ErrorCode::parse_failed, source + ": zc_roots needs two entries");
                s.zc_roots[0] = v[0];
                s.zc_roots[1] = v[1];
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::parse_failed, source + ": " + e.what());
    }
    p.validate();
    return p;
}

void save_priors(const ProtocolPriors& priors, const std::string& path) {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCode::io_failed, "cannot open " + path);
    os << priors_to_json(priors);
}

ProtocolPriors load_priors(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorCode::io_failed, "cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return priors_from_json(ss.str(), path);
}

void RefineParams::validate() const {
    require(alpha > 0.0, ErrorCode::configuration, "alpha must be > 0");
    require(beta >= 0, ErrorCode::configuration, "beta must be >= 0");
    require(segment_len >= 1, ErrorCode::configuration, "segment length must be >= 1");
    require(tau_conf >= 0.0 && tau_conf <= 1.0, ErrorCode::configuration, "tau_conf must lie in [0, 1]");
}

std::int64_t argmax_first(const std::vector<double>& v) { return dsp::argmax_index(v); }

CorrelationTrace zc_cross_correlate(std::span<const Complex> x, std::span<const Complex> templ) {
    require(!templ.empty() && templ.size() < x.size(), ErrorCode::input_too_short, "template longer than signal");
    CorrelationTrace tr;
    tr.values = dsp::cross_correlate_abs(x, templ);
    tr.refined = tr.values;
    tr.peak_index = argmax_first(tr.refined);
    return tr;
}

CorrelationTrace zc_cross_correlate(const ComplexSignal& x, std::span<const Complex> templ) {
    return zc_cross_correlate(x.samples(), templ);
}

namespace {

std::vector<double> segment_means(const std::vector<double>& g, std::size_t p) {
    std::vector<double> e;
    e.reserve((g.size() + p - 1) / p);
    for (std::size_t s = 0; s < g.size(); s += p) {
        const std::size_t end = std::min(g.size(), s + p);
        double acc = 0.0;
        for (std::size_t m = s; m < end; ++m) acc += g[m];
        e.push_back(acc / static_cast<double>(end - s));
    }
    return e;
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

}  // namespace

CorrelationTrace segmented_refine(const CorrelationTrace& trace, const RefineParams& params) {
    params.validate();
    require(!trace.values.empty(), ErrorCode::input_too_short, "empty correlation trace");
    const std::size_t p = params.segment_len;
    CorrelationTrace out;
    out.values = trace.values;
    out.segment_energy = segment_means(trace.values, p);
    out.mean_segment_energy = mean_of(out.segment_energy);
    const std::size_t q_count = out.segment_energy.size();

    out.segment_suppressed.assign(q_count, 0);
    const double thr = params.alpha * out.mean_segment_energy;
    for (std::size_t q = 0; q < q_count; ++q) out.segment_suppressed[q] = out.segment_energy[q] >= thr ? 1 : 0;
    // Fill gaps between consecutive members of I closer than beta.
    std::ptrdiff_t prev = -1;
    for (std::size_t q = 0; q < q_count; ++q) {
        if (out.segment_energy[q] >= thr) {
            if (prev >= 0 && static_cast<std::ptrdiff_t>(q) - prev < params.beta)
                for (auto k = static_cast<std::size_t>(prev) + 1; k < q; ++k) out.segment_suppressed[k] = 1;
            prev = static_cast<std::ptrdiff_t>(q);
        }
    }
    const auto suppressed = std::count(out.segment_suppressed.begin(), out.segment_suppressed.end(), 1);
    require(static_cast<std::size_t>(suppressed) < q_count, ErrorCode::refinement_degenerate,
            "every segment exceeds the refinement threshold");

    out.refined = trace.values;
    for (std::size_t m = 0; m < out.refined.size(); ++m)
        if (out.segment_suppressed[m / p]) out.refined[m] = 0.0;
    out.peak_index = argmax_first(out.refined);
    return out;
}

CorrelationTrace direct_refine(const CorrelationTrace& trace, double alpha, std::size_t segment_len) {
    require(alpha > 0.0 && segment_len >= 1, ErrorCode::configuration, "invalid direct refinement parameters");
    CorrelationTrace out;
    out.values = trace.values;
    out.segment_energy = segment_means(trace.values, segment_len);
    out.mean_segment_energy = mean_of(out.segment_energy);
    const double thr = alpha * out.mean_segment_energy;
    out.refined = trace.values;
    for (auto& g : out.refined)
        if (g >= thr) g = 0.0;
    out.peak_index = argmax_first(out.refined);
    return out;
}

BoundingBox correct_frequency(const BoundingBox& box, const FreqPrior& prior) {
    BoundingBox out = box;
    const double b = prior.bandwidth_hz;
    const double c = box.center_hz();
    const double fi = prior.freq_set_hz[prior.nearest(c)];
    double center = fi;
    if (std::abs(c - fi) > b / 2.0) {
        // Outside the prior band: keep the detected center but pull it close
        // enough that the width-B band still overlaps F_i by a quarter.
        center = std::clamp(c, fi - 0.75 * b, fi + 0.75 * b);
    }
    out.f_min_hz = center - b / 2.0;
    out.f_max_hz = center + b / 2.0;
    out.corrected.freq = true;
    return out;
}

BoundingBox correct_time(const BoundingBox& box, const CorrelationTrace& trace, const ProtocolPriors& priors,
                         double trace_rate_hz, double capture_duration_s, int which_root) {
    require(which_root == 0 || which_root == 1, ErrorCode::configuration, "root index must be 0 or 1");
    const auto& s = priors.frame_spec;
    const std::int64_t lam = priors.lambda(which_root);
    const std::int64_t start =
        trace.peak_index - lam * (s.fft_size + priors.n_normal()) - priors.n_extend();
    BoundingBox out = box;
    double t0 = static_cast<double>(start) / trace_rate_hz;
    double t1 = t0 + priors.frame_duration_s();
    out.corrected.time = true;
    out.corrected.time_clipped = false;
    if (t0 < 0.0 || t1 > capture_duration_s) {
        out.corrected.time_clipped = true;
        t0 = std::max(t0, 0.0);
        t1 = std::min(t1, capture_duration_s);
        if (t1 <= t0) {
            // Nothing of the frame lies inside the capture; keep the detector's span.
            out.t_min_s = box.t_min_s;
            out.t_max_s = box.t_max_s;
            out.corrected.time = false;
            return out;
        }
    }
    out.t_min_s = t0;
    out.t_max_s = t1;
    return out;
}

TimeCorrector::TimeCorrector(const ComplexSignal& filtered, const ProtocolPriors& priors)
    : sig_(filtered), priors_(priors) {
    priors_.validate();
}

std::vector<CorrelationTrace> band_traces(const ComplexSignal& filtered, const FrameSpec& spec, double f_hz) {
    const double b = spec.sample_rate_hz();
    ComplexVec y = std::abs(filtered.sample_rate_hz() - b) < 1e-6 && f_hz == 0.0
                       ? filtered.vec()
                       : dsp::extract_band(filtered.samples(), filtered.sample_rate_hz(), f_hz, b);
    std::vector<CorrelationTrace> tr;
    if (y.size() > static_cast<std::size_t>(spec.fft_size) + 1) {
        for (int r = 0; r < 2; ++r) {
            const auto t = zc_time_template(spec, spec.zc_roots[r]);
            tr.push_back(zc_cross_correlate(y, t));
        }
    }
    return tr;
}

LocateResult locate_frame(const std::vector<CorrelationTrace>& tr, const FrameSpec& s, RefineMode mode,
                          const RefineParams& params) {
    LocateResult res;
    if (tr.empty()) return res;
    int degenerate = 0;
    for (std::size_t r = 0; r < tr.size() && r < 2; ++r) {
        CorrelationTrace refined;
        switch (mode) {
            case RefineMode::none: refined = tr[r]; break;
            case RefineMode::direct: refined = direct_refine(tr[r], params.alpha, params.segment_len); break;
            case RefineMode::segmented:
                try {
                    refined = segmented_refine(tr[r], params);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::refinement_degenerate) throw;
                    ++degenerate;
                    continue;
                }
                break;
        }
        // Both templates carry the same energy, so raw peaks are comparable.
        const double peak = refined.refined[static_cast<std::size_t>(refined.peak_index)];
        if (!res.ok || peak > res.peak_value) {
            res.ok = true;
            res.root_index = static_cast<int>(r);
            res.peak_index = refined.peak_index;
            res.peak_value = peak;
        }
    }
    res.degenerate = degenerate == static_cast<int>(std::min<std::size_t>(tr.size(), 2));
    if (res.ok) {
        const std::int64_t lam = s.zc_symbol_indices[res.root_index];
        res.frame_start = res.peak_index - lam * (s.fft_size + s.cp_normal) - s.cp_extend;
    }
    return res;
}

const std::vector<CorrelationTrace>& TimeCorrector::traces(double f_hz) {
    auto it = cache_.find(f_hz);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(f_hz, band_traces(sig_, priors_.frame_spec, f_hz)).first->second;
}

TimeCorrector::Result TimeCorrector::locate(double f_hz, RefineMode mode, const RefineParams& params) {
    return locate_frame(traces(f_hz), priors_.frame_spec, mode, params);
}

BoundingBox correct_box(const BoundingBox& box, TimeCorrector& corrector, const ProtocolPriors& priors,
                        const CorrectionOptions& opts, double capture_duration_s) {
    BoundingBox out = correct_frequency(box, priors.freq_prior);
    if (!opts.correct_time) return out;
    if (!opts.ignore_confidence && box.confidence >= opts.refine.tau_conf) return out;
    const double fi = priors.freq_prior.freq_set_hz[priors.freq_prior.nearest(out.center_hz())];
    const auto res = corrector.locate(fi, opts.mode, opts.refine);
    if (!res.ok) return out;  // degenerate refinement: frequency-only
    CorrelationTrace peak_only;
    peak_only.peak_index = res.peak_index;
    return correct_time(out, peak_only, priors, corrector.rate_hz(), capture_duration_s, res.root_index);
}

std::vector<BoundingBox> correct_all(const ComplexSignal& filtered, const std::vector<BoundingBox>& boxes,
                                     const ProtocolPriors& priors, const CorrectionOptions& opts) {
    opts.refine.validate();
    std::vector<BoundingBox> out;
    out.reserve(boxes.size());
    if (boxes.empty()) return out;
    TimeCorrector corrector(filtered, priors);
    for (const auto& b : boxes) out.push_back(correct_box(b, corrector, priors, opts, filtered.duration_s()));
    return out;
}

std::vector<BoundingBox> correct_all(const ComplexSignal& filtered, const std::vector<BoundingBox>& boxes,
                                     const ProtocolPriors& priors, const RefineParams& params) {
    CorrectionOptions opts;
    opts.refine = params;
    return correct_all(filtered, boxes, priors, opts);
}

}  // namespace dronerid
