#include "dronerid/sync_demod.hpp"

#include <algorithm>
#include <cmath>

#include "dronerid/dsp.hpp"
#include "dronerid/synth.hpp"
#include "dronerid/tf_analysis.hpp"

namespace dronerid {

ComplexSignal coarse_sync(const ComplexSignal& x, double f_hz, double b_hz) {
    const double fs = x.sample_rate_hz();
    require(std::abs(f_hz) <= fs / 2.0, ErrorCode::configuration, "band center outside the capture");
    require(b_hz > 0.0 && b_hz <= fs + 1e-6, ErrorCode::configuration, "target rate must lie in (0, fs]");
    if (f_hz == 0.0 && std::abs(fs - b_hz) < 1e-6) return x;
    // A zero center means the RF frequency is unknown; the band stays at 0.
    const double rf = x.center_freq_hz() > 0.0 ? std::max(0.0, x.center_freq_hz() + f_hz) : 0.0;
    return ComplexSignal(dsp::extract_band(x.samples(), fs, f_hz, b_hz), b_hz, rf);
}

namespace {

// Prefix sums of x(n) conj(x(n + N)) and |x(n)|^2.
struct LagSums {
    ComplexVec p;
    std::vector<double> e;

    LagSums(std::span<const Complex> x, int n) : p(x.size() + 1), e(x.size() + 1) {
        const std::size_t len = x.size();
        for (std::size_t i = 0; i < len; ++i) {
            const Complex c = i + static_cast<std::size_t>(n) < len ? x[i] * std::conj(x[i + static_cast<std::size_t>(n)])
                                                                     : Complex{};
            p[i + 1] = p[i] + c;
            e[i + 1] = e[i] + std::norm(x[i]);
        }
    }
    Complex corr(std::size_t a, std::size_t len) const { return p[a + len] - p[a]; }
    double energy(std::size_t a, std::size_t len) const { return std::max(0.0, e[a + len] - e[a]); }
};

double ratio(const Complex& p, double r1, double r2) {
    const double den = r1 * r2;
    return den > 0.0 ? std::norm(p) / den : 0.0;
}

}  // namespace

TimingMetric cp_timing_metric(std::span<const Complex> x, int n, int n_cp) {
    require(n > 0 && n_cp > 0, ErrorCode::configuration, "N and N_cp must be positive");
    require(x.size() >= static_cast<std::size_t>(n + n_cp), ErrorCode::input_too_short, "signal shorter than N + N_cp");
    const LagSums s(x, n);
    TimingMetric tm;
    const std::size_t count = x.size() - static_cast<std::size_t>(n + n_cp) + 1;
    tm.metric.resize(count);
    const auto cp = static_cast<std::size_t>(n_cp);
    for (std::size_t d = 0; d < count; ++d)
        tm.metric[d] = ratio(s.corr(d, cp), s.energy(d, cp), s.energy(d + static_cast<std::size_t>(n), cp));
    tm.peak = dsp::argmax_index(tm.metric);
    return tm;
}

TimingMetric frame_timing_metric(std::span<const Complex> x, const FrameSpec& spec, std::int64_t d_lo,
                                 std::int64_t d_hi) {
    const auto len = static_cast<std::int64_t>(spec.frame_length());
    d_lo = std::max<std::int64_t>(0, d_lo);
    d_hi = std::min<std::int64_t>(d_hi, static_cast<std::int64_t>(x.size()) - len);
    require(d_hi >= d_lo, ErrorCode::input_too_short, "no room for a full frame in the search window");
    const LagSums s(x, spec.fft_size);
    TimingMetric tm;
    tm.metric.resize(static_cast<std::size_t>(d_hi - d_lo + 1));
    for (std::int64_t d = d_lo; d <= d_hi; ++d) {
        Complex p{};
        double r1 = 0.0, r2 = 0.0;
        for (int sym = 0; sym < spec.num_symbols; ++sym) {
            const auto a = static_cast<std::size_t>(d + spec.symbol_start(sym));
            const auto cp = static_cast<std::size_t>(spec.cp_length(sym));
            p += s.corr(a, cp);
            r1 += s.energy(a, cp);
            r2 += s.energy(a + static_cast<std::size_t>(spec.fft_size), cp);
        }
        tm.metric[static_cast<std::size_t>(d - d_lo)] = ratio(p, r1, r2);
    }
    tm.peak = d_lo + dsp::argmax_index(tm.metric);
    return tm;
}

CfoEstimate estimate_cfo(std::span<const Complex> x, const FrameSpec& spec, std::int64_t start, CfoAnchor anchor) {
    require(start >= 0 && start + spec.frame_length() <= static_cast<std::int64_t>(x.size()), ErrorCode::sync_failed,
            "frame not fully inside the signal");
    const int n = spec.fft_size;
    Complex acc{};
    double energy = 0.0;
    CfoEstimate est;
    if (anchor == CfoAnchor::cp) {
        est.h = n;
        for (int sym = 0; sym < spec.num_symbols; ++sym) {
            const auto a = static_cast<std::size_t>(start + spec.symbol_start(sym));
            for (int k = 0; k < spec.cp_length(sym); ++k) {
                acc += x[a + k] * std::conj(x[a + k + n]);
                energy += 0.5 * (std::norm(x[a + k]) + std::norm(x[a + k + n]));
            }
        }
    } else {
        est.h = n / 2.0;
        for (int z = 0; z < 2; ++z) {
            const auto t = zc_time_template(spec, spec.zc_roots[z]);
            const auto a = static_cast<std::size_t>(start + spec.symbol_body_start(spec.zc_symbol_indices[z]));
            Complex c1{}, c2{};
            for (int k = 0; k < n / 2; ++k) c1 += std::conj(t[k]) * x[a + k];
            for (int k = n / 2; k < n; ++k) c2 += std::conj(t[k]) * x[a + k];
            acc += c1 * std::conj(c2);
            energy += std::abs(c1) * std::abs(c2);
        }
    }
    require(std::abs(acc) > 0.0, ErrorCode::sync_failed, "no correlation for CFO estimation");
    est.theta = std::arg(acc);
    est.epsilon = -est.theta * n / (2.0 * kPi * est.h);
    est.cfo_hz = est.epsilon * spec.subcarrier_spacing_hz;
    est.magnitude = energy > 0.0 ? std::abs(acc) / energy : 0.0;
    const double limit = n / (2.0 * est.h);
    est.near_ambiguity = std::abs(est.epsilon) > 0.9 * limit;
    return est;
}

ComplexVec apply_cfo(std::span<const Complex> x, double epsilon, int n) {
    return dsp::mix(x, -epsilon, static_cast<double>(n));
}

std::pair<ComplexVec, CfoEstimate> estimate_and_apply_cfo(std::span<const Complex> x, const FrameSpec& spec,
                                                          std::int64_t frame_start, CfoAnchor anchor) {
    auto est = estimate_cfo(x, spec, frame_start, anchor);
    return {apply_cfo(x, est.epsilon, spec.fft_size), est};
}

std::int64_t fine_timing_zc(std::span<const Complex> x, const FrameSpec& spec, std::int64_t coarse, int radius) {
    const auto n = static_cast<std::size_t>(spec.fft_size);
    const std::int64_t max_start = static_cast<std::int64_t>(x.size()) - spec.frame_length();
    const std::int64_t lo = std::max<std::int64_t>(0, coarse - radius);
    const std::int64_t hi = std::min<std::int64_t>(max_start, coarse + radius);
    if (hi < lo) return coarse;
    ComplexVec t[2] = {zc_time_template(spec, spec.zc_roots[0]), zc_time_template(spec, spec.zc_roots[1])};
    std::int64_t best = coarse;
    double best_score = -1.0;
    for (std::int64_t d = lo; d <= hi; ++d) {
        double score = 0.0;
        for (int z = 0; z < 2; ++z) {
            const auto a = static_cast<std::size_t>(d + spec.symbol_body_start(spec.zc_symbol_indices[z]));
            Complex c{};
            for (std::size_t k = 0; k < n; ++k) c += std::conj(t[z][k]) * x[a + k];
            score += std::abs(c);
        }
        if (score > best_score) {
            best_score = score;
            best = d;
        }
    }
    return best;
}

DemodResult demodulate_ofdm(std::span<const Complex> x, const FrameSpec& spec, std::int64_t start) {
    spec.validate();
    const int n = spec.fft_size;
    const int half = spec.used_subcarriers / 2;
    const int backoff = std::min(spec.cp_normal, spec.cp_extend) / 2;
    const auto ks = data_subcarriers(spec);
    const std::size_t nu = ks.size();

    int complete = 0;
    for (int s = 0; s < spec.num_symbols; ++s) {
        const std::int64_t a = start + spec.symbol_body_start(s) - backoff;
        if (a < 0 || a + n > static_cast<std::int64_t>(x.size())) break;
        ++complete;
    }
    require(complete == spec.num_symbols, ErrorCode::demod_failed,
            "frame truncated: " + std::to_string(complete) + " of " + std::to_string(spec.num_symbols) +
                " symbols available");

    // Raw subcarrier values per symbol, data_subcarriers order.
    dsp::Fft fwd(static_cast<std::size_t>(n), dsp::Fft::Direction::forward);
    std::vector<ComplexVec> raw(static_cast<std::size_t>(spec.num_symbols), ComplexVec(nu));
    ComplexVec buf(static_cast<std::size_t>(n));
    for (int s = 0; s < spec.num_symbols; ++s) {
        const auto a = static_cast<std::size_t>(start + spec.symbol_body_start(s) - backoff);
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(a), n, buf.begin());
        fwd.execute(buf);
        for (std::size_t i = 0; i < nu; ++i) raw[static_cast<std::size_t>(s)][i] = buf[static_cast<std::size_t>(subcarrier_bin(ks[i], n))];
    }

    // Pilot channel estimates from both ZC symbols.
    std::vector<ComplexVec> h(2, ComplexVec(nu));
    for (int z = 0; z < 2; ++z) {
        const auto zc = gen_zc(spec.zc_roots[z], spec.zc_length());
        const auto& y = raw[static_cast<std::size_t>(spec.zc_symbol_indices[z])];
        for (std::size_t i = 0; i < nu; ++i) h[z][i] = y[i] / zc[static_cast<std::size_t>(ks[i] + half)];
    }
    // Common phase drift per symbol between the two pilots.
    Complex drift{};
    for (std::size_t i = 0; i < nu; ++i) drift += h[1][i] * std::conj(h[0][i]);
    const double sym_gap = spec.zc_symbol_indices[1] - spec.zc_symbol_indices[0];
    const double phi = std::arg(drift) / sym_gap;
    const double mid = 0.5 * (spec.zc_symbol_indices[0] + spec.zc_symbol_indices[1]);

    // Average the de-rotated pilots, then smooth across frequency after removing
    // the linear phase ramp that the FFT back-off introduces.
    ComplexVec hbar(nu);
    for (std::size_t i = 0; i < nu; ++i) {
        const Complex r0 = std::polar(1.0, -phi * (spec.zc_symbol_indices[0] - mid));
        const Complex r1 = std::polar(1.0, -phi * (spec.zc_symbol_indices[1] - mid));
        hbar[i] = 0.5 * (h[0][i] * r0 + h[1][i] * r1);
    }
    constexpr int kSmooth = 3;
    ComplexVec hs(nu);
    for (std::size_t i = 0; i < nu; ++i) {
        Complex acc{};
        int cnt = 0;
        for (int d = -kSmooth; d <= kSmooth; ++d) {
            const auto j = static_cast<std::ptrdiff_t>(i) + d;
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(nu)) continue;
            const double ramp = 2.0 * kPi * (ks[static_cast<std::size_t>(j)] - ks[i]) * backoff / n;
            acc += hbar[static_cast<std::size_t>(j)] * std::polar(1.0, ramp);
            ++cnt;
        }
        hs[i] = acc / static_cast<double>(cnt);
    }

    // Noise variance from the pilot residuals.
    double res = 0.0;
    for (int z = 0; z < 2; ++z) {
        const auto zc = gen_zc(spec.zc_roots[z], spec.zc_length());
        const int s = spec.zc_symbol_indices[z];
        const Complex rot = std::polar(1.0, phi * (s - mid));
        const auto& y = raw[static_cast<std::size_t>(s)];
        for (std::size_t i = 0; i < nu; ++i) res += std::norm(y[i] - hs[i] * rot * zc[static_cast<std::size_t>(ks[i] + half)]);
    }
    const double smooth_loss = 1.0 - 1.0 / (2 * kSmooth + 1);
    DemodResult out;
    out.noise_var = std::max(res / (2.0 * static_cast<double>(nu)) / smooth_loss, 1e-12);

    constexpr double a = 0.70710678118654752440;
    for (int s = 0; s < spec.num_symbols; ++s) {
        const Complex rot = std::polar(1.0, phi * (s - mid));
        ComplexVec eq(nu);
        for (std::size_t i = 0; i < nu; ++i) {
            const Complex hh = hs[i] * rot;
            const double g = std::norm(hh);
            eq[i] = g > 0.0 ? raw[static_cast<std::size_t>(s)][i] * std::conj(hh) / g : Complex{};
            if (!spec.is_zc_symbol(s)) {
                const Complex m = raw[static_cast<std::size_t>(s)][i] * std::conj(hh);
                out.llrs.push_back(4.0 * a * m.real() / out.noise_var);
                out.llrs.push_back(4.0 * a * m.imag() / out.noise_var);
            }
        }
        out.symbols.push_back(std::move(eq));
    }
    out.symbols_demodulated = complete;
    return out;
}

SyncResult synchronize(const ComplexSignal& x, double f_hz, const FrameSpec& spec, std::int64_t search_lo,
                       std::int64_t search_hi, const SyncOptions& opts) {
    spec.validate();
    const double b = spec.sample_rate_hz();
    SyncResult r;
    if (std::abs(x.sample_rate_hz() - b) > 1e-6) r.resample_ratio = dsp::rational_ratio(b, x.sample_rate_hz());
    const auto band = coarse_sync(x, f_hz, b);
    const auto xs = band.samples();

    const auto tm = frame_timing_metric(xs, spec, search_lo, search_hi);
    require(!tm.metric.empty(), ErrorCode::sync_failed, "empty timing search");
    r.timing_metric = tm.metric;
    r.coarse_start = tm.peak;

    // Coarse CFO from the CP (CFO-robust timing), then the pilot-based residual.
    auto [x1, cp_est] = estimate_and_apply_cfo(xs, spec, r.coarse_start, CfoAnchor::cp);
    double eps = cp_est.epsilon;
    std::int64_t start = r.coarse_start;
    if (opts.fine_timing) start = fine_timing_zc(x1, spec, r.coarse_start, spec.cp_normal);
    if (opts.anchor == CfoAnchor::zc) {
        const auto zc_est = estimate_cfo(x1, spec, start, CfoAnchor::zc);
        x1 = apply_cfo(x1, zc_est.epsilon, spec.fft_size);
        eps += zc_est.epsilon;
    }
    r.fine_start = start;
    r.epsilon = eps;
    r.cfo_hz = eps * spec.subcarrier_spacing_hz;
    for (int s = 0; s < spec.num_symbols; ++s) r.symbol_starts.push_back(start + spec.symbol_start(s));
    r.corrected = std::move(x1);
    return r;
}

FrameDecode decode_frame(const ComplexSignal& x, const BoundingBox& box, const FrameSpec& spec,
                         const codec::CodecConfig& cfg, const SyncOptions& opts) {
    const double b = spec.sample_rate_hz();
    const std::int64_t slack = spec.fft_size + spec.cp_extend;
    const auto t0 = static_cast<std::int64_t>(std::floor(box.t_min_s * b));
    const auto t1 = static_cast<std::int64_t>(std::ceil(box.t_max_s * b));
    std::int64_t lo = t0 - slack;
    std::int64_t hi = t1 - spec.frame_length() + slack;
    if (hi < lo) hi = t0 + slack;

    FrameDecode out;
    out.sync = synchronize(x, box.center_hz(), spec, lo, hi, opts);
    out.demod = demodulate_ofdm(out.sync.corrected, spec, out.sync.fine_start);
    out.block = codec::decode_block(out.demod.llrs, cfg);
    if (out.block.crc_ok) {
        try {
            out.payload = codec::parse_payload(out.block.block, cfg.crc_poly);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::parse_failed) throw;
        }
    }
    return out;
}

}  // namespace dronerid
