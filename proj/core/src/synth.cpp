#include "dronerid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dronerid/dsp.hpp"
#include "dronerid/tf_analysis.hpp"

namespace dronerid {

NoiseKind parse_noise_kind(const std::string& name) {
    if (name == "awgn") return NoiseKind::awgn;
    if (name == "rayleigh") return NoiseKind::rayleigh;
    if (name == "gamma") return NoiseKind::gamma;
    if (name == "impulse") return NoiseKind::impulse;
    fail(ErrorCode::configuration, "unknown noise kind '" + name + "'");
}

const char* to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::awgn: return "awgn";
        case NoiseKind::rayleigh: return "rayleigh";
        case NoiseKind::gamma: return "gamma";
        case NoiseKind::impulse: return "impulse";
    }
    return "?";
}

InterferenceKind parse_interference_kind(const std::string& name) {
    if (name == "fhss_burst") return InterferenceKind::fhss_burst;
    if (name == "ofdm_video") return InterferenceKind::ofdm_video;
    if (name == "narrowband_packet") return InterferenceKind::narrowband_packet;
    fail(ErrorCode::configuration, "unknown interference kind '" + name + "'");
}

const char* to_string(InterferenceKind kind) {
    switch (kind) {
        case InterferenceKind::fhss_burst: return "fhss_burst";
        case InterferenceKind::ofdm_video: return "ofdm_video";
        case InterferenceKind::narrowband_packet: return "narrowband_packet";
    }
    return "?";
}

void ChannelParams::validate() const {
    require(std::isfinite(snr_db), ErrorCode::configuration, "snr_db must be finite");
    require(std::isfinite(cfo_hz), ErrorCode::configuration, "cfo_hz must be finite");
    require(delay_samples >= 0, ErrorCode::configuration, "delay_samples must be >= 0");
    require(attenuation_db >= 0.0, ErrorCode::configuration, "attenuation_db must be >= 0");
}

Complex qpsk_map(std::uint8_t b0, std::uint8_t b1) {
    constexpr double a = 0.70710678118654752440;
    return {(b0 & 1u) ? -a : a, (b1 & 1u) ? -a : a};
}

ComplexVec zc_subcarrier_values(const FrameSpec& spec, int root) {
    const auto z = gen_zc(root, spec.zc_length());
    ComplexVec out(z.begin(), z.end());
    out[out.size() / 2] = Complex{};
    return out;
}

namespace {

ComplexVec ofdm_symbol(const FrameSpec& spec, std::span<const Complex> bins_by_logical, int first_k,
                       int symbol) {
    const int n = spec.fft_size;
    ComplexVec freq(static_cast<std::size_t>(n), Complex{});
    for (std::size_t i = 0; i < bins_by_logical.size(); ++i) {
        const int k = first_k + static_cast<int>(i);
        freq[static_cast<std::size_t>(subcarrier_bin(k, n))] = bins_by_logical[i];
    }
    auto body = dsp::ifft(freq);
    const int cp = spec.cp_length(symbol);
    ComplexVec out;
    out.reserve(static_cast<std::size_t>(n + cp));
    out.insert(out.end(), body.end() - cp, body.end());
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

}  // namespace

std::vector<ComplexVec> frame_grid(const FrameSpec& spec, const Bits& payload_bits, const FrameOptions& opts) {
    spec.validate();
    const int capacity = spec.data_bits_capacity();
    const auto coded = codec::encode_block(payload_bits, opts.codec, capacity);
    const auto nu = static_cast<std::size_t>(spec.used_subcarriers);

    std::vector<ComplexVec> grid(static_cast<std::size_t>(spec.num_symbols));
    std::size_t bit = 0;
    for (int s = 0; s < spec.num_symbols; ++s) {
        auto& row = grid[static_cast<std::size_t>(s)];
        if (s == spec.zc_symbol_indices[0] || s == spec.zc_symbol_indices[1]) {
            const int root = s == spec.zc_symbol_indices[0] ? spec.zc_roots[0] : spec.zc_roots[1];
            auto zc = zc_subcarrier_values(spec, root);
            // Drop the (zeroed) DC element so the row is indexed like data rows.
            zc.erase(zc.begin() + static_cast<std::ptrdiff_t>(zc.size() / 2));
            row = std::move(zc);
        } else {
            row.resize(nu);
            for (std::size_t j = 0; j < nu; ++j, bit += 2) row[j] = qpsk_map(coded[bit], coded[bit + 1]);
        }
    }
    return grid;
}

ComplexSignal synth_broadcast_frame(const FrameSpec& spec, const Bits& payload_bits, const FrameOptions& opts) {
    const auto grid = frame_grid(spec, payload_bits, opts);
    const auto ks = data_subcarriers(spec);
    const int half = spec.used_subcarriers / 2;

    ComplexVec frame;
    frame.reserve(static_cast<std::size_t>(spec.frame_length()));
    for (int s = 0; s < spec.num_symbols; ++s) {
        // Re-insert a zero DC bin so the row covers -half .. half contiguously.
        const auto& row = grid[static_cast<std::size_t>(s)];
        ComplexVec logical(row.begin(), row.end());
        logical.insert(logical.begin() + half, Complex{});
        const auto sym = ofdm_symbol(spec, logical, -half, s);
        frame.insert(frame.end(), sym.begin(), sym.end());
    }
    const double scale = 1.0 / rms(frame);
    for (auto& v : frame) v *= scale;
    return ComplexSignal(std::move(frame), spec.sample_rate_hz());
}

namespace {

ComplexVec continuous_phase_fsk(std::size_t n, double symbol_rate, double deviation_hz, double fs,
                                std::mt19937_64& rng) {
    std::bernoulli_distribution bit(0.5);
    ComplexVec out(n);
    const double samples_per_symbol = fs / symbol_rate;
    double phase = 0.0;
    double next_symbol = 0.0;
    double freq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<double>(i) >= next_symbol) {
            freq = bit(rng) ? deviation_hz : -deviation_hz;
            next_symbol += samples_per_symbol;
        }
        out[i] = std::polar(1.0, phase);
        phase = std::fmod(phase + 2.0 * kPi * freq / fs, 2.0 * kPi);
    }
    return out;
}

ComplexVec bandlimited_noise(std::size_t n, double bandwidth_hz, double fs, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    ComplexVec x(n);
    for (auto& v : x) v = {g(rng), g(rng)};
    auto spec = dsp::fft(x);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = (k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n)) *
                         fs / static_cast<double>(n);
        if (std::abs(f) > bandwidth_hz / 2.0) spec[k] = Complex{};
    }
    return dsp::ifft(spec);
}

}  // namespace

ComplexSignal synth_interference(InterferenceKind kind, const InterferenceParams& p, std::uint64_t seed) {
    const auto cfg = ErrorCode::configuration;
    require(p.sample_rate_hz > 0.0 && p.duration_s > 0.0 && p.bandwidth_hz > 0.0, cfg,
            "interference needs positive rate, duration and bandwidth");
    require(p.power >= 0.0 && std::isfinite(p.power), cfg, "interference power must be >= 0");
    require(std::abs(p.center_offset_hz) + p.bandwidth_hz / 2.0 <= p.sample_rate_hz / 2.0, cfg,
            "interference footprint exceeds the capture bandwidth");
    if (kind == InterferenceKind::fhss_burst) {
        require(p.bandwidth_hz >= 0.4e6 - 1e-6 && p.bandwidth_hz <= 5e6 + 1e-6, cfg,
                "fhss burst bandwidth must lie in 0.4..5 MHz");
        require(p.duration_s >= 0.5e-3 - 1e-12 && p.duration_s <= 5e-3 + 1e-12, cfg,
                "fhss burst duration must lie in 0.5..5 ms");
    }
    const auto n = static_cast<std::size_t>(std::llround(p.duration_s * p.sample_rate_hz));
    require(n > 0, cfg, "interference shorter than one sample");
    if (p.power == 0.0) return ComplexSignal(ComplexVec(n), p.sample_rate_hz);

    std::mt19937_64 rng(seed);
    ComplexVec x;
    switch (kind) {
        case InterferenceKind::fhss_burst:
        case InterferenceKind::narrowband_packet:
            // 2-FSK with modulation index 1 occupies roughly symbol_rate + 2 * deviation.
            x = continuous_phase_fsk(n, p.bandwidth_hz / 2.0, p.bandwidth_hz / 4.0, p.sample_rate_hz, rng);
            break;
        case InterferenceKind::ofdm_video:
            x = bandlimited_noise(n, p.bandwidth_hz, p.sample_rate_hz, rng);
            break;
    }
    const double scale = std::sqrt(p.power / mean_power(x));
    for (auto& v : x) v *= scale;
    dsp::mix_inplace(x, p.center_offset_hz, p.sample_rate_hz);
    return ComplexSignal(std::move(x), p.sample_rate_hz);
}

ComplexVec make_noise(NoiseKind kind, std::size_t n, double power, std::uint64_t seed) {
    ComplexVec out(n);
    if (power <= 0.0) return out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    switch (kind) {
        case NoiseKind::awgn: {
            std::normal_distribution<double> g(0.0, std::sqrt(power / 2.0));
            for (auto& v : out) v = {g(rng), g(rng)};
            break;
        }
        case NoiseKind::rayleigh: {
            // |n| Rayleigh with E|n|^2 = 2 sigma^2 = power.
            const double sigma = std::sqrt(power / 2.0);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (auto& v : out) {
                const double mag = sigma * std::sqrt(-2.0 * std::log1p(-u(rng)));
                v = std::polar(mag, phase(rng));
            }
            break;
        }
        case NoiseKind::gamma: {
            // Gamma(k=2, theta): E[X^2] = k (k + 1) theta^2 = 6 theta^2.
            std::gamma_distribution<double> gm(2.0, std::sqrt(power / 6.0));
            for (auto& v : out) v = std::polar(gm(rng), phase(rng));
            break;
        }
        case NoiseKind::impulse: {
            // AWGN bed plus Bernoulli(1e-3) spikes at +20 dB over the bed.
            constexpr double kRate = 1e-3;
            constexpr double kSpikeGain = 100.0;
            const double bed = power / (1.0 + kRate * kSpikeGain);
            std::normal_distribution<double> g(0.0, std::sqrt(bed / 2.0));
            std::bernoulli_distribution hit(kRate);
            const double spike_mag = std::sqrt(bed * kSpikeGain);
            for (auto& v : out) {
                v = {g(rng), g(rng)};
                if (hit(rng)) v += std::polar(spike_mag, phase(rng));
            }
            break;
        }
    }
    return out;
}

namespace {

double support_power(std::span<const Complex> x) {
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& v : x) {
        if (v != Complex{}) {
            acc += std::norm(v);
            ++count;
        }
    }
    return count ? acc / static_cast<double>(count) : 0.0;
}

double noise_power_for(double signal_power, double snr_db, double fs, double occupied_bw_hz) {
    const double bw = occupied_bw_hz > 0.0 ? std::min(occupied_bw_hz, fs) : fs;
    return signal_power / dsp::db_to_lin(snr_db) * fs / bw;
}

}  // namespace

ComplexSignal apply_channel(const ComplexSignal& sig, const ChannelParams& ch) {
    ch.validate();
    const double fs = sig.sample_rate_hz();
    const double ref_power = support_power(sig.samples());
    const auto delay = static_cast<std::size_t>(ch.delay_samples);
    ComplexVec out(sig.size() + delay, Complex{});
    const double gain = std::pow(10.0, -ch.attenuation_db / 20.0);
    for (std::size_t i = 0; i < sig.size(); ++i) out[i + delay] = sig[i] * gain;
    dsp::mix_inplace(out, ch.cfo_hz, fs);
    const double np = noise_power_for(ref_power, ch.snr_db, fs, ch.occupied_bw_hz);
    const auto noise = make_noise(ch.noise_kind, out.size(), np, ch.rng_seed);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += noise[i];
    return ComplexSignal(std::move(out), fs, sig.center_freq_hz());
}

std::vector<BoundingBox> CaptureTruth::truth_boxes() const {
    std::vector<BoundingBox> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(f.box);
    return out;
}

CaptureEvent make_frame_event(const FrameSpec& spec, const Bits& payload_bits, double fs,
                              std::int64_t start_sample, double center_offset_hz, const FrameOptions& opts) {
    auto frame = synth_broadcast_frame(spec, payload_bits, opts);
    ComplexVec at_fs;
    if (std::abs(frame.sample_rate_hz() - fs) < 1e-6) {
        at_fs = frame.vec();
    } else {
        const auto [up, down] = dsp::rational_ratio(fs, frame.sample_rate_hz());
        at_fs = dsp::RationalResampler(up, down).process(frame.samples());
    }
    CaptureEvent ev{ComplexSignal(std::move(at_fs), fs), start_sample, center_offset_hz, true,
                    spec.sample_rate_hz(), spec.occupied_bandwidth_hz(), payload_bits};
    return ev;
}

CaptureTruth compose_capture(std::vector<CaptureEvent> events, std::size_t capture_len, double fs,
                             const ChannelParams& ch) {
    ch.validate();
    require(capture_len > 0 && fs > 0.0, ErrorCode::configuration, "capture needs samples and a rate");
    double ref_power = 1.0;
    double occupied = ch.occupied_bw_hz;
    for (const auto& ev : events) {
        if (ev.is_frame) {
            ref_power = mean_power(ev.signal.samples());
            if (occupied <= 0.0) occupied = ev.occupied_bw_hz;
            break;
        }
    }

    ComplexVec capture(capture_len, Complex{});
    CaptureTruth truth{ComplexSignal(ComplexVec(1), fs), {}};
    const double gain = std::pow(10.0, -ch.attenuation_db / 20.0);
    for (auto& ev : events) {
        ComplexVec x;
        if (std::abs(ev.signal.sample_rate_hz() - fs) < 1e-6) {
            x = ev.signal.vec();
        } else {
            const auto [up, down] = dsp::rational_ratio(fs, ev.signal.sample_rate_hz());
            x = dsp::RationalResampler(up, down).process(ev.signal.samples());
        }
        require(ev.start_sample >= 0 && static_cast<std::size_t>(ev.start_sample) + x.size() <= capture_len,
                ErrorCode::configuration, "event placed outside the capture");
        const double offset = ev.center_offset_hz + (ev.is_frame ? ch.cfo_hz : 0.0);
        const double half_bw = ev.is_frame ? ev.frame_bandwidth_hz / 2.0 : 0.0;
        require(std::abs(ev.center_offset_hz) + half_bw <= fs / 2.0, ErrorCode::configuration,
                "event band outside the capture");
        dsp::mix_inplace(x, offset, fs, ev.start_sample);
        const double g = ev.is_frame ? gain : 1.0;
        for (std::size_t i = 0; i < x.size(); ++i) capture[static_cast<std::size_t>(ev.start_sample) + i] += g * x[i];

        if (ev.is_frame) {
            TruthFrame tf;
            tf.box.t_min_s = static_cast<double>(ev.start_sample) / fs;
            tf.box.t_max_s = static_cast<double>(ev.start_sample + static_cast<std::int64_t>(x.size())) / fs;
            tf.box.f_min_hz = ev.center_offset_hz - ev.frame_bandwidth_hz / 2.0;
            tf.box.f_max_hz = ev.center_offset_hz + ev.frame_bandwidth_hz / 2.0;
            tf.box.confidence = 1.0;
            tf.payload_bits = ev.payload_bits;
            tf.start_sample = ev.start_sample;
            truth.frames.push_back(std::move(tf));
        }
    }

    const double np = noise_power_for(ref_power, ch.snr_db, fs, occupied);
    const auto noise = make_noise(ch.noise_kind, capture_len, np, ch.rng_seed);
    for (std::size_t i = 0; i < capture_len; ++i) capture[i] += noise[i];
    truth.signal = ComplexSignal(std::move(capture), fs);
    return truth;
}

codec::Payload random_payload(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    codec::Payload p;
    const auto prefixes = codec::known_serial_prefixes();
    std::uniform_int_distribution<std::size_t> pick(0, prefixes.size() - 1);
    std::uniform_int_distribution<int> digit(0, 35);
    p.serial = std::string(prefixes[pick(rng)]);
    while (p.serial.size() < 14) {
        const int d = digit(rng);
        p.serial.push_back(static_cast<char>(d < 10 ? '0' + d : 'A' + d - 10));
    }
    std::uniform_real_distribution<double> lat(30.25, 30.30), lon(120.10, 120.15), alt(0.0, 500.0),
        speed(0.0, 20.0);
    p.lat_deg = std::round(lat(rng) * 1e7) / 1e7;
    p.lon_deg = std::round(lon(rng) * 1e7) / 1e7;
    p.altitude_m = std::round(alt(rng) * 100.0) / 100.0;
    p.speed_mps = std::round(speed(rng) * 100.0) / 100.0;
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& b : p.uuid) b = static_cast<std::uint8_t>(byte(rng));
    return p;
}

}  // namespace dronerid
