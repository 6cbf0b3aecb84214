#include "dronerid/tf_analysis.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <numeric>

#include <nlohmann/json.hpp>

namespace dronerid {

namespace {

void fftshift_into(std::span<const Complex> spec, std::span<double> out, bool power) {
    const std::size_t n = spec.size();
    const std::size_t half = n / 2;
    for (std::size_t k = 0; k < n; ++k) {
        const double v = power ? std::norm(spec[k]) : std::abs(spec[k]);
        out[(k + half) % n] = v;
    }
}

}  // namespace

TimeFrequencyImage stft(const ComplexSignal& sig, int fft_size, int hop, dsp::WindowKind window) {
    require(fft_size > 0 && hop >= 1, ErrorCode::configuration, "stft needs positive fft size and hop");
    require(static_cast<std::size_t>(fft_size) <= sig.size(), ErrorCode::input_too_short,
            "signal shorter than the STFT window");
    TimeFrequencyImage tfi;
    tfi.fft_size = fft_size;
    tfi.freq_bins = static_cast<std::size_t>(fft_size);
    tfi.hop_samples = hop;
    tfi.window_kind = window;
    tfi.sample_rate_hz = sig.sample_rate_hz();
    tfi.time_bins = (sig.size() - static_cast<std::size_t>(fft_size)) / static_cast<std::size_t>(hop) + 1;
    tfi.magnitudes.assign(tfi.time_bins * tfi.freq_bins, 0.0);

    const auto w = dsp::make_window(window, static_cast<std::size_t>(fft_size));
    dsp::Fft fwd(static_cast<std::size_t>(fft_size), dsp::Fft::Direction::forward);
    ComplexVec buf(static_cast<std::size_t>(fft_size));
    const auto x = sig.samples();
    for (std::size_t t = 0; t < tfi.time_bins; ++t) {
        const std::size_t start = t * static_cast<std::size_t>(hop);
        for (std::size_t k = 0; k < buf.size(); ++k) buf[k] = x[start + k] * w[k];
        fwd.execute(buf);
        fftshift_into(buf, std::span<double>(tfi.magnitudes).subspan(t * tfi.freq_bins, tfi.freq_bins), false);
    }
    return tfi;
}

PowerSpectrum welch_psd(const ComplexSignal& sig, int segment_len, dsp::WindowKind window) {
    require(segment_len >= 2, ErrorCode::configuration, "welch segment too short");
    require(static_cast<std::size_t>(segment_len) <= sig.size(), ErrorCode::input_too_short,
            "signal shorter than the Welch segment");
    const auto h = static_cast<std::size_t>(segment_len);
    const std::size_t d = h / 2;
    const std::size_t k_segs = (sig.size() - h) / d + 1;
    const auto w = dsp::make_window(window, h);
    const double wenergy = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);

    PowerSpectrum psd;
    psd.segment_len = segment_len;
    psd.offset = static_cast<int>(d);
    psd.num_segments = static_cast<int>(k_segs);
    psd.sample_rate_hz = sig.sample_rate_hz();
    psd.power.assign(h, 0.0);

    dsp::Fft fwd(h, dsp::Fft::Direction::forward);
    ComplexVec buf(h);
    std::vector<double> tmp(h);
    const auto x = sig.samples();
    for (std::size_t s = 0; s < k_segs; ++s) {
        for (std::size_t k = 0; k < h; ++k) buf[k] = x[s * d + k] * w[k];
        fwd.execute(buf);
        fftshift_into(buf, tmp, true);
        for (std::size_t k = 0; k < h; ++k) psd.power[k] += tmp[k];
    }
    const double norm = 1.0 / (static_cast<double>(k_segs) * wenergy);
    for (auto& p : psd.power) p *= norm;
    return psd;
}

BandwidthEstimate estimate_bandwidth(const PowerSpectrum& psd, int fft_size, double spacing_hz) {
    require(fft_size > 0 && spacing_hz > 0.0, ErrorCode::configuration, "bandwidth hints must be positive");
    const std::size_t n = psd.power.size();
    require(n >= 8, ErrorCode::estimation_failed, "spectrum too short");

    const double floor = dsp::percentile(psd.power, 20.0);
    // Short moving average; symmetric, so half-power points of a step stay put.
    constexpr std::size_t kSmooth = 5;
    std::vector<double> s(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        std::size_t cnt = 0;
        for (std::size_t j = (i >= kSmooth / 2 ? i - kSmooth / 2 : 0); j <= std::min(n - 1, i + kSmooth / 2); ++j) {
            acc += psd.power[j];
            ++cnt;
        }
        s[i] = std::max(0.0, acc / static_cast<double>(cnt) - floor);
    }
    const auto imax = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    const double pmax = s[imax];
    require(pmax > 0.75 * floor && pmax > 0.0, ErrorCode::estimation_failed, "no plateau above the noise floor");
    const double half = pmax / 2.0;

    // Dips shorter than this many bins do not terminate the walk.
    const std::size_t run = std::max<std::size_t>(3, n / 512);
    auto walk = [&](int dir) -> double {
        std::ptrdiff_t i = static_cast<std::ptrdiff_t>(imax);
        std::ptrdiff_t last_above = i;
        std::size_t below = 0;
        while (true) {
            i += dir;
            if (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) fail(ErrorCode::estimation_failed, "no half-power crossing");
            if (s[static_cast<std::size_t>(i)] >= half) {
                last_above = i;
                below = 0;
            } else if (++below >= run) {
                break;
            }
        }
        const std::ptrdiff_t nxt = last_above + dir;
        const double a = s[static_cast<std::size_t>(last_above)];
        const double b = s[static_cast<std::size_t>(nxt)];
        const double frac = (a - half) / (a - b);
        return static_cast<double>(last_above) + dir * frac;
    };
    const double lo_bin = walk(-1);
    const double hi_bin = walk(+1);

    BandwidthEstimate est;
    est.f_lower_hz = psd.freq_of_bin(lo_bin);
    est.f_upper_hz = psd.freq_of_bin(hi_bin);
    est.b_used_hz = est.f_upper_hz - est.f_lower_hz;
    est.p_max = pmax;
    est.used_subcarriers = static_cast<int>(std::lround(est.b_used_hz / spacing_hz)) - 1;
    require(est.used_subcarriers >= 1 && est.b_used_hz > 0.0, ErrorCode::estimation_failed,
            "estimated band narrower than one subcarrier");
    est.b_total_hz = est.b_used_hz * fft_size / (est.used_subcarriers + 1);
    return est;
}

SubcarrierEstimate estimate_num_subcarriers(const ComplexSignal& sig, double b_hat_hz, const std::vector<int>& candidates,
                                            std::int64_t window_len, double center_hz) {
    require(!candidates.empty(), ErrorCode::configuration, "empty subcarrier candidate set");
    require(b_hat_hz > 0.0, ErrorCode::configuration, "bandwidth estimate must be positive");
    const double fs = sig.sample_rate_hz();
    const int n_min_cand = *std::min_element(candidates.begin(), candidates.end());
    const int n_max_cand = *std::max_element(candidates.begin(), candidates.end());
    const auto lag_max = static_cast<std::size_t>(std::ceil(1.25 * n_max_cand * fs / b_hat_hz)) + 2;
    const auto lag_min = static_cast<std::size_t>(std::floor(0.5 * n_min_cand * fs / b_hat_hz));
    require(sig.size() > lag_max + 16, ErrorCode::input_too_short, "signal shorter than the largest candidate lag");

    // Band-limit around the signal to drop out-of-band noise.
    ComplexVec x = dsp::mix(sig.samples(), -center_hz, fs);
    if (b_hat_hz < 0.9 * fs) {
        const double trans = std::max(0.05 * b_hat_hz, 0.2e6);
        const auto len = std::min<std::size_t>(dsp::kaiser_length(40.0, trans, fs), 2001);
        const auto taps = dsp::design_lowpass(len, (b_hat_hz / 2.0 + trans / 2.0) / fs, dsp::kaiser_beta(40.0));
        x = dsp::filter_centered(x, taps);
    }

    // Window L_a: at least one CP, taken as 1/16 of the shortest candidate symbol.
    const std::size_t wl =
        window_len > 0 ? static_cast<std::size_t>(window_len)
                       : std::max<std::size_t>(4, static_cast<std::size_t>(std::lround(n_min_cand * fs / b_hat_hz / 16.0)));
    require(x.size() > lag_max + wl, ErrorCode::input_too_short, "autocorrelation window longer than the signal");

    // Lags searched: each candidate's expected N fs / B-hat, +-1 %.
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (int n : candidates) {
        const double c = n * fs / b_hat_hz;
        ranges.emplace_back(static_cast<std::size_t>(std::max<double>(lag_min, std::floor(c * 0.99) - 3.0)),
                            static_cast<std::size_t>(std::min<double>(lag_max, std::ceil(c * 1.01) + 3.0)));
    }

    // gamma(n): the length-L_a lag-n correlation evaluated at every window
    // offset, combined as a mean of squared magnitudes.
    SubcarrierEstimate est;
    est.gamma.assign(lag_max + 1, 0.0);
    std::vector<Complex> pre;
    for (const auto& [lo, up] : ranges) {
        for (std::size_t n = lo; n <= up; ++n) {
            if (est.gamma[n] > 0.0) continue;
            const std::size_t cnt = x.size() - n;
            pre.assign(cnt + 1, Complex{});
            for (std::size_t k = 0; k < cnt; ++k) pre[k + 1] = pre[k] + x[k] * std::conj(x[k + n]);
            double acc = 0.0;
            for (std::size_t d = 0; d + wl <= cnt; ++d) acc += std::norm(pre[d + wl] - pre[d]);
            est.gamma[n] = acc / static_cast<double>(cnt - wl + 1);
        }
    }

    // Symmetric smoothing over the correlation main lobe (about fs/B wide)
    // steadies the peak position without moving it.
    const auto half = static_cast<std::size_t>(std::max(0.0, std::floor(fs / b_hat_hz / 2.0)));
    std::size_t best = 0;
    double best_val = -1.0;
    std::vector<double> evaluated;
    for (const auto& [lo, up] : ranges) {
        for (std::size_t n = lo; n <= up; ++n) {
            const std::size_t a = std::max(lo, n >= half ? n - half : 0);
            const std::size_t b = std::min(up, n + half);
            double acc = 0.0;
            for (std::size_t j = a; j <= b; ++j) acc += est.gamma[j];
            const double v = acc / static_cast<double>(b - a + 1);
            evaluated.push_back(est.gamma[n]);
            if (v > best_val) {
                best_val = v;
                best = n;
            }
        }
    }
    est.n_star = static_cast<std::int64_t>(best);

    const double med = dsp::median(evaluated);
    est.peak_to_median = med > 0.0 ? est.gamma[best] / med : 0.0;
    est.low_confidence = est.peak_to_median < 1.5;

    double best_err = 1e300;
    for (int n : candidates) {
        const double err = std::abs(static_cast<double>(est.n_star) / fs - n / b_hat_hz);
        if (err < best_err) {
            best_err = err;
            est.n_hat = n;
        }
    }
    return est;
}

ComplexVec gen_zc(int root, int length) {
    require(length >= 1, ErrorCode::configuration, "zc length must be >= 1");
    require(root > 0 && root < length, ErrorCode::configuration, "zc root must lie in (0, V)");
    require(std::gcd(root, length) == 1, ErrorCode::configuration, "zc root not coprime with V");
    ComplexVec z(static_cast<std::size_t>(length));
    const auto v2 = 2 * static_cast<std::int64_t>(length);
    for (std::int64_t v = 0; v < length; ++v) {
        // Reduce the phase numerator exactly before converting to radians.
        const std::int64_t num = (static_cast<std::int64_t>(root) * ((v * (v + 1)) % v2)) % v2;
        z[static_cast<std::size_t>(v)] = std::polar(1.0, -kPi * static_cast<double>(num) / length);
    }
    return z;
}

ComplexVec zc_time_template(const FrameSpec& spec, int root) {
    const auto z = gen_zc(root, spec.zc_length());
    const int half = spec.used_subcarriers / 2;
    ComplexVec freq(static_cast<std::size_t>(spec.fft_size), Complex{});
    for (int k = -half; k <= half; ++k) {
        if (k == 0) continue;
        freq[static_cast<std::size_t>(subcarrier_bin(k, spec.fft_size))] = z[static_cast<std::size_t>(k + half)];
    }
    return dsp::ifft(freq);
}

ZcIdentification identify_zc_root(const ComplexSignal& sig, const std::vector<int>& candidate_roots,
                                  const FrameSpec& spec, double center_hz, double min_score) {
    require(!candidate_roots.empty(), ErrorCode::configuration, "no candidate roots");
    const double b = spec.sample_rate_hz();
    ComplexVec x = std::abs(sig.sample_rate_hz() - b) < 1e-6 && center_hz == 0.0
                       ? sig.vec()
                       : dsp::extract_band(sig.samples(), sig.sample_rate_hz(), center_hz, b);
    const auto n = static_cast<std::size_t>(spec.fft_size);
    require(x.size() > n, ErrorCode::input_too_short, "signal shorter than one OFDM symbol");
    const auto energy = dsp::sliding_energy(x, n);

    struct Hit {
        int root;
        double score;
        std::int64_t pos;
    };
    std::vector<Hit> hits;
    for (int r : candidate_roots) {
        const auto t = zc_time_template(spec, r);
        const double tn = std::sqrt(mean_power(t) * static_cast<double>(n));
        const auto c = dsp::cross_correlate_abs(x, t);
        Hit h{r, 0.0, 0};
        for (std::size_t m = 0; m < c.size(); ++m) {
            const double e = energy[m];
            if (e <= 0.0) continue;
            const double rho = c[m] / (tn * std::sqrt(e));
            if (rho > h.score) {
                h.score = rho;
                h.pos = static_cast<std::int64_t>(m);
            }
        }
        hits.push_back(h);
    }
    std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.score > b.score; });
    require(hits.front().score >= min_score, ErrorCode::identification_failed, "no ZC correlation peak");

    ZcIdentification id;
    Hit first = hits.front();
    Hit second{0, 0.0, 0};
    for (std::size_t i = 1; i < hits.size(); ++i) {
        if (std::abs(hits[i].pos - first.pos) > static_cast<std::int64_t>(n / 2)) {
            second = hits[i];
            break;
        }
    }
    if (second.root == 0 && hits.size() > 1) second = hits[1];
    if (second.root != 0 && second.pos < first.pos) std::swap(first, second);
    id.roots[0] = first.root;
    id.scores[0] = first.score;
    id.positions[0] = first.pos;
    id.roots[1] = second.root;
    id.scores[1] = second.score;
    id.positions[1] = second.pos;
    return id;
}

Colormap parse_colormap(const std::string& name) {
    if (name == "gray" || name == "grayscale") return Colormap::gray;
    if (name == "viridis") return Colormap::viridis;
    fail(ErrorCode::configuration, "unknown colormap '" + name + "'");
}

namespace {

// Viridis sampled at 9 evenly spaced points.
constexpr std::array<std::array<double, 3>, 9> kViridis{{{68, 1, 84},
                                                         {71, 44, 122},
                                                         {59, 81, 139},
                                                         {44, 113, 142},
                                                         {33, 144, 141},
                                                         {39, 173, 129},
                                                         {92, 200, 99},
                                                         {170, 220, 50},
                                                         {253, 231, 37}}};

std::array<std::uint8_t, 3> viridis(double u) {
    u = std::clamp(u, 0.0, 1.0) * (kViridis.size() - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(u), kViridis.size() - 2);
    const double f = u - static_cast<double>(i);
    std::array<std::uint8_t, 3> rgb{};
    for (int c = 0; c < 3; ++c)
        rgb[c] = static_cast<std::uint8_t>(std::lround(kViridis[i][c] + f * (kViridis[i + 1][c] - kViridis[i][c])));
    return rgb;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

}  // namespace

void write_tfi_png(const TimeFrequencyImage& tfi, const std::string& path, Colormap cmap, double dynamic_range_db) {
    require(tfi.time_bins > 0 && tfi.freq_bins > 0, ErrorCode::configuration, "empty TFI");
    require(dynamic_range_db > 0.0, ErrorCode::configuration, "dynamic range must be positive");
    const auto width = static_cast<png_uint_32>(tfi.time_bins);
    const auto height = static_cast<png_uint_32>(tfi.freq_bins);
    const double peak = *std::max_element(tfi.magnitudes.begin(), tfi.magnitudes.end());
    const double top_db = peak > 0.0 ? 20.0 * std::log10(peak) : 0.0;

    const int channels = cmap == Colormap::gray ? 1 : 3;
    std::vector<std::uint8_t> img(static_cast<std::size_t>(width) * height * channels);
    for (std::size_t y = 0; y < height; ++y) {
        const std::size_t f = tfi.freq_bins - 1 - y;
        for (std::size_t x = 0; x < width; ++x) {
            const double m = tfi.at(x, f);
            const double db = m > 0.0 ? 20.0 * std::log10(m) : top_db - dynamic_range_db;
            const double u = std::clamp((db - (top_db - dynamic_range_db)) / dynamic_range_db, 0.0, 1.0);
            auto* px = &img[(y * width + x) * channels];
            if (channels == 1) {
                px[0] = static_cast<std::uint8_t>(std::lround(u * 255.0));
            } else {
                const auto rgb = viridis(u);
                std::copy(rgb.begin(), rgb.end(), px);
            }
        }
    }

    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    require(fp != nullptr, ErrorCode::io_failed, "cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::io_failed, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::io_failed, "libpng write failed for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < height; ++y) png_write_row(png, &img[y * width * channels]);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);

    // Pixel column x <-> time bin x, pixel row y <-> frequency bin (F - 1 - y).
    nlohmann::json side = {
        {"width", width},
        {"height", height},
        {"sample_rate_hz", tfi.sample_rate_hz},
        {"fft_size", tfi.fft_size},
        {"hop_samples", tfi.hop_samples},
        {"t0_sample", tfi.t0_sample},
        {"window", dsp::to_string(tfi.window_kind)},
        {"colormap", cmap == Colormap::gray ? "gray" : "viridis"},
        {"dynamic_range_db", dynamic_range_db},
        {"col0_time_s", tfi.time_of_bin(0)},
        {"col_step_s", tfi.hop_s()},
        {"row0_freq_hz", tfi.freq_of_bin(static_cast<double>(tfi.freq_bins - 1))},
        {"row_step_hz", -tfi.bin_width_hz()},
        {"time_extent_s", {tfi.time_of_bin(-0.5), tfi.time_of_bin(tfi.time_bins - 0.5)}},
        {"freq_extent_hz", {tfi.freq_of_bin(-0.5), tfi.freq_of_bin(tfi.freq_bins - 0.5)}},
    };
    std::ofstream js(path + ".json");
    require(static_cast<bool>(js), ErrorCode::io_failed, "cannot write sidecar for " + path);
    js << side.dump(2) << '\n';
}

namespace {

void put_u64_le(std::ostream& os, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

static_assert(sizeof(float) == 4);

}  // namespace

void write_tfi_raw(const TimeFrequencyImage& tfi, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), ErrorCode::io_failed, "cannot open " + path);
    put_u64_le(os, tfi.time_bins);
    put_u64_le(os, tfi.freq_bins);
    for (double m : tfi.magnitudes) {
        const auto f = static_cast<float>(m);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        for (int i = 0; i < 4; ++i) os.put(static_cast<char>((bits >> (8 * i)) & 0xffu));
    }
    require(static_cast<bool>(os), ErrorCode::io_failed, "write failed for " + path);
}

RawMatrix read_tfi_raw(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), ErrorCode::io_failed, "cannot open " + path);
    unsigned char hdr[16];
    is.read(reinterpret_cast<char*>(hdr), 16);
    require(is.gcount() == 16, ErrorCode::parse_failed, "truncated raw header in " + path);
    RawMatrix m;
    m.rows = get_u64_le(hdr);
    m.cols = get_u64_le(hdr + 8);
    const std::uint64_t count = m.rows * m.cols;
    std::vector<unsigned char> buf(count * 4);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(static_cast<std::uint64_t>(is.gcount()) == buf.size(), ErrorCode::parse_failed,
            "truncated raw matrix in " + path);
    m.data.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const unsigned char* p = &buf[i * 4];
        const std::uint32_t bits = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
        std::memcpy(&m.data[i], &bits, 4);
    }
    return m;
}

}  // namespace dronerid
