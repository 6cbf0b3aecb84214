#include "dronerid/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numeric>

namespace dronerid::dsp {
namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

struct Fft::Impl {
    fftw_complex* buf = nullptr;
    fftw_plan plan = nullptr;
};

Fft::Fft(std::size_t size, Direction dir) : size_(size), impl_(std::make_unique<Impl>()) {
    require(size > 0, ErrorCode::configuration, "fft size must be positive");
    std::lock_guard lock(planner_mutex());
    impl_->buf = fftw_alloc_complex(size);
    impl_->plan = fftw_plan_dft_1d(static_cast<int>(size), impl_->buf, impl_->buf,
                                   dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                   FFTW_ESTIMATE);
}

Fft::~Fft() {
    if (!impl_) return;
    std::lock_guard lock(planner_mutex());
    if (impl_->plan) fftw_destroy_plan(impl_->plan);
    if (impl_->buf) fftw_free(impl_->buf);
}

Fft::Fft(Fft&&) noexcept = default;
Fft& Fft::operator=(Fft&& other) noexcept {
    if (this != &other) {
        Fft tmp(std::move(*this));
        size_ = other.size_;
        impl_ = std::move(other.impl_);
    }
    return *this;
}

void Fft::execute(std::span<Complex> data) {
    require(data.size() == size_, ErrorCode::configuration, "fft buffer size mismatch");
    static_assert(sizeof(Complex) == sizeof(fftw_complex));
    std::memcpy(impl_->buf, data.data(), size_ * sizeof(Complex));
    fftw_execute(impl_->plan);
    std::memcpy(static_cast<void*>(data.data()), impl_->buf, size_ * sizeof(Complex));
}

ComplexVec fft(std::span<const Complex> x) {
    ComplexVec out(x.begin(), x.end());
    Fft plan(out.size(), Fft::Direction::forward);
    plan.execute(out);
    return out;
}

ComplexVec ifft(std::span<const Complex> x) {
    ComplexVec out(x.begin(), x.end());
    Fft plan(out.size(), Fft::Direction::inverse);
    plan.execute(out);
    const double scale = 1.0 / static_cast<double>(out.size());
    for (auto& v : out) v *= scale;
    return out;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

WindowKind parse_window(const std::string& name) {
    if (name == "rectangular" || name == "rect") return WindowKind::rectangular;
    if (name == "hann") return WindowKind::hann;
    if (name == "hamming") return WindowKind::hamming;
    if (name == "blackman") return WindowKind::blackman;
    fail(ErrorCode::configuration, "unknown window kind '" + name + "'");
}

const char* to_string(WindowKind kind) {
    switch (kind) {
        case WindowKind::rectangular: return "rectangular";
        case WindowKind::hann: return "hann";
        case WindowKind::hamming: return "hamming";
        case WindowKind::blackman: return "blackman";
    }
    return "?";
}

std::vector<double> make_window(WindowKind kind, std::size_t length) {
    std::vector<double> w(length, 1.0);
    if (length < 2) return w;
    // Periodic windows: the DFT analysis use case.
    const double n = static_cast<double>(length);
    for (std::size_t i = 0; i < length; ++i) {
        const double ph = 2.0 * kPi * static_cast<double>(i) / n;
        switch (kind) {
            case WindowKind::rectangular: break;
            case WindowKind::hann: w[i] = 0.5 - 0.5 * std::cos(ph); break;
            case WindowKind::hamming: w[i] = 0.54 - 0.46 * std::cos(ph); break;
            case WindowKind::blackman: w[i] = 0.42 - 0.5 * std::cos(ph) + 0.08 * std::cos(2 * ph); break;
        }
    }
    return w;
}

double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double q = x * x / 4.0;
    for (int k = 1; k < 200; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return sum;
}

std::vector<double> kaiser_window(std::size_t length, double beta) {
    std::vector<double> w(length, 1.0);
    if (length < 2) return w;
    const double denom = bessel_i0(beta);
    const double m = static_cast<double>(length - 1);
    for (std::size_t i = 0; i < length; ++i) {
        const double r = 2.0 * static_cast<double>(i) / m - 1.0;
        w[i] = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / denom;
    }
    return w;
}

double kaiser_beta(double a) {
    if (a > 50.0) return 0.1102 * (a - 8.7);
    if (a >= 21.0) return 0.5842 * std::pow(a - 21.0, 0.4) + 0.07886 * (a - 21.0);
    return 0.0;
}

std::size_t kaiser_length(double attenuation_db, double transition_hz, double fs) {
    const double dw = 2.0 * kPi * transition_hz / fs;
    auto n = static_cast<std::size_t>(std::ceil((attenuation_db - 8.0) / (2.285 * dw))) + 1;
    if (n % 2 == 0) ++n;
    return n;
}

std::vector<double> design_lowpass(std::size_t length, double cutoff, double beta) {
    require(length % 2 == 1, ErrorCode::design_failed, "lowpass length must be odd");
    require(cutoff > 0.0 && cutoff < 0.5, ErrorCode::design_failed, "cutoff must lie in (0, 0.5)");
    auto h = kaiser_window(length, beta);
    const double mid = static_cast<double>(length - 1) / 2.0;
    for (std::size_t i = 0; i < length; ++i) {
        const double t = static_cast<double>(i) - mid;
        const double s = t == 0.0 ? 2.0 * cutoff : std::sin(2.0 * kPi * cutoff * t) / (kPi * t);
        h[i] *= s;
    }
    return h;
}

void mix_inplace(std::span<Complex> x, double freq_hz, double fs, std::int64_t n0) {
    if (freq_hz == 0.0) return;
    const double w = 2.0 * kPi * freq_hz / fs;
    // Recompute the phasor exactly every block to bound drift.
    constexpr std::size_t kBlock = 1024;
    for (std::size_t start = 0; start < x.size(); start += kBlock) {
        const double ph0 = std::fmod(w * static_cast<double>(n0 + static_cast<std::int64_t>(start)), 2.0 * kPi);
        Complex rot = std::polar(1.0, ph0);
        const Complex step = std::polar(1.0, w);
        const std::size_t end = std::min(x.size(), start + kBlock);
        for (std::size_t i = start; i < end; ++i) {
            x[i] *= rot;
            rot *= step;
        }
    }
}

ComplexVec mix(std::span<const Complex> x, double freq_hz, double fs, std::int64_t n0) {
    ComplexVec y(x.begin(), x.end());
    mix_inplace(y, freq_hz, fs, n0);
    return y;
}

namespace {

template <typename Tap>
ComplexVec filter_centered_impl(std::span<const Complex> x, std::span<const Tap> taps) {
    const std::size_t n = x.size();
    const std::size_t len = taps.size();
    require(len % 2 == 1, ErrorCode::configuration, "centered FIR needs odd length");
    const auto delay = static_cast<std::ptrdiff_t>((len - 1) / 2);
    ComplexVec y(n);
    for (std::size_t i = 0; i < n; ++i) {
        // y[i] = sum_k h[k] x[i + delay - k]
        const auto base = static_cast<std::ptrdiff_t>(i) + delay;
        const std::ptrdiff_t k_lo = std::max<std::ptrdiff_t>(0, base - static_cast<std::ptrdiff_t>(n) + 1);
        const std::ptrdiff_t k_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(len) - 1, base);
        double re = 0.0, im = 0.0;
        for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) {
            const Complex v = x[static_cast<std::size_t>(base - k)];
            if constexpr (std::is_same_v<Tap, double>) {
                re += taps[static_cast<std::size_t>(k)] * v.real();
                im += taps[static_cast<std::size_t>(k)] * v.imag();
            } else {
                const Complex p = taps[static_cast<std::size_t>(k)] * v;
                re += p.real();
                im += p.imag();
            }
        }
        y[i] = {re, im};
    }
    return y;
}

}  // namespace

namespace {

constexpr std::size_t kDirectFirMax = 48;

// Same result as the direct form, through overlap-save correlation against the
// time-reversed conjugate taps.
ComplexVec filter_centered_fft(std::span<const Complex> x, std::span<const Complex> taps) {
    const std::size_t len = taps.size();
    require(len % 2 == 1, ErrorCode::configuration, "centered FIR needs odd length");
    if (x.empty()) return {};
    const std::size_t delay = (len - 1) / 2;
    ComplexVec t(len);
    for (std::size_t k = 0; k < len; ++k) t[k] = std::conj(taps[len - 1 - k]);
    ComplexVec xp(x.size() + len, Complex{});
    std::copy(x.begin(), x.end(), xp.begin() + static_cast<std::ptrdiff_t>(delay));
    return cross_correlate(xp, t);
}

}  // namespace

ComplexVec filter_centered(std::span<const Complex> x, std::span<const Complex> taps) {
    if (taps.size() > kDirectFirMax) return filter_centered_fft(x, taps);
    return filter_centered_impl<Complex>(x, taps);
}

ComplexVec filter_centered(std::span<const Complex> x, std::span<const double> taps) {
    if (taps.size() > kDirectFirMax) {
        const ComplexVec ct(taps.begin(), taps.end());
        return filter_centered_fft(x, ct);
    }
    return filter_centered_impl<double>(x, taps);
}

RationalResampler::RationalResampler(int up, int down, int half_zero_crossings, double cutoff_scale,
                                     double beta)
    : up_(up), down_(down) {
    require(up > 0 && down > 0, ErrorCode::configuration, "resampler ratio must be positive");
    const int m = std::max(up, down);
    half_len_ = half_zero_crossings * m;
    const auto len = static_cast<std::size_t>(2 * half_len_ + 1);
    const double cutoff = cutoff_scale * 0.5 / static_cast<double>(m);
    taps_ = design_lowpass(len, cutoff, beta);
    for (auto& t : taps_) t *= static_cast<double>(up);
}

ComplexVec RationalResampler::process(std::span<const Complex> x) const {
    const auto n_in = static_cast<std::int64_t>(x.size());
    if (n_in == 0) return {};
    const std::int64_t n_out = (n_in * up_ + down_ - 1) / down_;
    ComplexVec y(static_cast<std::size_t>(n_out));
    for (std::int64_t j = 0; j < n_out; ++j) {
        const std::int64_t t0 = j * down_;
        // Input i contributes through tap index t0 - i*up + half.
        std::int64_t i_lo = (t0 - half_len_ + up_ - 1);
        i_lo = i_lo >= 0 ? i_lo / up_ : -((-i_lo) / up_);
        i_lo = std::max<std::int64_t>(0, i_lo);
        const std::int64_t i_hi = std::min<std::int64_t>(n_in - 1, (t0 + half_len_) / up_);
        double re = 0.0, im = 0.0;
        for (std::int64_t i = i_lo; i <= i_hi; ++i) {
            const double h = taps_[static_cast<std::size_t>(t0 - i * up_ + half_len_)];
            re += h * x[static_cast<std::size_t>(i)].real();
            im += h * x[static_cast<std::size_t>(i)].imag();
        }
        y[static_cast<std::size_t>(j)] = {re, im};
    }
    return y;
}

std::pair<int, int> rational_ratio(double out_rate, double in_rate) {
    const auto a = std::llround(out_rate);
    const auto b = std::llround(in_rate);
    require(a > 0 && b > 0 && std::abs(static_cast<double>(a) - out_rate) < 1e-6 &&
                std::abs(static_cast<double>(b) - in_rate) < 1e-6,
            ErrorCode::configuration, "resampling needs integer-valued rates");
    const auto g = std::gcd(a, b);
    const auto up = a / g;
    const auto down = b / g;
    require(up < 100000 && down < 100000, ErrorCode::configuration, "resampling ratio too large");
    return {static_cast<int>(up), static_cast<int>(down)};
}

ComplexVec extract_band(std::span<const Complex> x, double fs, double freq_hz, double out_rate) {
    auto shifted = mix(x, -freq_hz, fs);
    const auto [up, down] = rational_ratio(out_rate, fs);
    RationalResampler rs(up, down);
    return rs.process(shifted);
}

ComplexVec cross_correlate(std::span<const Complex> x, std::span<const Complex> t) {
    const std::size_t n = x.size();
    const std::size_t m = t.size();
    require(m > 0 && m <= n, ErrorCode::input_too_short, "template longer than signal");
    const std::size_t n_out = n - m;
    ComplexVec out(n_out);
    if (n_out == 0) return out;

    const std::size_t fft_len = std::max<std::size_t>(next_pow2(4 * m), 1u << 14);
    const std::size_t step = fft_len - m + 1;
    ComplexVec h(fft_len, Complex{});
    for (std::size_t k = 0; k < m; ++k) h[k] = std::conj(t[m - 1 - k]);
    Fft fwd(fft_len, Fft::Direction::forward);
    Fft inv(fft_len, Fft::Direction::inverse);
    fwd.execute(h);

    ComplexVec block(fft_len);
    const double scale = 1.0 / static_cast<double>(fft_len);
    for (std::size_t p = 0; p < n_out; p += step) {
        const std::size_t avail = std::min(fft_len, n - p);
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(p), avail, block.begin());
        std::fill(block.begin() + static_cast<std::ptrdiff_t>(avail), block.end(), Complex{});
        fwd.execute(block);
        for (std::size_t k = 0; k < fft_len; ++k) block[k] *= h[k];
        inv.execute(block);
        const std::size_t count = std::min(step, n_out - p);
        for (std::size_t q = 0; q < count; ++q) out[p + q] = block[m - 1 + q] * scale;
    }
    return out;
}

std::vector<double> cross_correlate_abs(std::span<const Complex> x, std::span<const Complex> t) {
    const auto c = cross_correlate(x, t);
    std::vector<double> out(c.size());
    std::transform(c.begin(), c.end(), out.begin(), [](const Complex& v) { return std::abs(v); });
    return out;
}

std::vector<double> sliding_energy(std::span<const Complex> x, std::size_t window) {
    require(window > 0 && window <= x.size(), ErrorCode::input_too_short, "window exceeds signal");
    std::vector<double> out(x.size() - window + 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < window; ++i) acc += std::norm(x[i]);
    out[0] = acc;
    for (std::size_t m = 1; m < out.size(); ++m) {
        acc += std::norm(x[m + window - 1]) - std::norm(x[m - 1]);
        out[m] = std::max(acc, 0.0);
    }
    return out;
}

std::int64_t argmax_index(std::span<const double> v) {
    if (v.empty()) return 0;
    return static_cast<std::int64_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double median(std::vector<double> v) { return percentile(std::move(v), 50.0); }

double percentile(std::vector<double> v, double pct) {
    require(!v.empty(), ErrorCode::configuration, "percentile of empty set");
    pct = std::clamp(pct, 0.0, 100.0);
    const double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const double a = v[lo];
    if (frac == 0.0 || lo + 1 >= v.size()) return a;
    const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
    return a + frac * (b - a);
}

}  // namespace dronerid::dsp
