#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <span>
#include <vector>

#include "dronerid/signal.hpp"

namespace dronerid::dsp {

// In-place complex DFT of a fixed size backed by FFTW. Plans are created under
// a process-wide lock; an Fft instance itself must not be shared across
// threads.
class Fft {
public:
    enum class Direction { forward, inverse };

    Fft(std::size_t size, Direction dir);
    ~Fft();
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;
    Fft(Fft&&) noexcept;
    Fft& operator=(Fft&&) noexcept;

    std::size_t size() const noexcept { return size_; }
    // Unnormalized transform; `data.size()` must equal size().
    void execute(std::span<Complex> data);

private:
    struct Impl;
    std::size_t size_;
    std::unique_ptr<Impl> impl_;
};

ComplexVec fft(std::span<const Complex> x);
// Normalized by 1/N.
ComplexVec ifft(std::span<const Complex> x);

std::size_t next_pow2(std::size_t n);

enum class WindowKind { rectangular, hann, hamming, blackman };

WindowKind parse_window(const std::string& name);
const char* to_string(WindowKind kind);
std::vector<double> make_window(WindowKind kind, std::size_t length);

double bessel_i0(double x);
std::vector<double> kaiser_window(std::size_t length, double beta);
double kaiser_beta(double attenuation_db);
// Kaiser's length estimate for a lowpass with the given stopband attenuation
// and transition width (both edges expressed in Hz at rate fs). Always odd.
std::size_t kaiser_length(double attenuation_db, double transition_hz, double fs);

// Real, symmetric windowed-sinc lowpass. `cutoff` is in cycles/sample (0, 0.5).
std::vector<double> design_lowpass(std::size_t length, double cutoff, double beta);

// Multiply by exp(j 2 pi f n / fs), n counted from `n0`.
ComplexVec mix(std::span<const Complex> x, double freq_hz, double fs, std::int64_t n0 = 0);
void mix_inplace(std::span<Complex> x, double freq_hz, double fs, std::int64_t n0 = 0);

// Linear-phase FIR with group-delay compensation: y[n] = sum_k h[k] x[n + D - k],
// D = (len - 1) / 2, zero-padded at the edges; output length equals input.
ComplexVec filter_centered(std::span<const Complex> x, std::span<const Complex> taps);
ComplexVec filter_centered(std::span<const Complex> x, std::span<const double> taps);

// Rational polyphase resampler by up/down with a Kaiser-windowed sinc. Output
// sample j is aligned with input time j * down / up.
class RationalResampler {
public:
    RationalResampler(int up, int down, int half_zero_crossings = 16, double cutoff_scale = 0.85,
                      double beta = 8.0);

    int up() const noexcept { return up_; }
    int down() const noexcept { return down_; }
    ComplexVec process(std::span<const Complex> x) const;

private:
    int up_;
    int down_;
    int half_len_;
    std::vector<double> taps_;
};

// Reduce out_rate/in_rate to lowest terms; rates must be integer-valued Hz.
std::pair<int, int> rational_ratio(double out_rate, double in_rate);

// Shift `freq_hz` to DC, lowpass to +-bandwidth/2 and resample to `out_rate`.
// The output is time-aligned with the input (sample 0 <-> input sample 0).
ComplexVec extract_band(std::span<const Complex> x, double fs, double freq_hz, double out_rate);

// |sum_k conj(t[k]) x[k + m]| for m in [0, len(x) - len(t)).
std::vector<double> cross_correlate_abs(std::span<const Complex> x, std::span<const Complex> t);
// Complex-valued variant of the above.
ComplexVec cross_correlate(std::span<const Complex> x, std::span<const Complex> t);

// Energy of x[m .. m + window) for every m in [0, len(x) - window].
std::vector<double> sliding_energy(std::span<const Complex> x, std::size_t window);

// Index of the first maximum; 0 for an empty input.
std::int64_t argmax_index(std::span<const double> v);

double median(std::vector<double> v);
double percentile(std::vector<double> v, double pct);

inline double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }
inline double lin_to_db(double lin) { return 10.0 * std::log10(lin); }

}  // namespace dronerid::dsp
