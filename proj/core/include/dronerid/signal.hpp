#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "dronerid/error.hpp"

namespace dronerid {

using Complex = std::complex<double>;
using ComplexVec = std::vector<Complex>;
using Bits = std::vector<std::uint8_t>;

inline constexpr double kPi = 3.14159265358979323846;

// Sampled complex record. Invariants (non-empty, finite, positive rate) are
// checked on construction.
class ComplexSignal {
public:
    ComplexSignal(ComplexVec samples, double sample_rate_hz, double center_freq_hz = 0.0);

    std::span<const Complex> samples() const noexcept { return samples_; }
    std::span<Complex> mutable_samples() noexcept { return samples_; }
    const ComplexVec& vec() const noexcept { return samples_; }
    ComplexVec release() && { return std::move(samples_); }

    std::size_t size() const noexcept { return samples_.size(); }
    double sample_rate_hz() const noexcept { return sample_rate_hz_; }
    double center_freq_hz() const noexcept { return center_freq_hz_; }
    double duration_s() const noexcept { return static_cast<double>(samples_.size()) / sample_rate_hz_; }

    const Complex& operator[](std::size_t i) const { return samples_[i]; }

private:
    ComplexVec samples_;
    double sample_rate_hz_;
    double center_freq_hz_;
};

double mean_power(std::span<const Complex> x);
double rms(std::span<const Complex> x);

// OFDM numerology of a broadcast frame. Symbol 0 carries the extended CP,
// every other symbol the normal CP.
struct FrameSpec {
    int fft_size = 1024;
    int used_subcarriers = 600;
    double subcarrier_spacing_hz = 15e3;
    int cp_normal = 72;
    int cp_extend = 80;
    int num_symbols = 8;
    int zc_symbol_indices[2] = {3, 5};
    int zc_roots[2] = {600, 147};

    void validate() const;

    int virtual_subcarriers() const { return fft_size - used_subcarriers - 1; }
    int zc_length() const { return used_subcarriers + 1; }
    double sample_rate_hz() const { return fft_size * subcarrier_spacing_hz; }
    // Occupied bandwidth of the used subcarriers plus DC, (N_u + 1) * spacing.
    double occupied_bandwidth_hz() const { return zc_length() * subcarrier_spacing_hz; }

    int cp_length(int symbol) const { return symbol == 0 ? cp_extend : cp_normal; }
    // Sample index (at the baseband rate) where symbol `symbol` starts, CP included.
    int symbol_start(int symbol) const;
    // Sample index where the useful part (after CP) of `symbol` starts.
    int symbol_body_start(int symbol) const { return symbol_start(symbol) + cp_length(symbol); }
    int frame_length() const { return symbol_start(num_symbols); }
    double duration_s() const { return frame_length() / sample_rate_hz(); }

    std::vector<int> data_symbol_indices() const;
    int data_bits_capacity() const;
    bool is_zc_symbol(int symbol) const;
};

// FFT bin of logical subcarrier k in [-N_u/2, N_u/2].
inline int subcarrier_bin(int k, int fft_size) { return (k % fft_size + fft_size) % fft_size; }

// Logical subcarriers carrying data, DC excluded, ascending.
std::vector<int> data_subcarriers(const FrameSpec& spec);

}  // namespace dronerid
