#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dronerid/dsp.hpp"
#include "dronerid/signal.hpp"

namespace dronerid {

// STFT magnitude matrix, row-major [time_bins x freq_bins]. Frequency bins are
// shifted so column 0 is the most negative frequency.
struct TimeFrequencyImage {
    std::vector<double> magnitudes;
    std::size_t time_bins = 0;
    std::size_t freq_bins = 0;  // == fft_size
    int hop_samples = 0;
    int fft_size = 0;
    dsp::WindowKind window_kind = dsp::WindowKind::hann;
    std::int64_t t0_sample = 0;
    double sample_rate_hz = 0.0;

    double at(std::size_t t, std::size_t f) const { return magnitudes[t * freq_bins + f]; }
    double freq_of_bin(double f) const { return (f - fft_size / 2.0) * sample_rate_hz / fft_size; }
    // Center of the analysis window of column t, seconds from capture start.
    double time_of_bin(double t) const {
        return (static_cast<double>(t0_sample) + t * hop_samples + fft_size / 2.0) / sample_rate_hz;
    }
    double bin_width_hz() const { return sample_rate_hz / fft_size; }
    double hop_s() const { return hop_samples / sample_rate_hz; }
};

TimeFrequencyImage stft(const ComplexSignal& sig, int fft_size = 1024, int hop = 256,
                        dsp::WindowKind window = dsp::WindowKind::hann);

// Welch averaged periodogram with 50% overlap, bins shifted like the TFI.
struct PowerSpectrum {
    std::vector<double> power;
    int segment_len = 0;
    int offset = 0;
    int num_segments = 0;
    double sample_rate_hz = 0.0;

    double freq_of_bin(double i) const { return (i - segment_len / 2.0) * sample_rate_hz / segment_len; }
};

// Each periodogram is normalized by the window energy, so the mean over bins
// equals the mean sample power (reduces to 1/(K H) for a rectangular window).
PowerSpectrum welch_psd(const ComplexSignal& sig, int segment_len, dsp::WindowKind window = dsp::WindowKind::hann);

struct BandwidthEstimate {
    double b_used_hz = 0.0;
    double f_lower_hz = 0.0;
    double f_upper_hz = 0.0;
    double b_total_hz = 0.0;
    double p_max = 0.0;
    int used_subcarriers = 0;  // N_u inferred from b_used
};

// Half-power edges around the PSD maximum. The noise floor (a low percentile
// of the PSD) is removed first and the PSD lightly smoothed; the walk tolerates
// short sub-threshold dips inside the plateau.
BandwidthEstimate estimate_bandwidth(const PowerSpectrum& psd, int fft_size, double subcarrier_spacing_hz);

struct SubcarrierEstimate {
    std::int64_t n_star = 0;  // autocorrelation peak lag, samples at sig rate
    int n_hat = 0;
    double peak_to_median = 0.0;
    bool low_confidence = false;
    std::vector<double> gamma;  // gamma(n) for n = 0 .. size-1
};

// CP autocorrelation. The signal is band-limited to +-b_hat/2 around
// `center_hz`; gamma(n) is the mean over window offsets d of
// |sum_{k<L_a} x(d+k) x*(d+k+n)|^2 with L_a = `window_len` (0: 1/16 of the
// shortest candidate symbol), evaluated only within +-1 % of each candidate
// lag N fs / b_hat (zero elsewhere). N-hat minimizes |n*/fs - N/b_hat|.
SubcarrierEstimate estimate_num_subcarriers(const ComplexSignal& sig, double b_hat_hz,
                                            const std::vector<int>& candidates, std::int64_t window_len = 0,
                                            double center_hz = 0.0);

// z_r(v) = exp(-j pi r v (v + 1) / V), v = 0 .. V-1.
ComplexVec gen_zc(int root, int length);

// Time-domain ZC OFDM symbol body (N samples, no CP) as the synthesizer emits
// it, before frame RMS normalization.
ComplexVec zc_time_template(const FrameSpec& spec, int root);

struct ZcIdentification {
    int roots[2] = {0, 0};         // in order of appearance
    double scores[2] = {0.0, 0.0};  // normalized correlation peaks in [0, 1]
    std::int64_t positions[2] = {0, 0};
};

// Normalized template matching at the frame rate (the input is brought to
// spec.sample_rate_hz() around `center_hz` if needed).
ZcIdentification identify_zc_root(const ComplexSignal& sig, const std::vector<int>& candidate_roots,
                                  const FrameSpec& spec, double center_hz = 0.0, double min_score = 0.5);

enum class Colormap { gray, viridis };
Colormap parse_colormap(const std::string& name);

// PNG with frequency on the vertical axis (highest at the top) and time on the
// horizontal axis; dB magnitudes clamped to [max - dynamic_range_db, max].
// Writes a `<path>.json` sidecar mapping pixels to seconds/Hz.
void write_tfi_png(const TimeFrequencyImage& tfi, const std::string& path, Colormap cmap = Colormap::viridis,
                   double dynamic_range_db = 60.0);

// 16-byte header (rows, cols as uint64 LE) then float32 LE row-major data.
void write_tfi_raw(const TimeFrequencyImage& tfi, const std::string& path);
struct RawMatrix {
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    std::vector<float> data;
};
RawMatrix read_tfi_raw(const std::string& path);

}  // namespace dronerid
