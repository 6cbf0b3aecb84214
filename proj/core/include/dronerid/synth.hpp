#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dronerid/box.hpp"
#include "dronerid/codec.hpp"
#include "dronerid/signal.hpp"

namespace dronerid {

enum class NoiseKind { awgn, rayleigh, gamma, impulse };

NoiseKind parse_noise_kind(const std::string& name);
const char* to_string(NoiseKind kind);

struct ChannelParams {
    double snr_db = 100.0;
    NoiseKind noise_kind = NoiseKind::awgn;
    double cfo_hz = 0.0;
    std::int64_t delay_samples = 0;
    double attenuation_db = 0.0;  // flight-distance surrogate
    std::uint64_t rng_seed = 0;
    // Bandwidth over which the SNR is defined; <= 0 means the full sample rate.
    double occupied_bw_hz = 0.0;

    void validate() const;
};

// QPSK symbol for bits (b0, b1): ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2).
Complex qpsk_map(std::uint8_t b0, std::uint8_t b1);

// Frequency-domain ZC symbol: root `r` mapped onto logical subcarriers
// -V/2 .. V/2 with the DC element removed.
ComplexVec zc_subcarrier_values(const FrameSpec& spec, int root);

struct FrameOptions {
    codec::CodecConfig codec;
};

// Baseband broadcast frame at rate spec.sample_rate_hz(), RMS normalized to 1.
// `payload_bits` must hold exactly codec.payload_bits() bits.
ComplexSignal synth_broadcast_frame(const FrameSpec& spec, const Bits& payload_bits,
                                    const FrameOptions& opts = {});

// Frequency-domain grid of a frame: [symbol][logical subcarrier index 0..N_u-1],
// data subcarriers in data_subcarriers() order; ZC symbols hold their ZC values.
std::vector<ComplexVec> frame_grid(const FrameSpec& spec, const Bits& payload_bits, const FrameOptions& opts = {});

enum class InterferenceKind { fhss_burst, ofdm_video, narrowband_packet };

InterferenceKind parse_interference_kind(const std::string& name);
const char* to_string(InterferenceKind kind);

struct InterferenceParams {
    double sample_rate_hz = 100e6;
    double duration_s = 1e-3;
    double bandwidth_hz = 1e6;
    double center_offset_hz = 0.0;
    double power = 1.0;  // mean power, linear, relative to a unit-RMS frame
};

ComplexSignal synth_interference(InterferenceKind kind, const InterferenceParams& params, std::uint64_t seed);

// Delay, attenuation, CFO and additive noise. The noise level is set so that
// the SNR over `ch.occupied_bw_hz` and the non-zero support of the input,
// measured before attenuation, equals snr_db. Output length = input + delay.
ComplexSignal apply_channel(const ComplexSignal& sig, const ChannelParams& ch);

// Additive noise of the given kind and mean power.
ComplexVec make_noise(NoiseKind kind, std::size_t n, double power, std::uint64_t seed);

struct CaptureEvent {
    ComplexSignal signal;
    std::int64_t start_sample = 0;  // at the capture rate
    double center_offset_hz = 0.0;
    bool is_frame = false;
    // Frame events only.
    double frame_bandwidth_hz = 0.0;
    double occupied_bw_hz = 0.0;
    Bits payload_bits;
};

struct TruthFrame {
    BoundingBox box;
    Bits payload_bits;
    std::int64_t start_sample = 0;
};

struct CaptureTruth {
    ComplexSignal signal;
    std::vector<TruthFrame> frames;

    std::vector<BoundingBox> truth_boxes() const;
};

// Places every event (resampled to fs if needed, mixed to its offset) into a
// capture of `capture_len` samples and adds channel noise. The noise level is
// referenced to the first frame event; without frames, to unit power.
// Attenuation and CFO act on frame events only.
CaptureTruth compose_capture(std::vector<CaptureEvent> events, std::size_t capture_len, double fs,
                             const ChannelParams& ch);

// Convenience: a broadcast frame event resampled to `fs`.
CaptureEvent make_frame_event(const FrameSpec& spec, const Bits& payload_bits, double fs,
                              std::int64_t start_sample, double center_offset_hz,
                              const FrameOptions& opts = {});

// Random payload fields for synthetic corpora.
codec::Payload random_payload(std::uint64_t seed);

}  // namespace dronerid
