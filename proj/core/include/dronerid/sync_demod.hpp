#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dronerid/box.hpp"
#include "dronerid/codec.hpp"
#include "dronerid/signal.hpp"

namespace dronerid {

// Mix f_i to DC, low-pass and resample to rate B.
ComplexSignal coarse_sync(const ComplexSignal& x, double f_hz, double b_hz);

struct TimingMetric {
    std::vector<double> metric;
    std::int64_t peak = 0;
};

// |sum_k x(d+k) x*(d+k+N)|^2 / (sum |x(d+k)|^2 sum |x(d+k+N)|^2), k < N_cp.
TimingMetric cp_timing_metric(std::span<const Complex> x, int n, int n_cp);

// The same ratio with the CP correlations of every symbol of a frame starting
// at d summed coherently. Evaluated for d in [d_lo, d_hi].
TimingMetric frame_timing_metric(std::span<const Complex> x, const FrameSpec& spec, std::int64_t d_lo,
                                 std::int64_t d_hi);

enum class CfoAnchor { cp, zc };

struct CfoEstimate {
    double epsilon = 0.0;  // subcarrier spacings
    double theta = 0.0;
    double h = 0.0;
    double cfo_hz = 0.0;
    double magnitude = 0.0;  // |correlation| / energy, reliability hint
    bool near_ambiguity = false;
};

// cp: h = N, CP/body correlation over all symbols; |epsilon| < 0.5.
// zc: h = N/2, phase between the two halves of each ZC symbol correlated with
// its template; |epsilon| < 1. epsilon = -theta N / (2 pi h).
CfoEstimate estimate_cfo(std::span<const Complex> x, const FrameSpec& spec, std::int64_t frame_start, CfoAnchor anchor);

// x(n) exp(-j 2 pi n epsilon / N).
ComplexVec apply_cfo(std::span<const Complex> x, double epsilon, int n);

std::pair<ComplexVec, CfoEstimate> estimate_and_apply_cfo(std::span<const Complex> x, const FrameSpec& spec,
                                                          std::int64_t frame_start, CfoAnchor anchor);

// Frame start maximizing the summed ZC correlation within +-radius.
std::int64_t fine_timing_zc(std::span<const Complex> x, const FrameSpec& spec, std::int64_t coarse_start, int radius);

struct DemodResult {
    std::vector<ComplexVec> symbols;  // equalized, [symbol][data subcarrier]
    std::vector<double> llrs;         // data bits in transmit order, positive = 0
    double noise_var = 0.0;
    int symbols_demodulated = 0;
};

DemodResult demodulate_ofdm(std::span<const Complex> x, const FrameSpec& spec, std::int64_t start);

struct SyncOptions {
    CfoAnchor anchor = CfoAnchor::zc;
    bool fine_timing = true;
};

struct SyncResult {
    std::int64_t coarse_start = 0;  // at rate B, index into the band signal
    std::int64_t fine_start = 0;
    double cfo_hz = 0.0;
    double epsilon = 0.0;
    std::vector<double> timing_metric;
    std::vector<std::int64_t> symbol_starts;
    std::pair<int, int> resample_ratio{1, 1};
    ComplexVec corrected;  // band signal after CFO removal
};

// Band `f_hz` of x brought to rate B; frame start searched within
// [search_lo, search_hi] (rate-B samples).
SyncResult synchronize(const ComplexSignal& x, double f_hz, const FrameSpec& spec, std::int64_t search_lo,
                       std::int64_t search_hi, const SyncOptions& opts = {});

struct FrameDecode {
    SyncResult sync;
    DemodResult demod;
    codec::BlockDecodeResult block;
    std::optional<codec::DecodedPayload> payload;
};

// Synchronize, demodulate and decode the frame inside `box` (capture time,
// frequency relative to the capture center).
FrameDecode decode_frame(const ComplexSignal& x, const BoundingBox& box, const FrameSpec& spec,
                         const codec::CodecConfig& cfg, const SyncOptions& opts = {});

}  // namespace dronerid
