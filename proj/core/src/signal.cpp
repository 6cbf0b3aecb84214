#include "dronerid/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dronerid/box.hpp"

namespace dronerid {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::configuration: return "configuration";
        case ErrorCode::input_too_short: return "input_too_short";
        case ErrorCode::estimation_failed: return "estimation_failed";
        case ErrorCode::identification_failed: return "identification_failed";
        case ErrorCode::design_failed: return "design_failed";
        case ErrorCode::parse_failed: return "parse_failed";
        case ErrorCode::sync_failed: return "sync_failed";
        case ErrorCode::demod_failed: return "demod_failed";
        case ErrorCode::refinement_degenerate: return "refinement_degenerate";
        case ErrorCode::io_failed: return "io_failed";
    }
    return "unknown";
}

ComplexSignal::ComplexSignal(ComplexVec samples, double sample_rate_hz, double center_freq_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz), center_freq_hz_(center_freq_hz) {
    require(!samples_.empty(), ErrorCode::configuration, "signal has no samples");
    require(std::isfinite(sample_rate_hz_) && sample_rate_hz_ > 0.0, ErrorCode::configuration,
            "sample rate must be positive");
    require(std::isfinite(center_freq_hz_) && center_freq_hz_ >= 0.0, ErrorCode::configuration,
            "center frequency must be non-negative");
    for (const auto& s : samples_)
        require(std::isfinite(s.real()) && std::isfinite(s.imag()), ErrorCode::configuration,
                "signal holds non-finite samples");
}

double mean_power(std::span<const Complex> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& v : x) acc += std::norm(v);
    return acc / static_cast<double>(x.size());
}

double rms(std::span<const Complex> x) { return std::sqrt(mean_power(x)); }

void FrameSpec::validate() const {
    const auto cfg = ErrorCode::configuration;
    require(fft_size > 0 && (fft_size & (fft_size - 1)) == 0, cfg, "fft_size must be a power of two");
    require(used_subcarriers > 0 && used_subcarriers < fft_size, cfg, "used_subcarriers must lie in (0, N)");
    require(used_subcarriers % 2 == 0, cfg, "used_subcarriers must be even");
    require(subcarrier_spacing_hz > 0.0, cfg, "subcarrier spacing must be positive");
    require(cp_normal >= 0 && cp_extend >= 0 && cp_normal < fft_size && cp_extend < fft_size, cfg,
            "cyclic prefix lengths out of range");
    require(num_symbols == 8 || num_symbols == 9, cfg, "num_symbols must be 8 or 9");
    for (int i : zc_symbol_indices) require(i >= 0 && i < num_symbols, cfg, "zc symbol index out of range");
    require(zc_symbol_indices[0] != zc_symbol_indices[1], cfg, "zc symbol indices must differ");
    const int v = zc_length();
    for (int r : zc_roots) {
        require(r > 0 && r < v, cfg, "zc root must lie in (0, V)");
        require(std::gcd(r, v) == 1, cfg, "zc root " + std::to_string(r) + " is not coprime with V");
    }
}

int FrameSpec::symbol_start(int symbol) const {
    if (symbol <= 0) return 0;
    return (fft_size + cp_extend) + (symbol - 1) * (fft_size + cp_normal);
}

std::vector<int> FrameSpec::data_symbol_indices() const {
    std::vector<int> out;
    for (int s = 0; s < num_symbols; ++s)
        if (!is_zc_symbol(s)) out.push_back(s);
    return out;
}

int FrameSpec::data_bits_capacity() const {
    return static_cast<int>(data_symbol_indices().size()) * used_subcarriers * 2;
}

bool FrameSpec::is_zc_symbol(int symbol) const {
    return symbol == zc_symbol_indices[0] || symbol == zc_symbol_indices[1];
}

std::vector<int> data_subcarriers(const FrameSpec& spec) {
    std::vector<int> ks;
    const int half = spec.used_subcarriers / 2;
    for (int k = -half; k <= half; ++k)
        if (k != 0) ks.push_back(k);
    return ks;
}

bool BoundingBox::valid() const {
    return std::isfinite(t_min_s) && std::isfinite(t_max_s) && std::isfinite(f_min_hz) && std::isfinite(f_max_hz) &&
           t_min_s < t_max_s && f_min_hz < f_max_hz && confidence >= 0.0 && confidence <= 1.0;
}

}  // namespace dronerid
