#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dronerid/signal.hpp"

namespace dronerid {

// Transmission-frequency prior: centers f_i relative to the capture center and
// the frame bandwidth B. Band i is [f_i - B/2, f_i + B/2].
struct FreqPrior {
    std::vector<double> freq_set_hz;
    double bandwidth_hz = 15.36e6;

    std::vector<std::pair<double, double>> bands() const;
    std::size_t nearest(double f_hz) const;
    void validate(double sample_rate_hz) const;
};

struct FilterBank {
    FreqPrior prior;
    double sample_rate_hz = 0.0;
    double stopband_db = 60.0;
    double transition_hz = 1e6;
    std::vector<std::vector<double>> taps;  // real symmetric lowpass per band, odd length

    std::size_t length() const { return taps.empty() ? 0 : taps.front().size(); }
    std::size_t delay() const { return (length() - 1) / 2; }
    // Composite complex band-pass taps: sum_i h_i[k] exp(j 2 pi f_i (k - D) / fs).
    ComplexVec composite_taps() const;
};

inline constexpr std::size_t kMaxFilterLength = 1023;

// Kaiser windowed-sinc lowpass per band, passband edge B/2, stop edge
// B/2 + transition. The length is the Kaiser estimate for the requested
// attenuation; above `max_length` the design is infeasible.
FilterBank design_filter_bank(const FreqPrior& prior, double sample_rate_hz, double stopband_db = 60.0,
                              double transition_hz = 1e6, std::size_t max_length = kMaxFilterLength);

// Sum of the band-pass outputs, group-delay compensated.
ComplexSignal apply_filter_bank(const ComplexSignal& sig, const FilterBank& bank);
// Identity minus the band-pass sum.
ComplexSignal apply_band_stop(const ComplexSignal& sig, const FilterBank& bank);

// Composite band-pass response at `f_hz`.
Complex bank_response(const FilterBank& bank, double f_hz);

void save_filter_bank(const FilterBank& bank, const std::string& path);
FilterBank load_filter_bank(const std::string& path);

// Shipped sets: "2g4_100m", "5g8_100m", "2g4_80m". Centers are placeholders.
std::vector<std::string> filter_bank_preset_names();
FreqPrior preset_prior(const std::string& name, double* sample_rate_hz = nullptr);
FilterBank preset_filter_bank(const std::string& name);

std::string base64_encode(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace dronerid
