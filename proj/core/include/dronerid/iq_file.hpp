#pragma once

#include <optional>
#include <string>

#include "dronerid/signal.hpp"

namespace dronerid {

// Interleaved float32 LE I/Q. The sidecar lives at `<path>.json` and holds
// sample_rate_hz, center_freq_hz and num_samples.
void write_cf32(const ComplexSignal& sig, const std::string& path);

// Reads `path` and its sidecar. A missing sidecar is accepted only when
// `sample_rate_hz` is given (raw recordings from other tools).
ComplexSignal read_cf32(const std::string& path, std::optional<double> sample_rate_hz = std::nullopt,
                        double center_freq_hz = 0.0);

std::string sidecar_path(const std::string& path);

}  // namespace dronerid
