#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "dronerid/codec.hpp"
#include "dronerid/synth.hpp"

namespace dronerid::cli {

// Synthesis scenario file. Every field is optional; missing frames are drawn
// from the seed.
//
// {
//   "bank_preset": "2g4_100m",        // or "sample_rate_hz"
//   "duration_ms": 2.0,
//   "snr_db": 10, "noise_kind": "awgn", "attenuation_db": 0, "cfo_hz": 0,
//   "frames": [{"start_ms": 0.3, "center_hz": -10e6, "payload": {...}}],
//   "interference": [{"kind": "fhss_burst", "start_ms": 0.1, "duration_ms": 1,
//                     "bandwidth_hz": 2e6, "center_hz": 5e6, "power_db": 0}]
// }
struct SynthResult {
    CaptureTruth truth;
    std::vector<codec::Payload> payloads;
};

SynthResult synthesize_from_json(const nlohmann::json& scenario, std::uint64_t seed);

nlohmann::ordered_json payload_to_json(const codec::Payload& p);
codec::Payload payload_from_json(const nlohmann::json& j);

}  // namespace dronerid::cli
