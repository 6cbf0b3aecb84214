#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "dronerid/codec.hpp"
#include "dronerid/synth.hpp"

namespace testsupport {

inline dronerid::Bits payload_bits(std::uint64_t seed, const dronerid::codec::CodecConfig& cfg = {}) {
    return dronerid::codec::encode_payload(dronerid::random_payload(seed), cfg.payload_bits());
}

// One frame at `start` (capture samples) and `offset_hz`, inside `extra` samples of margin.
inline dronerid::CaptureTruth one_frame_capture(const dronerid::FrameSpec& spec, double fs, double snr_db,
                                                std::uint64_t seed, std::int64_t start = 200,
                                                double offset_hz = 0.0, std::size_t extra = 400,
                                                double cfo_hz = 0.0) {
    auto ev = dronerid::make_frame_event(spec, payload_bits(seed), fs, start, offset_hz);
    const std::size_t len = ev.signal.size() + static_cast<std::size_t>(start) + extra;
    dronerid::ChannelParams ch;
    ch.snr_db = snr_db;
    ch.rng_seed = seed * 7919u + 13u;
    ch.cfo_hz = cfo_hz;
    return dronerid::compose_capture({ev}, len, fs, ch);
}

inline dronerid::ComplexVec white_noise(std::size_t n, double power, std::uint64_t seed) {
    return dronerid::make_noise(dronerid::NoiseKind::awgn, n, power, seed);
}

inline std::string temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "dronerid_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

}  // namespace testsupport
