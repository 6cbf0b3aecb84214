#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dronerid/signal.hpp"

namespace dronerid::codec {

// ---------------------------------------------------------------------------
// Gold-sequence scrambling

inline constexpr std::uint32_t kDefaultScramblerSeed = 0x12345678u & 0x7fffffffu;

// Gold stream c(n) = x1(n + 1600) ^ x2(n + 1600) with
//   x1(n+31) = x1(n+3) ^ x1(n),                 x1 = 1, 0, 0, ...
//   x2(n+31) = x2(n+3) ^ x2(n+2) ^ x2(n+1) ^ x2(n),  x2 initialised from `seed`.
Bits gold_sequence(std::uint32_t seed, std::size_t length);
Bits gold_scramble(std::span<const std::uint8_t> bits, std::uint32_t seed);
// Descrambling is the same XOR; kept as a separate name for readability at call sites.
inline Bits gold_descramble(std::span<const std::uint8_t> bits, std::uint32_t seed) {
    return gold_scramble(bits, seed);
}
// Soft-value variant: flips LLR signs where the stream bit is 1.
std::vector<double> gold_descramble_llr(std::span<const double> llrs, std::uint32_t seed);

// ---------------------------------------------------------------------------
// CRC

inline constexpr std::uint32_t kCrc24A = 0x864CFBu;

// Remainder of bits * x^24 modulo the generator (MSB-first, zero init).
std::uint32_t crc24(std::span<const std::uint8_t> bits, std::uint32_t poly = kCrc24A);
Bits crc_attach(std::span<const std::uint8_t> bits, std::uint32_t poly = kCrc24A);
// True iff the trailing 24 bits match the CRC of the preceding bits.
bool crc_check(std::span<const std::uint8_t> bits, std::uint32_t poly = kCrc24A);

// ---------------------------------------------------------------------------
// Turbo code: two 8-state RSC encoders (g0 = 1+D^2+D^3, g1 = 1+D+D^3), QPP
// interleaver, trellis termination with 12 tail bits.

struct QppParams {
    int k;
    int f1;
    int f2;
};

std::span<const QppParams> supported_block_sizes();
bool is_supported_block_size(int k);
std::vector<int> qpp_interleaver(int k);

// Layout of the coded stream: [systematic(K), parity1(K), parity2(K), tail(12)].
// Tail order: x1 z1 (3 steps of encoder 1), then x2 z2 (3 steps of encoder 2),
// interleaved per step as [x, z].
Bits turbo_encode(std::span<const std::uint8_t> bits);
inline int turbo_coded_length(int k) { return 3 * k + 12; }

struct TurboDecodeResult {
    Bits bits;
    int iterations = 0;
    bool early_exit = false;
};

// LLR convention: positive means bit 0. `stop` (if set) is evaluated after each
// iteration on the hard decisions; returning true ends decoding early.
TurboDecodeResult turbo_decode(std::span<const double> llrs, int k, int max_iters,
                               const std::function<bool(const Bits&)>& stop = {},
                               double extrinsic_scale = 0.75);

// ---------------------------------------------------------------------------
// Block configuration and payload

struct CodecConfig {
    int block_size = 1408;  // Turbo K, CRC included
    std::uint32_t scrambler_seed = kDefaultScramblerSeed;
    bool scramble = true;
    std::uint32_t crc_poly = kCrc24A;
    int max_iterations = 8;

    int payload_bits() const { return block_size - 24; }
    void validate() const;
};

// Message fields carried in a broadcast frame.
struct Payload {
    std::uint8_t version = 1;
    std::string serial;  // up to 16 ASCII chars, NUL padded on the wire
    double lat_deg = 0.0;
    double lon_deg = 0.0;
    double altitude_m = 0.0;
    double speed_mps = 0.0;
    std::array<std::uint8_t, 16> uuid{};

    bool operator==(const Payload&) const = default;
};

inline constexpr std::size_t kPayloadWireBytes = 1 + 16 + 4 + 4 + 4 + 2 + 16;

std::int32_t degrees_to_fixed(double deg);
double fixed_to_degrees(std::int32_t v);

// Fields -> bits, padded with zeros to `total_bits` (the CRC-less block size).
Bits encode_payload(const Payload& p, int total_bits);

// Serial prefixes (first three characters) assigned to known drone types.
std::span<const std::string_view> known_serial_prefixes();

struct DecodedPayload {
    bool crc_ok = false;
    bool serial_prefix_known = false;
    Payload fields;
    Bits raw_bits;
};

// Parses a CRC-protected block (payload + 24 CRC bits). Refuses when the CRC
// fails (parse_failed) and on malformed fields.
DecodedPayload parse_payload(std::span<const std::uint8_t> block, std::uint32_t poly = kCrc24A);

// Full transmit chain: payload bits -> CRC -> turbo -> pad -> scramble.
// Returns exactly `capacity` bits.
Bits encode_block(std::span<const std::uint8_t> payload_bits, const CodecConfig& cfg, int capacity);

struct BlockDecodeResult {
    bool crc_ok = false;
    Bits block;  // K bits, CRC included
    int iterations = 0;
};

// Receive chain from soft channel values (positive = bit 0), `capacity` long.
BlockDecodeResult decode_block(std::span<const double> llrs, const CodecConfig& cfg);

}  // namespace dronerid::codec
