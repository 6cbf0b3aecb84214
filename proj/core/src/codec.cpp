#include "dronerid/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dronerid::codec {

// ---------------------------------------------------------------------------
// Gold

Bits gold_sequence(std::uint32_t seed, std::size_t length) {
    constexpr std::size_t kNc = 1600;
    const std::size_t total = kNc + length + 31;
    Bits x1(total, 0), x2(total, 0);
    x1[0] = 1;
    for (int i = 0; i < 31; ++i) x2[static_cast<std::size_t>(i)] = (seed >> i) & 1u;
    for (std::size_t n = 0; n + 31 < total; ++n) {
        x1[n + 31] = x1[n + 3] ^ x1[n];
        x2[n + 31] = x2[n + 3] ^ x2[n + 2] ^ x2[n + 1] ^ x2[n];
    }
    Bits c(length);
    for (std::size_t n = 0; n < length; ++n) c[n] = x1[n + kNc] ^ x2[n + kNc];
    return c;
}

Bits gold_scramble(std::span<const std::uint8_t> bits, std::uint32_t seed) {
    const auto c = gold_sequence(seed, bits.size());
    Bits out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) out[i] = (bits[i] ^ c[i]) & 1u;
    return out;
}

std::vector<double> gold_descramble_llr(std::span<const double> llrs, std::uint32_t seed) {
    const auto c = gold_sequence(seed, llrs.size());
    std::vector<double> out(llrs.begin(), llrs.end());
    for (std::size_t i = 0; i < out.size(); ++i)
        if (c[i]) out[i] = -out[i];
    return out;
}

// ---------------------------------------------------------------------------
// CRC

std::uint32_t crc24(std::span<const std::uint8_t> bits, std::uint32_t poly) {
    std::uint32_t reg = 0;
    for (auto b : bits) {
        const std::uint32_t top = ((reg >> 23) & 1u) ^ (b & 1u);
        reg = (reg << 1) & 0xFFFFFFu;
        if (top) reg ^= poly & 0xFFFFFFu;
    }
    return reg;
}

Bits crc_attach(std::span<const std::uint8_t> bits, std::uint32_t poly) {
    Bits out(bits.begin(), bits.end());
    const auto r = crc24(bits, poly);
    for (int i = 23; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((r >> i) & 1u));
    return out;
}

bool crc_check(std::span<const std::uint8_t> bits, std::uint32_t poly) {
    if (bits.size() <= 24) return false;
    const auto body = bits.first(bits.size() - 24);
    const auto r = crc24(body, poly);
    for (int i = 0; i < 24; ++i)
        if (((r >> (23 - i)) & 1u) != (bits[body.size() + static_cast<std::size_t>(i)] & 1u)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Turbo

namespace {

constexpr QppParams kQppTable[] = {
    {40, 3, 10},     {64, 7, 16},     {104, 7, 26},    {128, 15, 32},   {256, 15, 32},
    {512, 31, 64},   {1000, 139, 100}, {1008, 55, 84}, {1024, 31, 64},  {1408, 397, 88},
    {2048, 31, 64},  {2368, 221, 148}, {2752, 177, 344},
};

struct Rsc {
    // state bits: s1 (LSB), s2, s3
    static int feedback(int st, int u) { return u ^ ((st >> 1) & 1) ^ ((st >> 2) & 1); }
    static int parity(int st, int a) { return a ^ (st & 1) ^ ((st >> 2) & 1); }
    static int next(int st, int a) { return (a | (st << 1)) & 7; }
    // Input that drives the register towards zero during termination.
    static int tail_input(int st) { return ((st >> 1) & 1) ^ ((st >> 2) & 1); }
};

void rsc_encode(std::span<const std::uint8_t> in, Bits& parity, Bits& tail) {
    int st = 0;
    parity.resize(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        const int a = Rsc::feedback(st, in[i] & 1);
        parity[i] = static_cast<std::uint8_t>(Rsc::parity(st, a));
        st = Rsc::next(st, a);
    }
    tail.clear();
    for (int t = 0; t < 3; ++t) {
        const int u = Rsc::tail_input(st);
        const int a = Rsc::feedback(st, u);  // == 0
        tail.push_back(static_cast<std::uint8_t>(u));
        tail.push_back(static_cast<std::uint8_t>(Rsc::parity(st, a)));
        st = Rsc::next(st, a);
    }
}

const QppParams* find_qpp(int k) {
    for (const auto& q : kQppTable)
        if (q.k == k) return &q;
    return nullptr;
}

constexpr double kNegInf = -1e300;

// Max-log-MAP for one RSC. sys/par/apriori have length K; tail holds the six
// tail LLRs [x, z] * 3. Returns the a-posteriori LLRs (positive = bit 0).
std::vector<double> max_log_map(std::span<const double> sys, std::span<const double> par,
                                std::span<const double> apriori, std::span<const double> tail) {
    const std::size_t k = sys.size();
    const std::size_t steps = k + 3;
    std::vector<std::array<double, 8>> alpha(steps + 1), beta(steps + 1);
    for (auto& a : alpha) a.fill(kNegInf);
    for (auto& b : beta) b.fill(kNegInf);
    alpha[0][0] = 0.0;
    beta[steps][0] = 0.0;

    // bipolar: bit 0 -> +1
    auto gamma = [&](std::size_t t, int u, int z) {
        double ls, lp;
        if (t < k) {
            ls = sys[t] + apriori[t];
            lp = par[t];
        } else {
            ls = tail[2 * (t - k)];
            lp = tail[2 * (t - k) + 1];
        }
        return 0.5 * (ls * (u ? -1.0 : 1.0) + lp * (z ? -1.0 : 1.0));
    };

    for (std::size_t t = 0; t < steps; ++t) {
        auto& an = alpha[t + 1];
        for (int st = 0; st < 8; ++st) {
            const double a = alpha[t][st];
            if (a <= kNegInf) continue;
            for (int u = 0; u < 2; ++u) {
                if (t >= k && u != Rsc::tail_input(st)) continue;
                const int fb = Rsc::feedback(st, u);
                const int z = Rsc::parity(st, fb);
                const int ns = Rsc::next(st, fb);
                an[ns] = std::max(an[ns], a + gamma(t, u, z));
            }
        }
        const double norm = *std::max_element(an.begin(), an.end());
        for (auto& v : an)
            if (v > kNegInf) v -= norm;
    }
    for (std::size_t t = steps; t-- > 0;) {
        auto& b = beta[t];
        for (int st = 0; st < 8; ++st) {
            for (int u = 0; u < 2; ++u) {
                if (t >= k && u != Rsc::tail_input(st)) continue;
                const int fb = Rsc::feedback(st, u);
                const int z = Rsc::parity(st, fb);
                const int ns = Rsc::next(st, fb);
                const double bn = beta[t + 1][ns];
                if (bn <= kNegInf) continue;
                b[st] = std::max(b[st], bn + gamma(t, u, z));
            }
        }
        const double norm = *std::max_element(b.begin(), b.end());
        for (auto& v : b)
            if (v > kNegInf) v -= norm;
    }

    std::vector<double> app(k);
    for (std::size_t t = 0; t < k; ++t) {
        double best[2] = {kNegInf, kNegInf};
        for (int st = 0; st < 8; ++st) {
            const double a = alpha[t][st];
            if (a <= kNegInf) continue;
            for (int u = 0; u < 2; ++u) {
                const int fb = Rsc::feedback(st, u);
                const int z = Rsc::parity(st, fb);
                const int ns = Rsc::next(st, fb);
                const double bn = beta[t + 1][ns];
                if (bn <= kNegInf) continue;
                best[u] = std::max(best[u], a + gamma(t, u, z) + bn);
            }
        }
        app[t] = best[0] - best[1];
    }
    return app;
}

}  // namespace

std::span<const QppParams> supported_block_sizes() { return kQppTable; }

bool is_supported_block_size(int k) { return find_qpp(k) != nullptr; }

std::vector<int> qpp_interleaver(int k) {
    const auto* q = find_qpp(k);
    require(q != nullptr, ErrorCode::configuration, "unsupported turbo block size " + std::to_string(k));
    std::vector<int> pi(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const auto ii = static_cast<std::int64_t>(i);
        pi[static_cast<std::size_t>(i)] = static_cast<int>((q->f1 * ii + q->f2 * ii % k * ii) % k);
    }
    return pi;
}

Bits turbo_encode(std::span<const std::uint8_t> bits) {
    const int k = static_cast<int>(bits.size());
    const auto pi = qpp_interleaver(k);
    Bits interleaved(bits.size());
    for (int i = 0; i < k; ++i) interleaved[static_cast<std::size_t>(i)] = bits[static_cast<std::size_t>(pi[static_cast<std::size_t>(i)])] & 1u;

    Bits p1, t1, p2, t2;
    rsc_encode(bits, p1, t1);
    rsc_encode(interleaved, p2, t2);

    Bits out;
    out.reserve(static_cast<std::size_t>(turbo_coded_length(k)));
    for (auto b : bits) out.push_back(b & 1u);
    out.insert(out.end(), p1.begin(), p1.end());
    out.insert(out.end(), p2.begin(), p2.end());
    out.insert(out.end(), t1.begin(), t1.end());
    out.insert(out.end(), t2.begin(), t2.end());
    return out;
}

TurboDecodeResult turbo_decode(std::span<const double> llrs, int k, int max_iters,
                               const std::function<bool(const Bits&)>& stop, double extrinsic_scale) {
    require(llrs.size() == static_cast<std::size_t>(turbo_coded_length(k)), ErrorCode::configuration,
            "turbo llr length does not match block size");
    require(max_iters >= 1, ErrorCode::configuration, "turbo needs at least one iteration");
    const auto pi = qpp_interleaver(k);
    const auto uk = static_cast<std::size_t>(k);
    const auto sys = llrs.subspan(0, uk);
    const auto par1 = llrs.subspan(uk, uk);
    const auto par2 = llrs.subspan(2 * uk, uk);
    const auto tail1 = llrs.subspan(3 * uk, 6);
    const auto tail2 = llrs.subspan(3 * uk + 6, 6);

    std::vector<double> sys_i(uk);
    for (std::size_t i = 0; i < uk; ++i) sys_i[i] = sys[static_cast<std::size_t>(pi[i])];

    std::vector<double> la1(uk, 0.0), la2(uk, 0.0), le1(uk), le2(uk);
    TurboDecodeResult res;
    res.bits.assign(uk, 0);
    for (int it = 1; it <= max_iters; ++it) {
        const auto app1 = max_log_map(sys, par1, la1, tail1);
        for (std::size_t i = 0; i < uk; ++i) le1[i] = extrinsic_scale * (app1[i] - sys[i] - la1[i]);
        for (std::size_t i = 0; i < uk; ++i) la2[i] = le1[static_cast<std::size_t>(pi[i])];

        const auto app2 = max_log_map(sys_i, par2, la2, tail2);
        for (std::size_t i = 0; i < uk; ++i) le2[i] = extrinsic_scale * (app2[i] - sys_i[i] - la2[i]);
        for (std::size_t i = 0; i < uk; ++i) la1[static_cast<std::size_t>(pi[i])] = le2[i];

        for (std::size_t i = 0; i < uk; ++i)
            res.bits[static_cast<std::size_t>(pi[i])] = app2[i] < 0.0 ? 1 : 0;
        res.iterations = it;
        if (stop && stop(res.bits)) {
            res.early_exit = true;
            break;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Config / payload

void CodecConfig::validate() const {
    require(is_supported_block_size(block_size), ErrorCode::configuration,
            "unsupported turbo block size " + std::to_string(block_size));
    require(block_size > 24, ErrorCode::configuration, "block must exceed the CRC length");
    require(max_iterations >= 1, ErrorCode::configuration, "max_iterations must be >= 1");
    require(scrambler_seed < (1u << 31), ErrorCode::configuration, "scrambler seed is 31 bits");
}

std::int32_t degrees_to_fixed(double deg) { return static_cast<std::int32_t>(std::llround(deg * 1e7)); }

double fixed_to_degrees(std::int32_t v) { return static_cast<double>(v) / 1e7; }

namespace {

void put_bytes(Bits& out, std::uint64_t value, int nbytes) {
    for (int i = nbytes * 8 - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((value >> i) & 1u));
}

std::uint64_t get_bytes(std::span<const std::uint8_t> bits, std::size_t& pos, int nbytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < nbytes * 8; ++i) v = (v << 1) | (bits[pos++] & 1u);
    return v;
}

constexpr std::string_view kSerialPrefixes[] = {
    "0AS", "1WN", "08Q", "3N3", "1SS", "1ZN", "5YS", "1BL", "3QF", "4GT",
};

}  // namespace

std::span<const std::string_view> known_serial_prefixes() { return kSerialPrefixes; }

Bits encode_payload(const Payload& p, int total_bits) {
    require(static_cast<std::size_t>(total_bits) >= kPayloadWireBytes * 8, ErrorCode::configuration,
            "block too small for the payload schema");
    require(p.serial.size() <= 16, ErrorCode::configuration, "serial longer than 16 characters");
    require(std::abs(p.lat_deg) <= 90.0 && std::abs(p.lon_deg) <= 180.0, ErrorCode::configuration,
            "latitude/longitude out of range");
    Bits out;
    out.reserve(static_cast<std::size_t>(total_bits));
    put_bytes(out, p.version, 1);
    for (std::size_t i = 0; i < 16; ++i)
        put_bytes(out, i < p.serial.size() ? static_cast<unsigned char>(p.serial[i]) : 0u, 1);
    put_bytes(out, static_cast<std::uint32_t>(degrees_to_fixed(p.lat_deg)), 4);
    put_bytes(out, static_cast<std::uint32_t>(degrees_to_fixed(p.lon_deg)), 4);
    put_bytes(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(std::llround(p.altitude_m * 100.0))), 4);
    const auto speed = std::clamp<long long>(std::llround(p.speed_mps * 100.0), -32768, 32767);
    put_bytes(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(speed)), 2);
    for (auto b : p.uuid) put_bytes(out, b, 1);
    out.resize(static_cast<std::size_t>(total_bits), 0);
    return out;
}

DecodedPayload parse_payload(std::span<const std::uint8_t> block, std::uint32_t poly) {
    require(block.size() >= kPayloadWireBytes * 8 + 24, ErrorCode::parse_failed, "block shorter than payload schema");
    require(crc_check(block, poly), ErrorCode::parse_failed, "crc check failed; payload refused");

    DecodedPayload d;
    d.crc_ok = true;
    d.raw_bits.assign(block.begin(), block.end());
    std::size_t pos = 0;
    auto& f = d.fields;
    f.version = static_cast<std::uint8_t>(get_bytes(block, pos, 1));
    std::string serial;
    bool ended = false;
    for (int i = 0; i < 16; ++i) {
        const auto c = static_cast<unsigned char>(get_bytes(block, pos, 1));
        if (c == 0) {
            ended = true;
            continue;
        }
        require(!ended && c >= 0x20 && c < 0x7f, ErrorCode::parse_failed, "serial holds non-printable bytes");
        serial.push_back(static_cast<char>(c));
    }
    f.serial = serial;
    f.lat_deg = fixed_to_degrees(static_cast<std::int32_t>(get_bytes(block, pos, 4)));
    f.lon_deg = fixed_to_degrees(static_cast<std::int32_t>(get_bytes(block, pos, 4)));
    require(std::abs(f.lat_deg) <= 90.0 && std::abs(f.lon_deg) <= 180.0, ErrorCode::parse_failed,
            "latitude/longitude out of range");
    f.altitude_m = static_cast<std::int32_t>(get_bytes(block, pos, 4)) / 100.0;
    f.speed_mps = static_cast<std::int16_t>(get_bytes(block, pos, 2)) / 100.0;
    for (auto& b : f.uuid) b = static_cast<std::uint8_t>(get_bytes(block, pos, 1));

    const std::string_view prefix = std::string_view(f.serial).substr(0, 3);
    d.serial_prefix_known = std::find(std::begin(kSerialPrefixes), std::end(kSerialPrefixes), prefix) !=
                            std::end(kSerialPrefixes);
    return d;
}

Bits encode_block(std::span<const std::uint8_t> payload_bits, const CodecConfig& cfg, int capacity) {
    cfg.validate();
    require(static_cast<int>(payload_bits.size()) == cfg.payload_bits(), ErrorCode::configuration,
            "payload has " + std::to_string(payload_bits.size()) + " bits, block expects " +
                std::to_string(cfg.payload_bits()));
    require(turbo_coded_length(cfg.block_size) <= capacity, ErrorCode::configuration,
            "coded block does not fit the frame");
    const auto block = crc_attach(payload_bits, cfg.crc_poly);
    auto coded = turbo_encode(block);
    coded.resize(static_cast<std::size_t>(capacity), 0);
    return cfg.scramble ? gold_scramble(coded, cfg.scrambler_seed) : coded;
}

BlockDecodeResult decode_block(std::span<const double> llrs, const CodecConfig& cfg) {
    cfg.validate();
    const auto coded_len = static_cast<std::size_t>(turbo_coded_length(cfg.block_size));
    require(llrs.size() >= coded_len, ErrorCode::configuration, "too few soft values for the block");
    std::vector<double> soft = cfg.scramble ? gold_descramble_llr(llrs, cfg.scrambler_seed)
                                            : std::vector<double>(llrs.begin(), llrs.end());
    soft.resize(coded_len);
    const auto poly = cfg.crc_poly;
    auto r = turbo_decode(soft, cfg.block_size, cfg.max_iterations,
                          [poly](const Bits& b) { return crc_check(b, poly); });
    BlockDecodeResult out;
    out.crc_ok = crc_check(r.bits, poly);
    out.block = std::move(r.bits);
    out.iterations = r.iterations;
    return out;
}

}  // namespace dronerid::codec
