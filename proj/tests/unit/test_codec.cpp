#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "dronerid/codec.hpp"
#include "dronerid/synth.hpp"

using namespace dronerid;
using namespace dronerid::codec;

namespace {

Bits random_bits(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Bits b(n);
    for (auto& v : b) v = static_cast<std::uint8_t>(rng() & 1u);
    return b;
}

Bits bits_of(const char* s) {
    Bits b;
    for (; *s; ++s) b.push_back(static_cast<std::uint8_t>(*s - '0'));
    return b;
}

std::vector<double> bpsk_llrs(const Bits& coded, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma);
    std::vector<double> l(coded.size());
    for (std::size_t i = 0; i < coded.size(); ++i) {
        const double y = (coded[i] ? -1.0 : 1.0) + n(rng);
        l[i] = 2.0 * y / (sigma * sigma);
    }
    return l;
}

}  // namespace

TEST_CASE("gold stream first bits match an independent LFSR simulation") {
    // Seed 1 and the default seed, 16 bits after the 1600-sample advance.
    CHECK(gold_sequence(0x0001, 16) == bits_of("0000001010000011"));
    CHECK(gold_sequence(kDefaultScramblerSeed, 16) == bits_of("1101001011100001"));
}

TEST_CASE("gold scrambling is an involution and scrambles zeros into the stream") {
    for (std::uint32_t seed : {1u, 77u, kDefaultScramblerSeed, 0x7fffffffu}) {
        const auto b = random_bits(3000, seed);
        CHECK(gold_descramble(gold_scramble(b, seed), seed) == b);
        CHECK(gold_scramble(Bits(500, 0), seed) == gold_sequence(seed, 500));
    }
}

TEST_CASE("soft descrambling flips signs where the stream is one") {
    const auto c = gold_sequence(5, 64);
    std::vector<double> l(64, 1.5);
    const auto d = gold_descramble_llr(l, 5);
    for (std::size_t i = 0; i < 64; ++i) CHECK(d[i] == (c[i] ? -1.5 : 1.5));
}

TEST_CASE("crc24 of a fixed word equals the long-division value") {
    Bits w;
    for (int i = 31; i >= 0; --i) w.push_back(static_cast<std::uint8_t>((0xDEADBEEFu >> i) & 1u));
    CHECK(crc24(w) == 0x6432C5u);
}

TEST_CASE("crc check accepts attached blocks and rejects any single flip") {
    const auto msg = random_bits(200, 3);
    auto blk = crc_attach(msg);
    REQUIRE(blk.size() == 224);
    CHECK(crc_check(blk));
    for (std::size_t i = 0; i < blk.size(); ++i) {
        blk[i] ^= 1u;
        CHECK_FALSE(crc_check(blk));
        blk[i] ^= 1u;
    }
}

TEST_CASE("qpp interleaver is a permutation for every supported size") {
    for (const auto& p : supported_block_sizes()) {
        auto pi = qpp_interleaver(p.k);
        std::sort(pi.begin(), pi.end());
        bool ok = true;
        for (int i = 0; i < p.k; ++i) ok = ok && pi[i] == i;
        CHECK_MESSAGE(ok, "K=" << p.k);
    }
    CHECK(is_supported_block_size(1408));
    CHECK(is_supported_block_size(1000));
    CHECK_FALSE(is_supported_block_size(1001));
}

TEST_CASE("turbo encoder from the zero state maps zeros to zeros") {
    const auto c = turbo_encode(Bits(1408, 0));
    REQUIRE(c.size() == static_cast<std::size_t>(turbo_coded_length(1408)));
    CHECK(std::all_of(c.begin(), c.end(), [](std::uint8_t v) { return v == 0; }));
}

TEST_CASE("turbo systematic part is the input") {
    const auto b = random_bits(512, 9);
    const auto c = turbo_encode(b);
    CHECK(Bits(c.begin(), c.begin() + 512) == b);
}

TEST_CASE("noiseless turbo round trip is exact after one iteration") {
    for (int k : {40, 1000, 1408}) {
        const auto b = random_bits(static_cast<std::size_t>(k), static_cast<std::uint64_t>(k));
        const auto c = turbo_encode(b);
        std::vector<double> l(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) l[i] = c[i] ? -20.0 : 20.0;
        const auto r = turbo_decode(l, k, 8, [&](const Bits& h) { return h == b; });
        CHECK(r.bits == b);
        CHECK(r.iterations == 1);
    }
}

TEST_CASE("turbo decoding corrects channel errors at moderate noise") {
    const int k = 1000;
    const double rate = static_cast<double>(k) / turbo_coded_length(k);
    const double sigma = std::sqrt(1.0 / (2.0 * rate * std::pow(10.0, 0.3)));  // Eb/N0 = 3 dB
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto b = random_bits(k, 100 + s);
        const auto l = bpsk_llrs(turbo_encode(b), sigma, 200 + s);
        CHECK(turbo_decode(l, k, 8).bits == b);
    }
}

TEST_CASE("fixed-point coordinates use 1e-7 degree units") {
    CHECK(degrees_to_fixed(30.2741497) == 302741497);
    CHECK(degrees_to_fixed(-120.0) == -1200000000);
    CHECK(fixed_to_degrees(302741497) == doctest::Approx(30.2741497).epsilon(1e-12));
}

TEST_CASE("payload survives encode, crc and parse") {
    CodecConfig cfg;
    for (std::uint64_t s = 1; s <= 20; ++s) {
        const auto p = random_payload(s);
        const auto bits = encode_payload(p, cfg.payload_bits());
        REQUIRE(bits.size() == static_cast<std::size_t>(cfg.payload_bits()));
        const auto d = parse_payload(crc_attach(bits));
        CHECK(d.crc_ok);
        CHECK(d.serial_prefix_known);
        CHECK(d.fields == p);
    }
}

TEST_CASE("unknown serial prefix is flagged but still parsed") {
    Payload p = random_payload(4);
    p.serial = "ZZZ0000000";
    const auto d = parse_payload(crc_attach(encode_payload(p, CodecConfig{}.payload_bits())));
    CHECK_FALSE(d.serial_prefix_known);
    CHECK(d.fields.serial == "ZZZ0000000");
}

TEST_CASE("payload parse refuses a failed crc") {
    auto blk = crc_attach(encode_payload(random_payload(2), CodecConfig{}.payload_bits()));
    blk[10] ^= 1u;
    CHECK_THROWS_AS(parse_payload(blk), Error);
}

TEST_CASE("block chain loops back through hard channel values") {
    CodecConfig cfg;
    const int cap = FrameSpec{}.data_bits_capacity();
    const auto pb = encode_payload(random_payload(8), cfg.payload_bits());
    const auto tx = encode_block(pb, cfg, cap);
    REQUIRE(tx.size() == static_cast<std::size_t>(cap));
    std::vector<double> l(tx.size());
    for (std::size_t i = 0; i < tx.size(); ++i) l[i] = tx[i] ? -8.0 : 8.0;
    const auto r = decode_block(l, cfg);
    CHECK(r.crc_ok);
    CHECK(Bits(r.block.begin(), r.block.end() - 24) == pb);
}

TEST_CASE("codec config rejects unsupported block sizes") {
    CodecConfig cfg;
    cfg.block_size = 1001;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
