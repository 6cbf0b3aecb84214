#include <doctest.h>

#include "dronerid/dsp.hpp"
#include "dronerid/iq_file.hpp"
#include "dronerid/synth.hpp"
#include "dronerid/tf_analysis.hpp"
#include "support.hpp"

using namespace dronerid;

TEST_CASE("frame length and duration follow the numerology") {
    FrameSpec s;
    CHECK(s.frame_length() == 8 * (1024 + 72) + 8);
    CHECK(s.duration_s() * 1e6 == doctest::Approx(571.35).epsilon(1e-3));
    s.num_symbols = 9;
    CHECK(s.duration_s() * 1e6 == doctest::Approx(642.7).epsilon(1e-3));
    CHECK(FrameSpec{}.symbol_start(1) == 1024 + 80);
    CHECK(FrameSpec{}.data_symbol_indices() == std::vector<int>{0, 1, 2, 4, 6, 7});
}

TEST_CASE("synthesized frame has unit rms and the frame length") {
    FrameSpec s;
    const auto f = synth_broadcast_frame(s, testsupport::payload_bits(1));
    CHECK(f.size() == static_cast<std::size_t>(s.frame_length()));
    CHECK(mean_power(f.samples()) == doctest::Approx(1.0));
    CHECK(f.sample_rate_hz() == 15.36e6);
    CHECK_THROWS_AS(synth_broadcast_frame(s, Bits(10, 0)), Error);
}

TEST_CASE("cp of every symbol copies the symbol tail") {
    FrameSpec s;
    const auto f = synth_broadcast_frame(s, testsupport::payload_bits(2));
    for (int m = 0; m < s.num_symbols; ++m) {
        const int st = s.symbol_start(m), cp = s.cp_length(m);
        for (int k = 0; k < cp; ++k)
            CHECK(std::abs(f[static_cast<std::size_t>(st + k)] - f[static_cast<std::size_t>(st + k + s.fft_size)]) < 1e-12);
    }
}

TEST_CASE("all-zero payload without scrambling gives constant modulation") {
    FrameSpec s;
    FrameOptions o;
    o.codec.scramble = false;
    const auto grid = frame_grid(s, Bits(static_cast<std::size_t>(o.codec.payload_bits()), 0), o);
    for (int m : s.data_symbol_indices()) {
        const auto& row = grid[static_cast<std::size_t>(m)];
        for (const auto& v : row) CHECK(std::abs(v - qpsk_map(0, 0)) < 1e-12);
    }
    // Time-domain check: per-symbol spectrum magnitude is flat over the used carriers.
    const auto f = synth_broadcast_frame(s, Bits(static_cast<std::size_t>(o.codec.payload_bits()), 0), o);
    const auto body = s.symbol_body_start(0);
    const auto X = dsp::fft(std::span<const Complex>(f.vec()).subspan(static_cast<std::size_t>(body), 1024));
    const double ref = std::abs(X[static_cast<std::size_t>(subcarrier_bin(1, 1024))]);
    for (int k = -300; k <= 300; ++k)
        if (k != 0) CHECK(std::abs(X[static_cast<std::size_t>(subcarrier_bin(k, 1024))]) == doctest::Approx(ref));
}

TEST_CASE("zc symbols carry the zc sequence on the used carriers") {
    FrameSpec s;
    const auto v = zc_subcarrier_values(s, 600);
    REQUIRE(v.size() == 601);
    CHECK(v[300] == Complex{});  // DC
    const auto z = gen_zc(600, 601);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (i != 300) CHECK(v[i] == z[i]);
}

TEST_CASE("qpsk mapping") {
    CHECK(std::abs(qpsk_map(0, 0) - Complex(1, 1) / std::sqrt(2.0)) < 1e-15);
    CHECK(std::abs(qpsk_map(1, 0) - Complex(-1, 1) / std::sqrt(2.0)) < 1e-15);
    CHECK(std::abs(qpsk_map(1, 1) - Complex(-1, -1) / std::sqrt(2.0)) < 1e-15);
}

TEST_CASE("zero-power interference is silent") {
    for (auto k : {InterferenceKind::fhss_burst, InterferenceKind::ofdm_video, InterferenceKind::narrowband_packet}) {
        InterferenceParams p;
        p.power = 0.0;
        const auto x = synth_interference(k, p, 3);
        CHECK(std::all_of(x.samples().begin(), x.samples().end(), [](const Complex& c) { return c == Complex{}; }));
    }
}

TEST_CASE("interference has the requested power and band") {
    InterferenceParams p;
    p.power = 4.0;
    p.bandwidth_hz = 2e6;
    p.center_offset_hz = 10e6;
    const auto x = synth_interference(InterferenceKind::fhss_burst, p, 8);
    CHECK(x.size() == 100000);
    CHECK(mean_power(x.samples()) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("channel at vanishing noise is the identity") {
    const auto f = synth_broadcast_frame(FrameSpec{}, testsupport::payload_bits(3));
    ChannelParams ch;
    ch.snr_db = 100.0;
    const auto y = apply_channel(f, ch);
    REQUIRE(y.size() == f.size());
    double err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) err += std::norm(y[i] - f[i]);
    CHECK(std::sqrt(err / static_cast<double>(f.size())) / rms(f.samples()) < 1e-4);
}

TEST_CASE("channel delay shows as the correlation lag") {
    const auto f = synth_broadcast_frame(FrameSpec{}, testsupport::payload_bits(4));
    ChannelParams ch;
    ch.delay_samples = 137;
    const auto y = apply_channel(f, ch);
    CHECK(y.size() == f.size() + 137);
    const auto c = dsp::cross_correlate_abs(y.vec(), std::span<const Complex>(f.vec()).first(2000));
    CHECK(dsp::argmax_index(c) == 137);
}

TEST_CASE("awgn at 0 dB gives 0 dB in-band snr over the occupied band") {
    const double fs = 15.36e6;
    FrameSpec s;
    const auto f = synth_broadcast_frame(s, testsupport::payload_bits(5));
    double sig_acc = 0.0, noise_acc = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        ChannelParams ch;
        ch.snr_db = 0.0;
        ch.rng_seed = seed;
        ch.occupied_bw_hz = s.occupied_bandwidth_hz();
        const auto y = apply_channel(f, ch);
        ComplexVec n(y.size());
        for (std::size_t i = 0; i < n.size(); ++i) n[i] = y[i] - f[i];
        // In-band noise: fraction of bins inside the occupied band.
        const auto N = dsp::fft(n);
        double in = 0.0, all = 0.0;
        for (std::size_t k = 0; k < N.size(); ++k) {
            const double fk = (k < N.size() / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(N.size())) *
                              fs / static_cast<double>(N.size());
            all += std::norm(N[k]);
            if (std::abs(fk) <= s.occupied_bandwidth_hz() / 2.0) in += std::norm(N[k]);
        }
        noise_acc += mean_power(n) * in / all;
        sig_acc += mean_power(f.samples());
    }
    CHECK(std::abs(dsp::lin_to_db(sig_acc / noise_acc)) <= 0.2);
}

TEST_CASE("noise kinds have the requested mean power") {
    for (auto k : {NoiseKind::awgn, NoiseKind::rayleigh, NoiseKind::gamma, NoiseKind::impulse}) {
        const auto n = make_noise(k, 200000, 2.5, 11);
        CHECK_MESSAGE(mean_power(n) == doctest::Approx(2.5).epsilon(0.05), to_string(k));
        CHECK(parse_noise_kind(to_string(k)) == k);
    }
    CHECK_THROWS_AS(parse_noise_kind("pink"), Error);
}

TEST_CASE("noise is reproducible from its seed") {
    CHECK(make_noise(NoiseKind::gamma, 1000, 1.0, 5) == make_noise(NoiseKind::gamma, 1000, 1.0, 5));
    CHECK(make_noise(NoiseKind::gamma, 1000, 1.0, 5) != make_noise(NoiseKind::gamma, 1000, 1.0, 6));
}

TEST_CASE("capture truth box spans the frame") {
    FrameSpec s;
    const double fs = s.sample_rate_hz();
    auto ev = make_frame_event(s, testsupport::payload_bits(6), fs, 0, 0.0);
    const auto cap = compose_capture({ev}, static_cast<std::size_t>(s.frame_length()) + 100, fs, ChannelParams{});
    REQUIRE(cap.frames.size() == 1);
    const auto b = cap.truth_boxes()[0];
    CHECK(b.t_min_s == 0.0);
    CHECK(b.t_max_s == doctest::Approx(s.duration_s()));
    CHECK(b.f_min_hz == doctest::Approx(-fs / 2.0));
    CHECK(b.f_max_hz == doctest::Approx(fs / 2.0));
}

TEST_CASE("capture without events is pure noise") {
    const auto cap = compose_capture({}, 5000, 100e6, ChannelParams{});
    CHECK(cap.truth_boxes().empty());
    CHECK(cap.signal.size() == 5000);
}

TEST_CASE("events outside the capture are rejected") {
    FrameSpec s;
    auto ev = make_frame_event(s, testsupport::payload_bits(6), 100e6, 1000, 45e6);
    CHECK_THROWS_AS(compose_capture({ev}, 100000, 100e6, ChannelParams{}), Error);
}

TEST_CASE("burst over a frame dominates its time span") {
    FrameSpec s;
    const double fs = 100e6;
    auto fr = make_frame_event(s, testsupport::payload_bits(7), fs, 20000, 0.0);
    InterferenceParams p;
    p.duration_s = 0.5e-3;
    p.bandwidth_hz = 2e6;
    p.power = 10.0;
    CaptureEvent burst{synth_interference(InterferenceKind::fhss_burst, p, 1), 22000, 0.0, false, 0, 0, {}};
    ChannelParams ch;
    ch.snr_db = 10.0;
    const auto cap = compose_capture({fr, burst}, 100000, fs, ch);
    const auto x = cap.signal.samples();
    const double in_burst = mean_power(x.subspan(22000, 50000));
    const double frame_only = mean_power(x.subspan(73000, 4000));
    CHECK(in_burst > 5.0 * frame_only);
}

TEST_CASE("cf32 files round trip with their sidecar") {
    const auto cap = testsupport::one_frame_capture(FrameSpec{}, 100e6, 10.0, 9);
    const auto path = testsupport::temp_path("cap.cf32");
    write_cf32(cap.signal, path);
    const auto back = read_cf32(path);
    CHECK(back.sample_rate_hz() == 100e6);
    REQUIRE(back.size() == cap.signal.size());
    for (std::size_t i = 0; i < back.size(); i += 101)
        CHECK(std::abs(back[i] - cap.signal[i]) < 1e-5 * (1.0 + std::abs(cap.signal[i])));
    CHECK(sidecar_path(path) == path + ".json");
    std::filesystem::remove(sidecar_path(path));
    CHECK_THROWS_AS(read_cf32(path), Error);
    CHECK(read_cf32(path, 1e6).sample_rate_hz() == 1e6);
}
