#include <doctest.h>

#include "dronerid/dsp.hpp"
#include "dronerid/filter_bank.hpp"
#include "support.hpp"

using namespace dronerid;

namespace {

double mag_db(const FilterBank& b, double f) { return 20.0 * std::log10(std::abs(bank_response(b, f)) + 1e-300); }

ComplexVec tone(std::size_t n, double f, double fs, double amp = 1.0) {
    ComplexVec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::polar(amp, 2.0 * kPi * f * static_cast<double>(i) / fs);
    return x;
}

}  // namespace

TEST_CASE("single band response meets the mask") {
    FreqPrior p{{0.0}, 15.36e6};
    const auto b = design_filter_bank(p, 100e6);
    CHECK(b.length() % 2 == 1);
    CHECK(b.length() <= kMaxFilterLength);
    const double edge = 15.36e6 / 2.0 + 1e6;
    CHECK(mag_db(b, edge) <= -60.0);
    CHECK(mag_db(b, -edge) <= -60.0);
    for (double f = edge; f < 50e6; f += 0.25e6) CHECK(mag_db(b, f) <= -60.0);
    for (double f = -0.9 * 7.68e6; f <= 0.9 * 7.68e6; f += 0.1e6) CHECK(mag_db(b, f) >= -1.0);
}

TEST_CASE("tone between adjacent bands is attenuated by 60 dB") {
    FreqPrior p{{-10e6, 10e6}, 15.36e6};
    const auto b = design_filter_bank(p, 100e6, 60.0, 1e6);
    // Bands end at +-2.32 MHz; the gap centre is 0 Hz but lies 2.32 MHz inside
    // each band's transition, so probe out past both stop edges instead.
    const double f = 10e6 + 15.36e6 / 2.0 + 1.5e6;
    const auto x = tone(40000, f, 100e6);
    const auto y = apply_filter_bank(ComplexSignal(x, 100e6), b);
    const double in = mean_power(std::span<const Complex>(x).subspan(2000, 36000));
    const double out = mean_power(y.samples().subspan(2000, 36000));
    CHECK(dsp::lin_to_db(out / in) <= -60.0);
}

TEST_CASE("frame survives and an out-of-band tone is removed") {
    FrameSpec s;
    const double fs = 100e6;
    FreqPrior p{{-20e6}, 15.36e6};
    const auto b = design_filter_bank(p, fs);
    auto cap = testsupport::one_frame_capture(s, fs, 200.0, 3, 2000, -20e6, 2000);
    const auto frame_only = apply_filter_bank(cap.signal, b);
    auto x = cap.signal.vec();
    const auto t = tone(x.size(), 25e6, fs, 10.0);  // +20 dB over the frame
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += t[i];
    const auto y = apply_filter_bank(ComplexSignal(x, fs), b);
    const auto f0 = static_cast<std::size_t>(cap.frames[0].start_sample);
    const auto len = static_cast<std::size_t>(cap.frames[0].box.duration_s() * fs);
    const double p_in = mean_power(cap.signal.samples().subspan(f0, len));
    const double p_out = mean_power(y.samples().subspan(f0, len));
    CHECK(std::abs(dsp::lin_to_db(p_out / p_in)) <= 1.0);
    double resid = 0.0;
    for (std::size_t i = f0; i < f0 + len; ++i) resid += std::norm(y[i] - frame_only[i]);
    CHECK(dsp::lin_to_db(resid / static_cast<double>(len) / 100.0) <= -60.0);
}

TEST_CASE("silence in, silence out") {
    const auto b = preset_filter_bank("2g4_100m");
    const auto y = apply_filter_bank(ComplexSignal(ComplexVec(5000), b.sample_rate_hz), b);
    CHECK(std::all_of(y.samples().begin(), y.samples().end(), [](const Complex& c) { return c == Complex{}; }));
}

TEST_CASE("band-stop is the complement of the bank") {
    const auto b = preset_filter_bank("2g4_100m");
    const auto n = testsupport::white_noise(8000, 1.0, 4);
    const ComplexSignal x(n, b.sample_rate_hz);
    const auto pass = apply_filter_bank(x, b);
    const auto stop = apply_band_stop(x, b);
    for (std::size_t i = 0; i < n.size(); i += 37) CHECK(std::abs(pass[i] + stop[i] - n[i]) < 1e-9);
}

TEST_CASE("design rejects bad priors") {
    CHECK_THROWS_AS(design_filter_bank(FreqPrior{{}, 15.36e6}, 100e6), Error);
    CHECK_THROWS_AS(design_filter_bank(FreqPrior{{45e6}, 15.36e6}, 100e6), Error);
    CHECK_THROWS_AS(design_filter_bank(FreqPrior{{0.0}, 15.36e6}, 100e6, 120.0, 0.05e6), Error);
}

TEST_CASE("filter bank json round trip is exact") {
    const auto b = preset_filter_bank("2g4_100m");
    const auto path = testsupport::temp_path("bank.json");
    save_filter_bank(b, path);
    const auto c = load_filter_bank(path);
    CHECK(c.prior.freq_set_hz == b.prior.freq_set_hz);
    CHECK(c.sample_rate_hz == b.sample_rate_hz);
    CHECK(c.taps == b.taps);
}

TEST_CASE("presets and nearest band") {
    for (const auto& n : filter_bank_preset_names()) {
        double fs = 0.0;
        const auto p = preset_prior(n, &fs);
        CHECK(fs > 0.0);
        CHECK_NOTHROW(p.validate(fs));
    }
    CHECK_THROWS_AS(preset_prior("nope"), Error);
    FreqPrior p{{-20e6, 0.0, 20e6}, 15.36e6};
    CHECK(p.nearest(-13e6) == 0);
    CHECK(p.nearest(9e6) == 1);
    CHECK(p.bands()[2].first == doctest::Approx(20e6 - 7.68e6));
}

TEST_CASE("base64 round trip") {
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 100u}) {
        std::vector<unsigned char> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<unsigned char>(i * 37 + 11);
        CHECK(base64_decode(base64_encode(v)) == v);
    }
    CHECK(base64_encode({'M', 'a', 'n'}) == "TWFu");
}
