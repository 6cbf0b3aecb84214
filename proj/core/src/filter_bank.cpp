#include "dronerid/filter_bank.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dronerid/dsp.hpp"

namespace dronerid {

std::vector<std::pair<double, double>> FreqPrior::bands() const {
    std::vector<std::pair<double, double>> out;
    out.reserve(freq_set_hz.size());
    for (double f : freq_set_hz) out.emplace_back(f - bandwidth_hz / 2.0, f + bandwidth_hz / 2.0);
    return out;
}

std::size_t FreqPrior::nearest(double f_hz) const {
    require(!freq_set_hz.empty(), ErrorCode::configuration, "empty frequency set");
    std::size_t best = 0;
    for (std::size_t i = 1; i < freq_set_hz.size(); ++i)
        if (std::abs(freq_set_hz[i] - f_hz) < std::abs(freq_set_hz[best] - f_hz)) best = i;
    return best;
}

void FreqPrior::validate(double fs) const {
    require(!freq_set_hz.empty(), ErrorCode::configuration, "empty frequency set");
    require(bandwidth_hz > 0.0, ErrorCode::configuration, "bandwidth must be positive");
    for (double f : freq_set_hz)
        require(std::abs(f) + bandwidth_hz / 2.0 <= fs / 2.0 + 1e-6, ErrorCode::configuration,
                "band outside the capture bandwidth");
}

ComplexVec FilterBank::composite_taps() const {
    const std::size_t len = length();
    const double d = static_cast<double>(delay());
    ComplexVec h(len, Complex{});
    for (std::size_t b = 0; b < taps.size(); ++b) {
        const double w = 2.0 * kPi * prior.freq_set_hz[b] / sample_rate_hz;
        for (std::size_t k = 0; k < len; ++k)
            h[k] += taps[b][k] * std::polar(1.0, w * (static_cast<double>(k) - d));
    }
    return h;
}

FilterBank design_filter_bank(const FreqPrior& prior, double fs, double stopband_db, double transition_hz,
                              std::size_t max_length) {
    const auto err = ErrorCode::design_failed;
    require(!prior.freq_set_hz.empty(), err, "empty frequency set");
    require(fs > 0.0 && stopband_db > 0.0 && transition_hz > 0.0, err, "design parameters must be positive");
    require(prior.bandwidth_hz > 0.0, err, "bandwidth must be positive");
    for (double f : prior.freq_set_hz)
        require(std::abs(f) + prior.bandwidth_hz / 2.0 <= fs / 2.0 + 1e-6, err, "band outside the capture bandwidth");
    auto sorted = prior.freq_set_hz;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i)
        require(sorted[i] - sorted[i - 1] >= prior.bandwidth_hz + 2.0 * transition_hz - 1e-6, err,
                "bands overlap once transition margins are added");

    const std::size_t len = dsp::kaiser_length(stopband_db, transition_hz, fs);
    require(len <= max_length, err,
            "transition too narrow: needs " + std::to_string(len) + " taps, limit " + std::to_string(max_length));
    const double cutoff = (prior.bandwidth_hz / 2.0 + transition_hz / 2.0) / fs;
    require(cutoff < 0.5, err, "cutoff beyond Nyquist");
    const auto proto = dsp::design_lowpass(len, cutoff, dsp::kaiser_beta(stopband_db));

    FilterBank bank;
    bank.prior = prior;
    bank.sample_rate_hz = fs;
    bank.stopband_db = stopband_db;
    bank.transition_hz = transition_hz;
    bank.taps.assign(prior.freq_set_hz.size(), proto);
    return bank;
}

namespace {

void check_rate(const ComplexSignal& sig, const FilterBank& bank) {
    require(!bank.taps.empty(), ErrorCode::configuration, "filter bank has no bands");
    require(std::abs(sig.sample_rate_hz() - bank.sample_rate_hz) <= 1e-6 * bank.sample_rate_hz,
            ErrorCode::configuration, "filter bank designed for a different sample rate");
}

}  // namespace

ComplexSignal apply_filter_bank(const ComplexSignal& sig, const FilterBank& bank) {
    check_rate(sig, bank);
    const auto h = bank.composite_taps();
    return ComplexSignal(dsp::filter_centered(sig.samples(), h), sig.sample_rate_hz(), sig.center_freq_hz());
}

ComplexSignal apply_band_stop(const ComplexSignal& sig, const FilterBank& bank) {
    auto bp = apply_filter_bank(sig, bank);
    ComplexVec out(sig.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sig[i] - bp[i];
    return ComplexSignal(std::move(out), sig.sample_rate_hz(), sig.center_freq_hz());
}

Complex bank_response(const FilterBank& bank, double f_hz) {
    const auto h = bank.composite_taps();
    const double d = static_cast<double>(bank.delay());
    const double w = 2.0 * kPi * f_hz / bank.sample_rate_hz;
    Complex acc{};
    for (std::size_t k = 0; k < h.size(); ++k) acc += h[k] * std::polar(1.0, -w * (static_cast<double>(k) - d));
    return acc;
}

namespace {

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string base64_encode(const std::vector<unsigned char>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        std::uint32_t v = static_cast<std::uint32_t>(bytes[i]) << 16;
        if (i + 1 < bytes.size()) v |= static_cast<std::uint32_t>(bytes[i + 1]) << 8;
        if (i + 2 < bytes.size()) v |= bytes[i + 2];
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(i + 1 < bytes.size() ? kB64[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < bytes.size() ? kB64[v & 63] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    std::array<int, 256> rev{};
    rev.fill(-1);
    for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kB64[i])] = i;
    require(text.size() % 4 == 0, ErrorCode::parse_failed, "base64 length not a multiple of 4");
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        std::uint32_t v = 0;
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=') {
                require(i + 4 == text.size() && j >= 2, ErrorCode::parse_failed, "misplaced base64 padding");
                ++pad;
                v <<= 6;
                continue;
            }
            const int d = rev[static_cast<unsigned char>(c)];
            require(d >= 0 && pad == 0, ErrorCode::parse_failed, "invalid base64 character");
            v = (v << 6) | static_cast<std::uint32_t>(d);
        }
        out.push_back(static_cast<unsigned char>(v >> 16));
        if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 0xffu));
        if (pad < 1) out.push_back(static_cast<unsigned char>(v & 0xffu));
    }
    return out;
}

namespace {

std::string encode_taps(const std::vector<double>& taps) {
    std::vector<unsigned char> bytes(taps.size() * 8);
    for (std::size_t i = 0; i < taps.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &taps[i], 8);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xffu);
    }
    return base64_encode(bytes);
}

std::vector<double> decode_taps(const std::string& text) {
    const auto bytes = base64_decode(text);
    require(bytes.size() % 8 == 0, ErrorCode::parse_failed, "tap blob is not a float64 array");
    std::vector<double> taps(bytes.size() / 8);
    for (std::size_t i = 0; i < taps.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[i * 8 + b];
        std::memcpy(&taps[i], &bits, 8);
    }
    return taps;
}

}  // namespace

void save_filter_bank(const FilterBank& bank, const std::string& path) {
    nlohmann::json j;
    j["sample_rate_hz"] = bank.sample_rate_hz;
    j["bandwidth_hz"] = bank.prior.bandwidth_hz;
    j["freq_set_hz"] = bank.prior.freq_set_hz;
    j["stopband_db"] = bank.stopband_db;
    j["transition_hz"] = bank.transition_hz;
    j["length"] = bank.length();
    j["taps_encoding"] = "base64-float64-le";
    j["taps"] = nlohmann::json::array();
    for (const auto& t : bank.taps) j["taps"].push_back(encode_taps(t));
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCode::io_failed, "cannot open " + path);
    os << j.dump(2) << '\n';
}

FilterBank load_filter_bank(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorCode::io_failed, "cannot open " + path);
    FilterBank bank;
    try {
        const auto j = nlohmann::json::parse(is);
        bank.sample_rate_hz = j.at("sample_rate_hz").get<double>();
        bank.prior.bandwidth_hz = j.at("bandwidth_hz").get<double>();
        bank.prior.freq_set_hz = j.at("freq_set_hz").get<std::vector<double>>();
        bank.stopband_db = j.value("stopband_db", 60.0);
        bank.transition_hz = j.value("transition_hz", 1e6);
        for (const auto& t : j.at("taps")) bank.taps.push_back(decode_taps(t.get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::parse_failed, path + ": " + e.what());
    }
    require(bank.taps.size() == bank.prior.freq_set_hz.size() && !bank.taps.empty(), ErrorCode::parse_failed,
            path + ": one tap set per frequency required");
    for (const auto& t : bank.taps)
        require(t.size() == bank.taps.front().size() && t.size() % 2 == 1, ErrorCode::parse_failed,
                path + ": tap sets must share one odd length");
    bank.prior.validate(bank.sample_rate_hz);
    return bank;
}

std::vector<std::string> filter_bank_preset_names() { return {"2g4_100m", "5g8_100m", "2g4_80m"}; }

FreqPrior preset_prior(const std::string& name, double* sample_rate_hz) {
    FreqPrior p;
    p.bandwidth_hz = 15.36e6;
    double fs = 100e6;
    if (name == "2g4_100m") {
        p.freq_set_hz = {-30e6, -10e6, 10e6, 30e6};
    } else if (name == "5g8_100m") {
        p.freq_set_hz = {-33.5e6, -13.5e6, 6.5e6, 26.5e6};
    } else if (name == "2g4_80m") {
        fs = 80e6;
        p.freq_set_hz = {-27e6, -9e6, 9e6, 27e6};
    } else {
        fail(ErrorCode::configuration, "unknown filter bank preset '" + name + "'");
    }
    if (sample_rate_hz) *sample_rate_hz = fs;
    return p;
}

FilterBank preset_filter_bank(const std::string& name) {
    double fs = 0.0;
    const auto prior = preset_prior(name, &fs);
    return design_filter_bank(prior, fs);
}

}  // namespace dronerid
