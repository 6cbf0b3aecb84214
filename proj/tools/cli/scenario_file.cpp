#include "scenario_file.hpp"

#include <cmath>
#include <random>

#include "dronerid/filter_bank.hpp"

namespace dronerid::cli {

nlohmann::ordered_json payload_to_json(const codec::Payload& p) {
    nlohmann::ordered_json j;
    j["version"] = p.version;
    j["serial"] = p.serial;
    j["lat_deg"] = p.lat_deg;
    j["lon_deg"] = p.lon_deg;
    j["altitude_m"] = p.altitude_m;
    j["speed_mps"] = p.speed_mps;
    static const char* hex = "0123456789abcdef";
    std::string u;
    for (auto b : p.uuid) {
        u.push_back(hex[b >> 4]);
        u.push_back(hex[b & 15]);
    }
    j["uuid"] = u;
    return j;
}

codec::Payload payload_from_json(const nlohmann::json& j) {
    codec::Payload p;
    p.version = j.value("version", p.version);
    p.serial = j.value("serial", p.serial);
    p.lat_deg = j.value("lat_deg", p.lat_deg);
    p.lon_deg = j.value("lon_deg", p.lon_deg);
    p.altitude_m = j.value("altitude_m", p.altitude_m);
    p.speed_mps = j.value("speed_mps", p.speed_mps);
    if (j.contains("uuid")) {
        const auto u = j["uuid"].get<std::string>();
        require(u.size() == 32, ErrorCode::parse_failed, "uuid must be 32 hex digits");
        for (std::size_t i = 0; i < 16; ++i) p.uuid[i] = static_cast<std::uint8_t>(std::stoi(u.substr(2 * i, 2), nullptr, 16));
    }
    return p;
}

SynthResult synthesize_from_json(const nlohmann::json& s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double fs = s.value("sample_rate_hz", 0.0);
    FreqPrior prior = preset_prior(s.value("bank_preset", std::string("2g4_100m")), fs > 0.0 ? nullptr : &fs);
    const double duration_ms = s.value("duration_ms", 2.0);
    require(duration_ms > 0.0, ErrorCode::configuration, "duration_ms must be positive");
    const auto len = static_cast<std::size_t>(std::llround(duration_ms * 1e-3 * fs));
    FrameSpec spec;
    codec::CodecConfig codec;

    ChannelParams ch;
    ch.snr_db = s.value("snr_db", 100.0);
    ch.noise_kind = parse_noise_kind(s.value("noise_kind", std::string("awgn")));
    ch.attenuation_db = s.value("attenuation_db", 0.0);
    ch.cfo_hz = s.value("cfo_hz", 0.0);

    SynthResult out{CaptureTruth{ComplexSignal(ComplexVec(1), fs), {}}, {}};
    std::vector<CaptureEvent> events;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto add_frame = [&](const nlohmann::json& f) {
        const codec::Payload p = f.contains("payload") ? payload_from_json(f["payload"]) : random_payload(rng());
        const double center = f.contains("center_hz") ? f["center_hz"].get<double>()
                                                      : prior.freq_set_hz[rng() % prior.freq_set_hz.size()];
        auto ev = make_frame_event(spec, codec::encode_payload(p, codec.payload_bits()), fs, 0, center);
        const auto slack = static_cast<double>(len) - static_cast<double>(ev.signal.size());
        require(slack >= 0.0, ErrorCode::configuration, "capture is shorter than a frame");
        ev.start_sample = f.contains("start_ms") ? std::llround(f["start_ms"].get<double>() * 1e-3 * fs)
                                                 : static_cast<std::int64_t>(u01(rng) * slack);
        events.push_back(std::move(ev));
        out.payloads.push_back(p);
    };
    if (s.contains("frames")) {
        for (const auto& f : s["frames"]) add_frame(f);
    } else {
        add_frame(nlohmann::json::object());
    }
    const double frame_power = events.empty() ? 1.0 : mean_power(events.front().signal.samples());
    if (s.contains("interference")) {
        for (const auto& i : s["interference"]) {
            InterferenceParams ip;
            ip.sample_rate_hz = fs;
            ip.duration_s = i.value("duration_ms", 1.0) * 1e-3;
            ip.bandwidth_hz = i.value("bandwidth_hz", 1e6);
            ip.center_offset_hz = i.value("center_hz", 0.0);
            ip.power = frame_power * std::pow(10.0, i.value("power_db", 0.0) / 10.0);
            auto sig = synth_interference(parse_interference_kind(i.value("kind", std::string("fhss_burst"))), ip, rng());
            const auto start = std::llround(i.value("start_ms", 0.0) * 1e-3 * fs);
            events.push_back(CaptureEvent{std::move(sig), start, 0.0, false, 0.0, 0.0, {}});
        }
    }
    ch.rng_seed = rng();
    out.truth = compose_capture(std::move(events), len, fs, ch);
    return out;
}

}  // namespace dronerid::cli
