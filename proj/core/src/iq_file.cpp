#include "dronerid/iq_file.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace dronerid {

std::string sidecar_path(const std::string& path) { return path + ".json"; }

void write_cf32(const ComplexSignal& sig, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), ErrorCode::io_failed, "cannot open " + path);
    std::vector<unsigned char> buf(sig.size() * 8);
    for (std::size_t i = 0; i < sig.size(); ++i) {
        const float parts[2] = {static_cast<float>(sig[i].real()), static_cast<float>(sig[i].imag())};
        for (int c = 0; c < 2; ++c) {
            std::uint32_t bits;
            std::memcpy(&bits, &parts[c], 4);
            for (int b = 0; b < 4; ++b) buf[i * 8 + c * 4 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xffu);
        }
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(static_cast<bool>(os), ErrorCode::io_failed, "write failed for " + path);

    const nlohmann::json side = {{"sample_rate_hz", sig.sample_rate_hz()},
                                 {"center_freq_hz", sig.center_freq_hz()},
                                 {"num_samples", sig.size()}};
    std::ofstream js(sidecar_path(path));
    require(static_cast<bool>(js), ErrorCode::io_failed, "cannot write sidecar for " + path);
    js << side.dump(2) << '\n';
}

ComplexSignal read_cf32(const std::string& path, std::optional<double> sample_rate_hz, double center_freq_hz) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), ErrorCode::io_failed, "cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    require(buf.size() % 8 == 0, ErrorCode::parse_failed, path + ": size is not a multiple of 8 bytes");

    double fs = 0.0;
    double fc = center_freq_hz;
    std::optional<std::size_t> expected;
    const auto side = sidecar_path(path);
    if (std::filesystem::exists(side)) {
        std::ifstream js(side);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(js);
            fs = j.at("sample_rate_hz").get<double>();
            fc = j.value("center_freq_hz", 0.0);
            if (j.contains("num_samples")) expected = j.at("num_samples").get<std::size_t>();
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::parse_failed, side + ": " + e.what());
        }
    } else {
        require(sample_rate_hz.has_value(), ErrorCode::io_failed, "missing sidecar " + side + " and no sample rate given");
    }
    if (sample_rate_hz) fs = *sample_rate_hz;

    const std::size_t n = buf.size() / 8;
    require(!expected || *expected == n, ErrorCode::parse_failed, path + ": sample count disagrees with sidecar");
    ComplexVec x(n);
    for (std::size_t i = 0; i < n; ++i) {
        float parts[2];
        for (int c = 0; c < 2; ++c) {
            const unsigned char* p = &buf[i * 8 + c * 4];
            const std::uint32_t bits = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
            std::memcpy(&parts[c], &bits, 4);
        }
        x[i] = {parts[0], parts[1]};
    }
    return ComplexSignal(std::move(x), fs, fc);
}

}  // namespace dronerid
