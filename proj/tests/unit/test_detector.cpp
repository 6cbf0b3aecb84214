#include <doctest.h>

#include <algorithm>

#include "dronerid/detector.hpp"
#include "dronerid/eval.hpp"
#include "dronerid/filter_bank.hpp"
#include "support.hpp"

using namespace dronerid;

namespace {

TimeFrequencyImage capture_tfi(const ComplexSignal& x) { return stft(x, 1024, 256); }

}  // namespace

TEST_CASE("one clean frame gives one box on the truth") {
    const auto cap = testsupport::one_frame_capture(FrameSpec{}, 100e6, 20.0, 1, 40000, 20e6, 40000);
    const auto boxes = baseline_detect(capture_tfi(cap.signal), 99.0, 16);
    REQUIRE(boxes.size() == 1);
    CHECK(eval::iou(boxes[0], cap.frames[0].box) >= 0.5);
    CHECK(boxes[0].valid());
    CHECK(boxes[0].confidence > 0.5);
}

TEST_CASE("noise alone with a large minimum area yields nothing") {
    const auto n = testsupport::white_noise(200000, 1.0, 2);
    CHECK(baseline_detect(capture_tfi(ComplexSignal(n, 100e6)), 99.0, 100000).empty());
}

TEST_CASE("raising the seed percentile only removes boxes") {
    for (std::uint64_t seed = 3; seed < 6; ++seed) {
        const auto cap = testsupport::one_frame_capture(FrameSpec{}, 100e6, 3.0, seed, 30000, -10e6, 30000);
        const auto tfi = capture_tfi(cap.signal);
        std::vector<BoundingBox> prev;
        bool first = true;
        for (double pct : {90.0, 95.0, 99.0, 99.9}) {
            const auto cur = baseline_detect(tfi, pct, 16);
            if (!first) {
                CHECK(cur.size() <= prev.size());
                for (const auto& b : cur) CHECK(std::find(prev.begin(), prev.end(), b) != prev.end());
            }
            prev = cur;
            first = false;
        }
    }
}

TEST_CASE("detection is deterministic") {
    const auto cap = testsupport::one_frame_capture(FrameSpec{}, 100e6, 5.0, 7, 30000, 0.0, 30000);
    const auto tfi = capture_tfi(cap.signal);
    CHECK(baseline_detect(tfi) == baseline_detect(tfi));
}

TEST_CASE("a strong burst over the frame draws a box onto the burst") {
    FrameSpec s;
    const double fs = 100e6;
    auto fr = make_frame_event(s, testsupport::payload_bits(8), fs, 60000, 0.0);
    InterferenceParams p;
    p.duration_s = 1.2e-3;
    p.bandwidth_hz = 3e6;
    p.power = 30.0;
    CaptureEvent burst{synth_interference(InterferenceKind::fhss_burst, p, 2), 20000, 2e6, false, 0, 0, {}};
    ChannelParams ch;
    ch.snr_db = -3.0;
    const auto cap = compose_capture({fr, burst}, 200000, fs, ch);
    const auto boxes = baseline_detect(capture_tfi(cap.signal));
    REQUIRE_FALSE(boxes.empty());
    bool on_burst = false;
    for (const auto& b : boxes) {
        const double tc = 0.5 * (b.t_min_s + b.t_max_s);
        on_burst = on_burst || (tc > 0.2e-3 && tc < 1.4e-3 && b.center_hz() > 0.0 && b.center_hz() < 4e6);
    }
    CHECK(on_burst);
}

TEST_CASE("tfi extent covers the image") {
    const auto t = capture_tfi(ComplexSignal(testsupport::white_noise(10240, 1.0, 1), 100e6));
    const auto e = tfi_extent(t);
    CHECK(e.f_min_hz == doctest::Approx(-50e6 - t.bin_width_hz() / 2.0));
    CHECK(e.t_min_s == doctest::Approx(t.time_of_bin(-0.5)));
    CHECK(e.t_max_s > e.t_min_s);
}

TEST_CASE("boxes json round trip") {
    std::vector<BoundingBox> v(3);
    for (int i = 0; i < 3; ++i) {
        v[static_cast<std::size_t>(i)] = {1e-4 * i, 1e-4 * i + 5.7e-4, -7.68e6 + i * 1e6, 7.68e6 + i * 1e6, 0.1 * i,
                                          "drone_broadcast", {}};
    }
    v[1].corrected.freq = true;
    v[2].corrected = {true, true, true};
    const auto path = testsupport::temp_path("boxes.json");
    save_boxes(v, path, true);
    CHECK(load_boxes(path) == v);
    const auto plain = boxes_from_json(boxes_to_json(v));
    REQUIRE(plain.size() == 3);
    CHECK(plain[2].corrected == BoundingBox::Corrected{});
    CHECK(plain[2].t_max_s == v[2].t_max_s);
}

TEST_CASE("malformed boxes json is a parse error") {
    for (const char* bad : {"{", R"({"boxes": 3})", R"({"boxes":[{"t_min_s": 0}]})",
                            R"({"boxes":[{"t_min_s":1,"t_max_s":0,"f_min_hz":0,"f_max_hz":1,"confidence":0.5,"label":"x"}]})"}) {
        try {
            boxes_from_json(bad);
            FAIL("accepted " << bad);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::parse_failed);
        }
    }
}
