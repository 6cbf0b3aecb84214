#include <doctest.h>

#include "dronerid/box_correct.hpp"
#include "dronerid/eval.hpp"
#include "dronerid/tf_analysis.hpp"
#include "support.hpp"

using namespace dronerid;

namespace {

ProtocolPriors preset_priors() {
    ProtocolPriors p;
    p.freq_prior = preset_prior("2g4_100m");
    return p;
}

// Time-correct one box regardless of confidence.
BoundingBox correct_one(const ComplexSignal& filtered, const BoundingBox& b, const ProtocolPriors& pr, RefineMode mode) {
    CorrectionOptions o;
    o.mode = mode;
    o.ignore_confidence = true;
    return correct_all(filtered, {b}, pr, o)[0];
}

CorrelationTrace trace_of(std::vector<double> v) {
    CorrelationTrace t;
    t.values = std::move(v);
    t.peak_index = argmax_first(t.values);
    return t;
}

// Flat floor of 1, a long high block on [800, 2000) and a narrow spike at 3000.
CorrelationTrace block_and_spike() {
    std::vector<double> v(4000, 1.0);
    for (std::size_t m = 800; m < 2000; ++m) v[m] = 10.0;
    v[3000] = 6.0;
    return trace_of(v);
}

}  // namespace

TEST_CASE("frequency correction snaps to the nearest prior band") {
    FreqPrior p{{0.0, 30e6}, 15.36e6};
    BoundingBox b{1e-4, 6e-4, -6e6, 12e6, 0.3, "drone_broadcast", {}};
    const auto c = correct_frequency(b, p);
    CHECK(c.f_min_hz == doctest::Approx(-7.68e6));
    CHECK(c.f_max_hz == doctest::Approx(7.68e6));
    CHECK(c.t_min_s == b.t_min_s);
    CHECK(c.corrected.freq);
    const auto again = correct_frequency(c, p);
    CHECK(again.f_min_hz == c.f_min_hz);
    CHECK(again.f_max_hz == c.f_max_hz);
}

TEST_CASE("frequency correction of a noise-widened band covers the frame band") {
    const auto cap = testsupport::one_frame_capture(FrameSpec{}, 100e6, 0.0, 2, 1000, 10e6, 1000);
    const auto truth = cap.frames[0].box;
    BoundingBox wide = truth;
    wide.f_min_hz -= 3e6;
    wide.f_max_hz += 9e6;
    const auto c = correct_frequency(wide, preset_prior("2g4_100m"));
    CHECK(c.bandwidth_hz() == doctest::Approx(15.36e6));
    CHECK(c.f_min_hz <= truth.f_min_hz + 1.0);
    CHECK(c.f_max_hz >= truth.f_max_hz - 1.0);
    CHECK(eval::iou(c, truth) > eval::iou(wide, truth));
}

TEST_CASE("matched filter identity") {
    const auto z = gen_zc(600, 601);
    ComplexVec x(z);
    x.resize(3000);
    const auto t = zc_cross_correlate(std::span<const Complex>(x), z);
    CHECK(t.peak_index == 0);
    CHECK(t.values[0] == doctest::Approx(601.0));
}

TEST_CASE("zc correlation of pure noise stays low") {
    const auto z = gen_zc(147, 601);
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto n = testsupport::white_noise(6000, 1.0, 1000 + s);
        const auto t = zc_cross_correlate(std::span<const Complex>(n), z);
        worst = std::max(worst, *std::max_element(t.values.begin(), t.values.end()));
    }
    CHECK(worst <= 0.3 * 601.0);
}

TEST_CASE("clean frame correlation peaks inside the zc symbol") {
    FrameSpec s;
    const auto f = synth_broadcast_frame(s, testsupport::payload_bits(3));
    const auto tr = band_traces(f, s, 0.0);
    REQUIRE(tr.size() == 2);
    CHECK(tr[0].peak_index >= s.symbol_start(3));
    CHECK(tr[0].peak_index < s.symbol_start(4));
    CHECK(tr[1].peak_index >= s.symbol_start(5));
    CHECK(tr[1].peak_index < s.symbol_start(6));
}

TEST_CASE("segmented refinement leaves a flat trace alone") {
    const auto t = segmented_refine(trace_of(std::vector<double>(2000, 3.0)), RefineParams{});
    CHECK(t.refined == t.values);
    CHECK(t.mean_segment_energy == doctest::Approx(3.0));
    for (double e : t.segment_energy) CHECK(e == doctest::Approx(3.0));
    CHECK(std::count(t.segment_suppressed.begin(), t.segment_suppressed.end(), 1) == 0);
}

TEST_CASE("segmented refinement removes the block and keeps the spike") {
    const auto raw = block_and_spike();
    CHECK(raw.peak_index == 800);
    const auto t = segmented_refine(raw, RefineParams{});
    CHECK(t.peak_index == 3000);
    CHECK(t.segment_suppressed[2] == 1);
    CHECK(t.segment_suppressed[4] == 1);
    CHECK(t.segment_suppressed[7] == 0);
    for (std::size_t m = 800; m < 2000; ++m) CHECK(t.refined[m] == 0.0);
}

TEST_CASE("direct refinement also kills the spike") {
    const auto t = direct_refine(block_and_spike(), 1.2);
    CHECK(t.refined[3000] == 0.0);
    CHECK(t.peak_index != 3000);
}

TEST_CASE("refinement with a huge alpha is the identity") {
    const auto raw = block_and_spike();
    const auto d = direct_refine(raw, 1e300);
    CHECK(d.refined == raw.values);
    RefineParams p;
    p.alpha = 1e300;
    CHECK(segmented_refine(raw, p).refined == raw.values);
}

TEST_CASE("segment gaps shorter than beta are filled") {
    std::vector<double> v(4000, 1.0);
    for (std::size_t m = 0; m < 400; ++m) v[m] = 20.0;
    for (std::size_t m = 1200; m < 1600; ++m) v[m] = 20.0;  // segments 0 and 3
    RefineParams p;
    p.beta = 3;
    auto t = segmented_refine(trace_of(v), p);
    CHECK(t.segment_suppressed[1] == 0);  // gap of 3 is not shorter than beta
    p.beta = 4;
    t = segmented_refine(trace_of(v), p);
    CHECK(t.segment_suppressed[1] == 1);
    CHECK(t.segment_suppressed[2] == 1);
    p.beta = 0;
    t = segmented_refine(trace_of(v), p);
    CHECK(t.segment_suppressed[1] == 0);
}

TEST_CASE("refinement flagging every segment is degenerate") {
    RefineParams p;
    p.alpha = 0.5;
    try {
        segmented_refine(trace_of(std::vector<double>(2000, 1.0)), p);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::refinement_degenerate);
    }
}

TEST_CASE("refinement parameters are validated") {
    RefineParams p;
    p.segment_len = 0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.alpha = -1.0;
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("time correction from a peak at the expected zc offset spans the frame") {
    const auto pr = preset_priors();
    const auto& s = pr.frame_spec;
    CorrelationTrace t;
    t.peak_index = pr.lambda() * (s.fft_size + s.cp_normal) + s.cp_extend;
    const auto c = correct_time(BoundingBox{}, t, pr, s.sample_rate_hz(), 1.0);
    CHECK(c.t_min_s == 0.0);
    CHECK(c.t_max_s == doctest::Approx(s.duration_s()));
    CHECK(c.corrected.time);
    CHECK_FALSE(c.corrected.time_clipped);
}

TEST_CASE("time correction clips at the capture edges") {
    const auto pr = preset_priors();
    CorrelationTrace t;
    t.peak_index = 0;
    const auto c = correct_time(BoundingBox{0, 1e-4, 0, 1, 0, "x", {}}, t, pr, 15.36e6, 1e-3);
    CHECK(c.t_min_s == 0.0);
    CHECK(c.corrected.time_clipped);
}

TEST_CASE("clean frame is located within one cp") {
    const auto pr = preset_priors();
    const double fs = 100e6;
    const auto bank = preset_filter_bank("2g4_100m");
    for (std::int64_t start : {5000, 33333, 120000}) {
        const auto cap = testsupport::one_frame_capture(pr.frame_spec, fs, 30.0, 4, start, 10e6, 60000);
        const auto filtered = apply_filter_bank(cap.signal, bank);
        BoundingBox rough = cap.frames[0].box;
        rough.t_min_s += 2e-4;
        rough.t_max_s += 3e-4;
        rough.confidence = 0.1;
        const auto c = correct_one(filtered, rough, pr, RefineMode::none);
        CHECK(std::abs(c.t_min_s - cap.frames[0].box.t_min_s) <= pr.n_normal() / pr.frame_spec.sample_rate_hz());
        CHECK(c.corrected.time);
        CHECK(eval::iou(c, cap.frames[0].box) >= 0.9);
    }
}

TEST_CASE("confident boxes keep their time span") {
    const auto pr = preset_priors();
    const auto cap = testsupport::one_frame_capture(pr.frame_spec, 100e6, 20.0, 5, 3000, -10e6, 3000);
    BoundingBox b{1e-4, 3e-4, -14e6, -3e6, 0.9, "drone_broadcast", {}};
    const auto c = correct_all(cap.signal, {b}, pr, RefineParams{})[0];
    CHECK(c.t_min_s == b.t_min_s);
    CHECK(c.t_max_s == b.t_max_s);
    CHECK(c.f_min_hz == doctest::Approx(-10e6 - 7.68e6));
    CHECK(c.corrected.freq);
    CHECK_FALSE(c.corrected.time);
    CHECK(correct_all(cap.signal, {}, pr, RefineParams{}).empty());
}

TEST_CASE("box misplaced in time is pulled onto the frame") {
    const auto pr = preset_priors();
    const auto bank = preset_filter_bank("2g4_100m");
    const auto cap = testsupport::one_frame_capture(pr.frame_spec, 100e6, 15.0, 6, 150000, 30e6, 10000);
    const auto truth = cap.frames[0].box;
    BoundingBox off{0.1e-3, 0.6e-3, 24e6, 36e6, 0.2, "drone_broadcast", {}};
    CHECK(eval::iou(off, truth) == 0.0);
    const auto c = correct_one(apply_filter_bank(cap.signal, bank), off, pr, RefineMode::none);
    CHECK(eval::iou(c, truth) >= 0.7);
}

TEST_CASE("low-confidence box on a strong burst lands on the frame at -9 dB") {
    eval::RefineCaseConfig cfg;
    int hits = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto rc = eval::build_refine_case(cfg, 900 + s, -9.0);
        const auto seg = locate_frame(rc.traces, cfg.frame, RefineMode::segmented, RefineParams{});
        hits += seg.ok && std::abs(seg.frame_start - rc.true_start) <= cfg.frame.cp_normal;
    }
    CHECK(hits >= 9);
}

TEST_CASE("priors json round trip") {
    auto p = preset_priors();
    p.frame_spec.num_symbols = 9;
    const auto q = priors_from_json(priors_to_json(p));
    CHECK(q.freq_prior.freq_set_hz == p.freq_prior.freq_set_hz);
    CHECK(q.frame_spec.num_symbols == 9);
    CHECK(q.frame_spec.zc_roots[1] == 147);
    CHECK_THROWS_AS(priors_from_json("{\"freq_set_hz\": \"x\"}"), Error);
}
