// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dronerid/box_correct.hpp"
#include "dronerid/codec.hpp"
#include "dronerid/eval.hpp"
#include "dronerid/sync_demod.hpp"
#include "dronerid/tf_analysis.hpp"
#include "support.hpp"

using namespace dronerid;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no runtime bound
    std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

FrameSpec spec_for(int n) {
    FrameSpec s;
    if (n == 2048) {
        s.fft_size = 2048;
        s.used_subcarriers = 1200;
        s.cp_normal = 144;
        s.cp_extend = 160;
    }
    return s;
}

constexpr double kFs = 100e6;
const std::vector<double> kSnrs{0.0, 5.0, 10.0, 15.0};

// 1 ----------------------------------------------------------------------

Outcome bandwidth_estimation() {
    Outcome o;
    o.pass = true;
    for (int n : {1024, 2048}) {
        const auto spec = spec_for(n);
        const double b = spec.sample_rate_hz();
        for (double snr : kSnrs) {
            int ok = 0;
            double worst = 0.0;
            for (std::uint64_t t = 0; t < 100; ++t) {
                const auto cap = testsupport::one_frame_capture(spec, kFs, snr, 10000 + 1000 * n + t);
                const auto e = estimate_bandwidth(welch_psd(cap.signal, 1024), spec.fft_size, spec.subcarrier_spacing_hz);
                const double err = std::abs(e.b_total_hz - b);
                worst = std::max(worst, err);
                ok += err <= 120e3;
            }
            o.pass = o.pass && ok >= 95;
            o.detail += fmt("N=%d/%gdB %d%% (max %.0f Hz) ", n, snr, ok, worst);
        }
    }
    return o;
}

// 2 ----------------------------------------------------------------------

Outcome subcarrier_count() {
    Outcome o;
    o.pass = true;
    const FrameSpec spec;
    for (double snr : kSnrs) {
        int exact = 0, lag_ok = 0;
        for (std::uint64_t t = 0; t < 100; ++t) {
            const auto cap = testsupport::one_frame_capture(spec, kFs, snr, 20000 + t);
            const auto bw = estimate_bandwidth(welch_psd(cap.signal, 1024), spec.fft_size, spec.subcarrier_spacing_hz);
            const auto s = estimate_num_subcarriers(cap.signal, bw.b_total_hz, {512, 1024, 2048}, 0,
                                                    0.5 * (bw.f_lower_hz + bw.f_upper_hz));
            if (s.n_hat != spec.fft_size) continue;
            ++exact;
            const double b_hat = s.n_hat * spec.subcarrier_spacing_hz;
            lag_ok += std::abs(static_cast<double>(s.n_star) / kFs - s.n_hat / b_hat) <= 2.0 / kFs;
        }
        o.pass = o.pass && exact >= 95 && lag_ok == exact;
        o.detail += fmt("%gdB exact %d%% lag %d/%d  ", snr, exact, lag_ok, exact);
    }
    return o;
}

// 3 ----------------------------------------------------------------------

Outcome zc_properties() {
    constexpr int v = 601;
    double mod_err = 0.0, zero_err = 0.0, worst_cross = 0.0;
    const std::vector<std::pair<int, int>> pairs{{600, 147}, {1, 2}, {1, 600}, {25, 34}, {147, 148},
                                                 {300, 301}, {7, 599}, {100, 500}, {13, 455}, {222, 333}};
    auto roots = std::vector<int>{};
    for (const auto& [a, b] : pairs) {
        roots.push_back(a);
        roots.push_back(b);
    }
    for (int r : roots) {
        const auto z = gen_zc(r, v);
        Complex acc{};
        for (const auto& c : z) {
            mod_err = std::max(mod_err, std::abs(std::abs(c) - 1.0));
            acc += c * std::conj(c);
        }
        zero_err = std::max(zero_err, std::abs(acc - Complex(v, 0.0)));
    }
    for (const auto& [a, b] : pairs) {
        const auto za = gen_zc(a, v), zb = gen_zc(b, v);
        for (int lag = 0; lag < v; ++lag) {
            Complex acc{};
            for (int k = 0; k < v; ++k) acc += za[static_cast<std::size_t>(k)] * std::conj(zb[static_cast<std::size_t>((k + lag) % v)]);
            worst_cross = std::max(worst_cross, std::abs(acc));
        }
    }
    const double bound = v * (1.0 / std::sqrt(static_cast<double>(v)) + 0.05);
    Outcome o;
    o.pass = mod_err <= 1e-12 && zero_err <= 1e-9 && worst_cross <= bound;
    o.detail = fmt("|z|-1 max %.1e, zero-lag err %.1e, cross peak %.3f <= %.3f", mod_err, zero_err, worst_cross, bound);
    return o;
}

// 4 / 6 ------------------------------------------------------------------

constexpr std::uint64_t kRefineMaster = 4242;

const std::vector<eval::RefineCase>& refine_corpus() {
    static const std::vector<eval::RefineCase> corpus = [] {
        std::vector<eval::RefineCase> c;
        const eval::RefineCaseConfig cfg;
        for (int i = 0; i < 200; ++i)
            c.push_back(eval::build_refine_case(cfg, eval::scenario_seed(kRefineMaster, i), -9.0 + 2.0 * (i % 13)));
        return c;
    }();
    return corpus;
}

int refine_hits(RefineMode mode, const RefineParams& p) {
    const FrameSpec spec;
    int hits = 0;
    for (const auto& c : refine_corpus()) hits += eval::refine_case_success(c, spec, mode, p);
    return hits;
}

Outcome segmented_refinement() {
    const RefineParams p;  // alpha 1.2, beta 3, P 400
    const int seg = refine_hits(RefineMode::segmented, p);
    const int dir = refine_hits(RefineMode::direct, p);
    const int none = refine_hits(RefineMode::none, p);
    Outcome o;
    o.pass = seg >= 180 && dir < seg && p.alpha == 1.2 && p.beta == 3 && p.segment_len == 400;
    o.detail = fmt("segmented %d/200, direct %d/200 (unrefined %d/200)", seg, dir, none);
    return o;
}

// 95 % Wilson score interval for k successes out of n.
std::pair<double, double> wilson(int k, int n) {
    const double z = 1.959963984540054, p = static_cast<double>(k) / n;
    const double den = 1.0 + z * z / n;
    const double mid = (p + z * z / (2.0 * n)) / den;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / den;
    return {mid - half, mid + half};
}

Outcome parameter_study() {
    std::vector<double> alphas;
    std::vector<int> hits;
    for (int k = 0; k <= 8; ++k) {
        RefineParams p;
        p.alpha = 0.4 + 0.2 * k;
        alphas.push_back(p.alpha);
        hits.push_back(refine_hits(RefineMode::segmented, p));
    }
    const int best = *std::max_element(hits.begin(), hits.end());
    bool alpha_ok = false;
    std::string curve;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (hits[i] == best && alphas[i] >= 1.0 - 1e-9 && alphas[i] <= 1.4 + 1e-9) alpha_ok = true;
        curve += fmt("%.1f:%d ", alphas[i], hits[i]);
    }
    int p_hits[3];
    const int ps[3] = {100, 400, 1600};
    for (int i = 0; i < 3; ++i) {
        RefineParams p;
        p.segment_len = ps[i];
        p_hits[i] = refine_hits(RefineMode::segmented, p);
    }
    const int p_best = static_cast<int>(std::max_element(p_hits, p_hits + 3) - p_hits);
    const auto w_best = wilson(p_hits[p_best], 200), w_400 = wilson(p_hits[1], 200);
    const bool p_ok = p_best == 1 || w_best.first <= w_400.second;
    Outcome o;
    o.pass = alpha_ok && p_ok;
    o.detail = fmt("alpha %s| P 100:%d 400:%d 1600:%d", curve.c_str(), p_hits[0], p_hits[1], p_hits[2]);
    return o;
}

// 5 / 10 -----------------------------------------------------------------

eval::SweepConfig ordering_config() {
    eval::SweepConfig cfg;
    cfg.master_seed = 1;
    cfg.num_scenarios = 200;
    cfg.snr_db.clear();
    for (int s = -15; s <= 15; s += 2) cfg.snr_db.push_back(s);
    cfg.noise_kinds = {NoiseKind::awgn, NoiseKind::rayleigh, NoiseKind::gamma, NoiseKind::impulse};
    cfg.variants = {eval::Variant::baseline, eval::Variant::f_only, eval::Variant::tf_full};
    return cfg;
}

std::string g_sweep_csv;

Outcome pipeline_ordering() {
    const auto rep = eval::run_sweep(ordering_config(), 1);
    g_sweep_csv = rep.to_csv(false);
    const auto b = rep.iou_column(eval::Variant::baseline);
    const auto f = rep.iou_column(eval::Variant::f_only);
    const auto t = rep.iou_column(eval::Variant::tf_full);
    const double lb_tf = eval::bootstrap_mean_diff_lower(t, f, 0.95, 10000, 7);
    const double lb_fb = eval::bootstrap_mean_diff_lower(f, b, 0.95, 10000, 7);
    int errors = 0;
    for (const auto& r : rep.rows) errors += !r.error.empty();
    Outcome o;
    o.pass = b.size() == 200 && lb_tf >= 0.02 && lb_fb >= 0.02;
    o.detail = fmt("mean IoU tf_full %.4f > f_only %.4f > baseline %.4f; 95%% lower margins %.4f, %.4f; %d row errors",
                   rep.mean_iou(eval::Variant::tf_full), rep.mean_iou(eval::Variant::f_only),
                   rep.mean_iou(eval::Variant::baseline), lb_tf, lb_fb, errors);
    return o;
}

Outcome determinism() {
    const auto cfg = ordering_config();
    if (g_sweep_csv.empty()) g_sweep_csv = eval::run_sweep(cfg, 1).to_csv(false);
    const auto two = eval::run_sweep(cfg, 2).to_csv(false);
    const auto three = eval::run_sweep(cfg, 3).to_csv(false);
    Outcome o;
    o.pass = two == g_sweep_csv && three == g_sweep_csv;
    o.detail = fmt("200-scenario sweep, %zu CSV bytes; workers 2 %s, workers 3 %s", g_sweep_csv.size(),
                   two == g_sweep_csv ? "identical" : "DIFFERENT", three == g_sweep_csv ? "identical" : "DIFFERENT");
    return o;
}

// 7 ----------------------------------------------------------------------

Outcome end_to_end_decode() {
    const FrameSpec spec;
    const codec::CodecConfig cfg;
    const auto centers = preset_prior("2g4_100m").freq_set_hz;
    Outcome o;
    o.pass = true;
    for (double snr : {5.0, 20.0}) {
        int ok = 0;
        for (std::uint64_t t = 0; t < 100; ++t) {
            std::mt19937_64 rng(70000 + t + static_cast<std::uint64_t>(snr) * 1000);
            const double center = centers[rng() % centers.size()];
            const double cfo = std::uniform_real_distribution<double>(-1000.0, 1000.0)(rng);
            const auto start = static_cast<std::int64_t>(5000 + rng() % 50000);
            const std::uint64_t seed = 300000 + t + static_cast<std::uint64_t>(snr) * 1000;
            const auto cap = testsupport::one_frame_capture(spec, kFs, snr, seed, start, center, 20000, cfo);
            try {
                const auto d = decode_frame(cap.signal, cap.frames[0].box, spec, cfg);
                ok += d.block.crc_ok && d.payload && d.payload->fields == random_payload(seed);
            } catch (const Error&) {
            }
        }
        o.pass = o.pass && ok >= (snr >= 20.0 ? 100 : 97);
        o.detail += fmt("%gdB %d/100  ", snr, ok);
    }
    return o;
}

// 8 ----------------------------------------------------------------------

Outcome turbo_codec() {
    bool zero_ok = true, noiseless_ok = true;
    for (int k : {40, 1000, 1408}) {
        const Bits zeros(static_cast<std::size_t>(k), 0);
        const auto c = codec::turbo_encode(zeros);
        zero_ok = zero_ok && std::all_of(c.begin(), c.end(), [](std::uint8_t b) { return b == 0; });
        std::vector<double> l(c.size(), 10.0);
        zero_ok = zero_ok && codec::turbo_decode(l, k, 8).bits == zeros;

        std::mt19937_64 rng(static_cast<std::uint64_t>(k));
        Bits b(static_cast<std::size_t>(k));
        for (auto& x : b) x = static_cast<std::uint8_t>(rng() & 1u);
        const auto cb = codec::turbo_encode(b);
        for (std::size_t i = 0; i < cb.size(); ++i) l[i] = cb[i] ? -10.0 : 10.0;
        noiseless_ok = noiseless_ok && codec::turbo_decode(l, k, 8).bits == b;
    }
    constexpr int k = 1000;
    const double rate = static_cast<double>(k) / codec::turbo_coded_length(k);
    const double sigma = std::sqrt(1.0 / (2.0 * rate * std::pow(10.0, 0.4)));  // Eb/N0 = 4 dB
    std::size_t errors = 0;
    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0.0, sigma);
    for (int blk = 0; blk < 100; ++blk) {
        Bits b(k);
        for (auto& x : b) x = static_cast<std::uint8_t>(rng() & 1u);
        const auto c = codec::turbo_encode(b);
        std::vector<double> l(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) l[i] = 2.0 * ((c[i] ? -1.0 : 1.0) + noise(rng)) / (sigma * sigma);
        const auto d = codec::turbo_decode(l, k, 8);
        for (int i = 0; i < k; ++i) errors += d.bits[static_cast<std::size_t>(i)] != b[static_cast<std::size_t>(i)];
    }
    Outcome o;
    o.pass = zero_ok && noiseless_ok && errors == 0;
    o.detail = fmt("all-zero %s, noiseless %s, K=1000 Eb/N0 4 dB: %zu bit errors in 100 blocks",
                   zero_ok ? "exact" : "WRONG", noiseless_ok ? "exact" : "WRONG", errors);
    return o;
}

// 9 ----------------------------------------------------------------------

BoundingBox bx(double t0, double t1, double f0, double f1) { return {t0, t1, f0, f1, 0.5, "drone_broadcast", {}}; }

Outcome metrics_suite() {
    int failures = 0;
    auto expect = [&](bool c) { failures += !c; };
    const auto a = bx(0, 1, 0, 1);
    expect(eval::iou(a, a) == 1.0);
    expect(eval::iou(a, bx(2, 3, 0, 1)) == 0.0);
    expect(eval::iou(a, bx(0.5, 1.5, 0, 1)) == 1.0 / 3.0);
    expect(eval::iou(a, bx(0, 0.5, 0, 0.5)) == 0.25);

    const auto perfect = eval::match_and_score({a, bx(2, 3, 0, 1)}, {a, bx(2, 3, 0, 1)});
    expect(perfect.precision == 1.0 && perfect.recall == 1.0 && perfect.mean_iou == 1.0 && perfect.wem == 1.0);
    const auto empty = eval::match_and_score({}, {a});
    expect(empty.precision == 0.0 && empty.precision_undefined && empty.recall == 0.0 && empty.wem == 0.0);
    const auto half = eval::match_and_score({bx(0, 0.5, 0, 1), bx(5, 6, 0, 1)}, {a});
    expect(half.tp == 1 && half.fp == 1 && half.fn == 0);
    expect(half.precision == 0.5 && half.recall == 1.0 && half.mean_iou == 0.5);

    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    int wem_bad = 0, perm_bad = 0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<BoundingBox> d, t;
        for (int i = 0; i < 8; ++i) {
            const double t0 = u(rng), f0 = u(rng);
            t.push_back(bx(t0, t0 + 1.0, f0, f0 + 1.0));
            if (i % 3 != 0) d.push_back(bx(t0 + 0.3 * u(rng) / 10.0, t0 + 1.0, f0, f0 + 1.0 + 0.2 * u(rng) / 10.0));
            if (i % 4 == 0) d.push_back(bx(u(rng), u(rng) + 10.0, u(rng), u(rng) + 10.0));
        }
        const auto ref = eval::match_and_score(d, t);
        wem_bad += ref.wem != (ref.mean_iou + ref.precision + ref.recall) / 3.0;
        for (int p = 0; p < 20; ++p) {
            std::shuffle(d.begin(), d.end(), rng);
            std::shuffle(t.begin(), t.end(), rng);
            const auto s = eval::match_and_score(d, t);
            perm_bad += s.tp != ref.tp || s.fp != ref.fp || s.fn != ref.fn || s.mean_iou != ref.mean_iou || s.wem != ref.wem;
        }
    }
    Outcome o;
    o.pass = failures == 0 && wem_bad == 0 && perm_bad == 0;
    o.detail = fmt("analytic failures %d, WEM mismatches %d, permutation mismatches %d of 1000", failures, wem_bad, perm_bad);
    return o;
}

// 11 ---------------------------------------------------------------------

Outcome speed_tradeoff() {
    eval::SweepConfig cfg;
    const auto rows = eval::measure_speed(eval::full_pipeline(cfg), {1, 2, 5, 10, 20, 50}, 5, cfg);
    bool monotone = rows.size() == 6;
    std::string d;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && rows[i].fps > rows[i - 1].fps) monotone = false;
        d += fmt("%gms %.1f fps %.3f s/s  ", rows[i].duration_ms, rows[i].fps, rows[i].latency_per_signal_s);
    }
    Outcome o;
    o.pass = monotone;
    o.detail = d;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "bandwidth estimation", 120.0, bandwidth_estimation},
        {2, "subcarrier-count estimation", 120.0, subcarrier_count},
        {3, "ZC properties", 30.0, zc_properties},
        {4, "segmented refinement", 300.0, segmented_refinement},
        {5, "correction-pipeline ordering", 900.0, pipeline_ordering},
        {6, "parameter-study shape", 900.0, parameter_study},
        {7, "end-to-end decode", 300.0, end_to_end_decode},
        {8, "turbo codec", 180.0, turbo_codec},
        {9, "metrics suite", 0.0, metrics_suite},
        {10, "determinism", 0.0, determinism},
        {11, "speed trade-off", 0.0, speed_tradeoff},
    };
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.limit_s <= 0.0 || secs < c.limit_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        while (!o.detail.empty() && o.detail.back() == ' ') o.detail.pop_back();
        std::printf("%s  %2d  %s: %s [%.1f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                    c.limit_s > 0.0 ? (in_time ? fmt(" < %.0f s", c.limit_s) : fmt(" OVER %.0f s", c.limit_s)).c_str() : "");
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
