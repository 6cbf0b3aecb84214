#include <benchmark/benchmark.h>

#include <random>

#include "dronerid/box_correct.hpp"
#include "dronerid/codec.hpp"
#include "dronerid/filter_bank.hpp"
#include "dronerid/synth.hpp"
#include "dronerid/tf_analysis.hpp"

using namespace dronerid;

namespace {

ComplexSignal noise_capture(double ms) {
    const auto n = static_cast<std::size_t>(ms * 1e-3 * 100e6);
    return ComplexSignal(make_noise(NoiseKind::awgn, n, 1.0, 1), 100e6);
}

void BM_Stft(benchmark::State& st) {
    const auto x = noise_capture(static_cast<double>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(stft(x, 1024, 256));
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_Stft)->Arg(1)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_FilterBank(benchmark::State& st) {
    const auto x = noise_capture(static_cast<double>(st.range(0)));
    const auto bank = preset_filter_bank("2g4_100m");
    for (auto _ : st) benchmark::DoNotOptimize(apply_filter_bank(x, bank));
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_FilterBank)->Arg(1)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_ZcCorrelation(benchmark::State& st) {
    const auto x = make_noise(NoiseKind::awgn, static_cast<std::size_t>(st.range(0)), 1.0, 2);
    const auto tmpl = zc_time_template(FrameSpec{}, 600);
    for (auto _ : st) benchmark::DoNotOptimize(zc_cross_correlate(std::span<const Complex>(x), tmpl));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_ZcCorrelation)->Arg(1 << 14)->Arg(1 << 16)->Unit(benchmark::kMicrosecond);

void BM_TurboDecode(benchmark::State& st) {
    const int k = static_cast<int>(st.range(0));
    std::mt19937_64 rng(3);
    Bits b(static_cast<std::size_t>(k));
    for (auto& v : b) v = static_cast<std::uint8_t>(rng() & 1u);
    const auto c = codec::turbo_encode(b);
    std::normal_distribution<double> n(0.0, 0.8);
    std::vector<double> l(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) l[i] = 2.0 * ((c[i] ? -1.0 : 1.0) + n(rng)) / 0.64;
    for (auto _ : st) benchmark::DoNotOptimize(codec::turbo_decode(l, k, 8));
    st.SetItemsProcessed(st.iterations() * k);
}
BENCHMARK(BM_TurboDecode)->Arg(1000)->Arg(1408)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
