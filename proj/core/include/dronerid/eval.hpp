#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dronerid/box.hpp"
#include "dronerid/box_correct.hpp"
#include "dronerid/detector.hpp"
#include "dronerid/filter_bank.hpp"
#include "dronerid/synth.hpp"

namespace dronerid::eval {

// ---------------------------------------------------------------------------
// Metrics

// Intersection over union of time x frequency rectangles; 0 when the union is empty.
double iou(const BoundingBox& a, const BoundingBox& b);

struct MatchScore {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double mean_iou = 0.0;  // over truths, IoU of the greedy partner (0 if none)
    double wem = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
};

// Greedy one-to-one matching by descending IoU. Ties are broken by box
// coordinates, never by list position.
MatchScore match_and_score(const std::vector<BoundingBox>& dets, const std::vector<BoundingBox>& truths,
                           double iou_thresh = 0.5);

// ---------------------------------------------------------------------------
// Scenarios

enum class Variant { baseline, f_only, tf_full, direct_refine };
Variant parse_variant(const std::string& name);
const char* to_string(Variant v);
std::vector<Variant> all_variants();

struct InterferenceConfig {
    double fhss_probability = 0.5;
    double fhss_rel_db = 10.0;      // over the in-band noise power of the frame
    double fhss_in_band_probability = 0.5;
    double fhss_min_ms = 0.5;
    double fhss_max_ms = 1.5;
    double fhss_min_bw_hz = 0.5e6;
    double fhss_max_bw_hz = 3e6;
    double video_probability = 0.3;
    double video_rel_db = 10.0;     // over the frame power
    double video_bw_hz = 10e6;
};

struct Scenario {
    int id = 0;
    std::uint64_t seed = 0;
    double snr_db = 0.0;
    NoiseKind noise_kind = NoiseKind::awgn;
    double attenuation_db = 0.0;
    double duration_ms = 2.0;
};

struct SweepConfig {
    std::uint64_t master_seed = 1;
    int num_scenarios = 0;
    std::vector<double> snr_db{0.0};
    std::vector<NoiseKind> noise_kinds{NoiseKind::awgn};
    std::vector<double> attenuation_db{0.0};
    std::vector<double> duration_ms{2.0};
    std::vector<Variant> variants = all_variants();
    std::string bank_preset = "2g4_100m";
    FrameSpec frame;
    InterferenceConfig interference;
    double max_cfo_hz = 1000.0;
    BaselineDetectorParams detector;
    RefineParams refine;
    double iou_thresh = 0.5;
    int stft_size = 1024;
    int stft_hop = 256;
    std::size_t max_time_bins = 4096;  // the hop grows for long captures
    // Explicit scenarios; when empty they are generated from the axes above.
    std::vector<Scenario> scenarios;

    void validate() const;
};

SweepConfig load_sweep_config(const std::string& path);
SweepConfig sweep_config_from_json(const std::string& text, const std::string& source = "<string>");

// Per-scenario RNG seed from (master seed, scenario id).
std::uint64_t scenario_seed(std::uint64_t master_seed, int scenario_id);

// Scenario i cycles through the cartesian product of the axes.
std::vector<Scenario> expand_scenarios(const SweepConfig& cfg);

struct ScenarioCapture {
    Scenario scenario;
    CaptureTruth truth;
    double frame_center_hz = 0.0;
    std::int64_t frame_start = 0;  // capture samples
    bool has_fhss = false;
    bool fhss_in_band = false;
};

ScenarioCapture build_scenario(const SweepConfig& cfg, const Scenario& sc);

// ---------------------------------------------------------------------------
// Pipelines

struct PipelineOutput {
    std::vector<BoundingBox> boxes;
    double latency_s = 0.0;
};

ProtocolPriors priors_for(const SweepConfig& cfg);

// The four algorithm variants on one capture. `bank` must match the capture rate.
std::vector<PipelineOutput> run_variants(const ComplexSignal& capture, const FilterBank& bank,
                                         const ProtocolPriors& priors, const SweepConfig& cfg,
                                         const std::vector<Variant>& variants);

// ---------------------------------------------------------------------------
// Sweeps

struct ReportRow {
    int scenario_id = 0;
    double snr_db = 0.0;
    NoiseKind noise_kind = NoiseKind::awgn;
    double attenuation_db = 0.0;
    double duration_ms = 0.0;
    Variant variant = Variant::baseline;
    int num_truth = 0;
    int num_dets = 0;
    MatchScore score;
    double latency_s = 0.0;
    double fps = 0.0;
    std::string error;
};

struct EvalReport {
    std::vector<ReportRow> rows;

    std::string to_csv(bool include_timing = true) const;
    std::string summary_json() const;
    // Mean IoU per variant over all rows of that variant.
    double mean_iou(Variant v) const;
    std::vector<double> iou_column(Variant v) const;
};

EvalReport run_sweep(const SweepConfig& cfg, int workers = 1);

// Percentile bootstrap lower bound of mean(a - b) for paired samples.
double bootstrap_mean_diff_lower(const std::vector<double>& a, const std::vector<double>& b, double level,
                                 int resamples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Time-refinement corpus

// One frame plus an in-band FHSS burst overlapping the head or the tail of the
// frame, clear of the ZC symbols. Burst power is `burst_rel_db` over the
// in-band noise power.
struct RefineCaseConfig {
    std::string bank_preset = "2g4_100m";
    FrameSpec frame;
    double capture_ms = 2.5;
    double burst_rel_db = 10.0;
    double burst_min_ms = 1.0;
    double burst_max_ms = 1.6;
    double burst_min_bw_hz = 1e6;
    double burst_max_bw_hz = 5e6;
    bool with_burst = true;
};

struct RefineCase {
    std::vector<CorrelationTrace> traces;  // one per ZC root, rate B
    std::int64_t true_start = 0;           // rate B
    double snr_db = 0.0;
    bool burst_at_head = false;
};

RefineCase build_refine_case(const RefineCaseConfig& cfg, std::uint64_t seed, double snr_db);

// Located within +-cp_normal samples of the true start. Degenerate
// refinement counts as a miss.
bool refine_case_success(const RefineCase& c, const FrameSpec& spec, RefineMode mode, const RefineParams& params);

// ---------------------------------------------------------------------------
// Speed

struct SpeedRow {
    double duration_ms = 0.0;
    double latency_s = 0.0;       // median over repeats
    double fps = 0.0;             // captures per second
    double latency_per_signal_s = 0.0;  // latency per second of signal
    double latency_cv = 0.0;      // coefficient of variation over repeats
};

using Pipeline = std::function<void(const ComplexSignal&)>;

// Times `pipeline` on one capture per duration after a warm-up run.
std::vector<SpeedRow> measure_speed(const Pipeline& pipeline, const std::vector<double>& durations_ms,
                                    int repeats, const SweepConfig& cfg);

// Full TF pipeline (filter bank, TFI, detection, correction) as a Pipeline.
Pipeline full_pipeline(const SweepConfig& cfg);

std::string speed_to_csv(const std::vector<SpeedRow>& rows);

}  // namespace dronerid::eval
