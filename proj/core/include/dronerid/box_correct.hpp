#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dronerid/box.hpp"
#include "dronerid/filter_bank.hpp"
#include "dronerid/signal.hpp"

namespace dronerid {

struct ProtocolPriors {
    FreqPrior freq_prior;
    FrameSpec frame_spec;

    double frame_duration_s() const { return frame_spec.duration_s(); }
    // Symbols preceding the ZC symbol that carries root `which` (0 or 1).
    int lambda(int which = 0) const { return frame_spec.zc_symbol_indices[which]; }
    int n_normal() const { return frame_spec.cp_normal; }
    int n_extend() const { return frame_spec.cp_extend; }
    void validate() const;
};

void save_priors(const ProtocolPriors& priors, const std::string& path);
ProtocolPriors load_priors(const std::string& path);
std::string priors_to_json(const ProtocolPriors& priors);
ProtocolPriors priors_from_json(const std::string& text, const std::string& source = "<string>");

struct RefineParams {
    double alpha = 1.2;
    int beta = 3;
    std::size_t segment_len = 400;  // P
    double tau_conf = 0.5;
    void validate() const;
};

struct CorrelationTrace {
    std::vector<double> values;   // gamma(m)
    std::vector<double> refined;  // gamma-hat(m)
    std::int64_t peak_index = 0;  // argmax of refined, smallest m on ties
    std::vector<double> segment_energy;          // E(q), segmented refinement only
    std::vector<std::uint8_t> segment_suppressed;  // q in I after merging
    double mean_segment_energy = 0.0;            // E_Q
};

std::int64_t argmax_first(const std::vector<double>& v);

// gamma(m) = |sum_k conj(t[k]) x[k + m]| for m in [0, L - len(t)).
CorrelationTrace zc_cross_correlate(std::span<const Complex> x, std::span<const Complex> templ);
CorrelationTrace zc_cross_correlate(const ComplexSignal& x, std::span<const Complex> templ);

// Segment means E(q) over length-P segments (the last one possibly shorter),
// I = {q : E(q) >= alpha E_Q} with gaps below beta filled, gamma zeroed on I.
// Throws refinement_degenerate when every segment lands in I.
CorrelationTrace segmented_refine(const CorrelationTrace& trace, const RefineParams& params);

// Elementwise ablation: gamma-hat(m) = 0 where gamma(m) >= alpha E_Q.
CorrelationTrace direct_refine(const CorrelationTrace& trace, double alpha, std::size_t segment_len = 400);

// Nearest prior band; width exactly B.
BoundingBox correct_frequency(const BoundingBox& box, const FreqPrior& prior);

// Time fields from the trace peak. `trace_rate_hz` is the rate the trace was
// computed at and `which_root` selects lambda. The result is clipped to
// [0, capture_duration_s] with corrected.time_clipped set.
BoundingBox correct_time(const BoundingBox& box, const CorrelationTrace& trace, const ProtocolPriors& priors,
                         double trace_rate_hz, double capture_duration_s, int which_root = 0);

enum class RefineMode { none, segmented, direct };

struct CorrectionOptions {
    RefineParams refine;
    RefineMode mode = RefineMode::segmented;
    bool correct_time = true;
    // Time-correct every box regardless of confidence.
    bool ignore_confidence = false;
};

struct LocateResult {
    bool ok = false;
    std::int64_t frame_start = 0;  // at rate B
    int root_index = 0;
    std::int64_t peak_index = 0;
    double peak_value = 0.0;
    bool degenerate = false;
};

// Refines one trace per ZC root and keeps the stronger refined peak. A root
// whose segmented refinement is degenerate is skipped; ok is false when no
// root is left.
LocateResult locate_frame(const std::vector<CorrelationTrace>& traces, const FrameSpec& spec, RefineMode mode,
                          const RefineParams& params);

// One correlation trace per ZC root for the band centered on f_hz, at rate B.
std::vector<CorrelationTrace> band_traces(const ComplexSignal& filtered, const FrameSpec& spec, double f_hz);

// Per band, cached: one trace per ZC root.
class TimeCorrector {
public:
    TimeCorrector(const ComplexSignal& filtered, const ProtocolPriors& priors);

    using Result = LocateResult;

    // Frame start estimate for the band centered on `f_hz`.
    Result locate(double f_hz, RefineMode mode, const RefineParams& params);
    const std::vector<CorrelationTrace>& traces(double f_hz);
    double rate_hz() const { return priors_.frame_spec.sample_rate_hz(); }

private:
    const ComplexSignal& sig_;
    ProtocolPriors priors_;
    std::map<double, std::vector<CorrelationTrace>> cache_;
};

BoundingBox correct_box(const BoundingBox& box, TimeCorrector& corrector, const ProtocolPriors& priors,
                        const CorrectionOptions& opts, double capture_duration_s);

std::vector<BoundingBox> correct_all(const ComplexSignal& filtered, const std::vector<BoundingBox>& boxes,
                                     const ProtocolPriors& priors, const RefineParams& params);
std::vector<BoundingBox> correct_all(const ComplexSignal& filtered, const std::vector<BoundingBox>& boxes,
                                     const ProtocolPriors& priors, const CorrectionOptions& opts);

}  // namespace dronerid
