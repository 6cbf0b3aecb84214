#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dronerid/box_correct.hpp"
#include "dronerid/detector.hpp"
#include "dronerid/eval.hpp"
#include "dronerid/filter_bank.hpp"
#include "dronerid/iq_file.hpp"
#include "dronerid/sync_demod.hpp"
#include "dronerid/tf_analysis.hpp"
#include "scenario_file.hpp"

namespace dronerid::cli {

namespace {

nlohmann::json read_json(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorCode::io_failed, "cannot open " + path);
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::parse_failed, path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCode::io_failed, "cannot open " + path);
    os << text;
    require(static_cast<bool>(os), ErrorCode::io_failed, "write failed for " + path);
}

ComplexSignal load_capture(const std::string& path, double rate) {
    return read_cf32(path, rate > 0.0 ? std::optional<double>(rate) : std::nullopt);
}

// Bank from a file, a preset name, or designed from priors at the capture rate.
FilterBank resolve_bank(const std::string& bank_path, const std::string& preset, const ProtocolPriors* priors,
                        double fs) {
    if (!bank_path.empty()) return load_filter_bank(bank_path);
    if (!preset.empty()) return preset_filter_bank(preset);
    require(priors != nullptr, ErrorCode::configuration, "need --bank, --preset or --priors");
    return design_filter_bank(priors->freq_prior, fs);
}

int adaptive_hop(std::size_t len, int fft, int hop, std::size_t max_bins) {
    if (max_bins < 2 || len <= static_cast<std::size_t>(fft)) return hop;
    const std::size_t span = len - static_cast<std::size_t>(fft);
    return std::max(hop, static_cast<int>((span + max_bins - 2) / (max_bins - 1)));
}

struct TfiOpts {
    int fft = 1024;
    int hop = 256;
    std::size_t max_bins = 4096;
};

void add_tfi_opts(CLI::App* c, TfiOpts& o) {
    c->add_option("--fft", o.fft, "STFT size")->check(CLI::PositiveNumber);
    c->add_option("--hop", o.hop, "STFT hop (raised for long captures)")->check(CLI::PositiveNumber);
    c->add_option("--max-time-bins", o.max_bins, "Upper bound on TFI columns");
}

}  // namespace

// ---------------------------------------------------------------------------

void register_synth(CLI::App& app, Globals& g) {
    struct Opts {
        std::string scenario, out, truth_out;
        double snr = 0.0;
        double duration_ms = 0.0;
        std::string noise;
    };
    auto o = std::make_shared<Opts>();
    auto* c = app.add_subcommand("synth", "Synthesize a capture with ground truth");
    c->add_option("--scenario", o->scenario, "Scenario JSON")->check(CLI::ExistingFile);
    c->add_option("--out", o->out, "Output .cf32 (sidecar written to <out>.json)")->required();
    c->add_option("--truth-out", o->truth_out, "Truth boxes and payloads JSON");
    auto* snr = c->add_option("--snr", o->snr, "In-band SNR, dB (overrides the file)");
    auto* dur = c->add_option("--duration-ms", o->duration_ms, "Capture duration (overrides the file)");
    auto* noise = c->add_option("--noise", o->noise, "awgn | rayleigh | gamma | impulse (overrides the file)");
    c->callback([o, &g, snr, dur, noise] {
        nlohmann::json s = o->scenario.empty() ? nlohmann::json::object() : read_json(o->scenario);
        if (snr->count()) s["snr_db"] = o->snr;
        if (dur->count()) s["duration_ms"] = o->duration_ms;
        if (noise->count()) s["noise_kind"] = o->noise;
        const auto res = synthesize_from_json(s, g.seed);
        write_cf32(res.truth.signal, o->out);
        if (!o->truth_out.empty()) {
            auto j = nlohmann::ordered_json::parse(boxes_to_json(res.truth.truth_boxes()));
            j["frames"] = nlohmann::ordered_json::array();
            for (std::size_t i = 0; i < res.truth.frames.size(); ++i) {
                nlohmann::ordered_json f;
                f["start_sample"] = res.truth.frames[i].start_sample;
                f["payload"] = payload_to_json(res.payloads[i]);
                j["frames"].push_back(f);
            }
            write_text(o->truth_out, j.dump(2) + "\n");
        }
    });
}

void register_tfi(CLI::App& app, Globals&) {
    struct Opts {
        std::string in, png, raw, bank, preset, cmap = "viridis";
        double rate = 0.0, range_db = 60.0;
        TfiOpts tfi;
    };
    auto o = std::make_shared<Opts>();
    auto* c = app.add_subcommand("tfi", "Compute a time-frequency image and export it");
    c->add_option("--in", o->in, "Input .cf32")->required()->check(CLI::ExistingFile);
    c->add_option("--rate", o->rate, "Sample rate when the capture has no sidecar");
    c->add_option("--bank", o->bank, "Filter bank JSON applied first")->check(CLI::ExistingFile);
    c->add_option("--preset", o->preset, "Filter bank preset applied first");
    c->add_option("--png", o->png, "PNG output (sidecar <png>.json)");
    c->add_option("--raw", o->raw, "Raw float32 output");
    c->add_option("--colormap", o->cmap, "gray | viridis");
    c->add_option("--range-db", o->range_db, "PNG dynamic range")->check(CLI::PositiveNumber);
    add_tfi_opts(c, o->tfi);
    c->callback([o] {
        require(!o->png.empty() || !o->raw.empty(), ErrorCode::configuration, "nothing to write: give --png or --raw");
        auto x = load_capture(o->in, o->rate);
        if (!o->bank.empty() || !o->preset.empty()) x = apply_filter_bank(x, resolve_bank(o->bank, o->preset, nullptr, 0));
        const auto t = stft(x, o->tfi.fft, adaptive_hop(x.size(), o->tfi.fft, o->tfi.hop, o->tfi.max_bins));
        if (!o->png.empty()) write_tfi_png(t, o->png, parse_colormap(o->cmap), o->range_db);
        if (!o->raw.empty()) write_tfi_raw(t, o->raw);
    });
}

void register_detect(CLI::App& app, Globals&) {
    struct Opts {
        std::string in, bank, preset, out;
        double rate = 0.0;
        BaselineDetectorParams det;
        TfiOpts tfi;
    };
    auto o = std::make_shared<Opts>();
    auto* c = app.add_subcommand("detect", "Baseline energy detector on the (optionally filtered) TFI");
    c->add_option("--in", o->in, "Input .cf32")->required()->check(CLI::ExistingFile);
    c->add_option("--rate", o->rate, "Sample rate when the capture has no sidecar");
    c->add_option("--bank", o->bank, "Filter bank JSON applied before detection")->check(CLI::ExistingFile);
    c->add_option("--preset", o->preset, "Filter bank preset applied before detection");
    c->add_option("--boxes-out", o->out, "Boxes JSON output (stdout when omitted)");
    c->add_option("--percentile", o->det.energy_percentile, "Seed percentile")->check(CLI::Range(0.0, 100.0));
    c->add_option("--min-area", o->det.min_area, "Minimum region area, cells");
    c->add_option("--grow-db", o->det.grow_db, "Grow threshold over the median, dB");
    add_tfi_opts(c, o->tfi);
    c->callback([o] {
        auto x = load_capture(o->in, o->rate);
        if (!o->bank.empty() || !o->preset.empty()) x = apply_filter_bank(x, resolve_bank(o->bank, o->preset, nullptr, 0));
        const auto t = stft(x, o->tfi.fft, adaptive_hop(x.size(), o->tfi.fft, o->tfi.hop, o->tfi.max_bins));
        write_text(o->out, boxes_to_json(baseline_detect(t, o->det)));
    });
}

void register_correct(CLI::App& app, Globals&) {
    struct Opts {
        std::string in, boxes, priors, bank, preset, out, mode = "segmented", refine_file;
        double rate = 0.0;
        RefineParams refine;
        bool all = false, freq_only = false, prefiltered = false;
    };
    auto o = std::make_shared<Opts>();
    auto* c = app.add_subcommand("correct", "Correct boxes with protocol priors");
    c->add_option("--in", o->in, "Capture .cf32 the boxes came from")->required()->check(CLI::ExistingFile);
    c->add_option("--rate", o->rate, "Sample rate when the capture has no sidecar");
    c->add_option("--boxes", o->boxes, "Boxes JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--priors", o->priors, "Protocol priors JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--bank", o->bank, "Filter bank JSON (default: designed from the priors)")->check(CLI::ExistingFile);
    c->add_option("--preset", o->preset, "Filter bank preset");
    c->add_flag("--prefiltered", o->prefiltered, "The capture is already filter-bank output");
    c->add_option("--out", o->out, "Corrected boxes JSON (stdout when omitted)");
    c->add_option("--refine-config", o->refine_file, "JSON with alpha, beta, segment_len, tau_conf")
        ->check(CLI::ExistingFile);
    auto* alpha = c->add_option("--alpha", o->refine.alpha, "Refinement weighting factor");
    auto* beta = c->add_option("--beta", o->refine.beta, "Gap-merge distance, segments");
    auto* seg = c->add_option("--segment-len", o->refine.segment_len, "Segment length P, samples");
    auto* tau = c->add_option("--tau-conf", o->refine.tau_conf, "Confidence below which time is corrected");
    c->add_option("--mode", o->mode, "segmented | direct | none")
        ->check(CLI::IsMember({"segmented", "direct", "none"}));
    c->add_flag("--all", o->all, "Time-correct every box regardless of confidence");
    c->add_flag("--freq-only", o->freq_only, "Frequency correction only");
    c->callback([o, alpha, beta, seg, tau] {
        RefineParams rp;
        if (!o->refine_file.empty()) {
            const auto j = read_json(o->refine_file);
            rp.alpha = j.value("alpha", rp.alpha);
            rp.beta = j.value("beta", rp.beta);
            rp.segment_len = j.value("segment_len", rp.segment_len);
            rp.tau_conf = j.value("tau_conf", rp.tau_conf);
        }
        if (alpha->count()) rp.alpha = o->refine.alpha;
        if (beta->count()) rp.beta = o->refine.beta;
        if (seg->count()) rp.segment_len = o->refine.segment_len;
        if (tau->count()) rp.tau_conf = o->refine.tau_conf;
        rp.validate();

        const auto priors = load_priors(o->priors);
        auto x = load_capture(o->in, o->rate);
        if (!o->prefiltered) x = apply_filter_bank(x, resolve_bank(o->bank, o->preset, &priors, x.sample_rate_hz()));
        CorrectionOptions opts;
        opts.refine = rp;
        opts.mode = o->mode == "segmented" ? RefineMode::segmented
                    : o->mode == "direct"  ? RefineMode::direct
                                           : RefineMode::none;
        opts.correct_time = !o->freq_only;
        opts.ignore_confidence = o->all;
        write_text(o->out, boxes_to_json(correct_all(x, load_boxes(o->boxes), priors, opts), true));
    });
}

void register_decode(CLI::App& app, Globals&) {
    struct Opts {
        std::string in, boxes, priors, out;
        double rate = 0.0;
        std::string anchor = "zc";
    };
    auto o = std::make_shared<Opts>();
    auto* c = app.add_subcommand("decode", "Synchronize, demodulate and decode the frame in each box");
    c->add_option("--in", o->in, "Capture .cf32")->required()->check(CLI::ExistingFile);
    c->add_option("--rate", o->rate, "Sample rate when the capture has no sidecar");
    c->add_option("--boxes", o->boxes, "Corrected boxes JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--priors", o->priors, "Protocol priors JSON (frame numerology)")->check(CLI::ExistingFile);
    c->add_option("--out", o->out, "JSON lines output (stdout when omitted)");
    c->add_option("--cfo-anchor", o->anchor, "cp | zc")->check(CLI::IsMember({"cp", "zc"}));
    c->callback([o] {
        const auto x = load_capture(o->in, o->rate);
        FrameSpec spec;
        if (!o->priors.empty()) spec = load_priors(o->priors).frame_spec;
        SyncOptions so;
        so.anchor = o->anchor == "cp" ? CfoAnchor::cp : CfoAnchor::zc;
        std::ostringstream lines;
        const auto boxes = load_boxes(o->boxes);
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            nlohmann::ordered_json j;
            j["box"] = i;
            try {
                const auto d = decode_frame(x, boxes[i], spec, codec::CodecConfig{}, so);
                j["frame_start_s"] = static_cast<double>(d.sync.fine_start) / spec.sample_rate_hz() + boxes[i].t_min_s;
                j["cfo_hz"] = d.sync.cfo_hz;
                j["crc_ok"] = d.block.crc_ok;
                j["iterations"] = d.block.iterations;
                if (d.payload) {
                    j["payload"] = payload_to_json(d.payload->fields);
                    j["serial_prefix_known"] = d.payload->serial_prefix_known;
                }
            } catch (const Error& e) {
                j["crc_ok"] = false;
                j["error"] = std::string(to_string(e.code())) + ": " + e.what();
            }
            lines << j.dump() << "\n";
        }
        write_text(o->out, lines.str());
    });
}

void register_eval(CLI::App& app, Globals&) {
    struct Opts {
        std::string dets, truth, out;
        double iou = 0.5;
    };
    auto o = std::make_shared<Opts>();
    auto* c = app.add_subcommand("eval", "Score detections against truth boxes");
    c->add_option("--dets", o->dets, "Detected boxes JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--truth", o->truth, "Truth boxes JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--iou", o->iou, "IoU threshold for a true positive")->check(CLI::Range(0.0, 1.0));
    c->add_option("--out", o->out, "Score JSON (stdout when omitted)");
    c->callback([o] {
        const auto s = eval::match_and_score(load_boxes(o->dets), load_boxes(o->truth), o->iou);
        nlohmann::ordered_json j{{"tp", s.tp},
                                 {"fp", s.fp},
                                 {"fn", s.fn},
                                 {"precision", s.precision},
                                 {"recall", s.recall},
                                 {"mean_iou", s.mean_iou},
                                 {"wem", s.wem},
                                 {"precision_undefined", s.precision_undefined},
                                 {"recall_undefined", s.recall_undefined}};
        write_text(o->out, j.dump(2) + "\n");
    });
}

void register_sweep(CLI::App& app, Globals& g) {
    struct Opts {
        std::string config, csv, summary, speed_csv;
        int workers = 1;
        int scenarios = -1;
        bool no_timing = false;
        std::vector<double> speed_durations{1, 2, 5, 10, 20, 50};
        int repeats = 5;
    };
    auto o = std::make_shared<Opts>();
    auto* c = app.add_subcommand("sweep", "Run a scenario sweep over all algorithm variants");
    c->add_option("--config", o->config, "Sweep config JSON")->check(CLI::ExistingFile);
    c->add_option("--csv", o->csv, "Per-row CSV output (stdout when omitted)");
    c->add_option("--summary", o->summary, "JSON summary output");
    c->add_option("--workers", o->workers, "Worker threads")->check(CLI::PositiveNumber);
    c->add_option("--scenarios", o->scenarios, "Number of generated scenarios (overrides the file)");
    c->add_flag("--no-timing", o->no_timing, "Leave latency/fps columns out of the CSV");
    c->add_option("--speed-csv", o->speed_csv, "Also measure speed over durations and write this CSV");
    c->add_option("--speed-durations", o->speed_durations, "Durations for --speed-csv, ms");
    c->add_option("--repeats", o->repeats, "Timed repeats per duration")->check(CLI::PositiveNumber);
    c->callback([o, &g] {
        eval::SweepConfig cfg = o->config.empty() ? eval::SweepConfig{} : eval::load_sweep_config(o->config);
        if (g.seed_set) {
            cfg.master_seed = g.seed;
            for (auto& s : cfg.scenarios) s.seed = eval::scenario_seed(cfg.master_seed, s.id);
        }
        if (o->scenarios >= 0) cfg.num_scenarios = o->scenarios;
        const auto rep = eval::run_sweep(cfg, o->workers);
        write_text(o->csv, rep.to_csv(!o->no_timing));
        if (!o->summary.empty()) write_text(o->summary, rep.summary_json());
        if (!o->speed_csv.empty()) {
            const auto rows = eval::measure_speed(eval::full_pipeline(cfg), o->speed_durations, o->repeats, cfg);
            write_text(o->speed_csv, eval::speed_to_csv(rows));
        }
    });
}

void register_bank(CLI::App& app, Globals&) {
    struct Opts {
        std::string preset, priors, out, priors_out;
        double rate = 0.0, stopband_db = 60.0, transition_hz = 1e6;
        bool response = false, list = false;
    };
    auto o = std::make_shared<Opts>();
    auto* c = app.add_subcommand("bank", "Design or export a filter bank");
    c->add_option("--preset", o->preset, "Preset name");
    c->add_option("--priors", o->priors, "Priors JSON (needs --rate)")->check(CLI::ExistingFile);
    c->add_option("--rate", o->rate, "Sample rate for --priors, Hz");
    c->add_option("--stopband-db", o->stopband_db, "Stopband attenuation")->check(CLI::PositiveNumber);
    c->add_option("--transition-hz", o->transition_hz, "Transition width")->check(CLI::PositiveNumber);
    c->add_option("--out", o->out, "Filter bank JSON output");
    c->add_option("--priors-out", o->priors_out, "Write the matching priors JSON");
    c->add_flag("--response", o->response, "Print the magnitude response in dB over the capture band");
    c->add_flag("--list", o->list, "List preset names");
    c->callback([o] {
        if (o->list) {
            for (const auto& n : filter_bank_preset_names()) std::cout << n << "\n";
            return;
        }
        FreqPrior prior;
        double fs = o->rate;
        if (!o->preset.empty()) {
            prior = preset_prior(o->preset, &fs);
        } else {
            require(!o->priors.empty() && o->rate > 0.0, ErrorCode::configuration, "give --preset or --priors with --rate");
            prior = load_priors(o->priors).freq_prior;
        }
        const auto bank = design_filter_bank(prior, fs, o->stopband_db, o->transition_hz);
        if (!o->out.empty()) save_filter_bank(bank, o->out);
        if (!o->priors_out.empty()) {
            ProtocolPriors p;
            p.freq_prior = prior;
            save_priors(p, o->priors_out);
        }
        if (o->response) {
            std::cout << "freq_hz,mag_db\n";
            for (int i = -500; i <= 500; ++i) {
                const double f = i * fs / 1000.0;
                std::cout << f << ',' << 20.0 * std::log10(std::abs(bank_response(bank, f)) + 1e-300) << "\n";
            }
        }
    });
}

}  // namespace dronerid::cli
