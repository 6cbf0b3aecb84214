#include "dronerid/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dronerid {

namespace {

// Separable box blur of the power image, clamped at the edges.
std::vector<double> smoothed_db(const TimeFrequencyImage& tfi, int st, int sf) {
    const std::size_t nt = tfi.time_bins, nf = tfi.freq_bins;
    std::vector<double> pw(tfi.magnitudes.size());
    for (std::size_t i = 0; i < pw.size(); ++i) pw[i] = tfi.magnitudes[i] * tfi.magnitudes[i];

    auto blur = [](std::vector<double>& v, std::size_t outer, std::size_t inner, std::size_t outer_stride,
                   std::size_t inner_stride, int extent) {
        if (extent <= 1) return;
        const int r = extent / 2;
        std::vector<double> line(inner);
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < inner; ++i) line[i] = v[o * outer_stride + i * inner_stride];
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t lo = i >= static_cast<std::size_t>(r) ? i - r : 0;
                const std::size_t hi = std::min(inner - 1, i + r);
                double acc = 0.0;
                for (std::size_t k = lo; k <= hi; ++k) acc += line[k];
                v[o * outer_stride + i * inner_stride] = acc / static_cast<double>(hi - lo + 1);
            }
        }
    };
    blur(pw, nt, nf, nf, 1, sf);
    blur(pw, nf, nt, 1, nf, st);

    double floor_val = 0.0;
    for (double p : pw)
        if (p > 0.0 && (floor_val == 0.0 || p < floor_val)) floor_val = p;
    if (floor_val == 0.0) floor_val = 1e-300;
    for (auto& p : pw) p = 10.0 * std::log10(std::max(p, floor_val));
    return pw;
}

// Subtracts a per-frequency noise floor (a low percentile over time), so
// filtered stopbands and passbands share one scale.
void whiten_columns(std::vector<double>& db, std::size_t nt, std::size_t nf, double pct) {
    if (pct <= 0.0) return;
    std::vector<double> col(nt);
    for (std::size_t f = 0; f < nf; ++f) {
        for (std::size_t t = 0; t < nt; ++t) col[t] = db[t * nf + f];
        const double floor_db = dsp::percentile(col, pct);
        for (std::size_t t = 0; t < nt; ++t) db[t * nf + f] -= floor_db;
    }
}

}  // namespace

BoundingBox tfi_extent(const TimeFrequencyImage& tfi) {
    BoundingBox b;
    b.t_min_s = tfi.time_of_bin(-0.5);
    b.t_max_s = tfi.time_of_bin(static_cast<double>(tfi.time_bins) - 0.5);
    b.f_min_hz = tfi.freq_of_bin(-0.5);
    b.f_max_hz = tfi.freq_of_bin(static_cast<double>(tfi.freq_bins) - 0.5);
    b.confidence = 1.0;
    return b;
}

std::vector<DetectedRegion> detect_regions(const TimeFrequencyImage& tfi, const BaselineDetectorParams& p) {
    std::vector<DetectedRegion> boxes;
    if (tfi.time_bins == 0 || tfi.freq_bins == 0) return boxes;
    const std::size_t nt = tfi.time_bins, nf = tfi.freq_bins;
    auto db = smoothed_db(tfi, p.smooth_time, p.smooth_freq);
    whiten_columns(db, nt, nf, p.floor_percentile);

    const double med = dsp::median(db);
    const double top = *std::max_element(db.begin(), db.end());
    if (top - med <= 1e-9) return boxes;  // flat image, nothing stands out
    const double seed_thr = dsp::percentile(db, p.energy_percentile);
    const double grow_thr = std::max(med + p.grow_db, top - p.range_db);

    std::vector<int> label(db.size(), -1);
    std::vector<std::size_t> stack;
    int next = 0;
    for (std::size_t start = 0; start < db.size(); ++start) {
        if (label[start] >= 0 || db[start] < grow_thr) continue;
        // Flood fill the grow mask; keep the region only if it holds a seed.
        stack.assign(1, start);
        label[start] = next;
        std::size_t t_lo = nt, t_hi = 0, f_lo = nf, f_hi = 0, area = 0;
        bool seeded = false;
        double sum = 0.0;
        while (!stack.empty()) {
            const std::size_t c = stack.back();
            stack.pop_back();
            const std::size_t t = c / nf, f = c % nf;
            t_lo = std::min(t_lo, t);
            t_hi = std::max(t_hi, t);
            f_lo = std::min(f_lo, f);
            f_hi = std::max(f_hi, f);
            ++area;
            sum += db[c];
            seeded = seeded || db[c] >= seed_thr;
            const std::size_t nb[4] = {t > 0 ? c - nf : c, t + 1 < nt ? c + nf : c, f > 0 ? c - 1 : c,
                                       f + 1 < nf ? c + 1 : c};
            for (std::size_t q : nb) {
                if (q != c && label[q] < 0 && db[q] >= grow_thr) {
                    label[q] = next;
                    stack.push_back(q);
                }
            }
        }
        ++next;
        if (!seeded || area < p.min_area) continue;
        DetectedRegion r;
        auto& b = r.box;
        b.t_min_s = tfi.time_of_bin(static_cast<double>(t_lo) - 0.5);
        b.t_max_s = tfi.time_of_bin(static_cast<double>(t_hi) + 0.5);
        b.f_min_hz = tfi.freq_of_bin(static_cast<double>(f_lo) - 0.5);
        b.f_max_hz = tfi.freq_of_bin(static_cast<double>(f_hi) + 0.5);
        r.mean_contrast_db = sum / static_cast<double>(area) - med;
        r.area = area;
        // Fraction of the region's power above the floor, discounted when the
        // region covers less than the reference extent.
        const double ref_cells = std::max(1.0, p.reference_duration_s / tfi.hop_s()) *
                                 std::max(1.0, p.reference_bandwidth_hz / tfi.bin_width_hz());
        const double above = 1.0 - std::pow(10.0, -std::max(0.0, r.mean_contrast_db) / 10.0);
        const double extent = std::sqrt(std::min(1.0, static_cast<double>(area) / ref_cells));
        b.confidence = std::clamp(above * extent, 0.0, 1.0);
        boxes.push_back(r);
    }
    return boxes;
}

std::vector<BoundingBox> baseline_detect(const TimeFrequencyImage& tfi, const BaselineDetectorParams& p) {
    std::vector<BoundingBox> out;
    for (auto& r : detect_regions(tfi, p)) out.push_back(r.box);
    return out;
}

std::vector<BoundingBox> baseline_detect(const TimeFrequencyImage& tfi, double energy_percentile, std::size_t min_area) {
    BaselineDetectorParams p;
    p.energy_percentile = energy_percentile;
    p.min_area = min_area;
    return baseline_detect(tfi, p);
}

std::string boxes_to_json(const std::vector<BoundingBox>& boxes, bool with_corrected) {
    nlohmann::ordered_json j;
    j["boxes"] = nlohmann::ordered_json::array();
    for (const auto& b : boxes) {
        nlohmann::ordered_json o;
        o["t_min_s"] = b.t_min_s;
        o["t_max_s"] = b.t_max_s;
        o["f_min_hz"] = b.f_min_hz;
        o["f_max_hz"] = b.f_max_hz;
        o["confidence"] = b.confidence;
        o["label"] = b.label;
        if (with_corrected) {
            o["corrected"] = {{"freq", b.corrected.freq}, {"time", b.corrected.time}};
            if (b.corrected.time_clipped) o["corrected"]["time_clipped"] = true;
        }
        j["boxes"].push_back(std::move(o));
    }
    return j.dump(2) + "\n";
}

std::vector<BoundingBox> boxes_from_json(const std::string& text, const std::string& source) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // Translate the byte offset into a line number for the diagnostic.
        const auto upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        fail(ErrorCode::parse_failed, source + ":" + std::to_string(line) + ": " + e.what());
    }
    require(j.is_object() && j.contains("boxes") && j["boxes"].is_array(), ErrorCode::parse_failed,
            source + ": expected an object with a \"boxes\" array");

    std::vector<BoundingBox> out;
    for (std::size_t i = 0; i < j["boxes"].size(); ++i) {
        const auto& o = j["boxes"][i];
        const std::string where = source + ": boxes[" + std::to_string(i) + "]";
        require(o.is_object(), ErrorCode::parse_failed, where + " is not an object");
        auto num = [&](const char* key) {
            require(o.contains(key) && o[key].is_number(), ErrorCode::parse_failed,
                    where + "." + key + " missing or not a number");
            return o[key].get<double>();
        };
        BoundingBox b;
        b.t_min_s = num("t_min_s");
        b.t_max_s = num("t_max_s");
        b.f_min_hz = num("f_min_hz");
        b.f_max_hz = num("f_max_hz");
        b.confidence = num("confidence");
        require(o.contains("label") && o["label"].is_string(), ErrorCode::parse_failed,
                where + ".label missing or not a string");
        b.label = o["label"].get<std::string>();
        if (o.contains("corrected")) {
            const auto& c = o["corrected"];
            require(c.is_object(), ErrorCode::parse_failed, where + ".corrected is not an object");
            b.corrected.freq = c.value("freq", false);
            b.corrected.time = c.value("time", false);
            b.corrected.time_clipped = c.value("time_clipped", false);
        }
        require(b.t_min_s < b.t_max_s, ErrorCode::parse_failed, where + ": t_min_s must be < t_max_s");
        require(b.f_min_hz < b.f_max_hz, ErrorCode::parse_failed, where + ": f_min_hz must be < f_max_hz");
        require(b.confidence >= 0.0 && b.confidence <= 1.0, ErrorCode::parse_failed,
                where + ".confidence outside [0, 1]");
        out.push_back(std::move(b));
    }
    return out;
}

void save_boxes(const std::vector<BoundingBox>& boxes, const std::string& path, bool with_corrected) {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCode::io_failed, "cannot open " + path);
    os << boxes_to_json(boxes, with_corrected);
    require(static_cast<bool>(os), ErrorCode::io_failed, "write failed for " + path);
}

std::vector<BoundingBox> load_boxes(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorCode::io_failed, "cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return boxes_from_json(ss.str(), path);
}

}  // namespace dronerid
