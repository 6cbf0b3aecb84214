#pragma once

#include <string>
#include <vector>

#include "dronerid/box.hpp"
#include "dronerid/tf_analysis.hpp"

namespace dronerid {

struct BaselineDetectorParams {
    double energy_percentile = 99.0;
    std::size_t min_area = 16;  // TFI cells
    int smooth_time = 3;        // box blur extent, bins
    int smooth_freq = 3;
    // Region growing keeps cells above max(median + grow_db, max - range_db).
    double grow_db = 6.0;
    double range_db = 30.0;
    // Per-frequency floor percentile over time, subtracted before thresholding;
    // 0 disables it.
    double floor_percentile = 20.0;
    // Region extent that earns full confidence.
    double reference_duration_s = 0.5e-3;
    double reference_bandwidth_hz = 9e6;
};

struct DetectedRegion {
    BoundingBox box;
    double mean_contrast_db = 0.0;  // region mean over the image median
    std::size_t area = 0;           // cells
};

std::vector<DetectedRegion> detect_regions(const TimeFrequencyImage& tfi, const BaselineDetectorParams& params = {});

// Percentile seeds grown into 4-connected regions of a smoothed dB TFI; one
// tight box per region. Deterministic; no randomness.
std::vector<BoundingBox> baseline_detect(const TimeFrequencyImage& tfi, const BaselineDetectorParams& params = {});
std::vector<BoundingBox> baseline_detect(const TimeFrequencyImage& tfi, double energy_percentile, std::size_t min_area);

// Time/frequency rectangle covered by a TFI.
BoundingBox tfi_extent(const TimeFrequencyImage& tfi);

// {"boxes":[{"t_min_s","t_max_s","f_min_hz","f_max_hz","confidence","label"}]}
// with an optional per-box "corrected" object.
std::string boxes_to_json(const std::vector<BoundingBox>& boxes, bool with_corrected = false);
std::vector<BoundingBox> boxes_from_json(const std::string& text, const std::string& source = "<string>");
void save_boxes(const std::vector<BoundingBox>& boxes, const std::string& path, bool with_corrected = false);
std::vector<BoundingBox> load_boxes(const std::string& path);

}  // namespace dronerid
