#pragma once

#include <string>

namespace dronerid {

// Time/frequency rectangle: seconds from capture start, Hz relative to the
// capture center.
struct BoundingBox {
    double t_min_s = 0.0;
    double t_max_s = 0.0;
    double f_min_hz = 0.0;
    double f_max_hz = 0.0;
    double confidence = 0.0;
    std::string label = "drone_broadcast";

    struct Corrected {
        bool freq = false;
        bool time = false;
        bool time_clipped = false;
        bool operator==(const Corrected&) const = default;
    } corrected;

    double duration_s() const { return t_max_s - t_min_s; }
    double bandwidth_hz() const { return f_max_hz - f_min_hz; }
    double center_hz() const { return 0.5 * (f_min_hz + f_max_hz); }
    double area() const { return duration_s() * bandwidth_hz(); }
    bool valid() const;

    bool operator==(const BoundingBox&) const = default;
};

}  // namespace dronerid
