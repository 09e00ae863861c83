#pragma once

#include "toa/core.hpp"

namespace toa {

// Arrival-time law on the sample space [0, T] u {N}: a sampled density on
// the time grid plus the isolated no-detection mass.
struct ToaDistribution {
    TimeGrid times;
    RVec density;
    double no_detect = 0.0;

    ToaDistribution(TimeGrid tg, RVec p, double p_none);

    double detected_mass() const { return integrate(density, times.dt()); }
    double total_mass() const { return detected_mass() + no_detect; }
    // First moment of the density divided by the detected mass.
    double conditional_mean() const;
    // Grid time at which the density is largest, refined by a parabola
    // through the neighbouring samples.
    double peak_time() const;
};

}  // namespace toa
