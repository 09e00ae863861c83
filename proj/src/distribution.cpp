#include "toa/distribution.hpp"

#include <algorithm>

namespace toa {

ToaDistribution::ToaDistribution(TimeGrid tg, RVec p, double p_none)
    : times(tg), density(std::move(p)), no_detect(p_none)
{
    TOA_REQUIRE(density.size() == times.size(), "one density sample per time-grid point");
}

double ToaDistribution::conditional_mean() const
{
    RVec tp(density.size());
    for (std::size_t i = 0; i < tp.size(); ++i) tp[i] = times.t(i) * density[i];
    double mass = detected_mass();
    if (!(mass > 0.0)) throw NumericalError("no detected mass, conditional mean undefined");
    return integrate(tp, times.dt()) / mass;
}

double ToaDistribution::peak_time() const
{
    auto it = std::max_element(density.begin(), density.end());
    std::size_t i = static_cast<std::size_t>(it - density.begin());
    double t = times.t(i);
    if (i == 0 || i + 1 >= density.size()) return t;
    double a = density[i - 1], b = density[i], c = density[i + 1];
    double denom = a - 2.0 * b + c;
    if (denom == 0.0) return t;
    return t + 0.5 * times.dt() * (a - c) / denom;
}

}  // namespace toa
