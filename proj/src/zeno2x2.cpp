#include <cmath>

#include "toa/histories.hpp"

namespace toa::histories {

Matrix2 regularised_propagator(const ZenoToyModel& model, double x, double t)
{
    TOA_REQUIRE(x >= model.y_rate && model.y_rate >= 0.0, "regulator rates must satisfy x >= y >= 0");
    TOA_REQUIRE(t >= 0.0, "time must be non-negative");
    const double y = model.y_rate, eps = model.epsilon_H;
    // exp(-M t) with M = [[x, i eps], [i eps, y]]; eigenvalues m -+ s.
    const double m = 0.5 * (x + y), d = 0.5 * (x - y);
    const cplx s = std::sqrt(cplx(d * d - eps * eps));
    Matrix2 K{};
    if (std::abs(s) * t < 1e-6) {
        cplx e = std::exp(-m * t);
        cplx S = t * e * (1.0 + s * s * t * t / 6.0);
        cplx C = e * (1.0 + s * s * t * t / 2.0);
        K[0][0] = C - S * d;
        K[1][1] = C + S * d;
        K[0][1] = K[1][0] = -S * I * eps;
        return K;
    }
    // The slow rate m - s = (xy + eps^2) / (m + s) without cancellation.
    const cplx slow = (x * y + eps * eps) / (m + s);
    const cplx a = std::exp(-slow * t), b = std::exp(-(m + s) * t);
    const cplx sd = s + d;
    K[0][0] = -a * eps * eps / (2.0 * s * sd) + b * sd / (2.0 * s);
    K[1][1] = a * sd / (2.0 * s) - b * eps * eps / (2.0 * s * sd);
    K[0][1] = K[1][0] = -(a - b) / (2.0 * s) * I * eps;
    return K;
}

Matrix2 zeno_robustness_2x2(const ZenoToyModel& model, double t)
{
    TOA_REQUIRE(model.x_rate >= model.y_rate && model.y_rate >= 0.0, "regulator rates must satisfy x >= y >= 0");
    TOA_REQUIRE(t >= 0.0, "time must be non-negative");
    if (t == 0.0) return Matrix2{{{0.0, 0.0}, {0.0, 1.0}}};
    double x = std::max(model.x_rate, 1.0);
    Matrix2 prev = regularised_propagator(model, x, t);
    for (int it = 0; it < 300; ++it) {
        x *= 10.0;
        Matrix2 cur = regularised_propagator(model, x, t);
        double diff = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) diff = std::max(diff, std::abs(cur[i][j] - prev[i][j]));
        if (diff < 1e-10) return cur;
        prev = cur;
    }
    throw NumericalError("zeno_robustness_2x2: regulator limit did not converge");
}

}  // namespace toa::histories
