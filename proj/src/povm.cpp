#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "toa/parallel.hpp"
#include "toa/povm.hpp"

namespace toa::povm {

// ---------------------------------------------------------------- smearing

double SmearingFamily::operator()(double s, double sp) const
{
    TOA_REQUIRE(tau > 0.0 && T > 0.0, "tau and T must be positive");
    const double d = s - sp;
    if (kind == Kind::gaussian) return std::exp(-d * d / (2.0 * tau * tau)) / (std::sqrt(2.0 * pi) * tau);
    const auto N = static_cast<long>(std::floor(T / tau));
    double sum = 1.0;
    for (long n = 1; n <= N; ++n) sum += 2.0 * std::cos(pi * static_cast<double>(n) * d / T);
    return sum / (2.0 * T);
}

double SmearingFamily::sqrt_f(double s, double sp) const
{
    return std::sqrt(std::max((*this)(s, sp), 0.0));
}

double SmearingFamily::integral(double sp) const
{
    TOA_REQUIRE(tau > 0.0 && T > 0.0, "tau and T must be positive");
    if (kind == Kind::gaussian) {
        const double w = std::sqrt(2.0) * tau;
        return 0.5 * (std::erf((T - sp) / w) + std::erf(sp / w));
    }
    // Only odd n survive: 1/2 + sum (2 / pi n) sin(pi n s' / T).
    const auto N = static_cast<long>(std::floor(T / tau));
    double sum = 0.5;
    for (long n = 1; n <= N; n += 2)
        sum += 2.0 / (pi * static_cast<double>(n)) * std::sin(pi * static_cast<double>(n) * sp / T);
    return sum;
}

// ---------------------------------------------------------- momentum state

double MomentumState::norm2() const
{
    double s = 0.0;
    for (const cplx& a : amp) s += std::norm(a);
    return s * dp / (2.0 * pi);
}

namespace {

void trim(MomentumState& m)
{
    double peak = 0.0;
    for (const cplx& a : m.amp) peak = std::max(peak, std::norm(a));
    TOA_REQUIRE(peak > 0.0, "state has no momentum content");
    std::size_t lo = 0, hi = m.amp.size();
    while (std::norm(m.amp[lo]) < 1e-16 * peak) ++lo;
    while (std::norm(m.amp[hi - 1]) < 1e-16 * peak) --hi;
    m.p_lo += static_cast<double>(lo) * m.dp;
    m.amp = CVec(m.amp.begin() + static_cast<std::ptrdiff_t>(lo), m.amp.begin() + static_cast<std::ptrdiff_t>(hi));
}

}  // namespace

MomentumState MomentumState::from_packet(const WavePacket& psi)
{
    WavePacket m = psi.rep == Representation::momentum ? psi : to_momentum(psi);
    MomentumGrid mg(m.grid);
    MomentumState s;
    s.p_lo = mg.p(0);
    s.dp = mg.dp();
    s.amp = std::move(m.amp);
    s.mass = psi.mass;
    s.right_mass = toa::right_mass(psi);
    trim(s);
    return s;
}

MomentumState MomentumState::gaussians(const std::vector<GaussianSpec>& specs, const std::vector<cplx>& weights,
                                       double dp, double mass)
{
    TOA_REQUIRE(!specs.empty() && specs.size() == weights.size(), "one weight per Gaussian");
    TOA_REQUIRE(dp > 0.0 && mass > 0.0, "dp and mass must be positive");
    // |psi~|^2 ~ e^{-s0^2 (p - pbar)^2} drops below 1e-16 at 6.07 / s0.
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const GaussianSpec& g : specs) {
        TOA_REQUIRE(g.sigma0 > 0.0, "sigma0 must be positive");
        lo = std::min(lo, g.mean_momentum - 6.2 / g.sigma0);
        hi = std::max(hi, g.mean_momentum + 6.2 / g.sigma0);
    }
    MomentumState s;
    s.mass = mass;
    s.dp = dp;
    // Grid points at integer multiples of dp, so that p and -p are both nodes.
    const double k_lo = std::floor(lo / dp), k_hi = std::ceil(hi / dp);
    s.p_lo = k_lo * dp;
    const auto n = static_cast<std::size_t>(k_hi - k_lo) + 1;
    s.amp.assign(n, cplx{});
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const GaussianSpec& g = specs[i];
        const double pref = std::pow(pi * g.sigma0 * g.sigma0, -0.25) * std::sqrt(2.0 * pi) * g.sigma0;
        for (std::size_t k = 0; k < n; ++k) {
            const double q = s.p(k) - g.mean_momentum;
            s.amp[k] += weights[i] * pref * std::exp(-0.5 * g.sigma0 * g.sigma0 * q * q) *
                        std::polar(1.0, -q * g.center);
        }
    }
    const double nrm = s.norm2();
    TOA_REQUIRE(nrm > 0.0, "superposition vanishes");
    const double c = 1.0 / std::sqrt(nrm);
    for (cplx& a : s.amp) a *= c;

    // Probability in x >= 0 from the position-space superposition.
    double x_hi = 0.0, s_max = 0.0;
    for (const GaussianSpec& g : specs) {
        x_hi = std::max(x_hi, g.center + 12.0 * g.sigma0);
        s_max = std::max(s_max, g.sigma0);
    }
    x_hi = std::max(x_hi, 12.0 * s_max);
    const std::size_t nx = 4001;
    const double hx = x_hi / static_cast<double>(nx - 1);
    RVec dens(nx);
    for (std::size_t j = 0; j < nx; ++j) {
        const double x = hx * static_cast<double>(j);
        cplx v{};
        for (std::size_t i = 0; i < specs.size(); ++i) {
            const GaussianSpec& g = specs[i];
            const double d = (x - g.center) / g.sigma0;
            v += weights[i] * std::pow(pi * g.sigma0 * g.sigma0, -0.25) * std::exp(-0.5 * d * d) *
                 std::polar(1.0, g.mean_momentum * x);
        }
        dens[j] = std::norm(v * c);
    }
    s.right_mass = integrate(dens, hx);
    trim(s);
    return s;
}

// ----------------------------------------------------------------- densities

namespace {

struct Quadratic {
    Eigen::MatrixXd R;
    CVec w;  // (dp / 2 pi)(p / M) psi~
    RVec E;
};

Quadratic build_quadratic(const MomentumState& psi, double tau, Regime regime)
{
    const std::size_t n = psi.size();
    TOA_REQUIRE(n >= 2, "momentum state too small");
    const double M = psi.mass;
    Quadratic q;
    q.w.resize(n);
    q.E.resize(n);
    double e_lo = std::numeric_limits<double>::infinity(), e_hi = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double p = psi.p(j);
        q.w[j] = psi.dp / (2.0 * pi) * (p / M) * psi.amp[j];
        q.E[j] = p * p / (2.0 * M);
        e_lo = std::min(e_lo, q.E[j]);
        e_hi = std::max(e_hi, q.E[j]);
    }
    q.R.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    if (regime == Regime::full) {
        KernelR r(tau, M);
        r.prepare(e_lo, e_hi);
        parallel_for(n, [&](std::size_t j) {
            for (std::size_t k = j; k < n; ++k) {
                double v = r(0.5 * (q.E[j] + q.E[k]));
                q.R(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = v;
                q.R(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = v;
            }
        });
    } else {
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) {
                const double pj = psi.p(j), pk = psi.p(k);
                const double s2 = 0.5 * (pj * pj + pk * pk);
                q.R(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
                    s2 > 0.0 ? 2.0 * M / std::sqrt(s2) : 0.0;
            }
    }
    return q;
}

// 1/2 conj(c)^T R c at each time, in blocks of times.
RVec evaluate(const Quadratic& q, const RVec& times, double* max_imag)
{
    const auto n = static_cast<Eigen::Index>(q.w.size());
    constexpr std::size_t block = 128;
    const std::size_t nb = (times.size() + block - 1) / block;
    RVec out(times.size());
    RVec imag_blocks(nb, 0.0);
    parallel_for(nb, [&](std::size_t b) {
        const std::size_t t0 = b * block, t1 = std::min(times.size(), t0 + block);
        const auto m = static_cast<Eigen::Index>(t1 - t0);
        Eigen::MatrixXd Cr(n, m), Ci(n, m);
        for (Eigen::Index c = 0; c < m; ++c) {
            const double t = times[t0 + static_cast<std::size_t>(c)];
            for (Eigen::Index j = 0; j < n; ++j) {
                cplx v = q.w[static_cast<std::size_t>(j)] * std::polar(1.0, -q.E[static_cast<std::size_t>(j)] * t);
                Cr(j, c) = v.real();
                Ci(j, c) = v.imag();
            }
        }
        Eigen::MatrixXd Yr = q.R * Cr, Yi = q.R * Ci;
        double im = 0.0;
        for (Eigen::Index c = 0; c < m; ++c) {
            out[t0 + static_cast<std::size_t>(c)] = 0.5 * (Cr.col(c).dot(Yr.col(c)) + Ci.col(c).dot(Yi.col(c)));
            im = std::max(im, 0.5 * std::abs(Cr.col(c).dot(Yi.col(c)) - Ci.col(c).dot(Yr.col(c))));
        }
        imag_blocks[b] = im;
    });
    if (max_imag) *max_imag = *std::max_element(imag_blocks.begin(), imag_blocks.end());
    return out;
}

}  // namespace

RVec povm_density_at(const MomentumState& psi, double tau, const RVec& times, Regime regime, double* max_imag)
{
    if (regime == Regime::full) TOA_REQUIRE(tau > 0.0, "tau must be positive");
    if (times.empty()) return {};
    return evaluate(build_quadratic(psi, tau, regime), times, max_imag);
}

ToaPovm toa_povm_density(const MomentumState& psi, double tau, double T, std::size_t n_steps, Regime regime)
{
    TOA_REQUIRE(tau > 0.0, "tau must be positive");
    TOA_REQUIRE(T > 0.0 && n_steps >= 8, "need T > 0 and at least eight steps");
    TOA_REQUIRE(tau < T / 20.0, "tau must be below T / 20");
    TOA_REQUIRE(psi.right_mass < 1e-6, "initial state must be supported on x < 0");
    TOA_REQUIRE(std::abs(psi.norm2() - 1.0) < 1e-6, "state must be normalised");

    TimeGrid tg(T, n_steps);
    RVec times(tg.size());
    for (std::size_t i = 0; i < times.size(); ++i) times[i] = tg.t(i);
    double max_imag = 0.0;
    RVec dens = povm_density_at(psi, tau, times, regime, &max_imag);

    ToaPovm out{ToaDistribution(tg, dens, 0.0), tau, regime, 0.0, 0.0, max_imag, {}};
    out.dist.no_detect = 1.0 - out.dist.detected_mass();

    // etau over the part of the support that carries weight.
    double peak = 0.0;
    for (const cplx& a : psi.amp) peak = std::max(peak, std::norm(a));
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, slow_mass = 0.0;
    const double p_regime = 5.0 * std::sqrt(2.0 * psi.mass / tau);
    for (std::size_t k = 0; k < psi.size(); ++k) {
        const double p = psi.p(k), w = std::norm(psi.amp[k]);
        if (std::abs(p) < p_regime) slow_mass += w * psi.dp / (2.0 * pi);
        if (w < 1e-8 * peak) continue;
        const double et = p * p / (2.0 * psi.mass) * tau;
        lo = std::min(lo, et);
        hi = std::max(hi, et);
    }
    out.min_etau = lo;
    out.max_etau = hi;
    if (regime == Regime::large_etau && slow_mass > 1e-3) {
        out.warnings.push_back("large_etau regime: probability " + std::to_string(slow_mass) +
                               " at |p| < 5 sqrt(2M/tau)");
        warn(out.warnings.back());
    }
    return out;
}

RVec kijowski_density(const MomentumState& psi, const RVec& times)
{
    const double M = psi.mass;
    // Unitary-convention amplitudes psi~ / sqrt(2 pi).
    RVec out(times.size());
    parallel_for(times.size(), [&](std::size_t i) {
        cplx plus{}, minus{};
        for (std::size_t k = 0; k < psi.size(); ++k) {
            const double p = psi.p(k);
            const cplx v = std::sqrt(std::abs(p) / (2.0 * pi * M)) * std::polar(1.0, -p * p * times[i] / (2.0 * M)) *
                           psi.amp[k] / std::sqrt(2.0 * pi);
            (p > 0.0 ? plus : minus) += v;
        }
        out[i] = (std::norm(plus) + std::norm(minus)) * psi.dp * psi.dp;
    });
    return out;
}

RVec extended_density(const MomentumState& psi, const RVec& times)
{
    if (times.empty()) return {};
    return evaluate(build_quadratic(psi, 0.0, Regime::large_etau), times, nullptr);
}

// ------------------------------------------------------------ two Gaussians

TwoGaussianComparison two_gaussian_comparison(double p1, double p2, double a, double l_dist, double mass, double T,
                                              std::size_t n_steps)
{
    TOA_REQUIRE(a > 0.0 && l_dist > 0.0 && mass > 0.0 && T > 0.0, "parameters must be positive");
    TOA_REQUIRE(a * p1 >= 5.0 && a * p2 >= 5.0, "need a p >= 5 for both Gaussians");
    TOA_REQUIRE(p1 == p2 || a * std::abs(p1 - p2) >= 5.0, "need a |p1 - p2| >= 5");
    TOA_REQUIRE(n_steps >= 8, "need at least eight steps");

    const GaussianSpec g1 = GaussianSpec::from_momentum_width(l_dist, p1, a);
    const GaussianSpec g2 = GaussianSpec::from_momentum_width(l_dist, p2, a);
    // Grid spacing keeps periodic images from reaching x = 0 before T.
    const double p_max = std::max(p1, p2) + 8.0 / a;
    const double dp = std::min(2.0 * pi / (p_max * T / mass + 4.0 * l_dist), 0.1 / a);
    const MomentumState s1 = MomentumState::gaussians({g1}, {1.0}, dp, mass);
    const MomentumState s2 = MomentumState::gaussians({g2}, {1.0}, dp, mass);
    const MomentumState s12 = MomentumState::gaussians({g1, g2}, {1.0, 1.0}, dp, mass);
    TwoGaussianComparison out;
    TimeGrid tg(T, n_steps);
    out.times.resize(tg.size());
    for (std::size_t i = 0; i < tg.size(); ++i) out.times[i] = tg.t(i);

    auto both = [&](const MomentumState& s, RVec& kij, RVec& pov) {
        kij = kijowski_density(s, out.times);
        pov = extended_density(s, out.times);
    };
    RVec k1, k2, k12, q1, q2, q12;
    both(s1, k1, q1);
    both(s2, k2, q2);
    both(s12, k12, q12);
    out.kijowski = k12;
    out.povm = q12;

    // The normalised superposition is c (psi1 + psi2) with c^2 = 1 / (2 (1 + Re<psi1|psi2>)).
    double overlap = 0.0;
    {
        const double off = (s2.p_lo - s1.p_lo) / dp;
        const auto shift = static_cast<std::ptrdiff_t>(std::llround(off));
        cplx ov{};
        for (std::size_t k = 0; k < s1.size(); ++k) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(k) - shift;
            if (j >= 0 && static_cast<std::size_t>(j) < s2.size()) ov += std::conj(s1.amp[k]) * s2.amp[static_cast<std::size_t>(j)];
        }
        overlap = (ov * dp / (2.0 * pi)).real();
    }
    const double c2 = 1.0 / (2.0 * (1.0 + overlap));

    const double t1 = g1.t_classical(mass), t2 = g2.t_classical(mass);
    const double tm = 0.5 * (t1 + t2), half = 0.5 * a * mass / std::min(p1, p2);
    for (std::size_t i = 0; i < out.times.size(); ++i) {
        const double t = out.times[i];
        if (std::abs(t - tm) > half) continue;
        const double xk = k12[i] / c2 - k1[i] - k2[i];
        const double xq = q12[i] / c2 - q1[i] - q2[i];
        out.amplitude_kijowski = std::max(out.amplitude_kijowski, std::abs(xk));
        out.amplitude_povm = std::max(out.amplitude_povm, std::abs(xq));
    }
    out.ratio = out.amplitude_povm > 0.0 ? out.amplitude_kijowski / out.amplitude_povm : 0.0;
    out.expected = 0.5 * (p1 / p2 + p2 / p1);

    // Near each classical time, within one temporal width of the peak.
    double kmax = *std::max_element(k12.begin(), k12.end());
    for (double tc : {t1, t2}) {
        const double width = 0.5 * a * mass / (tc == t1 ? p1 : p2);
        for (std::size_t i = 0; i < out.times.size(); ++i) {
            if (std::abs(out.times[i] - tc) > width) continue;
            if (k12[i] < 1e-3 * kmax) continue;
            out.peak_deviation = std::max(out.peak_deviation, std::abs(q12[i] - k12[i]) / k12[i]);
        }
    }
    return out;
}

// ----------------------------------------------------- sequential two-time

namespace {

bool aligned(double x, double d)
{
    if (std::isinf(x)) return true;
    const double r = x / d;
    return std::abs(r - std::round(r)) < 1e-9 * std::max(1.0, std::abs(r));
}

bool in_windows(double x, const std::vector<PositionWindow>& U)
{
    for (const PositionWindow& w : U)
        if (x >= w.a && x < w.b) return true;
    return false;
}

}  // namespace

double sequential_two_time_probability(const WavePacket& psi0, double t, double delta_pos,
                                       const std::vector<PositionWindow>& U1, const std::vector<PositionWindow>& U2)
{
    const WavePacket psi = psi0.rep == Representation::position ? psi0 : to_position(psi0);
    const Grid1D& g = psi.grid;
    TOA_REQUIRE(t >= 0.0, "time must be non-negative");
    TOA_REQUIRE(delta_pos >= g.dx() * (1.0 - 1e-12), "bin width must be at least dx");
    for (const auto* U : {&U1, &U2})
        for (const PositionWindow& w : *U) {
            TOA_REQUIRE(w.a < w.b, "window must have a < b");
            TOA_REQUIRE(aligned(w.a, delta_pos) && aligned(w.b, delta_pos), "window not aligned to the position bins");
        }

    // Node j lies in bin floor(x_j / delta); nodes exactly on an edge go right.
    const std::size_t n = g.size();
    std::vector<long> bin(n);
    for (std::size_t j = 0; j < n; ++j)
        bin[j] = static_cast<long>(std::floor((g.x(j) + 1e-9 * g.dx()) / delta_pos));
    std::vector<char> in2(n);
    for (std::size_t j = 0; j < n; ++j) in2[j] = in_windows(bin[j] * delta_pos + 0.5 * delta_pos, U2);

    std::vector<long> bins1;
    for (std::size_t j = 0; j < n; ++j)
        if (in_windows(bin[j] * delta_pos + 0.5 * delta_pos, U1) && (bins1.empty() || bins1.back() != bin[j]))
            bins1.push_back(bin[j]);

    RVec contrib(bins1.size(), 0.0);
    parallel_for(bins1.size(), [&](std::size_t b) {
        CVec a(n);
        double m = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (bin[j] == bins1[b]) {
                a[j] = psi.amp[j];
                m += std::norm(a[j]);
            }
        if (m == 0.0) return;
        WavePacket phi(Representation::position, g, std::move(a), psi.mass);
        WavePacket out = evolve_free(phi, t);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (in2[j]) s += std::norm(out.amp[j]);
        contrib[b] = s * g.dx();
    });
    double total = 0.0;
    for (double c : contrib) total += c;
    return total;
}

}  // namespace toa::povm
