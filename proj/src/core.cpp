#include "toa/core.hpp"

#include <algorithm>
#include <iostream>
#include <mutex>
#include <numeric>

#include "fft.hpp"

namespace toa {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::mutex sink_lock;
WarningSink g_sink = [](std::string_view m) { std::clog << "toa warning: " << m << '\n'; };

}  // namespace

void set_warning_sink(WarningSink sink)
{
    std::lock_guard<std::mutex> guard(sink_lock);
    g_sink = sink ? std::move(sink) : WarningSink([](std::string_view) {});
}

void warn(std::string_view message)
{
    std::lock_guard<std::mutex> guard(sink_lock);
    g_sink(message);
}

Grid1D::Grid1D(double x_min, double x_max, std::size_t n_points)
    : x_min_(x_min), x_max_(x_max), dx_(0.0), n_(n_points), zero_(0)
{
    TOA_REQUIRE(n_points >= 16 && is_power_of_two(n_points), "n_points must be a power of two >= 16");
    TOA_REQUIRE(x_max > x_min, "x_max must exceed x_min");
    dx_ = (x_max - x_min) / static_cast<double>(n_points);
    double j0 = std::round(-x_min / dx_);
    TOA_REQUIRE(j0 >= 1 && j0 <= static_cast<double>(n_points) - 2, "grid must contain x = 0 as an interior point");
    zero_ = static_cast<std::size_t>(j0);
}

Grid1D Grid1D::symmetric(double half_width, std::size_t n_points)
{
    return Grid1D(-half_width, half_width, n_points);
}

MomentumGrid::MomentumGrid(const Grid1D& g) : n_(g.size()), dp_(2.0 * pi / (static_cast<double>(g.size()) * g.dx()))
{
}

TimeGrid::TimeGrid(double t_max, std::size_t n_steps) : t_max_(t_max), n_(n_steps)
{
    TOA_REQUIRE(t_max > 0.0 && std::isfinite(t_max), "t_max must be positive");
    TOA_REQUIRE(n_steps >= 1, "need at least one step");
}

WavePacket::WavePacket(Representation r, Grid1D g, CVec a, double m)
    : rep(r), grid(std::move(g)), amp(std::move(a)), mass(m)
{
    TOA_REQUIRE(amp.size() == grid.size(), "amplitude count must match the grid");
    TOA_REQUIRE(mass > 0.0, "mass must be positive");
}

double WavePacket::norm2() const
{
    double s = 0.0;
    for (const auto& z : amp) s += std::norm(z);
    if (rep == Representation::position) return s * grid.dx();
    return s * momentum_grid().dp() / (2.0 * pi);
}

GaussianSpec GaussianSpec::from_momentum_width(double l_dist, double pbar, double a)
{
    TOA_REQUIRE(a > 0.0, "width must be positive");
    return GaussianSpec{-l_dist, pbar, a / std::sqrt(2.0)};
}

double GaussianSpec::arrival_width(double mass) const
{
    double L = l_dist();
    double s2 = sigma0 * sigma0;
    return mass * sigma0 / std::abs(mean_momentum) *
           std::sqrt(1.0 + L * L / (s2 * s2 * mean_momentum * mean_momentum));
}

namespace {

CVec gaussian_samples(const GaussianSpec& s, const Grid1D& grid)
{
    TOA_REQUIRE(s.sigma0 > 0.0, "Gaussian width must be positive");
    CVec out(grid.size());
    double pref = std::pow(pi * s.sigma0 * s.sigma0, -0.25);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        double y = grid.x(j) - s.center;
        out[j] = pref * std::exp(-y * y / (2.0 * s.sigma0 * s.sigma0)) * std::polar(1.0, s.mean_momentum * grid.x(j));
    }
    return out;
}

void normalise(WavePacket& psi)
{
    double n = std::sqrt(psi.norm2());
    if (n <= 0.0) throw NumericalError("cannot normalise a zero state");
    for (auto& z : psi.amp) z /= n;
}

}  // namespace

WavePacket gaussian_packet(const GaussianSpec& spec, const Grid1D& grid, double mass, bool require_left_support)
{
    WavePacket psi(Representation::position, grid, gaussian_samples(spec, grid), mass);
    normalise(psi);
    if (require_left_support) {
        double right = right_mass(psi);
        TOA_REQUIRE(right < 1e-6, "state is not localised in x < 0 (right mass " + std::to_string(right) + ")");
    }
    return psi;
}

WavePacket gaussian_superposition(const std::vector<GaussianSpec>& specs, const std::vector<cplx>& weights,
                                  const Grid1D& grid, double mass)
{
    TOA_REQUIRE(!specs.empty() && specs.size() == weights.size(), "one weight per Gaussian");
    CVec sum(grid.size());
    for (std::size_t k = 0; k < specs.size(); ++k) {
        CVec g = gaussian_samples(specs[k], grid);
        for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += weights[k] * g[j];
    }
    WavePacket psi(Representation::position, grid, std::move(sum), mass);
    normalise(psi);
    return psi;
}

Grid1D default_grid(const GaussianSpec& spec, std::size_t n_points)
{
    double L = std::max(spec.l_dist(), 8.0 * spec.sigma0);
    return Grid1D::symmetric(8.0 * L, n_points);
}

WavePacket to_momentum(const WavePacket& psi)
{
    TOA_REQUIRE(psi.rep == Representation::position, "input must be in position representation");
    const Grid1D& g = psi.grid;
    const std::size_t n = g.size();
    MomentumGrid mg(g);
    CVec a = psi.amp;
    for (std::size_t j = 1; j < n; j += 2) a[j] = -a[j];
    detail::dft(a.data(), n, -1);
    for (std::size_t k = 0; k < n; ++k) a[k] *= g.dx() * std::polar(1.0, -mg.p(k) * g.x_min());
    return WavePacket(Representation::momentum, g, std::move(a), psi.mass);
}

WavePacket to_position(const WavePacket& psi)
{
    TOA_REQUIRE(psi.rep == Representation::momentum, "input must be in momentum representation");
    const Grid1D& g = psi.grid;
    const std::size_t n = g.size();
    MomentumGrid mg(g);
    CVec a(n);
    for (std::size_t k = 0; k < n; ++k) a[k] = psi.amp[k] * std::polar(1.0, mg.p(k) * g.x_min());
    detail::dft(a.data(), n, +1);
    const double scale = 1.0 / (static_cast<double>(n) * g.dx());
    for (std::size_t j = 0; j < n; ++j) a[j] *= (j % 2 == 0 ? scale : -scale);
    return WavePacket(Representation::position, g, std::move(a), psi.mass);
}

WavePacket evolve_free(const WavePacket& psi, double t)
{
    TOA_REQUIRE(t >= 0.0, "time must be non-negative");
    bool pos = psi.rep == Representation::position;
    WavePacket m = pos ? to_momentum(psi) : psi;
    MomentumGrid mg(m.grid);
    for (std::size_t k = 0; k < mg.size(); ++k) {
        double p = mg.p(k);
        m.amp[k] *= std::polar(1.0, -p * p * t / (2.0 * m.mass));
    }
    if (!pos) return m;
    WavePacket out = to_position(m);
    double edge = edge_mass(out);
    if (edge > 1e-6) warn("wave packet reaches the grid edge (edge mass " + std::to_string(edge) + ")");
    return out;
}

WavePacket evolve_potential_split_step(const WavePacket& psi, const RVec& V, double t, std::size_t n_substeps)
{
    TOA_REQUIRE(psi.rep == Representation::position, "input must be in position representation");
    TOA_REQUIRE(V.size() == psi.grid.size(), "potential must live on the state grid");
    TOA_REQUIRE(n_substeps >= 1, "need at least one substep");
    TOA_REQUIRE(t >= 0.0, "time must be non-negative");
    for (double v : V) TOA_REQUIRE(std::isfinite(v), "potential must be finite (bounded below)");

    const std::size_t n = psi.grid.size();
    const double h = t / static_cast<double>(n_substeps);
    MomentumGrid mg(psi.grid);
    CVec half_v(n), kin(n);
    for (std::size_t j = 0; j < n; ++j) half_v[j] = std::polar(1.0, -0.5 * h * V[j]);
    for (std::size_t k = 0; k < n; ++k) {
        double p = mg.p(k);
        kin[k] = std::polar(1.0, -p * p * h / (2.0 * psi.mass));
    }
    WavePacket cur = psi;
    for (std::size_t s = 0; s < n_substeps; ++s) {
        for (std::size_t j = 0; j < n; ++j) cur.amp[j] *= half_v[j];
        WavePacket m = to_momentum(cur);
        for (std::size_t k = 0; k < n; ++k) m.amp[k] *= kin[k];
        cur = to_position(m);
        for (std::size_t j = 0; j < n; ++j) cur.amp[j] *= half_v[j];
    }
    return cur;
}

double right_mass(const WavePacket& psi)
{
    const WavePacket& p = psi.rep == Representation::position ? psi : to_position(psi);
    double s = 0.0;
    for (std::size_t j = 0; j < p.grid.size(); ++j)
        if (p.grid.x(j) >= 0.0) s += std::norm(p.amp[j]);
    return s * p.grid.dx();
}

double edge_mass(const WavePacket& psi)
{
    if (psi.rep != Representation::position) return edge_mass(to_position(psi));
    const std::size_t n = psi.grid.size();
    const std::size_t w = n / 32;
    double s = 0.0;
    for (std::size_t j = 0; j < w; ++j) s += std::norm(psi.amp[j]) + std::norm(psi.amp[n - 1 - j]);
    return s * psi.grid.dx();
}

double expectation_x(const WavePacket& psi)
{
    if (psi.rep != Representation::position) return expectation_x(to_position(psi));
    double s = 0.0;
    for (std::size_t j = 0; j < psi.grid.size(); ++j) s += psi.grid.x(j) * std::norm(psi.amp[j]);
    return s * psi.grid.dx() / psi.norm2();
}

namespace {

template <class F>
cplx spectral_sum(const WavePacket& psi, F weight)
{
    const WavePacket& m = psi.rep == Representation::momentum ? psi : to_momentum(psi);
    MomentumGrid mg(m.grid);
    cplx s{};
    for (std::size_t k = 0; k < mg.size(); ++k) s += weight(k, mg.p(k)) * m.amp[k];
    return s * mg.dp() / (2.0 * pi);
}

}  // namespace

cplx value_at_zero(const WavePacket& psi)
{
    return spectral_sum(psi, [](std::size_t, double) { return cplx(1.0); });
}

cplx derivative_at_zero(const WavePacket& psi)
{
    // The Nyquist mode k = 0 has no well-defined derivative; drop it.
    return spectral_sum(psi, [](std::size_t k, double p) { return k == 0 ? cplx(0.0) : I * p; });
}

double l2_distance(const WavePacket& a, const WavePacket& b)
{
    TOA_REQUIRE(a.rep == b.rep && a.amp.size() == b.amp.size(), "states must share grid and representation");
    double s = 0.0;
    for (std::size_t j = 0; j < a.amp.size(); ++j) s += std::norm(a.amp[j] - b.amp[j]);
    double w = a.rep == Representation::position ? a.grid.dx() : a.momentum_grid().dp() / (2.0 * pi);
    return std::sqrt(s * w);
}

RVec cumulative_trapezoid(const RVec& f, double h)
{
    RVec out(f.size(), 0.0);
    for (std::size_t i = 1; i < f.size(); ++i) out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
    return out;
}

RVec cumulative_integral(const RVec& f, double h)
{
    const std::size_t n = f.size();
    TOA_REQUIRE(n >= 4, "need at least four samples");
    RVec out(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double panel;
        if (i == 0)
            panel = h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]);
        else if (i + 2 == n)
            panel = h / 24.0 * (9.0 * f[i + 1] + 19.0 * f[i] - 5.0 * f[i - 1] + f[i - 2]);
        else
            panel = h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]);
        out[i + 1] = out[i] + panel;
    }
    return out;
}

WavePacket Hamiltonian::evolve(const WavePacket& psi, double t) const
{
    switch (kind) {
        case Kind::none: return psi;
        case Kind::free: return evolve_free(psi, t);
        case Kind::potential: {
            auto n = static_cast<std::size_t>(std::ceil(t / max_step));
            return evolve_potential_split_step(psi, V, t, std::max<std::size_t>(n, 1));
        }
    }
    return psi;
}

}  // namespace toa
