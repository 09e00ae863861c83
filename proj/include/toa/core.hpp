#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "toa/error.hpp"

namespace toa {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RVec = std::vector<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr cplx I{0.0, 1.0};

// Uniform position grid x_j = x_min + j*dx, j = 0..n-1 (x_max excluded).
class Grid1D {
  public:
    Grid1D(double x_min, double x_max, std::size_t n_points);
    static Grid1D symmetric(double half_width, std::size_t n_points);

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    std::size_t size() const { return n_; }
    double dx() const { return dx_; }
    double x(std::size_t j) const { return x_min_ + static_cast<double>(j) * dx_; }
    // Index of the node closest to x = 0.
    std::size_t zero_index() const { return zero_; }

  private:
    double x_min_, x_max_, dx_;
    std::size_t n_, zero_;
};

// Momentum grid dual to a Grid1D: p_k = (k - n/2) dp, dp = 2 pi / (n dx).
class MomentumGrid {
  public:
    explicit MomentumGrid(const Grid1D& g);
    std::size_t size() const { return n_; }
    double dp() const { return dp_; }
    double p(std::size_t k) const
    {
        return (static_cast<double>(k) - static_cast<double>(n_ / 2)) * dp_;
    }

  private:
    std::size_t n_;
    double dp_;
};

// Samples t_i = i*dt for i = 0..n_steps.
class TimeGrid {
  public:
    TimeGrid(double t_max, std::size_t n_steps);
    double t_max() const { return t_max_; }
    std::size_t n_steps() const { return n_; }
    std::size_t size() const { return n_ + 1; }
    double dt() const { return t_max_ / static_cast<double>(n_); }
    double t(std::size_t i) const { return t_max_ * static_cast<double>(i) / static_cast<double>(n_); }

  private:
    double t_max_;
    std::size_t n_;
};

enum class Representation { position, momentum };

// Pure state on a grid. Momentum amplitudes follow psi~(p) = int dx e^{-ipx} psi(x),
// normalised with sum |psi~|^2 dp / 2pi = 1.
struct WavePacket {
    Representation rep = Representation::position;
    Grid1D grid;
    CVec amp;
    double mass = 1.0;

    WavePacket(Representation r, Grid1D g, CVec a, double m);

    double norm2() const;
    MomentumGrid momentum_grid() const { return MomentumGrid(grid); }
};

// Gaussian (pi s0^2)^{-1/4} exp(-(x - center)^2 / 2 s0^2 + i pbar x).
// The momentum width a used in the POVM formulas is sqrt(2) * sigma0.
struct GaussianSpec {
    double center = -1.0;
    double mean_momentum = 0.0;
    double sigma0 = 1.0;

    static GaussianSpec from_momentum_width(double l_dist, double pbar, double a);
    double l_dist() const { return -center; }
    double a() const { return std::sqrt(2.0) * sigma0; }
    double t_classical(double mass) const { return mass * l_dist() / mean_momentum; }
    // Temporal width (M s0 / pbar) sqrt(1 + L^2 / (s0^4 pbar^2)) of the arrival peak.
    double arrival_width(double mass) const;
};

WavePacket gaussian_packet(const GaussianSpec& spec, const Grid1D& grid, double mass,
                           bool require_left_support = false);
// Normalised superposition of Gaussians with the given complex weights.
WavePacket gaussian_superposition(const std::vector<GaussianSpec>& specs, const std::vector<cplx>& weights,
                                  const Grid1D& grid, double mass);

// Default grid for a Gaussian problem: [-8 L, 8 L] with 4096 points.
Grid1D default_grid(const GaussianSpec& spec, std::size_t n_points = 4096);

WavePacket to_momentum(const WavePacket& psi);
WavePacket to_position(const WavePacket& psi);

WavePacket evolve_free(const WavePacket& psi, double t);
WavePacket evolve_potential_split_step(const WavePacket& psi, const RVec& V, double t, std::size_t n_substeps);

// Probability in x >= 0 and in the outer 1/32 of the box on either side.
double right_mass(const WavePacket& psi);
double edge_mass(const WavePacket& psi);
double expectation_x(const WavePacket& psi);

// psi(x = 0) for a position-space packet, and d psi / dx at 0 computed
// spectrally from the momentum amplitudes.
cplx value_at_zero(const WavePacket& psi);
cplx derivative_at_zero(const WavePacket& psi);

double l2_distance(const WavePacket& a, const WavePacket& b);

// Warnings (aliasing, regime flags) are routed through a replaceable sink.
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

// Quadrature on equally spaced samples. With eight or more samples the
// trapezoid rule carries fourth-order Gregory end corrections (exact for
// cubics, error O(h^5)); shorter arrays use composite Simpson closed by a
// 3/8 panel, and two samples use the trapezoid.
template <class T>
T integrate(const std::vector<T>& f, double h)
{
    TOA_REQUIRE(f.size() >= 2, "need at least two samples");
    const std::size_t n = f.size() - 1;
    if (n == 1) return 0.5 * h * (f[0] + f[1]);
    if (f.size() >= 8) {
        static constexpr double w[4] = {251.0 / 720.0, 299.0 / 240.0, 211.0 / 240.0, 739.0 / 720.0};
        T s{};
        for (std::size_t i = 4; i + 4 <= n; ++i) s += f[i];
        for (std::size_t i = 0; i < 4; ++i) s += w[i] * (f[i] + f[n - i]);
        return h * s;
    }
    T s{};
    std::size_t simpson_end = n;
    if (n % 2 == 1) {
        simpson_end = n - 3;
        s += 3.0 * h / 8.0 * (f[n - 3] + 3.0 * f[n - 2] + 3.0 * f[n - 1] + f[n]);
    }
    if (simpson_end > 0) {
        T acc = f[0] + f[simpson_end];
        for (std::size_t i = 1; i < simpson_end; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f[i];
        s += h / 3.0 * acc;
    }
    return s;
}

// Running integral F_i = int_0^{t_i} f using trapezoid panels.
RVec cumulative_trapezoid(const RVec& f, double h);
// Running integral with fourth-order panels (cubic through four neighbouring
// samples); needs at least four samples.
RVec cumulative_integral(const RVec& f, double h);

// Dynamics used by the projected-evolution schemes: no evolution at all,
// the free particle, or p^2/2M + V(x) by split-step with a bounded step.
struct Hamiltonian {
    enum class Kind { none, free, potential };
    Kind kind = Kind::free;
    RVec V;
    double max_step = 0.01;

    static Hamiltonian zero() { return Hamiltonian{Kind::none, {}, 0.01}; }
    static Hamiltonian free_particle() { return Hamiltonian{}; }
    static Hamiltonian with_potential(RVec V, double max_step = 0.01) { return Hamiltonian{Kind::potential, std::move(V), max_step}; }

    bool is_free() const { return kind == Kind::free; }
    WavePacket evolve(const WavePacket& psi, double t) const;
};

}  // namespace toa
