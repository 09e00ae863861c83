#pragma once

#include <memory>
#include <string>
#include <vector>

#include "toa/core.hpp"
#include "toa/distribution.hpp"

namespace toa::povm {

// Smeared delta functions f_tau(s, s') on [0, T].
struct SmearingFamily {
    enum class Kind { gaussian, fourier_sum };
    Kind kind = Kind::gaussian;
    double tau = 0.1;
    double T = 1.0;

    double operator()(double s, double sp) const;
    // Pointwise square root; the Fourier kernel is clipped at zero first.
    double sqrt_f(double s, double sp) const;
    // int_0^T ds f(s, s'), in closed form.
    double integral(double sp) const;
};

// r(eps) = sqrt(2 M tau / pi) I(2 eps tau) with
// I(k) = int_0^inf dy e^{-y^2/2} (cos ky + sin ky) / sqrt(y).
class KernelR {
  public:
    KernelR(double tau, double mass);

    double tau() const { return tau_; }
    double mass() const { return mass_; }

    double quadrature(double eps) const;
    double bessel(double eps) const;
    double small_etau(double eps) const;  // eps tau << 1
    double large_etau(double eps) const;  // eps tau >> 1
    // Cubic-spline table over [eps_lo, eps_hi], built on first use.
    double operator()(double eps) const;
    void prepare(double eps_lo, double eps_hi) const;

  private:
    struct Table;
    double tau_, mass_;
    mutable std::shared_ptr<const Table> table_;
};

double kernel_r(double eps, double tau, double mass);

// I(k) by adaptive quadrature and by the modified-Bessel closed form.
double kernel_integral_quadrature(double k);
double kernel_integral_bessel(double k);

// Momentum amplitudes on a uniform grid p_k = p_lo + k dp, normalised with
// sum |psi~|^2 dp / 2pi = 1, truncated to the contiguous range where
// |psi~|^2 >= 1e-16 max.
struct MomentumState {
    double p_lo = 0.0;
    double dp = 1.0;
    CVec amp;
    double mass = 1.0;
    double right_mass = 0.0;  // position-space probability in x >= 0

    std::size_t size() const { return amp.size(); }
    double p(std::size_t k) const { return p_lo + static_cast<double>(k) * dp; }
    double norm2() const;

    static MomentumState from_packet(const WavePacket& psi);
    // Gaussians (pi s0^2)^{-1/4} e^{-(x - c)^2/2 s0^2 + i pbar x} with complex
    // weights, sampled analytically and normalised.
    static MomentumState gaussians(const std::vector<GaussianSpec>& specs, const std::vector<cplx>& weights, double dp,
                                   double mass);
};

enum class Regime { full, large_etau };

struct ToaPovm {
    ToaDistribution dist;
    double tau = 0.0;
    Regime regime = Regime::full;
    double min_etau = 0.0;  // over the momentum support
    double max_etau = 0.0;
    double max_imag = 0.0;  // largest imaginary part of the quadratic form
    std::vector<std::string> warnings;
};

// Density p(t) = 1/2 sum_jk c_j(t) conj(c_k(t)) R_jk with
// c_j(t) = (dp/2pi)(p_j/M) psi~_j e^{-i E_j t}; R_jk = r((E_j + E_k)/2)
// (full) or 2M / sqrt((p_j^2 + p_k^2)/2) (large_etau).
RVec povm_density_at(const MomentumState& psi, double tau, const RVec& times, Regime regime,
                     double* max_imag = nullptr);

ToaPovm toa_povm_density(const MomentumState& psi, double tau, double T, std::size_t n_steps,
                         Regime regime = Regime::full);

RVec kijowski_density(const MomentumState& psi, const RVec& times);

// Large-etau density continued to all real t; integrates to
// 1 - int dp/2pi conj(psi~(-p)) psi~(p).
RVec extended_density(const MomentumState& psi, const RVec& times);

struct TwoGaussianComparison {
    RVec times;
    RVec kijowski;
    RVec povm;
    double amplitude_kijowski = 0.0;
    double amplitude_povm = 0.0;
    double ratio = 0.0;     // amplitude_kijowski / amplitude_povm
    double expected = 0.0;  // (p1/p2 + p2/p1) / 2
    double peak_deviation = 0.0;  // relative, near the two classical times
};

TwoGaussianComparison two_gaussian_comparison(double p1, double p2, double a, double l_dist, double mass, double T,
                                              std::size_t n_steps = 2000);

struct PositionWindow {
    double a, b;
};

// sum_{i in U1} sum_{j in U2} || P_j U_t P_i psi ||^2 with bins [k d, (k+1) d).
double sequential_two_time_probability(const WavePacket& psi0, double t, double delta_pos,
                                       const std::vector<PositionWindow>& U1, const std::vector<PositionWindow>& U2);

}  // namespace toa::povm
