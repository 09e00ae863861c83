#pragma once

#include "toa/core.hpp"
#include "toa/distribution.hpp"

namespace toa::copenhagen {

// Diagonal position projectors on a grid.
struct HalfLineProjectors {
    RVec P_minus;  // x < 0
    RVec P_plus;   // x >= 0

    explicit HalfLineProjectors(const Grid1D& grid);
    // Indicator of the strip [-delta_x/2, delta_x/2].
    static RVec strip(const Grid1D& grid, double delta_x);
};

struct DetectorConfig {
    double tau = 0.0;      // temporal resolution
    double v = 0.0;        // detection velocity (strip width per unit time)
    double delta_x = 0.0;  // strip width

    void validate(const Grid1D& grid, double T) const;
};

// Raw chain value Tr(P+ U [P- U]^{k-1} rho0 h.c.) with U = e^{-iH T/n}.
double reduction_chain_probability(const WavePacket& psi0, std::size_t k, std::size_t n, double T,
                                   const Hamiltonian& H = Hamiltonian::free_particle());

// Norm of (P- e^{-iHT/n} P-)^n psi0.
double zeno_survival(const WavePacket& psi0, double T, std::size_t n,
                     const Hamiltonian& H = Hamiltonian::free_particle());

// Probability Tr(rho_t P+) on every point of the time grid.
RVec right_probabilities(const WavePacket& psi0, const TimeGrid& tg, const Hamiltonian& H);

// No-reduction density with temporal resolution tau: hazard
// h(t) = -(1/tau) ln(1 - Tr(rho_t P+)), p = h exp(-int_0^t h), p_N = exp(-int_0^T h).
ToaDistribution no_reduction_density_tau(const WavePacket& psi0, double tau, double T, std::size_t n_steps,
                                         const Hamiltonian& H = Hamiltonian::free_particle());

// Same construction from precomputed Tr(rho_t P+) samples.
ToaDistribution no_reduction_from_right_probabilities(const TimeGrid& tg, const RVec& q, double tau);

// Discrete recursion p_k = q_k prod_{i<k} (1 - q_i) with step tau.
RVec discrete_reduction_recursion(const WavePacket& psi0, double tau, std::size_t n_bins,
                                  const Hamiltonian& H = Hamiltonian::free_particle());

// |psi_t(0)|^2 by quadratic interpolation through the three nodes nearest x = 0.
double density_at_zero(const WavePacket& psi);

// Detection strip of width v dt: p = v rho_t(0) exp(-v int_0^t rho_s(0) ds).
ToaDistribution strip_detector_density(const WavePacket& psi0, double v, double T, std::size_t n_steps,
                                       const Hamiltonian& H = Hamiltonian::free_particle());

// Probability of detection in [t1, t2] for the strip detector.
double strip_interval_probability(const WavePacket& psi0, double v, double t1, double t2, std::size_t n_steps,
                                  const Hamiltonian& H = Hamiltonian::free_particle());

// max_t |p_tau - p_2tau| / max_t p_tau.
double tau_sensitivity(const WavePacket& psi0, double tau, double T, std::size_t n_steps,
                       const Hamiltonian& H = Hamiltonian::free_particle());

}  // namespace toa::copenhagen
