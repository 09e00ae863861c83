#pragma once

#include <array>
#include <string>
#include <vector>

#include "toa/core.hpp"

namespace toa::histories {

enum class PropagatorMethod { images, trotter_projection, dirichlet_pde };

// Restricted propagator C_t on x < 0 with an absorbing-reflecting wall at 0.
struct RestrictedPropagator {
    PropagatorMethod method = PropagatorMethod::images;
    Hamiltonian H = Hamiltonian::free_particle();
    // Trotter: number of projected steps per unit time; 0 picks one from the
    // grid's largest kinetic energy.
    double trotter_rate = 0.0;
    // Dirichlet PDE: Crank-Nicolson time step.
    double pde_dt = 0.002;

    WavePacket apply(const WavePacket& psi, double t) const;
};

WavePacket restricted_propagate(const WavePacket& psi, double t, PropagatorMethod method,
                                const Hamiltonian& H = Hamiltonian::free_particle());

// Projected steps the Trotter method uses for time t on this grid.
std::size_t trotter_steps(const Grid1D& grid, double mass, double t, double rate = 0.0);

// Union of closed time intervals, snapped to the nodes of a time grid.
struct HistoryProposition {
    std::string label;
    std::vector<std::array<double, 2>> windows;

    static HistoryProposition window(double t1, double t2, std::string label = {});
    // [0, T] minus the given proposition.
    HistoryProposition complement(double T) const;
    bool overlaps(const HistoryProposition& other) const;
};

// Sampled decoherence functional on [0, T] u {N}.
struct DecoherenceDensity {
    TimeGrid times;
    std::size_t n = 0;  // number of time nodes
    CVec rho;           // row-major rho(t_i, t_j)
    CVec no_detect_column;
    double dNN = 1.0;
    std::string diag_singularity_note;
    std::vector<std::string> warnings;

    // When set, rho(t, t') = scale * A(t) conj(A(t')) K(t' - t) with the
    // free kernel K(v) = sqrt(M / 2 pi i v), singular on the diagonal. Window
    // integrals then use product quadrature instead of the stored matrix.
    CVec boundary_amplitude;
    double mass = 1.0;
    double scale = 1.0;

    explicit DecoherenceDensity(TimeGrid tg) : times(tg), n(tg.size()) {}

    // rho(t_i, t_j); zero on the diagonal of the singular form.
    cplx operator()(std::size_t i, std::size_t j) const;
    bool singular() const { return !boundary_amplitude.empty(); }

    // d(alpha, beta) for window propositions, d(alpha, N), and the sum over
    // the whole of [0, T].
    cplx window(const HistoryProposition& a, const HistoryProposition& b) const;
    cplx window_N(const HistoryProposition& a) const;
    cplx arrival_block() const;
    double normalization_defect() const;
    double hermiticity_defect() const;
};

struct BoundaryData {
    CVec A;  // (p/M U_t psi)(0), or its restricted-propagator analogue
    CVec B;  // (U_{t-T} C_T psi)(0)
    double dNN = 1.0;
};

BoundaryData boundary_data(const WavePacket& psi0, const TimeGrid& tg, const RestrictedPropagator& C);

DecoherenceDensity decoherence_density(const WavePacket& psi0, double T, std::size_t n_bins,
                                       const RestrictedPropagator& C = {});

DecoherenceDensity condition_decoherence(const DecoherenceDensity& d);

struct ConsistencyReport {
    cplx d_ab;
    double d_aa = 0.0;
    double d_bb = 0.0;
    double defect() const { return std::abs(d_ab.real()); }
};

ConsistencyReport coarse_grained_consistency(const DecoherenceDensity& d, const HistoryProposition& a,
                                             const HistoryProposition& b);

// Temporal width of the arrival peak from the diagonal prefactor |A(t)|^2,
// read as exp(-(t - t0)^2 / delta^2).
double fitted_arrival_width(const DecoherenceDensity& d);

struct TwoLevelDetectorModel {
    double Omega = 1.0;
    double epsilon = 0.0;
};

// Lowest-order densities of the particle-pointer model with the pointer
// starting in its ground state. Free particle only.
DecoherenceDensity detector_model_density(const TwoLevelDetectorModel& model, const WavePacket& psi0, double T,
                                          std::size_t n_bins);

// Probability that leaks into off-diagonal terms of the first-crossing
// history set built from the smooth masks P- = erfc(x / w) / 2, P+ = 1 - P-
// with n steps over [0, T]. For w = 0 the masks are the sharp projectors.
double approximate_projector_defect(const WavePacket& psi0, double T, std::size_t n, double w,
                                    const Hamiltonian& H = Hamiltonian::free_particle());

using Matrix2 = std::array<std::array<cplx, 2>, 2>;

struct ZenoToyModel {
    double epsilon_H = 1.0;
    double x_rate = 10.0;  // starting value of the regulator sent to infinity
    double y_rate = 0.0;
};

// exp(-iHt - Vt) at the given regulator x.
Matrix2 regularised_propagator(const ZenoToyModel& model, double x, double t);

// Limit of the above as x grows, to entrywise convergence 1e-10. At t = 0
// the limit is taken from t > 0, giving E.
Matrix2 zeno_robustness_2x2(const ZenoToyModel& model, double t);

}  // namespace toa::histories
