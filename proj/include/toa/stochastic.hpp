#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <variant>

#include "toa/core.hpp"
#include "toa/distribution.hpp"

namespace toa::stochastic {

struct Diffusion {
    double D = 1.0;
};

// Column-stochastic two-state process; rate_b is the rate out of the
// initial state 0 into state 1, rate_a the rate back.
struct TwoLevel {
    double rate_a = 0.0;
    double rate_b = 0.0;
};

// Tridiagonal operator: (A m)_i = lower_i m_{i-1} + diag_i m_i + upper_i m_{i+1}.
struct Tridiagonal {
    RVec lower, diag, upper;
    std::size_t size() const { return diag.size(); }
};

class StochasticGenerator {
  public:
    static StochasticGenerator diffusion(double D);
    static StochasticGenerator two_level(double rate_a, double rate_b);

    bool is_diffusion() const { return std::holds_alternative<Diffusion>(kind_); }
    double diffusion_constant() const;
    const TwoLevel& two_level_rates() const;

    // Generator (D/2) d^2/dx^2 acting on node probabilities, with reflecting
    // walls at both ends of the box so that every column sums to zero.
    Tridiagonal lattice(const Grid1D& grid) const;
    // Same operator with every node at x >= 0 removed (absorbed), acting on
    // the nodes j < grid.zero_index().
    Tridiagonal half_line_lattice(const Grid1D& grid) const;
    // Rate matrix of the two-level process (columns sum to zero).
    std::array<std::array<double, 2>, 2> rate_matrix() const;

  private:
    explicit StochasticGenerator(std::variant<Diffusion, TwoLevel> k) : kind_(k) {}
    std::variant<Diffusion, TwoLevel> kind_;
};

// Probability density on a grid (diffusion) or a two-component vector.
struct ClassicalDensity {
    std::optional<Grid1D> grid;
    RVec values;

    // Narrow Gaussian of width 2 dx standing in for delta(x - x0).
    static ClassicalDensity point_source(const Grid1D& grid, double x0);
    static ClassicalDensity two_state(double p0, double p1);

    double mass() const;
    double mass_right() const;  // mass on nodes x >= 0
};

// Kernel K(x_i, x_j) on the half-line nodes x_i < 0, in density units
// (column j integrates to the surviving mass started at x_j).
struct HalfLineKernel {
    RVec x;
    double dx = 0.0;
    std::vector<double> values;  // row-major

    std::size_t size() const { return x.size(); }
    double operator()(std::size_t i, std::size_t j) const { return values[i * x.size() + j]; }
    double column_mass(std::size_t j) const;
};

enum class KernelMethod { dirichlet, trotter };

// Semigroup of the generator with an absorbing wall at x = 0. The dirichlet
// method exponentiates the restricted lattice generator exactly; trotter
// forms [chi_- e^{L t/n} chi_-]^n with the full-box lattice generator.
HalfLineKernel restricted_classical_propagator(const StochasticGenerator& gen, const Grid1D& grid, double t,
                                               KernelMethod method = KernelMethod::dirichlet,
                                               std::size_t n_trotter = 0);

struct PassageOptions {
    // Internal Crank-Nicolson steps per output interval.
    std::size_t substeps = 1;
    // Backward-Euler half steps replacing the first Crank-Nicolson step;
    // damps the oscillation a narrow initial profile would excite.
    std::size_t rannacher_steps = 4;
};

ToaDistribution first_passage_density(const StochasticGenerator& gen, const ClassicalDensity& rho0, double T,
                                      std::size_t n_steps, const PassageOptions& opt = {});

// Bin probabilities int dx [chi_+ e^{L dt} (chi_- e^{L dt})^n rho0] for n = 0..n_bins-1,
// evaluated with the exact lattice exponential.
RVec discrete_passage_probabilities(const StochasticGenerator& gen, const ClassicalDensity& rho0, double T,
                                    std::size_t n_bins);

ToaDistribution two_level_transition_density(double rate_b, double T, std::size_t n_steps = 4000);

// Closed forms for Wiener first passage from x = -L under generator (D/2) d^2/dx^2.
double wiener_density(double D, double L, double t);
double wiener_survival(double D, double L, double T);
double wiener_cdf(double D, double L, double t);

struct MonteCarloOptions {
    double dt = 0.01;
    std::size_t n_bins = 500;
    std::size_t n_chunks = 64;  // fixed partition of walkers into seeded substreams
};

struct MonteCarloResult {
    ToaDistribution histogram;   // bin-averaged density at bin centres mapped onto a TimeGrid
    RVec passage_times;          // sorted first-passage times of walkers that arrived
    std::size_t n_walkers = 0;
    double no_detect_error = 0.0;  // binomial standard error of p_N
    std::uint64_t seed = 0;
};

// Euler-Maruyama walkers started at x0 < 0, with a Brownian-bridge test for
// crossings that happen between grid times.
MonteCarloResult monte_carlo_first_passage(const StochasticGenerator& gen, double x0, double T,
                                           std::size_t n_walkers, std::uint64_t seed,
                                           const MonteCarloOptions& opt = {});

// Kolmogorov-Smirnov distance on [0, T] between the empirical law of the
// sample (walkers that never arrived sit on the atom N beyond T) and a
// reference CDF.
double ks_distance(const RVec& sorted_times, std::size_t n_total, const std::function<double(double)>& cdf,
                   double T);

ToaDistribution condition_on_arrival(const ToaDistribution& d);

}  // namespace toa::stochastic
