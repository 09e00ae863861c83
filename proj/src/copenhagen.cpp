#include "toa/copenhagen.hpp"

#include <algorithm>

#include "toa/parallel.hpp"

namespace toa::copenhagen {

HalfLineProjectors::HalfLineProjectors(const Grid1D& grid) : P_minus(grid.size()), P_plus(grid.size())
{
    for (std::size_t j = 0; j < grid.size(); ++j) {
        bool right = j >= grid.zero_index();
        P_minus[j] = right ? 0.0 : 1.0;
        P_plus[j] = right ? 1.0 : 0.0;
    }
}

RVec HalfLineProjectors::strip(const Grid1D& grid, double delta_x)
{
    TOA_REQUIRE(delta_x >= grid.dx(), "strip must be at least one grid spacing wide");
    RVec m(grid.size(), 0.0);
    for (std::size_t j = 0; j < grid.size(); ++j)
        if (std::abs(grid.x(j)) <= 0.5 * delta_x) m[j] = 1.0;
    return m;
}

void DetectorConfig::validate(const Grid1D& grid, double T) const
{
    TOA_REQUIRE(tau > 0.0 && tau < T, "temporal resolution must satisfy 0 < tau < T");
    TOA_REQUIRE(v > 0.0, "detection velocity must be positive");
    TOA_REQUIRE(delta_x >= grid.dx(), "strip width must be at least dx");
}

namespace {

void mask(WavePacket& psi, const RVec& m)
{
    for (std::size_t j = 0; j < m.size(); ++j) psi.amp[j] *= m[j];
}

double masked_norm(const WavePacket& psi, const RVec& m)
{
    double s = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j) s += m[j] * std::norm(psi.amp[j]);
    return s * psi.grid.dx();
}

void require_left(const WavePacket& psi0)
{
    TOA_REQUIRE(psi0.rep == Representation::position, "state must be in position representation");
    TOA_REQUIRE(right_mass(psi0) < 1e-6, "state must be supported in x < 0");
}

}  // namespace

double reduction_chain_probability(const WavePacket& psi0, std::size_t k, std::size_t n, double T,
                                   const Hamiltonian& H)
{
    require_left(psi0);
    TOA_REQUIRE(n >= 1 && k >= 1 && k <= n, "bin index must satisfy 1 <= k <= n");
    TOA_REQUIRE(T > 0.0, "T must be positive");
    const double dt = T / static_cast<double>(n);
    HalfLineProjectors P(psi0.grid);
    WavePacket phi = psi0;
    for (std::size_t i = 1; i < k; ++i) {
        phi = H.evolve(phi, dt);
        mask(phi, P.P_minus);
    }
    phi = H.evolve(phi, dt);
    return masked_norm(phi, P.P_plus);
}

double zeno_survival(const WavePacket& psi0, double T, std::size_t n, const Hamiltonian& H)
{
    require_left(psi0);
    TOA_REQUIRE(n >= 1, "need at least one step");
    const double dt = T / static_cast<double>(n);
    HalfLineProjectors P(psi0.grid);
    WavePacket phi = psi0;
    mask(phi, P.P_minus);
    for (std::size_t i = 0; i < n; ++i) {
        phi = H.evolve(phi, dt);
        mask(phi, P.P_minus);
    }
    return phi.norm2();
}

RVec right_probabilities(const WavePacket& psi0, const TimeGrid& tg, const Hamiltonian& H)
{
    HalfLineProjectors P(psi0.grid);
    RVec q(tg.size());
    if (H.kind == Hamiltonian::Kind::potential) {
        WavePacket cur = psi0;
        q[0] = masked_norm(cur, P.P_plus);
        for (std::size_t i = 1; i < tg.size(); ++i) {
            cur = H.evolve(cur, tg.dt());
            q[i] = masked_norm(cur, P.P_plus);
        }
        return q;
    }
    // Free and trivial dynamics: every snapshot follows from the initial
    // momentum amplitudes, so the time points are independent.
    const WavePacket mom = to_momentum(psi0);
    parallel_for(tg.size(), [&](std::size_t i) {
        WavePacket w = H.is_free() ? evolve_free(mom, tg.t(i)) : mom;
        q[i] = masked_norm(to_position(w), P.P_plus);
    });
    return q;
}

ToaDistribution no_reduction_from_right_probabilities(const TimeGrid& tg, const RVec& q, double tau)
{
    TOA_REQUIRE(q.size() == tg.size(), "one sample per time point");
    RVec h(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        double stay = std::max(1.0 - std::clamp(q[i], 0.0, 1.0), 1e-300);
        h[i] = -std::log(stay) / tau;
    }
    RVec H = cumulative_integral(h, tg.dt());
    RVec p(q.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = h[i] * std::exp(-H[i]);
    return ToaDistribution(tg, std::move(p), std::exp(-H.back()));
}

ToaDistribution no_reduction_density_tau(const WavePacket& psi0, double tau, double T, std::size_t n_steps,
                                         const Hamiltonian& H)
{
    TimeGrid tg(T, n_steps);
    TOA_REQUIRE(tau >= 5.0 * tg.dt(), "tau must be at least five integration steps");
    TOA_REQUIRE(tau < T, "tau must be smaller than T");
    double n2 = psi0.norm2();
    TOA_REQUIRE(std::abs(n2 - 1.0) < 1e-8, "state must be normalised");
    return no_reduction_from_right_probabilities(tg, right_probabilities(psi0, tg, H), tau);
}

RVec discrete_reduction_recursion(const WavePacket& psi0, double tau, std::size_t n_bins, const Hamiltonian& H)
{
    TOA_REQUIRE(tau > 0.0 && n_bins >= 1, "need a positive step and at least one bin");
    TimeGrid tg(tau * static_cast<double>(n_bins), n_bins);
    RVec q = right_probabilities(psi0, tg, H);
    RVec p(n_bins);
    double survive = 1.0;
    for (std::size_t k = 0; k < n_bins; ++k) {
        p[k] = q[k] * survive;
        survive *= 1.0 - q[k];
    }
    return p;
}

double density_at_zero(const WavePacket& psi)
{
    TOA_REQUIRE(psi.rep == Representation::position, "state must be in position representation");
    const Grid1D& g = psi.grid;
    std::size_t j = g.zero_index();
    double u = -g.x(j) / g.dx();  // offset of x = 0 from node j in units of dx
    double fm = std::norm(psi.amp[j - 1]), f0 = std::norm(psi.amp[j]), fp = std::norm(psi.amp[j + 1]);
    return f0 + 0.5 * u * (fp - fm) + 0.5 * u * u * (fp - 2.0 * f0 + fm);
}

namespace {

RVec densities_at_zero(const WavePacket& psi0, const TimeGrid& tg, const Hamiltonian& H)
{
    RVec rho(tg.size());
    if (H.kind == Hamiltonian::Kind::potential) {
        WavePacket cur = psi0;
        rho[0] = density_at_zero(cur);
        for (std::size_t i = 1; i < tg.size(); ++i) {
            cur = H.evolve(cur, tg.dt());
            rho[i] = density_at_zero(cur);
        }
        return rho;
    }
    const WavePacket mom = to_momentum(psi0);
    parallel_for(tg.size(), [&](std::size_t i) {
        WavePacket w = H.is_free() ? evolve_free(mom, tg.t(i)) : mom;
        rho[i] = density_at_zero(to_position(w));
    });
    return rho;
}

}  // namespace

ToaDistribution strip_detector_density(const WavePacket& psi0, double v, double T, std::size_t n_steps,
                                       const Hamiltonian& H)
{
    TOA_REQUIRE(v >= 0.0, "detection velocity must be non-negative");
    TOA_REQUIRE(std::abs(psi0.norm2() - 1.0) < 1e-8, "state must be normalised");
    TimeGrid tg(T, n_steps);
    RVec rho = densities_at_zero(psi0, tg, H);
    RVec R = cumulative_integral(rho, tg.dt());
    RVec p(rho.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = v * rho[i] * std::exp(-v * R[i]);
    return ToaDistribution(tg, std::move(p), std::exp(-v * R.back()));
}

double strip_interval_probability(const WavePacket& psi0, double v, double t1, double t2, std::size_t n_steps,
                                  const Hamiltonian& H)
{
    TOA_REQUIRE(0.0 <= t1 && t1 <= t2, "need 0 <= t1 <= t2");
    if (t2 == 0.0) return 0.0;
    TimeGrid tg(t2, n_steps);
    RVec rho = densities_at_zero(psi0, tg, H);
    RVec R = cumulative_integral(rho, tg.dt());
    // Interpolate the running integral at t1.
    double pos = t1 / tg.dt();
    auto i = std::min(static_cast<std::size_t>(pos), tg.n_steps() - 1);
    double frac = pos - static_cast<double>(i);
    double R1 = R[i] + frac * (R[i + 1] - R[i]);
    return std::exp(-v * R1) - std::exp(-v * R.back());
}

double tau_sensitivity(const WavePacket& psi0, double tau, double T, std::size_t n_steps, const Hamiltonian& H)
{
    TimeGrid tg(T, n_steps);
    RVec q = right_probabilities(psi0, tg, H);
    ToaDistribution a = no_reduction_from_right_probabilities(tg, q, tau);
    ToaDistribution b = no_reduction_from_right_probabilities(tg, q, 2.0 * tau);
    double diff = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        diff = std::max(diff, std::abs(a.density[i] - b.density[i]));
        peak = std::max(peak, a.density[i]);
    }
    TOA_REQUIRE(peak > 0.0, "density vanishes identically");
    return diff / peak;
}

}  // namespace toa::copenhagen
