#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "toa/copenhagen.hpp"

using namespace toa;
using namespace toa::copenhagen;

namespace {

const GaussianSpec ref{-20.0, 5.0, 2.0};

WavePacket ref_packet() { return gaussian_packet(ref, default_grid(ref), 1.0, true); }

// Continuum density integrated over [a, b] by linear interpolation of the
// samples; the bins in the recursion test are many samples wide.
double bin_mass(const ToaDistribution& d, double a, double b)
{
    double s = 0.0, h = d.times.dt();
    for (std::size_t i = 0; i + 1 < d.density.size(); ++i) {
        double lo = std::max(a, d.times.t(i)), hi = std::min(b, d.times.t(i + 1));
        if (hi <= lo) continue;
        auto f = [&](double t) { return d.density[i] + (d.density[i + 1] - d.density[i]) * (t - d.times.t(i)) / h; };
        s += 0.5 * (hi - lo) * (f(lo) + f(hi));
    }
    return s;
}

}  // namespace

TEST_CASE("no dynamics means no arrivals")
{
    WavePacket psi = ref_packet();
    auto H0 = Hamiltonian::zero();
    for (std::size_t k : {1u, 5u, 10u}) CHECK(reduction_chain_probability(psi, k, 10, 5.0, H0) < 1e-12);
    CHECK(zeno_survival(psi, 5.0, 50, H0) == doctest::Approx(1.0).epsilon(1e-12));
    ToaDistribution d = no_reduction_density_tau(psi, 0.5, 5.0, 100, H0);
    CHECK(d.no_detect == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(d.detected_mass() < 1e-10);
    ToaDistribution s = strip_detector_density(psi, 1.0, 5.0, 100, H0);
    CHECK(s.no_detect == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("single-step chain and survival are complementary")
{
    WavePacket psi = ref_packet();
    const double T = 4.0;
    TimeGrid tg(T, 1);
    RVec q = right_probabilities(psi, tg, Hamiltonian::free_particle());
    CHECK(reduction_chain_probability(psi, 1, 1, T) == doctest::Approx(q[1]).epsilon(1e-12));
    CHECK(zeno_survival(psi, T, 1) == doctest::Approx(1.0 - q[1]).epsilon(1e-10));
    // Chain values over all bins plus survival exhaust the probability.
    const std::size_t n = 8;
    double sum = zeno_survival(psi, T, n);
    for (std::size_t k = 1; k <= n; ++k) sum += reduction_chain_probability(psi, k, n, T);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("hazard density conserves probability and peaks at the classical time")
{
    WavePacket psi = ref_packet();
    const double tcl = ref.t_classical(1.0), delta = ref.arrival_width(1.0);
    ToaDistribution d = no_reduction_density_tau(psi, 0.5 * delta, 3.0 * tcl, 1200);
    CHECK(std::abs(d.total_mass() - 1.0) < 1e-6);
    CHECK(std::abs(d.peak_time() - tcl) / tcl < 0.02);
    for (double p : d.density) CHECK(p >= 0.0);
    CHECK(tau_sensitivity(psi, 0.5 * delta, 3.0 * tcl, 1200) > 0.1);
}

TEST_CASE("continuum hazard matches the projective recursion")
{
    // The recursion measures at t_k = k tau; its k-th probability is the
    // continuum mass of the bin centred on t_k, up to O(tau^2).
    WavePacket psi = ref_packet();
    const double tau = 0.05;
    const std::size_t bins = 200;
    RVec rec = discrete_reduction_recursion(psi, tau, bins);
    ToaDistribution d = no_reduction_density_tau(psi, tau, tau * (bins + 1), 20 * (bins + 1));
    double worst = 0.0;
    for (std::size_t k = 1; k < bins; ++k) {
        double t = tau * static_cast<double>(k);
        worst = std::max(worst, std::abs(rec[k] - bin_mass(d, t - 0.5 * tau, t + 0.5 * tau)));
    }
    MESSAGE("recursion vs continuum: " << worst);
    CHECK(worst < 1e-3);
}

TEST_CASE("strip detector")
{
    WavePacket psi = ref_packet();
    const double tcl = ref.t_classical(1.0), T = 3.0 * tcl, v = 0.25 * ref.mean_momentum;
    ToaDistribution d = strip_detector_density(psi, v, T, 1200);
    CHECK(std::abs(d.total_mass() - 1.0) < 1e-6);
    CHECK(std::abs(d.peak_time() - tcl) / tcl < 0.02);
    CHECK(strip_interval_probability(psi, v, 0.0, T, 1200) == doctest::Approx(1.0 - d.no_detect).epsilon(1e-9));
    double mid = strip_interval_probability(psi, v, tcl - 1.0, tcl + 1.0, 1200);
    CHECK(mid == doctest::Approx(bin_mass(d, tcl - 1.0, tcl + 1.0)).epsilon(1e-4));

    // Closed-form density of a packet with a real amplitude at the origin.
    Grid1D g = Grid1D::symmetric(10.0, 1024);
    CVec a(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) a[j] = std::exp(-g.x(j) * g.x(j) / 2.0) / std::pow(pi, 0.25);
    WavePacket still(Representation::position, g, a, 1.0);
    ToaDistribution s = strip_detector_density(still, 0.3, 2.0, 200, Hamiltonian::zero());
    double rho0 = 1.0 / std::sqrt(pi);
    CHECK(s.density[100] == doctest::Approx(0.3 * rho0 * std::exp(-0.3 * rho0 * 1.0)).epsilon(1e-4));
    CHECK(s.no_detect == doctest::Approx(std::exp(-0.3 * rho0 * 2.0)).epsilon(1e-4));
}

TEST_CASE("potential route with V = 0 agrees with free evolution")
{
    GaussianSpec s{-8.0, 4.0, 1.5};
    Grid1D g = Grid1D::symmetric(64.0, 1024);
    WavePacket psi = gaussian_packet(s, g, 1.0, true);
    TimeGrid tg(3.0, 60);
    RVec a = right_probabilities(psi, tg, Hamiltonian::free_particle());
    RVec b = right_probabilities(psi, tg, Hamiltonian::with_potential(RVec(g.size(), 0.0), 0.01));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-10);
}

TEST_CASE("contracts")
{
    Grid1D g = Grid1D::symmetric(64.0, 1024);
    WavePacket right = gaussian_packet(GaussianSpec{10.0, 1.0, 1.0}, g, 1.0);
    CHECK_THROWS_AS(zeno_survival(right, 1.0, 10), ContractError);
    CHECK_THROWS_AS(reduction_chain_probability(right, 1, 10, 1.0), ContractError);
    WavePacket psi = gaussian_packet(GaussianSpec{-10.0, 1.0, 1.0}, g, 1.0);
    CHECK_THROWS_AS(no_reduction_density_tau(psi, 0.01, 1.0, 100), ContractError);
    CHECK_THROWS_AS(no_reduction_density_tau(psi, 2.0, 1.0, 100), ContractError);
    CHECK_THROWS_AS(HalfLineProjectors::strip(g, 0.5 * g.dx()), ContractError);
    DetectorConfig cfg{0.1, 1.0, g.dx()};
    CHECK_NOTHROW(cfg.validate(g, 1.0));
    cfg.v = 0.0;
    CHECK_THROWS_AS(cfg.validate(g, 1.0), ContractError);
}

TEST_CASE("reduction chain at a fixed time falls as dt^{3/2}")
{
    // After each reduction the packet has a hard edge at x = 0 whose height
    // scales as sqrt(dt), and the edge leaks |psi(0)|^2 sqrt(dt) per step, so
    // p(2n) / p(n) tends to 2^{-3/2} from above. The grid must resolve
    // dx^2 << dt, hence the fine lattice.
    WavePacket psi = gaussian_packet(ref, Grid1D::symmetric(160.0, 16384), 1.0, true);
    const double T = 2.0 * ref.t_classical(1.0);
    double prev = 1.0;
    for (std::size_t n : {128u, 256u, 512u}) {
        const double r =
            reduction_chain_probability(psi, n, 2 * n, T) / reduction_chain_probability(psi, n / 2, n, T);
        MESSAGE("n = " << n << ": " << r);
        CHECK(r > std::pow(2.0, -1.5));
        CHECK(r < prev);
        prev = r;
    }
    CHECK(prev < 0.41);
    // Survival loss tends to 1 / sqrt(n) (a factor 2 per quadrupling, approached
    // from below); a dt^2 law per step would give a factor 4.
    const double l1 = 1.0 - zeno_survival(psi, T, 256), l2 = 1.0 - zeno_survival(psi, T, 1024);
    CHECK(l1 / l2 > 1.2);
    CHECK(l1 / l2 < 2.5);
}
