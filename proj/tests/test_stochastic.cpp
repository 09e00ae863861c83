#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "toa/parallel.hpp"
#include "toa/stochastic.hpp"

using namespace toa;
using namespace toa::stochastic;

namespace {

// Image-method heat kernel with an absorbing wall at 0 (variance D t).
double image_kernel(double D, double x, double xp, double t)
{
    double s = 2.0 * D * t;
    return (std::exp(-(x - xp) * (x - xp) / s) - std::exp(-(x + xp) * (x + xp) / s)) / std::sqrt(pi * s);
}

double kernel_l1(const HalfLineKernel& a, const HalfLineKernel& b)
{
    double s = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) s += std::abs(a.values[k] - b.values[k]);
    return s * a.dx * a.dx;
}

}  // namespace

TEST_CASE("generator invariants")
{
    Grid1D g = Grid1D::symmetric(4.0, 64);
    auto gen = StochasticGenerator::diffusion(0.7);
    Tridiagonal a = gen.lattice(g);
    for (std::size_t j = 0; j < a.size(); ++j) {
        double col = a.diag[j];
        if (j > 0) col += a.upper[j - 1];
        if (j + 1 < a.size()) col += a.lower[j + 1];
        CHECK(std::abs(col) < 1e-12);
        CHECK(a.lower[j] >= 0.0);
        CHECK(a.upper[j] >= 0.0);
    }
    auto two = StochasticGenerator::two_level(0.3, 0.5);
    auto r = two.rate_matrix();
    CHECK(r[0][0] + r[1][0] == 0.0);
    CHECK(r[0][1] + r[1][1] == 0.0);
    CHECK(r[1][0] == 0.5);
    CHECK_THROWS_AS(StochasticGenerator::diffusion(-1.0), ContractError);
    CHECK_THROWS_AS(StochasticGenerator::two_level(-0.1, 1.0), ContractError);
    CHECK_THROWS_AS(restricted_classical_propagator(two, g, 1.0), ContractError);
}

TEST_CASE("restricted kernel reproduces the image formula")
{
    const double D = 1.0, t = 1.0;
    Grid1D g = Grid1D::symmetric(10.0, 512);
    auto gen = StochasticGenerator::diffusion(D);
    HalfLineKernel k = restricted_classical_propagator(gen, g, t);
    double worst = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) {
        if (k.x[j] < -5.0) continue;  // keep away from the reflecting box wall
        double col = 0.0;
        for (std::size_t i = 0; i < k.size(); ++i) col += std::abs(k(i, j) - image_kernel(D, k.x[i], k.x[j], t));
        worst = std::max(worst, col * k.dx);
        CHECK(k.column_mass(j) <= 1.0 + 1e-12);
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("short-time kernel concentrates at the source")
{
    const double D = 1.0, t = 0.01;
    Grid1D g = Grid1D::symmetric(10.0, 512);
    HalfLineKernel k = restricted_classical_propagator(StochasticGenerator::diffusion(D), g, t);
    std::size_t j = 0;
    while (k.x[j] < -2.0) ++j;
    double near = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i)
        if (std::abs(k.x[i] - k.x[j]) <= 3.0 * std::sqrt(D * t)) near += k(i, j) * k.dx;
    CHECK(near > 0.99);
}

TEST_CASE("Trotter product converges at first order")
{
    // Lattice c = D/2dx^2 = 50; steps with c*dt well below one are in the
    // asymptotic first-order regime of the Trotter formula.
    Grid1D g = Grid1D::symmetric(6.4, 128);
    auto gen = StochasticGenerator::diffusion(1.0);
    const double t = 0.5;
    HalfLineKernel exact = restricted_classical_propagator(gen, g, t);
    double prev_diff = -1.0;
    HalfLineKernel prev = restricted_classical_propagator(gen, g, t, KernelMethod::trotter, 128);
    for (std::size_t n : {256u, 512u, 1024u}) {
        HalfLineKernel cur = restricted_classical_propagator(gen, g, t, KernelMethod::trotter, n);
        double diff = kernel_l1(cur, prev);
        if (prev_diff > 0.0) CHECK(diff / prev_diff == doctest::Approx(0.5).epsilon(0.1));
        prev_diff = diff;
        prev = cur;
    }
    CHECK(kernel_l1(prev, exact) < 2.0 * prev_diff);
}

TEST_CASE("Wiener first passage against the closed form")
{
    const double D = 1.0, L = 2.0, T = 10.0;
    Grid1D g = Grid1D::symmetric(40.0, 4096);
    auto gen = StochasticGenerator::diffusion(D);
    ToaDistribution d = first_passage_density(gen, ClassicalDensity::point_source(g, -L), T, 2000);
    RVec err(d.density.size());
    for (std::size_t i = 0; i < err.size(); ++i) err[i] = std::abs(d.density[i] - wiener_density(D, L, d.times.t(i)));
    CHECK(integrate(err, d.times.dt()) < 1e-2);
    CHECK(std::abs(d.no_detect - wiener_survival(D, L, T)) < 1e-3);
    CHECK(std::abs(d.total_mass() - 1.0) < 1e-3);
    for (double p : d.density) CHECK(p >= 0.0);
}

TEST_CASE("survival decreases with T and vanishes for long horizons")
{
    const double D = 1.0, L = 2.0;
    Grid1D g = Grid1D::symmetric(40.0, 2048);
    auto gen = StochasticGenerator::diffusion(D);
    auto rho = ClassicalDensity::point_source(g, -L);
    double last = 1.0;
    for (double T : {1.0, 2.0, 5.0, 10.0, 20.0}) {
        double pn = first_passage_density(gen, rho, T, 400).no_detect;
        CHECK(pn <= last);
        last = pn;
    }
    CHECK(wiener_survival(D, L, 1e8) < 1e-3);
    auto right = ClassicalDensity::point_source(g, 1.0);
    CHECK_THROWS_AS(first_passage_density(gen, right, 1.0, 10), ContractError);
}

TEST_CASE("bin probabilities match the discrete chain")
{
    // Per-bin agreement between the continuum flux and the projected chain
    // chi_+ e^{L dt} (chi_- e^{L dt})^n, on a coarse lattice.
    Grid1D g = Grid1D::symmetric(6.4, 128);
    auto gen = StochasticGenerator::diffusion(1.0);
    auto rho = ClassicalDensity::point_source(g, -1.5);
    const double T = 1.0;
    const std::size_t n = 16000;
    RVec chain = discrete_passage_probabilities(gen, rho, T, n);
    ToaDistribution d = first_passage_density(gen, rho, T, n, PassageOptions{1, 0});
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double bin = 0.5 * d.times.dt() * (d.density[k] + d.density[k + 1]);
        worst = std::max(worst, std::abs(bin - chain[k]));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("two-level decay")
{
    ToaDistribution zero = two_level_transition_density(0.0, 10.0);
    CHECK(zero.no_detect == 1.0);
    for (double p : zero.density) CHECK(p == 0.0);

    const double b = 0.5, T = 40.0;
    ToaDistribution d = two_level_transition_density(b, T);
    for (std::size_t i = 0; i < d.density.size(); i += 97) CHECK(d.density[i] == b * std::exp(-b * d.times.t(i)));
    CHECK(std::abs(d.total_mass() - 1.0) < 1e-8);
    CHECK(condition_on_arrival(d).conditional_mean() == doctest::Approx(1.0 / b).epsilon(0.01));

    // The generator route agrees with the closed form.
    auto gen = StochasticGenerator::two_level(0.2, b);
    ToaDistribution g = first_passage_density(gen, ClassicalDensity::two_state(1.0, 0.0), T, 4000);
    CHECK(g.no_detect == doctest::Approx(std::exp(-b * T)));
    CHECK(g.density[100] == doctest::Approx(d.density[100]));

    // Conditioning: b e^{-bt} / (1 - e^{-bT}).
    ToaDistribution c = condition_on_arrival(two_level_transition_density(b, 3.0));
    for (std::size_t i = 0; i < c.density.size(); i += 211)
        CHECK(c.density[i] == doctest::Approx(b * std::exp(-b * c.times.t(i)) / (1.0 - std::exp(-b * 3.0))).epsilon(1e-6));
    CHECK(c.detected_mass() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(c.no_detect == 0.0);
}

TEST_CASE("conditioning")
{
    ToaDistribution full = two_level_transition_density(2.0, 20.0);
    ToaDistribution none(full.times, full.density, 0.0);
    ToaDistribution c = condition_on_arrival(none);
    CHECK(c.density[5] == doctest::Approx(none.density[5]).epsilon(1e-8));
    CHECK_THROWS_AS(condition_on_arrival(two_level_transition_density(0.0, 1.0)), NumericalError);
}

TEST_CASE("Monte Carlo oracle")
{
    auto gen = StochasticGenerator::diffusion(1.0);
    MonteCarloResult far = monte_carlo_first_passage(gen, -10.0, 1.0, 10000, 7);
    CHECK(far.histogram.no_detect > 0.999);

    // Statistical scaling of the KS distance, averaged over seeds so the
    // comparison is not at the mercy of a single draw.
    const double L = 2.0, T = 3.0;
    auto cdf = [&](double t) { return wiener_cdf(1.0, L, t); };
    MonteCarloOptions opt;
    opt.dt = 0.005;
    double ks1 = 0.0, ks2 = 0.0;
    const int seeds = 24;
    for (int s = 0; s < seeds; ++s) {
        auto a = monte_carlo_first_passage(gen, -L, T, 10000, 100 + s, opt);
        auto b = monte_carlo_first_passage(gen, -L, T, 20000, 200 + s, opt);
        ks1 += ks_distance(a.passage_times, a.n_walkers, cdf, T);
        ks2 += ks_distance(b.passage_times, b.n_walkers, cdf, T);
    }
    double ratio = ks1 / ks2;
    CHECK(ratio > 1.15);
    CHECK(ratio < 1.75);

    // Same seed, different worker counts: identical output.
    set_thread_count(1);
    auto one = monte_carlo_first_passage(gen, -L, 2.0, 10000, 42, opt);
    set_thread_count(3);
    auto three = monte_carlo_first_passage(gen, -L, 2.0, 10000, 42, opt);
    set_thread_count(0);
    CHECK(one.passage_times == three.passage_times);
}
