#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "toa/core.hpp"
#include "toa/parallel.hpp"

using namespace toa;

namespace {

WavePacket random_state(const Grid1D& g, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    CVec a(g.size());
    for (auto& z : a) z = cplx(n01(rng), n01(rng));
    WavePacket psi(Representation::position, g, a, 1.0);
    double n = std::sqrt(psi.norm2());
    for (auto& z : psi.amp) z /= n;
    return psi;
}

// Direct quadrature of the free propagator sqrt(M/2 pi i t) exp(i M (x-x')^2 / 2t).
cplx apply_free_kernel(const WavePacket& psi, double x, double t)
{
    const double M = psi.mass;
    cplx pref = std::sqrt(M / (2.0 * pi * I * t));
    cplx s{};
    for (std::size_t j = 0; j < psi.grid.size(); ++j) {
        double d = x - psi.grid.x(j);
        s += std::polar(1.0, M * d * d / (2.0 * t)) * psi.amp[j];
    }
    return pref * s * psi.grid.dx();
}

}  // namespace

TEST_CASE("grid construction")
{
    Grid1D g = Grid1D::symmetric(10.0, 64);
    CHECK(g.dx() == doctest::Approx(20.0 / 64));
    CHECK(g.x(g.zero_index()) == doctest::Approx(0.0));
    MomentumGrid mg(g);
    CHECK(mg.dp() * g.dx() * 64 == doctest::Approx(2 * pi));
    CHECK(mg.p(32) == 0.0);
    CHECK_THROWS_AS(Grid1D(-1.0, 1.0, 100), ContractError);
    CHECK_THROWS_AS(Grid1D(1.0, 2.0, 64), ContractError);
}

TEST_CASE("spectral transform round trip")
{
    Grid1D g(-13.0, 17.0, 512);
    for (unsigned seed = 1; seed <= 5; ++seed) {
        WavePacket psi = random_state(g, seed);
        WavePacket m = to_momentum(psi);
        CHECK(m.norm2() == doctest::Approx(1.0).epsilon(1e-10));
        WavePacket back = to_position(m);
        CHECK(l2_distance(back, psi) < 1e-10);
    }
    WavePacket psi = random_state(g, 9);
    CHECK_THROWS_AS(to_position(psi), ContractError);
    CHECK_THROWS_AS(to_momentum(to_momentum(psi)), ContractError);
}

TEST_CASE("Gaussian momentum amplitudes")
{
    const double L = 6.0, pbar = 2.0, a = 1.5;
    GaussianSpec spec = GaussianSpec::from_momentum_width(L, pbar, a);
    Grid1D g = Grid1D::symmetric(40.0, 1024);
    WavePacket m = to_momentum(gaussian_packet(spec, g, 1.0));
    MomentumGrid mg(g);
    // Unitary-convention amplitude (a^2/2pi)^{1/4} exp(-a^2 (p-pbar)^2/4 + i p L),
    // times sqrt(2 pi) for the dp/2pi measure and a global phase exp(-i pbar L).
    double err = 0.0;
    for (std::size_t k = 0; k < mg.size(); ++k) {
        double p = mg.p(k);
        cplx expect = std::sqrt(2 * pi) * std::pow(a * a / (2 * pi), 0.25) *
                      std::exp(-a * a * (p - pbar) * (p - pbar) / 4.0) * std::polar(1.0, p * L - pbar * L);
        err = std::max(err, std::abs(m.amp[k] - expect));
    }
    CHECK(err < 1e-10);

    // Centered Gaussian: momentum width 1/sigma0.
    GaussianSpec c{0.0, 0.0, 0.8};
    WavePacket mc = to_momentum(gaussian_packet(c, g, 1.0));
    double p2 = 0.0;
    for (std::size_t k = 0; k < mg.size(); ++k) p2 += mg.p(k) * mg.p(k) * std::norm(mc.amp[k]);
    p2 *= mg.dp() / (2 * pi);
    CHECK(std::sqrt(2.0 * p2) == doctest::Approx(1.0 / 0.8).epsilon(1e-10));
}

TEST_CASE("left support demanded at construction")
{
    Grid1D g = Grid1D::symmetric(40.0, 1024);
    CHECK_NOTHROW(gaussian_packet(GaussianSpec{-10.0, 1.0, 1.0}, g, 1.0, true));
    CHECK_THROWS_AS(gaussian_packet(GaussianSpec{-1.0, 1.0, 1.0}, g, 1.0, true), ContractError);
}

TEST_CASE("free evolution")
{
    Grid1D g = Grid1D::symmetric(60.0, 2048);
    GaussianSpec spec{-10.0, 3.0, 1.5};
    WavePacket psi = gaussian_packet(spec, g, 2.0);

    CHECK(l2_distance(evolve_free(psi, 0.0), psi) < 1e-12);

    WavePacket later = evolve_free(psi, 4.0);
    CHECK(later.norm2() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(expectation_x(later) == doctest::Approx(-10.0 + 3.0 * 4.0 / 2.0).epsilon(1e-6));

    WavePacket ab = evolve_free(evolve_free(psi, 1.3), 2.1);
    CHECK(l2_distance(ab, evolve_free(psi, 3.4)) < 1e-10);
    CHECK_THROWS_AS(evolve_free(psi, -1.0), ContractError);
}

TEST_CASE("free evolution matches the position-space propagator")
{
    Grid1D g = Grid1D::symmetric(20.0, 1024);
    WavePacket psi = gaussian_packet(GaussianSpec{-2.0, 1.0, 1.0}, g, 1.0);
    const double t = 0.5;
    WavePacket u = evolve_free(psi, t);
    double err = 0.0;
    for (std::size_t j = 0; j < g.size(); j += 16) {
        if (std::abs(g.x(j)) > 5.0) continue;
        err = std::max(err, std::abs(u.amp[j] - apply_free_kernel(psi, g.x(j), t)));
    }
    CHECK(err < 1e-8);
}

TEST_CASE("split-step evolution")
{
    Grid1D g = Grid1D::symmetric(20.0, 512);
    WavePacket psi = gaussian_packet(GaussianSpec{-3.0, 0.5, 1.0}, g, 1.0);

    RVec zero(g.size(), 0.0);
    CHECK(l2_distance(evolve_potential_split_step(psi, zero, 2.0, 7), evolve_free(psi, 2.0)) < 1e-8);

    // Harmonic oscillator with omega = 1: every state returns after 2 pi up to a global phase.
    RVec V(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) V[j] = 0.5 * g.x(j) * g.x(j);
    WavePacket back = evolve_potential_split_step(psi, V, 2 * pi, 2000);
    cplx overlap{};
    for (std::size_t j = 0; j < g.size(); ++j) overlap += std::conj(psi.amp[j]) * back.amp[j];
    overlap *= g.dx();
    CHECK(std::abs(overlap) > 0.999);
    CHECK(back.norm2() == doctest::Approx(1.0).epsilon(1e-8));

    // Second order: halving the step cuts the error by about four.
    WavePacket squeezed = gaussian_packet(GaussianSpec{-2.0, 1.0, 0.6}, g, 1.0);
    WavePacket ref = evolve_potential_split_step(squeezed, V, 3.0, 8192);
    double e1 = l2_distance(evolve_potential_split_step(squeezed, V, 3.0, 64), ref);
    double e2 = l2_distance(evolve_potential_split_step(squeezed, V, 3.0, 128), ref);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));

    RVec bad = V;
    bad[3] = -std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(evolve_potential_split_step(psi, bad, 1.0, 1), ContractError);
}

TEST_CASE("Simpson quadrature")
{
    RVec ones(101, 1.0);
    CHECK(integrate(ones, 0.01) == doctest::Approx(1.0).epsilon(1e-15));

    RVec s(101);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sin(pi * i / 100.0);
    CHECK(std::abs(integrate(s, pi / 100.0) - 2.0) < 1e-8);

    // b e^{-bt} on [0, 20/b]: the truncated tail is e^{-20}.
    const double b = 0.7, T = 20.0 / b;
    const std::size_t n = 20000;
    RVec e(n + 1);
    for (std::size_t i = 0; i <= n; ++i) e[i] = b * std::exp(-b * T * i / n);
    CHECK(std::abs(integrate(e, T / n) - 1.0) < 1e-8);

    // Exact on cubics for both even and odd interval counts.
    for (std::size_t m : {4u, 5u, 7u, 10u}) {
        RVec c(m + 1);
        double h = 2.0 / m;
        for (std::size_t i = 0; i <= m; ++i) {
            double x = i * h;
            c[i] = 1.0 - 2.0 * x + 3.0 * x * x * x;
        }
        CHECK(integrate(c, h) == doctest::Approx(2.0 - 4.0 + 12.0).epsilon(1e-13));
    }

    CVec z{cplx(1, 2), cplx(3, 4)};
    CHECK(integrate(z, 0.5) == cplx(1.0, 1.5));
    CHECK_THROWS_AS(integrate(RVec{1.0}, 0.1), ContractError);
}

TEST_CASE("parallel_for visits every index once")
{
    std::vector<int> hits(1000, 0);
    set_thread_count(4);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    set_thread_count(0);
    for (int h : hits) CHECK(h == 1);
}
