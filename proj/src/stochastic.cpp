#include "toa/stochastic.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <random>

#include "toa/parallel.hpp"

namespace toa::stochastic {

StochasticGenerator StochasticGenerator::diffusion(double D)
{
    TOA_REQUIRE(D > 0.0 && std::isfinite(D), "diffusion constant must be positive");
    return StochasticGenerator(Diffusion{D});
}

StochasticGenerator StochasticGenerator::two_level(double rate_a, double rate_b)
{
    TOA_REQUIRE(rate_a >= 0.0 && rate_b >= 0.0, "rates must be non-negative");
    return StochasticGenerator(TwoLevel{rate_a, rate_b});
}

double StochasticGenerator::diffusion_constant() const
{
    TOA_REQUIRE(is_diffusion(), "generator is not a diffusion");
    return std::get<Diffusion>(kind_).D;
}

const TwoLevel& StochasticGenerator::two_level_rates() const
{
    TOA_REQUIRE(!is_diffusion(), "generator is not a two-level process");
    return std::get<TwoLevel>(kind_);
}

Tridiagonal StochasticGenerator::lattice(const Grid1D& grid) const
{
    const double c = 0.5 * diffusion_constant() / (grid.dx() * grid.dx());
    const std::size_t n = grid.size();
    Tridiagonal a{RVec(n, c), RVec(n, -2.0 * c), RVec(n, c)};
    a.lower[0] = 0.0;
    a.upper[n - 1] = 0.0;
    a.diag[0] = -c;
    a.diag[n - 1] = -c;
    return a;
}

Tridiagonal StochasticGenerator::half_line_lattice(const Grid1D& grid) const
{
    const double c = 0.5 * diffusion_constant() / (grid.dx() * grid.dx());
    const std::size_t n = grid.zero_index();
    Tridiagonal a{RVec(n, c), RVec(n, -2.0 * c), RVec(n, c)};
    a.lower[0] = 0.0;
    a.upper[n - 1] = 0.0;
    a.diag[0] = -c;  // reflecting far wall; the node next to x = 0 leaks into it
    return a;
}

std::array<std::array<double, 2>, 2> StochasticGenerator::rate_matrix() const
{
    const TwoLevel& r = two_level_rates();
    return {{{-r.rate_b, r.rate_a}, {r.rate_b, -r.rate_a}}};
}

ClassicalDensity ClassicalDensity::point_source(const Grid1D& grid, double x0)
{
    const double w = 2.0 * grid.dx();
    RVec rho(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        double y = (grid.x(j) - x0) / w;
        rho[j] = std::exp(-0.5 * y * y);
    }
    double m = 0.0;
    for (double r : rho) m += r;
    for (double& r : rho) r /= m * grid.dx();
    return ClassicalDensity{grid, std::move(rho)};
}

ClassicalDensity ClassicalDensity::two_state(double p0, double p1)
{
    TOA_REQUIRE(p0 >= 0.0 && p1 >= 0.0 && std::abs(p0 + p1 - 1.0) < 1e-8, "two-state density must be normalised");
    return ClassicalDensity{std::nullopt, RVec{p0, p1}};
}

double ClassicalDensity::mass() const
{
    double s = 0.0;
    for (double v : values) s += v;
    return grid ? s * grid->dx() : s;
}

double ClassicalDensity::mass_right() const
{
    if (!grid) return values.size() > 1 ? values[1] : 0.0;
    double s = 0.0;
    for (std::size_t j = grid->zero_index(); j < values.size(); ++j) s += values[j];
    return s * grid->dx();
}

double HalfLineKernel::column_mass(std::size_t j) const
{
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += (*this)(i, j);
    return s * dx;
}

namespace {

Eigen::MatrixXd dense(const Tridiagonal& a)
{
    const Eigen::Index n = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        m(i, i) = a.diag[i];
        if (i > 0) m(i, i - 1) = a.lower[i];
        if (i + 1 < n) m(i, i + 1) = a.upper[i];
    }
    return m;
}

// exp(t A) for the symmetric lattice generators used here.
Eigen::MatrixXd symmetric_expm(const Eigen::MatrixXd& a, double t)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw NumericalError("eigen-decomposition of the lattice generator failed");
    Eigen::VectorXd e = (es.eigenvalues() * t).array().exp();
    return es.eigenvectors() * e.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd symmetric_power(const Eigen::MatrixXd& b, std::size_t n)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    if (es.info() != Eigen::Success) throw NumericalError("eigen-decomposition of the Trotter factor failed");
    Eigen::VectorXd e = es.eigenvalues().unaryExpr([n](double mu) { return std::pow(mu, static_cast<double>(n)); });
    return es.eigenvectors() * e.asDiagonal() * es.eigenvectors().transpose();
}

// Solve (I - s A) y = rhs for tridiagonal A by the Thomas algorithm.
void implicit_solve(const Tridiagonal& a, double s, RVec& y, const RVec& rhs, RVec& work)
{
    const std::size_t n = a.size();
    work.resize(n);
    double b0 = 1.0 - s * a.diag[0];
    work[0] = -s * a.upper[0] / b0;
    y[0] = rhs[0] / b0;
    for (std::size_t i = 1; i < n; ++i) {
        double l = -s * a.lower[i];
        double b = 1.0 - s * a.diag[i] - l * work[i - 1];
        work[i] = i + 1 < n ? -s * a.upper[i] / b : 0.0;
        y[i] = (rhs[i] - l * y[i - 1]) / b;
    }
    for (std::size_t i = n - 1; i-- > 0;) y[i] -= work[i] * y[i + 1];
}

void apply(const Tridiagonal& a, const RVec& m, RVec& out)
{
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        double v = a.diag[i] * m[i];
        if (i > 0) v += a.lower[i] * m[i - 1];
        if (i + 1 < n) v += a.upper[i] * m[i + 1];
        out[i] = v;
    }
}

void check_support(const ClassicalDensity& rho0)
{
    TOA_REQUIRE(rho0.mass_right() < 1e-8, "initial density must be supported in x < 0");
}

}  // namespace

HalfLineKernel restricted_classical_propagator(const StochasticGenerator& gen, const Grid1D& grid, double t,
                                               KernelMethod method, std::size_t n_trotter)
{
    TOA_REQUIRE(gen.is_diffusion(), "two-level generators have no spatial boundary");
    TOA_REQUIRE(t > 0.0, "time must be positive");
    const std::size_t n = grid.zero_index();
    Eigen::MatrixXd k;
    if (method == KernelMethod::dirichlet) {
        k = symmetric_expm(dense(gen.half_line_lattice(grid)), t);
    } else {
        TOA_REQUIRE(n_trotter >= 1, "Trotter product needs at least one factor");
        Eigen::MatrixXd step = symmetric_expm(dense(gen.lattice(grid)), t / static_cast<double>(n_trotter));
        Eigen::MatrixXd block = step.topLeftCorner(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        k = symmetric_power(block, n_trotter);
    }
    HalfLineKernel out;
    out.dx = grid.dx();
    out.x.resize(n);
    out.values.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        out.x[i] = grid.x(i);
        for (std::size_t j = 0; j < n; ++j)
            out.values[i * n + j] = k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) / grid.dx();
    }
    return out;
}

ToaDistribution first_passage_density(const StochasticGenerator& gen, const ClassicalDensity& rho0, double T,
                                      std::size_t n_steps, const PassageOptions& opt)
{
    TimeGrid tg(T, n_steps);
    check_support(rho0);
    if (!gen.is_diffusion()) {
        TOA_REQUIRE(rho0.values.size() == 2, "two-level process needs a two-state density");
        const double b = gen.two_level_rates().rate_b;
        RVec p(tg.size());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = rho0.values[0] * b * std::exp(-b * tg.t(i));
        return ToaDistribution(tg, std::move(p), rho0.values[0] * std::exp(-b * T));
    }
    TOA_REQUIRE(rho0.grid.has_value(), "diffusion needs a density on a grid");
    TOA_REQUIRE(opt.substeps >= 1, "need at least one substep");
    const Grid1D& grid = *rho0.grid;
    const Tridiagonal a = gen.half_line_lattice(grid);
    const std::size_t n = a.size();
    const double leak = a.upper[0];  // coupling c = D / 2dx^2 into the absorbed node
    for (double v : a.diag) TOA_REQUIRE(std::isfinite(v), "non-conservative generator");

    RVec m(n), rhs(n), work(n), lm(n);
    for (std::size_t j = 0; j < n; ++j) m[j] = rho0.values[j] * grid.dx();

    const double h = tg.dt() / static_cast<double>(opt.substeps);
    RVec p(tg.size());
    p[0] = leak * m[n - 1];
    bool started = false;
    for (std::size_t i = 1; i < tg.size(); ++i) {
        for (std::size_t s = 0; s < opt.substeps; ++s) {
            if (!started && opt.rannacher_steps > 0) {
                const double hb = h / static_cast<double>(opt.rannacher_steps);
                for (std::size_t r = 0; r < opt.rannacher_steps; ++r) {
                    rhs = m;
                    implicit_solve(a, hb, m, rhs, work);
                }
            } else {
                apply(a, m, lm);
                for (std::size_t j = 0; j < n; ++j) rhs[j] = m[j] + 0.5 * h * lm[j];
                implicit_solve(a, 0.5 * h, m, rhs, work);
            }
            started = true;
        }
        p[i] = leak * m[n - 1];
    }
    double survive = 0.0;
    for (double v : m) survive += v;
    return ToaDistribution(tg, std::move(p), survive);
}

RVec discrete_passage_probabilities(const StochasticGenerator& gen, const ClassicalDensity& rho0, double T,
                                    std::size_t n_bins)
{
    TOA_REQUIRE(gen.is_diffusion() && rho0.grid.has_value(), "needs a diffusion density on a grid");
    TOA_REQUIRE(n_bins >= 1, "need at least one bin");
    check_support(rho0);
    const Grid1D& grid = *rho0.grid;
    const std::size_t z = grid.zero_index();
    Eigen::MatrixXd step = symmetric_expm(dense(gen.lattice(grid)), T / static_cast<double>(n_bins));
    Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t j = 0; j < z; ++j) m(static_cast<Eigen::Index>(j)) = rho0.values[j] * grid.dx();
    RVec out(n_bins);
    Eigen::VectorXd next;
    for (std::size_t k = 0; k < n_bins; ++k) {
        next.noalias() = step * m;
        double crossed = 0.0;
        for (Eigen::Index j = static_cast<Eigen::Index>(z); j < next.size(); ++j) {
            crossed += next(j);
            next(j) = 0.0;
        }
        out[k] = crossed;
        m.swap(next);
    }
    return out;
}

ToaDistribution two_level_transition_density(double rate_b, double T, std::size_t n_steps)
{
    TOA_REQUIRE(rate_b >= 0.0, "rate must be non-negative");
    TimeGrid tg(T, n_steps);
    RVec p(tg.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = rate_b * std::exp(-rate_b * tg.t(i));
    return ToaDistribution(tg, std::move(p), std::exp(-rate_b * T));
}

double wiener_density(double D, double L, double t)
{
    if (t <= 0.0) return 0.0;
    return L / std::sqrt(2.0 * pi * D * t * t * t) * std::exp(-L * L / (2.0 * D * t));
}

double wiener_survival(double D, double L, double T) { return std::erf(L / std::sqrt(2.0 * D * T)); }

double wiener_cdf(double D, double L, double t)
{
    if (t <= 0.0) return 0.0;
    return std::erfc(L / std::sqrt(2.0 * D * t));
}

MonteCarloResult monte_carlo_first_passage(const StochasticGenerator& gen, double x0, double T,
                                           std::size_t n_walkers, std::uint64_t seed, const MonteCarloOptions& opt)
{
    TOA_REQUIRE(gen.is_diffusion(), "Monte Carlo oracle is for diffusions");
    TOA_REQUIRE(n_walkers >= 10000, "need at least 1e4 walkers");
    TOA_REQUIRE(x0 < 0.0, "walkers must start in x < 0");
    TOA_REQUIRE(opt.dt > 0.0 && opt.n_bins >= 1 && opt.n_chunks >= 1, "invalid Monte Carlo options");
    const double D = gen.diffusion_constant();
    const double sd = std::sqrt(D * opt.dt);
    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(T / opt.dt));

    std::vector<RVec> chunk_times(opt.n_chunks);
    parallel_for(opt.n_chunks, [&](std::size_t c) {
        std::size_t count = n_walkers / opt.n_chunks + (c < n_walkers % opt.n_chunks ? 1 : 0);
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(c)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> gauss;
        std::uniform_real_distribution<double> unif;
        RVec& out = chunk_times[c];
        for (std::size_t w = 0; w < count; ++w) {
            double x = x0;
            for (std::size_t k = 0; k < n_steps; ++k) {
                double t0 = static_cast<double>(k) * opt.dt;
                double y = x + sd * gauss(rng);
                double hit = -1.0;
                if (y >= 0.0) {
                    hit = t0 + opt.dt * x / (x - y);
                } else {
                    // Bridge crossing probability exp(-2 x y / D dt); skip the
                    // draw when it is negligible.
                    double e = 2.0 * x * y / (D * opt.dt);
                    if (e < 40.0 && unif(rng) < std::exp(-e)) hit = t0 + 0.5 * opt.dt;
                }
                if (hit >= 0.0) {
                    if (hit <= T) out.push_back(hit);
                    break;
                }
                x = y;
            }
        }
    });

    RVec times;
    for (auto& v : chunk_times) times.insert(times.end(), v.begin(), v.end());
    std::sort(times.begin(), times.end());

    const double nw = static_cast<double>(n_walkers);
    TimeGrid tg(T, opt.n_bins);
    RVec bins(opt.n_bins, 0.0);
    for (double t : times) {
        auto b = static_cast<std::size_t>(t / tg.dt());
        bins[std::min(b, opt.n_bins - 1)] += 1.0;
    }
    for (double& b : bins) b /= nw * tg.dt();
    RVec dens(tg.size());
    dens[0] = bins[0];
    dens[opt.n_bins] = bins[opt.n_bins - 1];
    for (std::size_t i = 1; i < opt.n_bins; ++i) dens[i] = 0.5 * (bins[i - 1] + bins[i]);

    double pn = 1.0 - static_cast<double>(times.size()) / nw;
    MonteCarloResult res{ToaDistribution(tg, std::move(dens), pn), std::move(times), n_walkers,
                         std::sqrt(std::max(pn * (1.0 - pn), 0.0) / nw), seed};
    return res;
}

double ks_distance(const RVec& sorted_times, std::size_t n_total, const std::function<double(double)>& cdf,
                   double T)
{
    TOA_REQUIRE(n_total > 0, "empty sample");
    const double n = static_cast<double>(n_total);
    double d = 0.0;
    std::size_t i = 0;
    for (; i < sorted_times.size() && sorted_times[i] <= T; ++i) {
        double f = cdf(sorted_times[i]);
        d = std::max({d, std::abs(static_cast<double>(i) / n - f), std::abs(static_cast<double>(i + 1) / n - f)});
    }
    d = std::max(d, std::abs(static_cast<double>(i) / n - cdf(T)));
    return d;
}

ToaDistribution condition_on_arrival(const ToaDistribution& d)
{
    double mass = d.detected_mass();
    if (!(d.no_detect < 1.0) || !(mass > 0.0)) throw NumericalError("no arrivals: cannot condition on detection");
    // Normalise by the integrated density so the result integrates to 1 exactly
    // even when the input carries discretisation error in 1 - p_N.
    RVec p = d.density;
    for (double& v : p) v /= mass;
    return ToaDistribution(d.times, std::move(p), 0.0);
}

}  // namespace toa::stochastic
