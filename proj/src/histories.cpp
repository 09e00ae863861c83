#include "toa/histories.hpp"

#include <algorithm>
#include <cmath>

#include "toa/parallel.hpp"

namespace toa::histories {

namespace {

void require_left(const WavePacket& psi)
{
    TOA_REQUIRE(psi.rep == Representation::position, "state must be in position representation");
    TOA_REQUIRE(right_mass(psi) < 1e-6, "state must be supported in x < 0");
}

void project_left(WavePacket& psi)
{
    for (std::size_t j = psi.grid.zero_index(); j < psi.amp.size(); ++j) psi.amp[j] = 0.0;
}

WavePacket images(const WavePacket& psi, double t)
{
    WavePacket u = evolve_free(psi, t);
    const std::size_t n = u.grid.size(), i0 = u.grid.zero_index();
    WavePacket out = u;
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t mirror = (2 * i0 + n - j) % n;
        out.amp[j] = j < i0 ? u.amp[j] - u.amp[mirror] : cplx(0.0);
    }
    return out;
}

WavePacket trotter(const WavePacket& psi, double t, std::size_t steps, const Hamiltonian& H)
{
    const double dt = t / static_cast<double>(steps);
    WavePacket phi = psi;
    project_left(phi);
    for (std::size_t s = 0; s < steps; ++s) {
        phi = H.evolve(phi, dt);
        project_left(phi);
    }
    return phi;
}

// Compact fourth-order Crank-Nicolson on the nodes strictly between the box
// edge and the wall: A = tri(1, 10, 1)/12 stands in for the identity so that
// A^{-1} (second difference)/h^2 is a fourth-order Laplacian.
WavePacket dirichlet(const WavePacket& psi, double t, double dt_max, const Hamiltonian& H)
{
    const Grid1D& g = psi.grid;
    const std::size_t i0 = g.zero_index();
    const std::size_t m = i0 - 1;  // unknowns at j = 1 .. i0-1
    const std::size_t steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(t / dt_max)));
    const double dt = t / static_cast<double>(steps), h = g.dx();
    const cplx c = I * dt / (4.0 * psi.mass * h * h);
    RVec V(m, 0.0);
    if (H.kind == Hamiltonian::Kind::potential)
        for (std::size_t k = 0; k < m; ++k) V[k] = H.V[k + 1];
    const cplx half = I * dt / 2.0;

    // Left operator L = A - c*Delta + half*A*V, right operator R = A + c*Delta - half*A*V.
    CVec lo(m), di(m), up(m), rlo(m), rdi(m), rup(m);
    for (std::size_t k = 0; k < m; ++k) {
        double vm = k > 0 ? V[k - 1] : 0.0, vp = k + 1 < m ? V[k + 1] : 0.0;
        lo[k] = 1.0 / 12.0 - c + half * vm / 12.0;
        di[k] = 10.0 / 12.0 + 2.0 * c + half * 10.0 * V[k] / 12.0;
        up[k] = 1.0 / 12.0 - c + half * vp / 12.0;
        rlo[k] = 1.0 / 12.0 + c - half * vm / 12.0;
        rdi[k] = 10.0 / 12.0 - 2.0 * c - half * 10.0 * V[k] / 12.0;
        rup[k] = 1.0 / 12.0 + c - half * vp / 12.0;
    }
    // Thomas factorisation of L, reused every step.
    CVec cp(m), inv(m);
    inv[0] = 1.0 / di[0];
    cp[0] = up[0] * inv[0];
    for (std::size_t k = 1; k < m; ++k) {
        inv[k] = 1.0 / (di[k] - lo[k] * cp[k - 1]);
        cp[k] = up[k] * inv[k];
    }
    CVec u(m), r(m);
    for (std::size_t k = 0; k < m; ++k) u[k] = psi.amp[k + 1];
    for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t k = 0; k < m; ++k) {
            r[k] = rdi[k] * u[k];
            if (k > 0) r[k] += rlo[k] * u[k - 1];
            if (k + 1 < m) r[k] += rup[k] * u[k + 1];
        }
        u[0] = r[0] * inv[0];
        for (std::size_t k = 1; k < m; ++k) u[k] = (r[k] - lo[k] * u[k - 1]) * inv[k];
        for (std::size_t k = m - 1; k-- > 0;) u[k] -= cp[k] * u[k + 1];
    }
    WavePacket out(Representation::position, g, CVec(g.size(), 0.0), psi.mass);
    for (std::size_t k = 0; k < m; ++k) out.amp[k + 1] = u[k];
    return out;
}

// d phi/dx at x = 0 from the left, fourth order, for phi(0) = 0 at the wall.
cplx wall_derivative(const WavePacket& phi)
{
    const std::size_t i0 = phi.grid.zero_index();
    const auto& a = phi.amp;
    return (25.0 * a[i0] - 48.0 * a[i0 - 1] + 36.0 * a[i0 - 2] - 16.0 * a[i0 - 3] + 3.0 * a[i0 - 4]) /
           (12.0 * phi.grid.dx());
}

// Fourth-order time derivative of a sampled series.
CVec time_derivative(const CVec& f, double h)
{
    const std::size_t n = f.size();
    TOA_REQUIRE(n >= 5, "need at least five samples");
    CVec d(n);
    for (std::size_t i = 2; i + 2 < n; ++i) d[i] = (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * h);
    auto fwd0 = [&](auto g) { return (-25.0 * g(0) + 48.0 * g(1) - 36.0 * g(2) + 16.0 * g(3) - 3.0 * g(4)) / (12.0 * h); };
    auto fwd1 = [&](auto g) { return (-3.0 * g(0) - 10.0 * g(1) + 18.0 * g(2) - 6.0 * g(3) + g(4)) / (12.0 * h); };
    auto head = [&](std::size_t k) { return f[k]; };
    auto tail = [&](std::size_t k) { return f[n - 1 - k]; };
    d[0] = fwd0(head);
    d[1] = fwd1(head);
    d[n - 1] = -fwd0(tail);
    d[n - 2] = -fwd1(tail);
    return d;
}
// Free kernel sqrt(M / 2 pi i v) without the |v|^{-1/2} factor.
cplx kernel_phase(double M, double v)
{
    return std::sqrt(M / (2.0 * pi)) * std::polar(1.0, v > 0.0 ? -pi / 4.0 : pi / 4.0);
}

struct NodeRange {
    std::size_t lo, hi;
};

NodeRange snap(const TimeGrid& tg, const std::array<double, 2>& w)
{
    auto node = [&](double t) {
        double k = std::round(t / tg.dt());
        return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(tg.n_steps())));
    };
    return {node(w[0]), node(w[1])};
}

double trapezoid_weight(std::size_t i, const NodeRange& r)
{
    return (i == r.lo || i == r.hi) ? 0.5 : 1.0;
}

}  // namespace

std::size_t trotter_steps(const Grid1D& grid, double mass, double t, double rate)
{
    if (rate <= 0.0) {
        double pmax = pi / grid.dx();
        rate = pmax * pmax / (2.0 * mass) / 0.2;
    }
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(rate * t)));
}

WavePacket RestrictedPropagator::apply(const WavePacket& psi, double t) const
{
    TOA_REQUIRE(t >= 0.0, "time must be non-negative");
    require_left(psi);
    if (t == 0.0 || H.kind == Hamiltonian::Kind::none) {
        WavePacket out = psi;
        project_left(out);
        return out;
    }
    switch (method) {
        case PropagatorMethod::images:
            TOA_REQUIRE(H.is_free(), "the image method needs the free particle (V = 0)");
            return images(psi, t);
        case PropagatorMethod::trotter_projection:
            return trotter(psi, t, trotter_steps(psi.grid, psi.mass, t, trotter_rate), H);
        case PropagatorMethod::dirichlet_pde:
            TOA_REQUIRE(pde_dt > 0.0, "PDE step must be positive");
            return dirichlet(psi, t, pde_dt, H);
    }
    return psi;
}

WavePacket restricted_propagate(const WavePacket& psi, double t, PropagatorMethod method, const Hamiltonian& H)
{
    RestrictedPropagator C;
    C.method = method;
    C.H = H;
    return C.apply(psi, t);
}

HistoryProposition HistoryProposition::window(double t1, double t2, std::string label)
{
    TOA_REQUIRE(0.0 <= t1 && t1 <= t2, "window must satisfy 0 <= t1 <= t2");
    return HistoryProposition{std::move(label), {{t1, t2}}};
}

HistoryProposition HistoryProposition::complement(double T) const
{
    std::vector<std::array<double, 2>> w = windows;
    std::sort(w.begin(), w.end());
    HistoryProposition out{label.empty() ? std::string() : "not " + label, {}};
    double start = 0.0;
    for (const auto& [a, b] : w) {
        TOA_REQUIRE(b <= T, "window must lie in [0, T]");
        if (a > start) out.windows.push_back({start, a});
        start = std::max(start, b);
    }
    if (start < T) out.windows.push_back({start, T});
    return out;
}

bool HistoryProposition::overlaps(const HistoryProposition& other) const
{
    for (const auto& [a, b] : windows)
        for (const auto& [c, d] : other.windows)
            if (std::min(b, d) > std::max(a, c)) return true;
    return false;
}

cplx DecoherenceDensity::operator()(std::size_t i, std::size_t j) const
{
    if (!singular()) return rho[i * n + j];
    if (i == j) return 0.0;
    double v = times.t(j) - times.t(i);
    return scale * boundary_amplitude[i] * std::conj(boundary_amplitude[j]) * kernel_phase(mass, v) /
           std::sqrt(std::abs(v));
}

cplx DecoherenceDensity::window(const HistoryProposition& a, const HistoryProposition& b) const
{
    const double h = times.dt();
    cplx total{};
    if (!singular()) {
        for (const auto& wa : a.windows)
            for (const auto& wb : b.windows) {
                NodeRange ra = snap(times, wa), rb = snap(times, wb);
                if (ra.lo == ra.hi || rb.lo == rb.hi) continue;
                cplx s{};
                for (std::size_t i = ra.lo; i <= ra.hi; ++i)
                    for (std::size_t j = rb.lo; j <= rb.hi; ++j)
                        s += trapezoid_weight(i, ra) * trapezoid_weight(j, rb) * rho[i * n + j];
                total += s * h * h;
            }
        return total;
    }

    // Product quadrature in t': conj(A) is linear on each cell and the weight
    // |t' - t_i|^{-1/2} is integrated exactly. Cell weights depend only on
    // the offset k = j - i of the cell [t_j, t_{j+1}] from the node t_i.
    const std::size_t N = n - 1;
    RVec w_lo(2 * N), w_hi(2 * N);  // index k + N, k in [-N, N)
    for (std::size_t idx = 0; idx < 2 * N; ++idx) {
        double k = static_cast<double>(idx) - static_cast<double>(N);
        double u0, u1;
        bool right = k >= 0.0;
        if (right) { u0 = k * h; u1 = (k + 1.0) * h; }
        else { u0 = -(k + 1.0) * h; u1 = -k * h; }
        double m0 = 2.0 * (std::sqrt(u1) - std::sqrt(u0));
        double m1 = 2.0 / 3.0 * (u1 * std::sqrt(u1) - u0 * std::sqrt(u0));
        double lam = right ? (m1 - u0 * m0) / h : (u1 * m0 - m1) / h;
        w_lo[idx] = m0 - lam;
        w_hi[idx] = lam;
    }
    const cplx ph_right = kernel_phase(mass, 1.0), ph_left = kernel_phase(mass, -1.0);
    const CVec& A = boundary_amplitude;
    for (const auto& wa : a.windows)
        for (const auto& wb : b.windows) {
            NodeRange ra = snap(times, wa), rb = snap(times, wb);
            if (ra.lo == ra.hi || rb.lo == rb.hi) continue;
            cplx s{};
            for (std::size_t i = ra.lo; i <= ra.hi; ++i) {
                cplx right{}, left{};
                for (std::size_t j = rb.lo; j < rb.hi; ++j) {
                    std::size_t idx = j + N - i;
                    cplx cell = w_lo[idx] * std::conj(A[j]) + w_hi[idx] * std::conj(A[j + 1]);
                    (j >= i ? right : left) += cell;
                }
                s += trapezoid_weight(i, ra) * h * A[i] * (ph_right * right + ph_left * left);
            }
            total += s;
        }
    return scale * total;
}

cplx DecoherenceDensity::window_N(const HistoryProposition& a) const
{
    TOA_REQUIRE(!no_detect_column.empty(), "density carries no no-detection column");
    cplx total{};
    for (const auto& w : a.windows) {
        NodeRange r = snap(times, w);
        if (r.lo == r.hi) continue;
        for (std::size_t i = r.lo; i <= r.hi; ++i) total += trapezoid_weight(i, r) * no_detect_column[i];
    }
    return total * times.dt();
}

cplx DecoherenceDensity::arrival_block() const
{
    auto all = HistoryProposition::window(0.0, times.t_max());
    return window(all, all);
}

double DecoherenceDensity::normalization_defect() const
{
    auto all = HistoryProposition::window(0.0, times.t_max());
    return std::abs(window(all, all) + 2.0 * window_N(all).real());
}

double DecoherenceDensity::hermiticity_defect() const
{
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) worst = std::max(worst, std::abs((*this)(i, j) - std::conj((*this)(j, i))));
    return worst;
}

BoundaryData boundary_data(const WavePacket& psi0, const TimeGrid& tg, const RestrictedPropagator& C)
{
    require_left(psi0);
    TOA_REQUIRE(C.H.kind != Hamiltonian::Kind::potential,
                "boundary amplitudes are implemented for the free particle only");
    const double M = psi0.mass, T = tg.t_max();
    BoundaryData out;
    out.A.assign(tg.size(), 0.0);
    out.B.assign(tg.size(), 0.0);
    if (C.H.kind == Hamiltonian::Kind::none) {
        out.dNN = psi0.norm2();
        return out;
    }

    WavePacket CT(psi0);
    if (C.method == PropagatorMethod::images) {
        // (p/M U_t psi)(0) summed directly over momenta; the Nyquist mode is dropped.
        const WavePacket mom = to_momentum(psi0);
        const MomentumGrid mg(mom.grid);
        parallel_for(tg.size(), [&](std::size_t i) {
            cplx s{};
            for (std::size_t k = 1; k < mg.size(); ++k) {
                double p = mg.p(k);
                s += (p / M) * std::polar(1.0, -p * p * tg.t(i) / (2.0 * M)) * mom.amp[k];
            }
            out.A[i] = s * mg.dp() / (2.0 * pi);
        });
        CT = C.apply(psi0, T);
    } else {
        // Restricted states step by step; dC_t psi/dx(0) = 2 d(U_t psi)/dx(0).
        RestrictedPropagator step = C;
        if (step.method == PropagatorMethod::trotter_projection && step.trotter_rate <= 0.0)
            step.trotter_rate = static_cast<double>(trotter_steps(psi0.grid, M, 1.0));
        // The projected Trotter state has a grid-scale boundary layer at the
        // wall, so its slope there is read off in weak form: for a smooth g
        // with g(0) = 1, d/dt <g|phi> = (i/2M) (phi'(0) + <g''|phi>).
        const bool weak = C.method == PropagatorMethod::trotter_projection;
        const Grid1D& g = psi0.grid;
        const double w = 16.0 * g.dx();
        RVec gw(g.size(), 0.0), g2(g.size(), 0.0);
        for (std::size_t j = 0; j < g.zero_index(); ++j) {
            double x = g.x(j), e = std::exp(-x * x / (2.0 * w * w));
            gw[j] = e;
            g2[j] = (x * x / (w * w) - 1.0) / (w * w) * e;
        }
        CVec G(tg.size()), Q(tg.size());
        WavePacket phi = psi0;
        project_left(phi);
        for (std::size_t i = 0; i < tg.size(); ++i) {
            if (weak) {
                cplx a{}, b{};
                for (std::size_t j = 0; j < g.zero_index(); ++j) {
                    a += gw[j] * phi.amp[j];
                    b += g2[j] * phi.amp[j];
                }
                G[i] = a * g.dx();
                Q[i] = b * g.dx();
            } else {
                out.A[i] = -I / (2.0 * M) * wall_derivative(phi);
            }
            if (i + 1 < tg.size()) phi = step.apply(phi, tg.dt());
        }
        if (weak) {
            CVec dG = time_derivative(G, tg.dt());
            for (std::size_t i = 0; i < tg.size(); ++i) out.A[i] = -I / (2.0 * M) * (-2.0 * I * M * dG[i] - Q[i]);
        }
        CT = phi;
    }
    out.dNN = CT.norm2();

    const WavePacket ct = to_momentum(CT);
    const MomentumGrid mg(ct.grid);
    parallel_for(tg.size(), [&](std::size_t i) {
        cplx s{};
        for (std::size_t k = 0; k < mg.size(); ++k) {
            double p = mg.p(k);
            s += std::polar(1.0, p * p * (T - tg.t(i)) / (2.0 * M)) * ct.amp[k];
        }
        out.B[i] = s * mg.dp() / (2.0 * pi);
    });
    return out;
}

DecoherenceDensity decoherence_density(const WavePacket& psi0, double T, std::size_t n_bins,
                                       const RestrictedPropagator& C)
{
    TOA_REQUIRE(T > 0.0 && n_bins >= 2, "need T > 0 and at least two bins");
    TOA_REQUIRE(std::abs(psi0.norm2() - 1.0) < 1e-8, "state must be normalised");
    TimeGrid tg(T, n_bins);
    BoundaryData bd = boundary_data(psi0, tg, C);
    DecoherenceDensity d(tg);
    d.mass = psi0.mass;
    d.boundary_amplitude = std::move(bd.A);
    d.no_detect_column.resize(tg.size());
    for (std::size_t i = 0; i < tg.size(); ++i) d.no_detect_column[i] = d.boundary_amplitude[i] * std::conj(bd.B[i]);
    d.dNN = bd.dNN;
    d.diag_singularity_note =
        "rho(t,t') carries sqrt(M/2 pi i (t'-t)), which diverges at t = t'; the diagonal is stored as 0 and "
        "window integrals weight |t-t'|^(-1/2) exactly";
    if (C.H.kind == Hamiltonian::Kind::none) d.boundary_amplitude.clear();
    return d;
}

DecoherenceDensity condition_decoherence(const DecoherenceDensity& d)
{
    double mass = d.arrival_block().real();
    if (!(mass > 1e-12)) throw NumericalError("condition_decoherence: arrival mass vanishes");
    DecoherenceDensity c = d;
    if (c.singular()) c.scale /= mass;
    for (auto& z : c.rho) z /= mass;
    c.no_detect_column.clear();
    c.dNN = 0.0;
    return c;
}

ConsistencyReport coarse_grained_consistency(const DecoherenceDensity& d, const HistoryProposition& a,
                                             const HistoryProposition& b)
{
    TOA_REQUIRE(!a.overlaps(b), "propositions must be disjoint");
    return {d.window(a, b), d.window(a, a).real(), d.window(b, b).real()};
}

double fitted_arrival_width(const DecoherenceDensity& d)
{
    RVec w(d.n), tw(d.n), t2w(d.n);
    for (std::size_t i = 0; i < d.n; ++i) {
        w[i] = d.singular() ? std::norm(d.boundary_amplitude[i]) : d(i, i).real();
        double t = d.times.t(i);
        tw[i] = t * w[i];
        t2w[i] = t * t * w[i];
    }
    double h = d.times.dt(), m0 = integrate(w, h);
    TOA_REQUIRE(m0 > 0.0, "density vanishes identically");
    double mean = integrate(tw, h) / m0;
    double var = integrate(t2w, h) / m0 - mean * mean;
    return std::sqrt(2.0 * var);
}

DecoherenceDensity detector_model_density(const TwoLevelDetectorModel& model, const WavePacket& psi0, double T,
                                          std::size_t n_bins)
{
    TOA_REQUIRE(model.epsilon >= 0.0, "coupling must be non-negative");
    TOA_REQUIRE(T > 0.0 && n_bins >= 1, "need T > 0 and at least one bin");
    require_left(psi0);
    TimeGrid tg(T, n_bins);
    DecoherenceDensity d(tg);
    d.mass = psi0.mass;
    d.diag_singularity_note = "regular kernel; diagonal stored";
    const double eps = model.epsilon, M = psi0.mass;
    if (eps * eps * T > 0.1) {
        std::string msg = "detector model outside the perturbative regime: eps^2 T = " + std::to_string(eps * eps * T);
        d.warnings.push_back(msg);
        warn(msg);
    }

    // chi_i = U(-t_i) P+ U(t_i) psi in momentum space, so that
    // <P+ psi_t'| U(t'-t) P+ psi_t> = <chi_j|chi_i>.
    const WavePacket mom = to_momentum(psi0);
    const MomentumGrid mg(mom.grid);
    const std::size_t np = mg.size();
    std::vector<CVec> chi(tg.size());
    parallel_for(tg.size(), [&](std::size_t i) {
        WavePacket x = to_position(evolve_free(mom, tg.t(i)));
        for (std::size_t j = 0; j < x.grid.zero_index(); ++j) x.amp[j] = 0.0;
        WavePacket m = to_momentum(x);
        for (std::size_t k = 0; k < np; ++k) m.amp[k] *= std::polar(1.0, mg.p(k) * mg.p(k) * tg.t(i) / (2.0 * M));
        chi[i] = std::move(m.amp);
    });
    const double w = mg.dp() / (2.0 * pi);
    auto dot = [&](const CVec& a, const CVec& b) {
        cplx s{};
        for (std::size_t k = 0; k < np; ++k) s += std::conj(a[k]) * b[k];
        return s * w;
    };

    const std::size_t n = tg.size();
    d.rho.assign(n * n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        for (std::size_t j = i; j < n; ++j) {
            cplx v = eps * eps * std::polar(1.0, model.Omega * (tg.t(j) - tg.t(i))) * dot(chi[j], chi[i]);
            d.rho[i * n + j] = v;
            d.rho[j * n + i] = std::conj(v);
        }
    });
    for (std::size_t i = 0; i < n; ++i) d.rho[i * n + i] = d.rho[i * n + i].real();

    CVec back(np);  // U(-T) psi
    for (std::size_t k = 0; k < np; ++k) back[k] = mom.amp[k] * std::polar(1.0, mg.p(k) * mg.p(k) * T / (2.0 * M));
    d.no_detect_column.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.no_detect_column[i] = eps * dot(back, chi[i]);
    d.dNN = 1.0;
    return d;
}

double approximate_projector_defect(const WavePacket& psi0, double T, std::size_t n, double w,
                                    const Hamiltonian& H)
{
    TOA_REQUIRE(psi0.rep == Representation::position, "state must be in position representation");
    TOA_REQUIRE(n >= 1 && T > 0.0 && w >= 0.0, "need n >= 1, T > 0 and w >= 0");
    const Grid1D& g = psi0.grid;
    RVec minus(g.size());
    for (std::size_t j = 0; j < g.size(); ++j)
        minus[j] = w > 0.0 ? 0.5 * std::erfc(g.x(j) / w) : (j < g.zero_index() ? 1.0 : 0.0);
    const double dt = T / static_cast<double>(n);
    WavePacket phi = psi0;
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        phi = H.evolve(phi, dt);
        double plus = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
            plus += std::norm((1.0 - minus[j]) * phi.amp[j]);
            phi.amp[j] *= minus[j];
        }
        total += plus * g.dx();
    }
    total += phi.norm2();
    return std::abs(psi0.norm2() - total);
}

}  // namespace toa::histories
