#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_bessel.h>
#include <gsl/gsl_sf_gamma.h>

#include <algorithm>
#include <cmath>

#include "toa/povm.hpp"

namespace toa::povm {

namespace {

// I(0) = Gamma(1/4) / 2^{3/4}.
double integral_at_zero() { return gsl_sf_gamma(0.25) / std::pow(2.0, 0.75); }

double integrand(double u, void* params)
{
    const double k = *static_cast<double*>(params);
    const double u2 = u * u;
    return 2.0 * std::exp(-0.5 * u2 * u2) * (std::cos(k * u2) + std::sin(k * u2));
}

}  // namespace

double kernel_integral_quadrature(double k)
{
    // y = u^2 removes the endpoint singularity; e^{-u^4/2} < 1e-17 past u = 3.
    gsl_set_error_handler_off();
    const std::size_t limit = 20000;
    gsl_integration_workspace* ws = gsl_integration_workspace_alloc(limit);
    gsl_function F{&integrand, &k};
    double result = 0.0, abserr = 0.0;
    int status = gsl_integration_qag(&F, 0.0, 3.0, 1e-15, 1e-13, limit, GSL_INTEG_GAUSS61, ws, &result, &abserr);
    gsl_integration_workspace_free(ws);
    if (status != GSL_SUCCESS && abserr > 1e-10 * std::max(1.0, std::abs(result)))
        throw NumericalError("kernel_integral_quadrature: " + std::string(gsl_strerror(status)));
    return result;
}

double kernel_integral_bessel(double k)
{
    TOA_REQUIRE(k >= 0.0, "closed form needs k >= 0");
    const double z = 0.25 * k * k;
    if (z < 1e-280) return integral_at_zero();
    // (pi/2) sqrt(k) e^{-z} [I_{-1/4}(z) + I_{1/4}(z)], with
    // I_{-1/4} = I_{1/4} + (sqrt 2 / pi) K_{1/4}.
    gsl_set_error_handler_off();
    gsl_sf_result ri, rk;
    if (gsl_sf_bessel_Inu_scaled_e(0.25, z, &ri) != GSL_SUCCESS)
        throw NumericalError("kernel_integral_bessel: I_nu failed");
    double kterm = 0.0;
    if (z < 400.0) {
        if (gsl_sf_bessel_Knu_scaled_e(0.25, z, &rk) != GSL_SUCCESS)
            throw NumericalError("kernel_integral_bessel: K_nu failed");
        kterm = std::sqrt(2.0) / pi * std::exp(-2.0 * z) * rk.val;
    }
    return 0.5 * pi * std::sqrt(k) * (2.0 * ri.val + kterm);
}

struct KernelR::Table {
    double u_lo, du;
    RVec values;  // I(k) at k = e^u - 1
};

KernelR::KernelR(double tau, double mass) : tau_(tau), mass_(mass)
{
    TOA_REQUIRE(tau > 0.0, "tau must be positive");
    TOA_REQUIRE(mass > 0.0, "mass must be positive");
}

double KernelR::quadrature(double eps) const
{
    return std::sqrt(2.0 * mass_ * tau_ / pi) * kernel_integral_quadrature(2.0 * eps * tau_);
}

double KernelR::bessel(double eps) const
{
    return std::sqrt(2.0 * mass_ * tau_ / pi) * kernel_integral_bessel(2.0 * eps * tau_);
}

double KernelR::small_etau(double /*eps*/) const
{
    return std::sqrt(2.0 * mass_ * tau_ / pi) * integral_at_zero();
}

double KernelR::large_etau(double eps) const
{
    TOA_REQUIRE(eps > 0.0, "large-etau form needs eps > 0");
    return std::sqrt(2.0 * mass_ / eps);
}

void KernelR::prepare(double eps_lo, double eps_hi) const
{
    TOA_REQUIRE(eps_lo >= 0.0 && eps_hi >= eps_lo, "bad table range");
    const double u0 = std::log1p(2.0 * tau_ * eps_lo), u1 = std::log1p(2.0 * tau_ * eps_hi);
    // Cubic Lagrange on a uniform grid in u = log(1 + k); two guard nodes per side.
    const std::size_t n = std::max<std::size_t>(64, static_cast<std::size_t>(std::ceil((u1 - u0) / 1e-3)));
    auto t = std::make_shared<Table>();
    t->du = std::max(u1 - u0, 1e-12) / static_cast<double>(n);
    t->u_lo = u0 - 2.0 * t->du;
    t->values.resize(n + 5);
    for (std::size_t i = 0; i < t->values.size(); ++i) {
        double k = std::expm1(t->u_lo + static_cast<double>(i) * t->du);
        t->values[i] = kernel_integral_bessel(std::max(k, 0.0));
    }
    table_ = std::move(t);
}

double KernelR::operator()(double eps) const
{
    const double k = 2.0 * eps * tau_;
    const double pref = std::sqrt(2.0 * mass_ * tau_ / pi);
    const Table* t = table_.get();
    if (t && k >= 0.0) {
        const double s = (std::log1p(k) - t->u_lo) / t->du;
        const auto i = static_cast<std::ptrdiff_t>(std::floor(s)) - 1;
        if (i >= 0 && static_cast<std::size_t>(i) + 3 < t->values.size()) {
            const double x = s - static_cast<double>(i) - 1.0;  // in [0, 1)
            const double* v = t->values.data() + i;
            const double w0 = -x * (x - 1.0) * (x - 2.0) / 6.0;
            const double w1 = (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0;
            const double w2 = -(x + 1.0) * x * (x - 2.0) / 2.0;
            const double w3 = (x + 1.0) * x * (x - 1.0) / 6.0;
            return pref * (w0 * v[0] + w1 * v[1] + w2 * v[2] + w3 * v[3]);
        }
    }
    if (k >= 0.0) return pref * kernel_integral_bessel(k);
    return pref * kernel_integral_quadrature(k);
}

double kernel_r(double eps, double tau, double mass)
{
    return KernelR(tau, mass).bessel(eps);
}

}  // namespace toa::povm
