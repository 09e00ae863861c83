#include "toa/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "toa/copenhagen.hpp"
#include "toa/histories.hpp"
#include "toa/povm.hpp"
#include "toa/stochastic.hpp"

namespace toa::scenario {

using json = nlohmann::ordered_json;

namespace {

const std::set<std::string> kSchemes{"stochastic", "copenhagen_tau", "copenhagen_strip", "histories", "povm_full",
                                     "povm_regime", "kijowski",        "compare",          "zeno",      "zeno2x2"};

// Reads one JSON object against a list of allowed keys, collecting errors.
class Reader {
  public:
    Reader(const json& obj, std::string path, std::vector<std::string>& errors,
           std::initializer_list<const char*> allowed)
        : obj_(obj), path_(std::move(path)), errors_(errors)
    {
        if (!obj_.is_object()) {
            errors_.push_back(path_ + ": must be an object");
            valid_ = false;
            return;
        }
        for (const auto& item : obj_.items()) {
            bool known = false;
            for (const char* a : allowed) known = known || item.key() == a;
            if (!known) errors_.push_back(where(item.key()) + ": unknown key");
        }
    }

    bool has(const char* key) const { return valid_ && obj_.contains(key); }

    void number(const char* key, double& out)
    {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (!v.is_number()) errors_.push_back(where(key) + ": must be a number");
        else out = v.get<double>();
    }

    void count(const char* key, std::size_t& out)
    {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) errors_.push_back(where(key) + ": must be a non-negative integer");
        else out = v.get<std::size_t>();
    }

    void seed(const char* key, std::uint64_t& out)
    {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            errors_.push_back(where(key) + ": must be a non-negative integer");
        else out = v.get<std::uint64_t>();
    }

    void text(const char* key, std::string& out)
    {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (!v.is_string()) errors_.push_back(where(key) + ": must be a string");
        else out = v.get<std::string>();
    }

    const json* child(const char* key) const { return has(key) ? &obj_.at(key) : nullptr; }
    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  private:
    const json& obj_;
    std::string path_;
    std::vector<std::string>& errors_;
    bool valid_ = true;
};

bool needs_wave_state(const std::string& scheme)
{
    return scheme == "copenhagen_tau" || scheme == "copenhagen_strip" || scheme == "histories" || scheme == "zeno";
}

bool needs_momentum_state(const std::string& scheme)
{
    return scheme == "povm_full" || scheme == "povm_regime" || scheme == "kijowski" || scheme == "compare";
}

bool has_state(const Scenario& s)
{
    return needs_wave_state(s.scheme) || needs_momentum_state(s.scheme) ||
           (s.scheme == "stochastic" && s.process == "diffusion");
}

// Probability that a Gaussian momentum profile puts below |p| < pc.
double slow_momentum_mass(double pbar, double sigma0, double pc)
{
    // |psi~|^2 is normal with mean pbar and standard deviation 1 / (sqrt 2 sigma0).
    const double s = 1.0 / (std::sqrt(2.0) * sigma0);
    auto cdf = [&](double p) { return 0.5 * std::erfc(-(p - pbar) / (std::sqrt(2.0) * s)); };
    return cdf(pc) - cdf(-pc);
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

Scenario parse(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // The library message already carries line and column; drop its id prefix.
        std::string msg = e.what();
        if (const auto k = msg.find("] "); k != std::string::npos) msg = msg.substr(k + 2);
        throw ConfigError(msg);
    }

    Scenario s;
    auto& err = s.schema_errors;
    Reader top(j, "", err,
               {"scheme", "state", "mass", "time", "grid", "detector", "seed", "output", "stochastic", "povm",
                "zeno2x2", "tolerances"});
    if (!j.is_object()) return s;
    top.text("scheme", s.scheme);
    if (!top.has("scheme")) err.push_back("scheme: missing");
    top.number("mass", s.mass);
    top.seed("seed", s.seed);

    if (const json* t = top.child("time")) {
        Reader r(*t, "time", err, {"T", "n_steps"});
        r.number("T", s.T);
        r.count("n_steps", s.n_steps);
        if (!r.has("T")) err.push_back("time.T: missing");
        if (!r.has("n_steps")) err.push_back("time.n_steps: missing");
    } else {
        err.push_back("time: missing");
    }

    if (const json* st = top.child("state")) {
        s.state_given = true;
        Reader r(*st, "state", err, {"kind", "l_dist", "mean_momentum", "sigma0", "a", "p1", "p2"});
        std::string kind = "gaussian";
        r.text("kind", kind);
        if (kind == "gaussian") s.state.kind = StateSpec::Kind::gaussian;
        else if (kind == "two_gaussian") s.state.kind = StateSpec::Kind::two_gaussian;
        else if (kind == "point") s.state.kind = StateSpec::Kind::point;
        else err.push_back("state.kind: unknown kind '" + kind + "'");
        r.number("l_dist", s.state.l_dist);
        r.number("mean_momentum", s.state.mean_momentum);
        r.number("p1", s.state.p1);
        r.number("p2", s.state.p2);
        r.number("a", s.state.a);
        r.number("sigma0", s.state.sigma0);
        if (s.state.kind == StateSpec::Kind::gaussian) {
            if (r.has("sigma0") && r.has("a")) err.push_back("state: give either sigma0 or a, not both");
            else if (r.has("a")) s.state.sigma0 = s.state.a / std::sqrt(2.0);
            else if (!r.has("sigma0")) err.push_back("state.sigma0: missing");
            s.state.a = std::sqrt(2.0) * s.state.sigma0;
        } else if (s.state.kind == StateSpec::Kind::two_gaussian) {
            s.state.sigma0 = s.state.a / std::sqrt(2.0);
        }
    }

    if (const json* g = top.child("grid")) {
        Reader r(*g, "grid", err, {"half_width", "n_points"});
        r.number("half_width", s.grid_half_width);
        r.count("n_points", s.grid_points);
    }
    if (const json* d = top.child("detector")) {
        Reader r(*d, "detector", err, {"tau", "v", "delta_x"});
        r.number("tau", s.tau);
        r.number("v", s.v);
        r.number("delta_x", s.delta_x);
    }
    if (const json* o = top.child("output")) {
        Reader r(*o, "output", err, {"stem"});
        r.text("stem", s.stem);
    }
    if (const json* o = top.child("stochastic")) {
        Reader r(*o, "stochastic", err, {"process", "D", "rate_b", "walkers"});
        r.text("process", s.process);
        r.number("D", s.D);
        r.number("rate_b", s.rate_b);
        r.count("walkers", s.walkers);
    }
    if (const json* o = top.child("povm")) {
        Reader r(*o, "povm", err, {"dp"});
        r.number("dp", s.dp);
    }
    if (const json* o = top.child("zeno2x2")) {
        Reader r(*o, "zeno2x2", err, {"epsilon_H", "x_rate", "y_rate"});
        r.number("epsilon_H", s.epsilon_H);
        r.number("x_rate", s.x_rate);
        r.number("y_rate", s.y_rate);
    }
    if (const json* o = top.child("tolerances")) {
        Reader r(*o, "tolerances", err,
                 {"mass", "analytic_l1", "compare_sup", "ratio_rel", "normalization", "zeno2x2", "negativity"});
        r.number("mass", s.tol.mass);
        r.number("analytic_l1", s.tol.analytic_l1);
        r.number("compare_sup", s.tol.compare_sup);
        r.number("ratio_rel", s.tol.ratio_rel);
        r.number("normalization", s.tol.normalization);
        r.number("zeno2x2", s.tol.zeno2x2);
        r.number("negativity", s.tol.negativity);
    }

    // Scheme-dependent defaults.
    if (s.state.kind == StateSpec::Kind::gaussian && s.state.sigma0 > 0.0 && s.state.mean_momentum > 0.0 &&
        s.mass > 0.0) {
        const GaussianSpec g = s.state.gaussian();
        if (s.scheme == "copenhagen_tau" && s.tau == 0.0) s.tau = 0.5 * g.arrival_width(s.mass);
        if (s.scheme == "copenhagen_strip" && s.v == 0.0) s.v = 0.25 * g.mean_momentum / s.mass;
    }
    return s;
}

Scenario load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

json Scenario::resolved() const
{
    json j;
    j["scheme"] = scheme;
    if (has_state(*this)) {
        json st;
        switch (state.kind) {
        case StateSpec::Kind::gaussian:
            st["kind"] = "gaussian";
            st["l_dist"] = state.l_dist;
            st["mean_momentum"] = state.mean_momentum;
            st["sigma0"] = state.sigma0;
            st["a"] = state.a;
            break;
        case StateSpec::Kind::two_gaussian:
            st["kind"] = "two_gaussian";
            st["l_dist"] = state.l_dist;
            st["p1"] = state.p1;
            st["p2"] = state.p2;
            st["a"] = state.a;
            break;
        case StateSpec::Kind::point:
            st["kind"] = "point";
            st["l_dist"] = state.l_dist;
            break;
        }
        j["state"] = st;
    }
    j["mass"] = mass;
    j["time"] = {{"T", T}, {"n_steps", n_steps}};
    if (needs_wave_state(scheme) || scheme == "stochastic") {
        double hw = grid_half_width;
        if (hw == 0.0 && state.kind == StateSpec::Kind::gaussian && state.sigma0 > 0.0)
            hw = -default_grid(state.gaussian(), grid_points).x_min();
        if (hw == 0.0 && scheme == "stochastic") hw = std::max(20.0 * state.l_dist, 40.0);
        j["grid"] = {{"half_width", hw}, {"n_points", grid_points}};
    }
    j["detector"] = {{"tau", tau}, {"v", v}, {"delta_x", delta_x}};
    j["seed"] = seed;
    j["output"] = {{"stem", stem}};
    if (scheme == "stochastic") j["stochastic"] = {{"process", process}, {"D", D}, {"rate_b", rate_b}, {"walkers", walkers}};
    if (needs_momentum_state(scheme)) j["povm"] = {{"dp", dp}};
    if (scheme == "zeno2x2") j["zeno2x2"] = {{"epsilon_H", epsilon_H}, {"x_rate", x_rate}, {"y_rate", y_rate}};
    return j;
}

Report validate(const Scenario& s)
{
    Report rep;
    auto& e = rep.errors;
    e = s.schema_errors;
    if (!s.scheme.empty() && !kSchemes.count(s.scheme)) e.push_back("scheme: unknown scheme '" + s.scheme + "'");
    if (!(s.mass > 0.0)) e.push_back("mass: must be positive");
    if (!(s.T > 0.0)) e.push_back("time.T: must be positive");
    if (s.n_steps < 8) e.push_back("time.n_steps: must be at least 8");
    if (s.grid_points < 16 || (s.grid_points & (s.grid_points - 1)) != 0)
        e.push_back("grid.n_points: must be a power of two >= 16");
    if (s.grid_half_width < 0.0) e.push_back("grid.half_width: must be positive");
    for (auto [name, val] : {std::pair{"tolerances.mass", s.tol.mass}, {"tolerances.analytic_l1", s.tol.analytic_l1},
                             {"tolerances.compare_sup", s.tol.compare_sup}, {"tolerances.ratio_rel", s.tol.ratio_rel},
                             {"tolerances.normalization", s.tol.normalization}, {"tolerances.zeno2x2", s.tol.zeno2x2},
                             {"tolerances.negativity", s.tol.negativity}})
        if (!(val > 0.0)) e.push_back(std::string(name) + ": must be positive");

    const StateSpec& st = s.state;
    const bool gaussian = st.kind == StateSpec::Kind::gaussian;
    const bool two = st.kind == StateSpec::Kind::two_gaussian;
    const double dt = s.n_steps > 0 ? s.T / static_cast<double>(s.n_steps) : 0.0;

    if (has_state(s) && !s.state_given) {
        e.push_back("state: missing");
    } else if (has_state(s)) {
        if (!(st.l_dist > 0.0)) e.push_back("state.l_dist: must be positive");
        if (s.scheme == "stochastic") {
            if (st.kind != StateSpec::Kind::point) e.push_back("state.kind: stochastic diffusion needs a point source");
        } else if (needs_wave_state(s.scheme) && !gaussian) {
            e.push_back("state.kind: scheme " + s.scheme + " needs a gaussian state");
        } else if (st.kind == StateSpec::Kind::point) {
            e.push_back("state.kind: scheme " + s.scheme + " needs a gaussian or two_gaussian state");
        }
        if (gaussian && s.scheme != "stochastic") {
            if (!(st.sigma0 > 0.0)) e.push_back("state.sigma0: must be positive");
            if (!(st.mean_momentum > 0.0)) e.push_back("state.mean_momentum: must be positive");
            if (st.sigma0 > 0.0 && st.l_dist > 0.0) {
                const double right = 0.5 * std::erfc(st.l_dist / st.sigma0);
                if (right >= 1e-6)
                    e.push_back("state: initial state is not supported on x < 0 (probability " + fmt(right) +
                                " at x >= 0)");
            }
        }
        if (two) {
            if (!(st.a > 0.0)) e.push_back("state.a: must be positive");
            if (!(st.p1 > 0.0)) e.push_back("state.p1: must be positive");
            if (!(st.p2 > 0.0)) e.push_back("state.p2: must be positive");
            if (s.scheme == "compare" && st.a > 0.0) {
                if (st.a * st.p1 < 5.0 || st.a * st.p2 < 5.0) e.push_back("state: two-Gaussian regime needs a p >= 5");
                if (st.p1 != st.p2 && st.a * std::abs(st.p1 - st.p2) < 5.0)
                    e.push_back("state: two-Gaussian regime needs a |p1 - p2| >= 5");
            }
            if (st.a > 0.0 && st.l_dist > 0.0 && 0.5 * std::erfc(st.l_dist * std::sqrt(2.0) / st.a) >= 1e-6)
                e.push_back("state: initial state is not supported on x < 0");
        }
    } else if (s.scheme == "stochastic" && s.process != "two_level") {
        e.push_back("stochastic.process: must be 'diffusion' or 'two_level'");
    }

    if (s.scheme == "stochastic") {
        if (s.process == "diffusion" && !(s.D > 0.0)) e.push_back("stochastic.D: must be positive");
        if (s.process == "diffusion" && s.walkers != 0 && s.walkers < 10000)
            e.push_back("stochastic.walkers: must be 0 (no Monte Carlo) or at least 10000");
        if (s.process == "two_level" && !(s.rate_b > 0.0)) e.push_back("stochastic.rate_b: must be positive");
    }
    // A zero tau on an invalid state is an unresolved default, already reported through the state.
    const bool tau_resolvable = s.tau != 0.0 || (gaussian && st.sigma0 > 0.0 && st.mean_momentum > 0.0);
    if (s.scheme == "copenhagen_tau" && tau_resolvable) {
        if (!(s.tau > 0.0)) e.push_back("detector.tau: must be positive");
        else {
            if (s.tau >= s.T) e.push_back("detector.tau: must be below time.T");
            if (s.tau < 5.0 * dt) e.push_back("detector.tau: must be at least five time steps");
        }
    }
    if (s.scheme == "copenhagen_strip" && (s.v != 0.0 || tau_resolvable) && !(s.v > 0.0)) e.push_back("detector.v: must be positive");
    if (s.scheme == "povm_full" || s.scheme == "povm_regime") {
        if (!(s.tau > 0.0)) e.push_back("detector.tau: must be positive");
        else if (s.tau >= s.T / 20.0) e.push_back("detector.tau: must be below time.T / 20");
        if (s.scheme == "povm_regime" && s.tau > 0.0 && s.mass > 0.0) {
            const double pc = 5.0 * std::sqrt(2.0 * s.mass / s.tau);
            double slow = 0.0;
            if (gaussian && st.sigma0 > 0.0) slow = slow_momentum_mass(st.mean_momentum, st.sigma0, pc);
            if (two && st.a > 0.0)
                slow = 0.5 * (slow_momentum_mass(st.p1, st.sigma0, pc) + slow_momentum_mass(st.p2, st.sigma0, pc));
            if (slow > 1e-3)
                rep.warnings.push_back("regime: probability " + fmt(slow) + " at |p| < 5 sqrt(2M/tau) = " + fmt(pc) +
                                       "; the large eps tau form is outside its regime");
        }
    }
    if (s.dp < 0.0) e.push_back("povm.dp: must be non-negative");
    if (s.scheme == "zeno2x2") {
        if (s.y_rate < 0.0) e.push_back("zeno2x2.y_rate: must be non-negative");
        if (s.x_rate < s.y_rate) e.push_back("zeno2x2.x_rate: must be at least y_rate");
    }
    return rep;
}

// ----------------------------------------------------------------------- run

namespace {

Grid1D wave_grid(const Scenario& s)
{
    if (s.grid_half_width > 0.0) return Grid1D::symmetric(s.grid_half_width, s.grid_points);
    return default_grid(s.state.gaussian(), s.grid_points);
}

povm::MomentumState momentum_state(const Scenario& s)
{
    const StateSpec& st = s.state;
    std::vector<GaussianSpec> specs;
    if (st.kind == StateSpec::Kind::gaussian) specs.push_back(st.gaussian());
    else {
        specs.push_back(GaussianSpec::from_momentum_width(st.l_dist, st.p1, st.a));
        specs.push_back(GaussianSpec::from_momentum_width(st.l_dist, st.p2, st.a));
    }
    double dp = s.dp;
    if (dp == 0.0) {
        // Periodic images of the packet stay away from x = 0 up to T.
        double pmax = 0.0;
        for (const GaussianSpec& g : specs) pmax = std::max(pmax, std::abs(g.mean_momentum) + 6.2 / g.sigma0);
        dp = 2.0 * pi / (pmax * s.T / s.mass + st.l_dist + 10.0 * specs[0].sigma0);
    }
    std::vector<cplx> w(specs.size(), 1.0);
    return povm::MomentumState::gaussians(specs, w, dp, s.mass);
}

void check(RunResult& r, const std::string& name, double value, double tol, bool pass)
{
    r.checks[name] = {{"value", value}, {"tolerance", tol}, {"pass", pass}};
    r.within_tolerance = r.within_tolerance && pass;
}

void add_distribution_summary(RunResult& r, const ToaDistribution& d)
{
    r.summary["detected_mass"] = d.detected_mass();
    r.summary["p_N"] = d.no_detect;
    r.summary["peak_time"] = d.peak_time();
}

RVec times_of(const TimeGrid& tg)
{
    RVec t(tg.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = tg.t(i);
    return t;
}

double sup_relative(const RVec& a, const RVec& b)
{
    double d = 0.0, m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
        m = std::max(m, std::abs(b[i]));
    }
    return m > 0.0 ? d / m : 0.0;
}

}  // namespace

RunResult run(const Scenario& s)
{
    const Report rep = validate(s);
    if (!rep.ok()) throw ContractError("scenario is invalid: " + rep.errors.front());

    const auto start = std::chrono::steady_clock::now();
    RunResult r;
    r.warnings = rep.warnings;
    std::vector<std::string> captured;
    set_warning_sink([&](std::string_view m) { captured.emplace_back(m); });
    struct Restore {
        ~Restore() { set_warning_sink({}); }
    } restore;

    const TimeGrid tg(s.T, s.n_steps);
    const RVec t = times_of(tg);
    r.columns = {"t", "p"};
    r.data = {t};
    const bool gaussian = s.state.kind == StateSpec::Kind::gaussian;
    if (gaussian && s.scheme != "stochastic" && s.scheme != "zeno2x2")
        r.summary["t_classical"] = s.state.gaussian().t_classical(s.mass);

    if (s.scheme == "stochastic") {
        using namespace stochastic;
        if (s.process == "two_level") {
            ToaDistribution d = two_level_transition_density(s.rate_b, s.T, s.n_steps);
            RVec exact(t.size());
            for (std::size_t i = 0; i < t.size(); ++i) exact[i] = s.rate_b * std::exp(-s.rate_b * t[i]);
            r.data.push_back(d.density);
            r.columns.push_back("p_analytic");
            r.data.push_back(exact);
            add_distribution_summary(r, d);
            const double mean = d.conditional_mean();
            r.summary["conditional_mean"] = mean;
            check(r, "mass_conservation", std::abs(d.total_mass() - 1.0), s.tol.mass,
                  std::abs(d.total_mass() - 1.0) < s.tol.mass);
        } else {
            const double hw = s.grid_half_width > 0.0 ? s.grid_half_width : std::max(20.0 * s.state.l_dist, 40.0);
            const Grid1D g = Grid1D::symmetric(hw, s.grid_points);
            const auto gen = StochasticGenerator::diffusion(s.D);
            ToaDistribution d = first_passage_density(gen, ClassicalDensity::point_source(g, -s.state.l_dist), s.T,
                                                      s.n_steps);
            RVec exact(t.size()), err(t.size());
            for (std::size_t i = 0; i < t.size(); ++i) {
                exact[i] = wiener_density(s.D, s.state.l_dist, t[i]);
                err[i] = std::abs(d.density[i] - exact[i]);
            }
            r.data.push_back(d.density);
            r.columns.push_back("p_analytic");
            r.data.push_back(exact);
            add_distribution_summary(r, d);
            const double l1 = integrate(err, tg.dt());
            r.summary["analytic_l1"] = l1;
            r.summary["p_N_analytic"] = wiener_survival(s.D, s.state.l_dist, s.T);
            check(r, "analytic_l1", l1, s.tol.analytic_l1, l1 < s.tol.analytic_l1);
            check(r, "mass_conservation", std::abs(d.total_mass() - 1.0), s.tol.mass,
                  std::abs(d.total_mass() - 1.0) < s.tol.mass);
            if (s.walkers > 0) {
                MonteCarloResult mc = monte_carlo_first_passage(gen, -s.state.l_dist, s.T, s.walkers, s.seed);
                const double L = s.state.l_dist, D = s.D;
                r.summary["monte_carlo_ks"] = ks_distance(mc.passage_times, mc.n_walkers,
                                                          [&](double x) { return wiener_cdf(D, L, x); }, s.T);
                r.summary["monte_carlo_p_N"] = mc.histogram.no_detect;
            }
        }
    } else if (s.scheme == "copenhagen_tau" || s.scheme == "copenhagen_strip") {
        WavePacket psi = gaussian_packet(s.state.gaussian(), wave_grid(s), s.mass, true);
        ToaDistribution d = s.scheme == "copenhagen_tau"
                                ? copenhagen::no_reduction_density_tau(psi, s.tau, s.T, s.n_steps)
                                : copenhagen::strip_detector_density(psi, s.v, s.T, s.n_steps);
        r.data.push_back(d.density);
        add_distribution_summary(r, d);
        if (s.scheme == "copenhagen_tau") r.summary["tau"] = s.tau;
        else r.summary["v"] = s.v;
        const double defect = std::abs(d.total_mass() - 1.0);
        check(r, "mass_conservation", defect, s.tol.mass, defect < s.tol.mass);
    } else if (s.scheme == "histories") {
        WavePacket psi = gaussian_packet(s.state.gaussian(), wave_grid(s), s.mass, true);
        histories::DecoherenceDensity dd = histories::decoherence_density(psi, s.T, s.n_steps);
        RVec a2(t.size()), re(t.size()), im(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            a2[i] = std::norm(dd.boundary_amplitude[i]);
            re[i] = dd.no_detect_column[i].real();
            im[i] = dd.no_detect_column[i].imag();
        }
        const double m = integrate(a2, tg.dt());
        for (double& v : a2) v /= m;
        r.data.push_back(a2);
        r.columns.insert(r.columns.end(), {"d_tN_re", "d_tN_im"});
        r.data.push_back(re);
        r.data.push_back(im);
        const double defect = dd.normalization_defect();
        r.summary["normalization_defect"] = defect;
        r.summary["hermiticity_defect"] = dd.hermiticity_defect();
        r.summary["d_NN"] = dd.dNN;
        const double w = histories::fitted_arrival_width(dd);
        r.summary["fitted_width"] = w;
        r.summary["predicted_width"] = s.state.gaussian().arrival_width(s.mass);
        // Classical window of +-3 delta around t_cl against its complement.
        const double tcl = s.state.gaussian().t_classical(s.mass), delta = s.state.gaussian().arrival_width(s.mass);
        if (tcl - 3.0 * delta > 0.0 && tcl + 3.0 * delta < s.T) {
            auto win = histories::HistoryProposition::window(tcl - 3.0 * delta, tcl + 3.0 * delta, "classical");
            auto rep2 = histories::coarse_grained_consistency(dd, win, win.complement(s.T));
            r.summary["consistency_defect"] = rep2.defect();
            r.summary["d_classical"] = rep2.d_aa;
        }
        r.summary["singular_diagonal"] = dd.diag_singularity_note;
        check(r, "normalization_identity", defect, s.tol.normalization, defect < s.tol.normalization);
    } else if (s.scheme == "povm_full" || s.scheme == "povm_regime") {
        povm::MomentumState ms = momentum_state(s);
        povm::ToaPovm P = povm::toa_povm_density(
            ms, s.tau, s.T, s.n_steps, s.scheme == "povm_full" ? povm::Regime::full : povm::Regime::large_etau);
        r.data.push_back(P.dist.density);
        add_distribution_summary(r, P.dist);
        r.summary["tau"] = s.tau;
        r.summary["momentum_points"] = ms.size();
        r.summary["min_etau"] = P.min_etau;
        r.summary["max_etau"] = P.max_etau;
        r.summary["max_imag"] = P.max_imag;
        const double neg = *std::min_element(P.dist.density.begin(), P.dist.density.end());
        check(r, "density_nonnegative", neg, -s.tol.negativity, neg >= -s.tol.negativity);
        check(r, "p_N_nonnegative", P.dist.no_detect, -s.tol.negativity, P.dist.no_detect >= -s.tol.negativity);
    } else if (s.scheme == "kijowski") {
        povm::MomentumState ms = momentum_state(s);
        ToaDistribution d(tg, povm::kijowski_density(ms, t), 0.0);
        d.no_detect = 1.0 - d.detected_mass();
        r.data.push_back(d.density);
        add_distribution_summary(r, d);
        r.summary["momentum_points"] = ms.size();
        r.summary["argmax_time"] = t[static_cast<std::size_t>(
            std::max_element(d.density.begin(), d.density.end()) - d.density.begin())];
        check(r, "mass_at_most_one", d.detected_mass() - 1.0, s.tol.mass, d.detected_mass() <= 1.0 + s.tol.mass);
    } else if (s.scheme == "compare") {
        if (s.state.kind == StateSpec::Kind::two_gaussian) {
            povm::TwoGaussianComparison c = povm::two_gaussian_comparison(s.state.p1, s.state.p2, s.state.a,
                                                                          s.state.l_dist, s.mass, s.T, s.n_steps);
            r.data.push_back(c.povm);
            r.columns.insert(r.columns.end(), {"p_kijowski", "p_povm"});
            r.data.push_back(c.kijowski);
            r.data.push_back(c.povm);
            r.summary["amplitude_kijowski"] = c.amplitude_kijowski;
            r.summary["amplitude_povm"] = c.amplitude_povm;
            r.summary["amplitude_ratio"] = c.ratio;
            r.summary["expected_ratio"] = c.expected;
            r.summary["peak_deviation"] = c.peak_deviation;
            const double rel = std::abs(c.ratio / c.expected - 1.0);
            check(r, "amplitude_ratio", rel, s.tol.ratio_rel, rel < s.tol.ratio_rel);
            check(r, "peak_agreement", c.peak_deviation, 0.03, c.peak_deviation < 0.03);
        } else {
            povm::MomentumState ms = momentum_state(s);
            RVec pk = povm::kijowski_density(ms, t);
            // Full kernel when a detector resolution is given, else the large eps tau form.
            const bool full = s.tau > 0.0;
            double imag = 0.0;
            RVec pp = povm::povm_density_at(ms, full ? s.tau : 1.0, t,
                                            full ? povm::Regime::full : povm::Regime::large_etau, &imag);
            r.summary["povm_regime"] = full ? "full" : "large_etau";
            r.data.push_back(pp);
            r.columns.insert(r.columns.end(), {"p_kijowski", "p_povm"});
            r.data.push_back(pk);
            r.data.push_back(pp);
            const double dev = sup_relative(pp, pk);
            r.summary["sup_relative_deviation"] = dev;
            r.summary["momentum_points"] = ms.size();
            check(r, "sup_relative_deviation", dev, s.tol.compare_sup, dev < s.tol.compare_sup);
        }
    } else if (s.scheme == "zeno") {
        // Projective measurement of P- after every step of length T / n_steps.
        WavePacket psi = gaussian_packet(s.state.gaussian(), wave_grid(s), s.mass, true);
        RVec p(t.size(), 0.0), surv(t.size(), 1.0);
        const std::size_t z = psi.grid.zero_index();
        WavePacket cur = psi;
        for (std::size_t i = 1; i < t.size(); ++i) {
            cur = evolve_free(cur, tg.dt());
            double gone = 0.0;
            for (std::size_t j = z; j < cur.grid.size(); ++j) {
                gone += std::norm(cur.amp[j]);
                cur.amp[j] = 0.0;
            }
            p[i] = gone * cur.grid.dx();
            surv[i] = cur.norm2();
        }
        r.data.push_back(p);
        r.columns.push_back("survival");
        r.data.push_back(surv);
        r.summary["p_N"] = surv.back();
        r.summary["detected_mass"] = 1.0 - surv.back();
        bool monotone = true;
        for (std::size_t i = 1; i < surv.size(); ++i) monotone = monotone && surv[i] <= surv[i - 1] + 1e-12;
        check(r, "survival_monotone", monotone ? 0.0 : 1.0, 0.0, monotone);
    } else if (s.scheme == "zeno2x2") {
        histories::ZenoToyModel model{s.epsilon_H, s.x_rate, s.y_rate};
        RVec p(t.size()), re(t.size()), im(t.size()), defect(t.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            histories::Matrix2 K = histories::zeno_robustness_2x2(model, t[i]);
            const double e = std::exp(-s.y_rate * t[i]);
            double d = std::max({std::abs(K[0][0]), std::abs(K[0][1]), std::abs(K[1][0]), std::abs(K[1][1] - e)});
            p[i] = std::norm(K[1][1]);
            re[i] = K[1][1].real();
            im[i] = K[1][1].imag();
            defect[i] = d;
            worst = std::max(worst, d);
        }
        r.data.push_back(p);
        r.columns.insert(r.columns.end(), {"k11_re", "k11_im", "defect"});
        r.data.push_back(re);
        r.data.push_back(im);
        r.data.push_back(defect);
        r.summary["max_defect"] = worst;
        check(r, "limit_defect", worst, s.tol.zeno2x2, worst < s.tol.zeno2x2);
    }

    for (const std::string& w : captured) r.warnings.push_back(w);
    // Repeated warnings from inner loops are reported once, by their text before any numbers.
    std::vector<std::string> uniq;
    std::set<std::string> seen;
    for (const std::string& w : r.warnings)
        if (seen.insert(w.substr(0, w.find(" ("))).second) uniq.push_back(w);
    r.warnings = uniq;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

// -------------------------------------------------------------------- output

std::string to_csv(const RunResult& r)
{
    std::string out;
    for (std::size_t c = 0; c < r.columns.size(); ++c) out += (c ? "," : "") + r.columns[c];
    out += '\n';
    char buf[40];
    const std::size_t rows = r.data.empty() ? 0 : r.data[0].size();
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t c = 0; c < r.data.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", r.data[c][i]);
            if (c) out += ',';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

std::string to_svg(const RunResult& r, const std::string& title)
{
    const double W = 640, H = 400, L = 60, R = 20, T = 30, B = 40;
    const RVec& t = r.data[0];
    double ymin = 0.0, ymax = 0.0;
    for (std::size_t c = 1; c < r.data.size(); ++c)
        for (double v : r.data[c]) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    if (ymax == ymin) ymax = ymin + 1.0;
    const double t0 = t.front(), t1 = t.back() > t0 ? t.back() : t0 + 1.0;
    auto X = [&](double x) { return L + (W - L - R) * (x - t0) / (t1 - t0); };
    auto Y = [&](double y) { return H - B - (H - T - B) * (y - ymin) / (ymax - ymin); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << L << "\" y=\"20\" font-size=\"13\">" << title << "</text>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" font-size=\"12\">t</text>\n";
    for (std::size_t c = 1; c < r.data.size(); ++c) {
        os << "<polyline fill=\"none\" stroke=\"" << colors[(c - 1) % 5] << "\" stroke-width=\"1.2\" points=\"";
        const std::size_t stride = std::max<std::size_t>(1, t.size() / 2000);
        for (std::size_t i = 0; i < t.size(); i += stride) os << X(t[i]) << ',' << Y(r.data[c][i]) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << W - R - 120 << "\" y=\"" << T + 16 * c << "\" font-size=\"11\" fill=\""
           << colors[(c - 1) % 5] << "\">" << r.columns[c] << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

json meta(const Scenario& s, const RunResult& r, int threads, bool with_timings)
{
    json m;
    m["scenario"] = {{"scheme", s.scheme}, {"version", kVersion}, {"csv_schema", kCsvSchema},
                     {"seed", s.seed},     {"threads", threads},  {"rows", r.data.empty() ? 0 : r.data[0].size()}};
    m["resolved_params"] = s.resolved();
    json summary = r.summary;
    summary["checks"] = r.checks;
    summary["within_tolerance"] = r.within_tolerance;
    summary["warnings"] = r.warnings;
    m["results_summary"] = summary;
    m["tolerances"] = {{"mass", s.tol.mass},
                       {"analytic_l1", s.tol.analytic_l1},
                       {"compare_sup", s.tol.compare_sup},
                       {"ratio_rel", s.tol.ratio_rel},
                       {"normalization", s.tol.normalization},
                       {"zeno2x2", s.tol.zeno2x2},
                       {"negativity", s.tol.negativity}};
    if (with_timings) m["timings"] = {{"recorded", true}, {"run_seconds", r.seconds}};
    else m["timings"] = {{"recorded", false}};
    return m;
}

}  // namespace toa::scenario
