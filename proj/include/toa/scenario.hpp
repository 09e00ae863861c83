#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "toa/core.hpp"

namespace toa::scenario {

inline constexpr const char* kVersion = "toa-lab 1.0";
inline constexpr const char* kCsvSchema = "toa-lab-csv/1";

// Malformed JSON or unreadable file; parse messages carry line and column.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct StateSpec {
    enum class Kind { gaussian, two_gaussian, point };
    Kind kind = Kind::gaussian;
    double l_dist = 0.0;
    double mean_momentum = 0.0;
    double sigma0 = 0.0;  // from "sigma0" or "a" / sqrt 2
    double p1 = 0.0, p2 = 0.0, a = 0.0;

    GaussianSpec gaussian() const { return GaussianSpec{-l_dist, mean_momentum, sigma0}; }
};

struct Tolerances {
    double mass = 1e-3;
    double analytic_l1 = 1e-2;
    double compare_sup = 0.02;
    double ratio_rel = 0.05;
    double normalization = 1e-2;
    double zeno2x2 = 1e-8;
    double negativity = 1e-10;
};

struct Scenario {
    std::string scheme;
    StateSpec state;
    bool state_given = false;
    double mass = 1.0;
    double T = 0.0;
    std::size_t n_steps = 0;
    double grid_half_width = 0.0;  // 0: default for the state
    std::size_t grid_points = 4096;
    double tau = 0.0, v = 0.0, delta_x = 0.0;
    std::uint64_t seed = 0;
    std::string stem;

    std::string process = "diffusion";
    double D = 1.0, rate_b = 0.0;
    std::size_t walkers = 0;
    double dp = 0.0;  // 0: chosen from the state and T
    double epsilon_H = 1.0, x_rate = 10.0, y_rate = 0.0;
    Tolerances tol;

    // Field-level schema errors found while reading; empty when well formed.
    std::vector<std::string> schema_errors;

    nlohmann::ordered_json resolved() const;
};

// Parses JSON text against the fixed schema. Unknown keys and type errors are
// collected in schema_errors; malformed JSON throws ConfigError.
Scenario parse(const std::string& text);
Scenario load(const std::string& path);

struct Report {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

// Every violated precondition, without running any computation.
Report validate(const Scenario& s);

struct RunResult {
    std::vector<std::string> columns;  // first is "t"
    std::vector<RVec> data;
    nlohmann::ordered_json summary;
    nlohmann::ordered_json checks;  // name -> {value, tolerance, pass}
    std::vector<std::string> warnings;
    bool within_tolerance = true;
    double seconds = 0.0;
};

RunResult run(const Scenario& s);

std::string to_csv(const RunResult& r);
std::string to_svg(const RunResult& r, const std::string& title);
nlohmann::ordered_json meta(const Scenario& s, const RunResult& r, int threads, bool with_timings);

}  // namespace toa::scenario
