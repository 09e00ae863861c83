#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "toa/scenario.hpp"

namespace fs = std::filesystem;
namespace sc = toa::scenario;
using json = nlohmann::json;

namespace {

fs::path workdir()
{
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("toa_lab_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path write_config(const std::string& name, const std::string& text)
{
    const fs::path p = workdir() / (name + ".json");
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

struct Outcome {
    int code;
    std::string out;
};

Outcome lab(const std::string& args)
{
    const fs::path log = workdir() / "stdout.txt";
    const std::string cmd = std::string(TOA_LAB_EXE) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

// Columns of a CSV written by the tool.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t col(const std::string& name) const
    {
        return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
    }
};

Table read_csv(const fs::path& p)
{
    Table t;
    std::istringstream in(slurp(p));
    std::string line;
    std::getline(in, line);
    std::istringstream h(line);
    for (std::string c; std::getline(h, c, ',');) t.header.push_back(c);
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::istringstream r(line);
        for (std::string c; std::getline(r, c, ',');) row.push_back(std::stod(c));
        t.rows.push_back(row);
    }
    return t;
}

const char* kFig1 = R"("state": {"kind": "gaussian", "l_dist": 60, "mean_momentum": 20, "a": 0.5})";

}  // namespace

TEST_CASE("kijowski on the sharply peaked state: argmax at the predicted shift from t_cl")
{
    const auto cfg = write_config("kij", std::string("{\"scheme\": \"kijowski\", ") + kFig1 +
                                             R"(, "time": {"T": 6, "n_steps": 1200}})");
    const auto stem = (workdir() / "kij").string();
    REQUIRE(lab("run --config " + cfg.string() + " --out " + stem).code == 0);
    Table t = read_csv(stem + ".csv");
    REQUIRE(t.rows.size() == 1201);
    std::size_t best = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        if (t.rows[i][1] > t.rows[best][1]) best = i;
    const double tcl = 3.0, a = 0.5, pbar = 20.0;
    // The maximum of a Gaussian flux sits at t_cl (1 - 2 / (a pbar)^2), 2% early here.
    CHECK(std::abs(t.rows[best][0] / tcl - (1.0 - 2.0 / (a * pbar * a * pbar))) < 2e-3);
    const json meta = json::parse(slurp(stem + ".meta.json"));
    CHECK(meta["results_summary"]["t_classical"].get<double>() == doctest::Approx(tcl));
    CHECK(meta["results_summary"]["p_N"].get<double>() < 1e-3);
}

TEST_CASE("zeno2x2 with y = 0: the limit equals E")
{
    const auto cfg = write_config("z2", R"({"scheme": "zeno2x2", "time": {"T": 5, "n_steps": 100},
        "zeno2x2": {"epsilon_H": 1.0, "x_rate": 10, "y_rate": 0}})");
    const auto stem = (workdir() / "z2").string();
    REQUIRE(lab("run --config " + cfg.string() + " --out " + stem).code == 0);
    const json meta = json::parse(slurp(stem + ".meta.json"));
    CHECK(meta["results_summary"]["max_defect"].get<double>() < 1e-8);
    CHECK(meta["results_summary"]["checks"]["limit_defect"]["pass"].get<bool>());
}

TEST_CASE("compare at Delta p = 0.1 pbar: both densities and their sup-norm deviation")
{
    const auto cfg = write_config("cmp", std::string("{\"scheme\": \"compare\", ") + kFig1 +
                                             R"(, "detector": {"tau": 0.25}, "time": {"T": 6, "n_steps": 1200}})");
    const auto stem = (workdir() / "cmp").string();
    REQUIRE(lab("run --config " + cfg.string() + " --out " + stem + " --svg").code == 0);
    Table t = read_csv(stem + ".csv");
    REQUIRE(t.col("p_kijowski") < t.header.size());
    REQUIRE(t.col("p_povm") < t.header.size());
    const std::size_t k = t.col("p_kijowski"), p = t.col("p_povm");
    double d = 0.0, m = 0.0;
    for (const auto& row : t.rows) {
        d = std::max(d, std::abs(row[k] - row[p]));
        m = std::max(m, row[k]);
    }
    CHECK(d / m < 0.02);
    const json meta = json::parse(slurp(stem + ".meta.json"));
    CHECK(meta["results_summary"]["sup_relative_deviation"].get<double>() == doctest::Approx(d / m).epsilon(1e-9));
    CHECK(fs::exists(stem + ".svg"));
    CHECK(slurp(stem + ".svg").rfind("<svg", 0) == 0);
}

TEST_CASE("validate: regime warning, clean report, field errors")
{
    const auto slow = write_config("slow", R"({"scheme": "povm_regime",
        "state": {"kind": "gaussian", "l_dist": 20, "mean_momentum": 5, "sigma0": 2},
        "detector": {"tau": 0.2}, "time": {"T": 8, "n_steps": 800}})");
    Outcome o = lab("validate --config " + slow.string());
    CHECK(o.code == 0);
    CHECK(o.out.find("warning: regime") != std::string::npos);

    const auto good = write_config("good", R"({"scheme": "copenhagen_tau",
        "state": {"kind": "gaussian", "l_dist": 20, "mean_momentum": 5, "sigma0": 2},
        "time": {"T": 8, "n_steps": 800}})");
    o = lab("validate --config " + good.string());
    CHECK(o.code == 0);
    CHECK(o.out.empty());

    const auto neg = write_config("neg", R"({"scheme": "copenhagen_tau",
        "state": {"kind": "gaussian", "l_dist": 20, "mean_momentum": 5, "sigma0": -2},
        "time": {"T": 8, "n_steps": 800}})");
    o = lab("validate --config " + neg.string());
    CHECK(o.code == 2);
    CHECK(o.out.find("state.sigma0: must be positive") != std::string::npos);
    // run refuses the same config before computing anything
    CHECK(lab("run --config " + neg.string() + " --out " + (workdir() / "neg").string()).code == 2);
    CHECK_FALSE(fs::exists(workdir() / "neg.csv"));
}

TEST_CASE("schema: unknown keys, parse errors, missing files")
{
    const auto unk = write_config("unk", R"({"scheme": "zeno2x2", "time": {"T": 1, "n_steps": 10, "dt": 0.1}})");
    Outcome o = lab("validate --config " + unk.string());
    CHECK(o.code == 2);
    CHECK(o.out.find("time.dt: unknown key") != std::string::npos);

    const auto bad = write_config("bad", "{\n  \"scheme\": \"zeno2x2\",\n  \"time\": {\"T\": 1 \"n_steps\": 10}\n}\n");
    o = lab("validate --config " + bad.string());
    CHECK(o.code == 2);
    CHECK(o.out.find("line 3") != std::string::npos);

    CHECK(lab("validate --config " + (workdir() / "absent.json").string()).code == 2);
    CHECK(lab("run").code == 2);

    const sc::Scenario s = sc::parse(R"({"scheme": "kijowski", "state": {"l_dist": 5, "mean_momentum": 1,
        "sigma0": 1, "a": 1}, "time": {"T": 1, "n_steps": "ten"}})");
    const sc::Report r = sc::validate(s);
    CHECK(std::count_if(r.errors.begin(), r.errors.end(),
                        [](const std::string& e) { return e.find("time.n_steps") == 0; }) >= 1);
    CHECK(std::find(r.errors.begin(), r.errors.end(), "state: give either sigma0 or a, not both") != r.errors.end());
    CHECK(sc::validate(sc::parse(R"({"scheme": "teleport", "time": {"T": 1, "n_steps": 10}})")).errors.front() ==
          "scheme: unknown scheme 'teleport'");
}

TEST_CASE("determinism and row counts")
{
    const auto cfg = write_config("mc", R"({"scheme": "stochastic", "state": {"kind": "point", "l_dist": 2},
        "stochastic": {"process": "diffusion", "D": 1, "walkers": 20000},
        "grid": {"half_width": 40, "n_points": 4096}, "seed": 42, "time": {"T": 10, "n_steps": 2000}})");
    const auto a = (workdir() / "mc_a").string(), b = (workdir() / "mc_b").string();
    REQUIRE(lab("run --config " + cfg.string() + " --out " + a + " --threads 2").code == 0);
    REQUIRE(lab("run --config " + cfg.string() + " --out " + b + " --threads 2").code == 0);
    CHECK(slurp(a + ".csv") == slurp(b + ".csv"));
    CHECK(slurp(a + ".meta.json") == slurp(b + ".meta.json"));

    const std::string csv = slurp(a + ".csv");
    CHECK(csv.find('\r') == std::string::npos);
    CHECK(csv.rfind("t,p,p_analytic\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2001 + 1);

    const json meta = json::parse(slurp(a + ".meta.json"));
    for (const char* key : {"scenario", "resolved_params", "results_summary", "tolerances", "timings"})
        CHECK(meta.contains(key));
    CHECK(meta["scenario"]["threads"] == 2);
    CHECK(meta["scenario"]["seed"] == 42);
    CHECK(meta["scenario"]["csv_schema"] == sc::kCsvSchema);
    CHECK(meta["results_summary"]["monte_carlo_ks"].get<double>() < 0.05);

    // The environment variable stands in for --threads.
    const auto c = (workdir() / "mc_c").string();
    REQUIRE(lab("run --config " + cfg.string() + " --out " + c).code == 0);
    const std::string env = "TOA_LAB_THREADS=3 ";
    const fs::path log = workdir() / "env.txt";
    REQUIRE(std::system((env + TOA_LAB_EXE + " run --config " + cfg.string() + " --out " + c + " > " +
                         log.string() + " 2>&1")
                            .c_str()) == 0);
    CHECK(json::parse(slurp(c + ".meta.json"))["scenario"]["threads"] == 3);
}

TEST_CASE("exit status 3 on a tolerance failure")
{
    const auto cfg = write_config("tight", R"({"scheme": "stochastic", "state": {"kind": "point", "l_dist": 2},
        "stochastic": {"process": "diffusion", "D": 1}, "grid": {"half_width": 40, "n_points": 1024},
        "time": {"T": 10, "n_steps": 200}, "tolerances": {"analytic_l1": 1e-12}})");
    const auto stem = (workdir() / "tight").string();
    Outcome o = lab("run --config " + cfg.string() + " --out " + stem);
    CHECK(o.code == 3);
    CHECK(o.out.find("check analytic_l1 failed") != std::string::npos);
    // Artifacts are still written for inspection.
    CHECK(fs::exists(stem + ".csv"));
    const json meta = json::parse(slurp(stem + ".meta.json"));
    CHECK_FALSE(meta["results_summary"]["within_tolerance"].get<bool>());
}

TEST_CASE("every scheme runs on a small problem")
{
    const std::string g = R"("state": {"kind": "gaussian", "l_dist": 20, "mean_momentum": 5, "sigma0": 2})";
    const std::vector<std::pair<std::string, std::string>> cases{
        {"two_level", R"({"scheme": "stochastic", "stochastic": {"process": "two_level", "rate_b": 0.7},
            "time": {"T": 20, "n_steps": 4000}})"},
        {"ctau", "{\"scheme\": \"copenhagen_tau\", " + g + ", \"time\": {\"T\": 8, \"n_steps\": 400}}"},
        {"strip", "{\"scheme\": \"copenhagen_strip\", " + g + ", \"time\": {\"T\": 8, \"n_steps\": 400}}"},
        {"hist", "{\"scheme\": \"histories\", " + g + ", \"time\": {\"T\": 8, \"n_steps\": 400}}"},
        {"zeno", "{\"scheme\": \"zeno\", " + g + ", \"time\": {\"T\": 8, \"n_steps\": 100}}"},
    };
    for (const auto& [name, text] : cases) {
        CAPTURE(name);
        const auto stem = (workdir() / name).string();
        Outcome o = lab("run --config " + write_config(name, text).string() + " --out " + stem);
        CHECK(o.code == 0);
        const json meta = json::parse(slurp(stem + ".meta.json"));
        CHECK(meta["results_summary"]["within_tolerance"].get<bool>());
        const std::string csv = slurp(stem + ".csv");
        const std::size_t n = meta["resolved_params"]["time"]["n_steps"].get<std::size_t>();
        CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == n + 2);
    }
    const json h = json::parse(slurp((workdir() / "hist").string() + ".meta.json"));
    CHECK(h["results_summary"]["normalization_defect"].get<double>() < 1e-2);
    CHECK(read_csv((workdir() / "hist").string() + ".csv").header ==
          std::vector<std::string>{"t", "p", "d_tN_re", "d_tN_im"});
    const json c = json::parse(slurp((workdir() / "ctau").string() + ".meta.json"));
    CHECK(c["resolved_params"]["detector"]["tau"].get<double>() > 0.0);
}
