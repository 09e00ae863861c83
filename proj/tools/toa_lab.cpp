// toa-lab: run or validate a time-of-arrival scenario described by a JSON config.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "toa/parallel.hpp"
#include "toa/scenario.hpp"

namespace sc = toa::scenario;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kTolerance = 3;

bool write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    out << content;
    out.close();
    if (!out) {
        std::cerr << "toa-lab: cannot write " << path << "\n";
        return false;
    }
    return true;
}

void print_report(const sc::Report& rep)
{
    for (const auto& e : rep.errors) std::cout << "error: " << e << "\n";
    for (const auto& w : rep.warnings) std::cout << "warning: " << w << "\n";
}

int do_validate(const std::string& config)
{
    try {
        const sc::Scenario s = sc::load(config);
        const sc::Report rep = sc::validate(s);
        print_report(rep);
        return rep.ok() ? kOk : kInvalid;
    } catch (const sc::ConfigError& e) {
        std::cout << "error: " << e.what() << "\n";
        return kInvalid;
    }
}

int do_run(const std::string& config, std::string stem, bool svg, int threads, bool timings)
{
    sc::Scenario s;
    try {
        s = sc::load(config);
    } catch (const sc::ConfigError& e) {
        std::cerr << "toa-lab: " << e.what() << "\n";
        return kInvalid;
    }
    const sc::Report rep = sc::validate(s);
    if (!rep.ok()) {
        print_report(rep);
        return kInvalid;
    }
    if (stem.empty()) stem = s.stem;
    if (stem.empty()) stem = std::filesystem::path(config).replace_extension().string();

    if (threads <= 0) {
        if (const char* env = std::getenv("TOA_LAB_THREADS")) threads = std::atoi(env);
    }
    toa::set_thread_count(threads);

    sc::RunResult r;
    try {
        r = sc::run(s);
    } catch (const toa::NumericalError& e) {
        std::cerr << "toa-lab: numerical failure: " << e.what() << "\n";
        return kTolerance;
    } catch (const toa::ContractError& e) {
        std::cerr << "toa-lab: " << e.what() << "\n";
        return kInvalid;
    }
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";

    const auto meta = sc::meta(s, r, toa::thread_count(), timings);
    if (!write_file(stem + ".csv", sc::to_csv(r))) return kInvalid;
    if (!write_file(stem + ".meta.json", meta.dump(2) + "\n")) return kInvalid;
    if (svg && !write_file(stem + ".svg", sc::to_svg(r, s.scheme))) return kInvalid;

    for (const auto& [name, c] : r.checks.items()) {
        if (!c["pass"].get<bool>())
            std::cerr << "toa-lab: check " << name << " failed: " << c["value"].dump() << " against "
                      << c["tolerance"].dump() << "\n";
    }
    return r.within_tolerance ? kOk : kTolerance;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Time-of-arrival distributions: stochastic, Copenhagen, histories and POVM schemes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sc::kVersion));

    std::string config, stem;
    bool svg = false, timings = false;
    int threads = 0;

    CLI::App* run = app.add_subcommand("run", "Run a scenario and write <stem>.csv and <stem>.meta.json");
    run->add_option("--config", config, "Scenario JSON file")->required();
    run->add_option("--out", stem, "Output stem (default: output.stem, else the config path without extension)");
    run->add_flag("--svg", svg, "Also write <stem>.svg");
    run->add_option("--threads", threads, "Worker threads (default: TOA_LAB_THREADS, else all cores)");
    run->add_flag("--timings", timings, "Record wall-clock time in the metadata");

    CLI::App* val = app.add_subcommand("validate", "Check a scenario without computing");
    val->add_option("--config", config, "Scenario JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kInvalid;
    }

    if (*val) return do_validate(config);
    return do_run(config, stem, svg, threads, timings);
}
