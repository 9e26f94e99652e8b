#include "cimpc/experiments.hpp"
#include "cimpc/scenario.hpp"
#include "cimpc/smallsignal.hpp"

#include <CLI11.hpp>

#include <exception>
#include <iomanip>
#include <iostream>

namespace {

using namespace cimpc;

int print_result(const std::string& target, const experiments::ExperimentResult& res) {
    std::cout << res.report.to_text();
    if (!res.metrics.empty()) {
        std::cout << "\n[metrics]\n" << std::setprecision(8);
        for (const auto& [k, v] : res.metrics) std::cout << k << " = " << v << '\n';
    }
    for (const auto& f : res.files) std::cout << "wrote " << f << '\n';
    std::cout << std::setprecision(3) << target << ": " << (res.report.passed() ? "PASS" : "FAIL")
              << " in " << res.runtime_s << " s\n";
    return res.report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cimpc: coupled-inductor multi-port converter toolkit"};
    app.require_subcommand(1);

    std::string target;
    experiments::ExperimentOptions opts;
    double dt = 0.0;
    double duration = 0.0;
    std::size_t decimation = 0;
    auto* run = app.add_subcommand("run", "run a scenario file or a named experiment");
    run->add_option("target", target, "scenario file or experiment name (or 'all')")->required();
    run->add_option("--out", opts.out_dir, "output directory for CSV and report files");
    auto* dt_opt = run->add_option("--dt", dt, "integration step, s")->check(CLI::PositiveNumber);
    auto* dur_opt =
        run->add_option("--duration", duration, "simulated time, s")->check(CLI::PositiveNumber);
    auto* dec_opt = run->add_option("--decimation", decimation, "trace decimation")
                        ->check(CLI::PositiveNumber);

    bool table3 = false;
    auto* design = app.add_subcommand("design", "plant constants and PI gains");
    auto* t2 = design->add_flag("--table2", "first parameter set (default)");
    design->add_flag("--table3", table3, "second parameter set")->excludes(t2);

    std::string scenario_path;
    auto* validate = app.add_subcommand("validate", "parse and check a scenario file");
    validate->add_option("scenario", scenario_path, "scenario file")->required();

    auto* list = app.add_subcommand("list", "list the named experiments");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            if (*dt_opt) opts.dt = dt;
            if (*dur_opt) opts.duration = duration;
            if (*dec_opt) opts.decimation = decimation;
            if (target == "all") {
                int status = 0;
                for (const auto& name : experiments::experiment_names()) {
                    status |= print_result(name, experiments::run_experiment(name, opts));
                    std::cout << '\n';
                }
                return status;
            }
            if (experiments::is_experiment(target)) {
                return print_result(target, experiments::run_experiment(target, opts));
            }
            return print_result(target, experiments::run_scenario_file(target, opts));
        }
        if (*design) {
            const auto chain = smallsignal::design_chain(table3 ? table3_defaults() : table2_defaults());
            std::cout << smallsignal::design_report(chain, !table3);
            return 0;
        }
        if (*validate) {
            const auto config = scenario::load_scenario(scenario_path);
            std::cout << scenario::describe(config);
            for (const auto& w : config.warnings) std::cout << "warning: " << w << '\n';
            std::cout << "valid\n";
            return 0;
        }
        if (*list) {
            for (const auto& name : experiments::experiment_names()) std::cout << name << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
