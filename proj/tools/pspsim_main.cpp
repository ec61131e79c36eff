// pspsim CLI: configuration-driven simulation, trace analysis, parameter
// sweeps, and calibration management.
//
// Exit codes: 0 success, 2 configuration error, 3 pipeline error.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pspsim/config.hpp"
#include "pspsim/pipeline.hpp"
#include "pspsim/version.hpp"

namespace {

void print_report_brief(const pspsim::RunReport& rep) {
    std::size_t ok = 0;
    for (const auto& f : rep.frames)
        if (f.ok) ++ok;
    std::printf("frames: %zu processed, %zu ok\n", rep.frames.size(), ok);
    if (ok == 0) return;
    std::printf("mean pilot transmittance: %.3f dB\n", rep.mean_t_pilot_db);
    std::printf("mean V_A: %.4f SNU\n", rep.mean_v_a);
    std::printf("mean excess noise: %.5f SNU (raw %.5f)\n", rep.mean_eps,
                rep.mean_eps_raw);
    std::printf("mean SKR: %.4f Mbps\n", rep.mean_skr_bps / 1e6);
    std::printf("weighted total SKR: %.4f Mbps\n", rep.rates.total_bps / 1e6);
    if (rep.budget_valid) {
        std::printf(
            "noise budget [SNU]: psp %.5f freq %.5f phase %.5f fad %.5f "
            "chan %.5f total %.5f\n",
            rep.budget.eps_psp, rep.budget.eps_freq, rep.budget.eps_phase,
            rep.budget.eps_fad, rep.budget.eps_chan, rep.budget.eps_total);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLO PSP CVQKD desk-scale simulator and analyzer"};
    app.set_version_flag("--version", std::string("pspsim ") + pspsim::kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string calibration_file;
    std::string traces_dir;
    std::string axis;
    std::vector<double> values;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int workers = 1;
    bool emit_traces = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment configuration file")
            ->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "override the configured seed")
            ->each([&seed_given](const std::string&) { seed_given = true; });
        sub->add_option("--workers", workers, "frame worker threads")
            ->check(CLI::PositiveNumber);
    };

    CLI::App* sim = app.add_subcommand("simulate", "run an end-to-end simulation");
    add_common(sim);
    sim->add_flag("--emit-traces", emit_traces, "write per-frame trace files");
    sim->add_option("--calibration", calibration_file,
                    "reuse an existing calibration file");

    CLI::App* ana = app.add_subcommand("analyze", "process pre-recorded traces");
    add_common(ana);
    ana->add_option("--traces", traces_dir, "directory with frame_*.trace files")
        ->required();
    ana->add_option("--calibration", calibration_file, "calibration file")
        ->required();

    CLI::App* swp = app.add_subcommand("sweep", "analytic sweep over a config axis");
    add_common(swp);
    swp->add_option("--axis", axis, "config field path, e.g. transmitter.eta1")
        ->required();
    swp->add_option("--values", values, "axis values")->required()->delimiter(',');

    CLI::App* cal = app.add_subcommand("calibrate", "back-to-back calibration run");
    add_common(cal);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        pspsim::ExperimentConfig cfg = pspsim::load_config(config_path);
        pspsim::RunOptions opts;
        opts.out_dir = out_dir;
        opts.workers = workers;
        opts.emit_traces = emit_traces;
        opts.calibration_file = calibration_file;
        opts.traces_dir = traces_dir;
        if (seed_given) opts.seed_override = seed;

        if (sim->parsed()) {
            const auto rep = pspsim::run_simulate(cfg, opts);
            print_report_brief(rep);
        } else if (ana->parsed()) {
            const auto rep = pspsim::run_analyze(cfg, opts);
            print_report_brief(rep);
        } else if (swp->parsed()) {
            const auto res = pspsim::run_sweep(
                cfg.echo, axis, values,
                std::filesystem::path(config_path).parent_path().string());
            pspsim::write_sweep_csv(res, std::cout);
            std::printf("# skr monotonicity: %s; argmax at value %.17g\n",
                        res.monotonicity.c_str(), res.rows[res.argmax].value);
            if (!out_dir.empty()) {
                std::filesystem::create_directories(out_dir);
                std::ofstream f(out_dir + "/sweep.csv");
                pspsim::write_sweep_csv(res, f);
            }
        } else if (cal->parsed()) {
            const std::uint64_t s = seed_given ? seed : cfg.seed;
            const auto record = pspsim::run_calibration(cfg, s);
            const std::string dir = out_dir.empty() ? "." : out_dir;
            std::filesystem::create_directories(dir);
            pspsim::save_calibration(record, dir + "/calibration.json");
            std::printf("sigma_cal: %.17g\npilot_ref_power: %.17g\n",
                        record.sigma_cal, record.pilot_ref_power);
        }
    } catch (const pspsim::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
