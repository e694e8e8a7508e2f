// Command-line scenario runner.
//
// Subcommands:
//   run            execute a scenario config, write CSV/JSON outputs + manifest
//   converge       rerun the config's scalar quantity across a cutoff ladder
//   compare-rates  numeric splittings vs analytic rate formulas over a g grid
//
// Exit codes: 0 success, 1 requested convergence failed, 2 config/validation
// problems, 3 numeric failures (no bracketed minimum, tolerance failure, ...).

#include <CLI11.hpp>
#include <vacmech/vacmech.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

namespace {

// flag > environment > default
std::string resolve_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("VACMECH_OUT"); env && *env) return env;
    return ".";
}

void resolve_threads(int flag_value) {
    if (flag_value > 0) {
        vacmech::set_thread_count(flag_value);
        return;
    }
    // VACMECH_THREADS (or hardware default) handled inside the library
    vacmech::set_thread_count(vacmech::default_thread_count());
}

int dispatch(const std::string& cmd, const std::string& config_path, const std::string& out_dir) {
    const vacmech::ScenarioConfig cfg = vacmech::load_config(config_path);
    vacmech::RunResult res;
    if (cmd == "run") res = vacmech::run_scenario(cfg, out_dir);
    else if (cmd == "converge") res = vacmech::run_converge(cfg, out_dir);
    else res = vacmech::run_compare_rates(cfg, out_dir);

    std::cout << "scenario: " << res.manifest.scenario << "\n"
              << "digest:   " << res.manifest.config_digest << "\n";
    for (const auto& f : res.manifest.output_files) std::cout << "wrote:    " << out_dir << "/" << f << "\n";
    if (!res.manifest.convergence.is_null())
        std::cout << "converged: " << (res.exit_code == 0 ? "yes" : "NO") << "\n";
    return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vacmech: avoided crossings, coupling rates, and dressed-state dynamics "
                 "of hybrid atom-cavity-mechanical models"};
    app.require_subcommand(1);

    std::string config_path, out_flag;
    int threads = 0;
    long seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "scenario config (JSON)")->required();
        sub->add_option("--out", out_flag, "output directory (default: $VACMECH_OUT or .)");
        sub->add_option("--threads", threads, "worker threads (default: $VACMECH_THREADS or hardware)");
        sub->add_option("--seed", seed, "random seed (reserved; current algorithms are deterministic)");
    };

    CLI::App* c_run = app.add_subcommand("run", "execute one scenario");
    CLI::App* c_conv = app.add_subcommand("converge", "cutoff-ladder convergence for a scalar quantity");
    CLI::App* c_cmp = app.add_subcommand("compare-rates", "numeric vs analytic coupling rates");
    add_common(c_run);
    add_common(c_conv);
    add_common(c_cmp);

    CLI11_PARSE(app, argc, argv);

    const std::string cmd = c_run->parsed() ? "run" : (c_conv->parsed() ? "converge" : "compare-rates");
    resolve_threads(threads);
    const std::string out_dir = resolve_out_dir(out_flag);

    try {
        return dispatch(cmd, config_path, out_dir);
    } catch (const vacmech::ConfigParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const vacmech::ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const vacmech::InvalidCutoff& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const vacmech::DimensionOverflow& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const vacmech::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
