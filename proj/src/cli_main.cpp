#include "semiper/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace semiper::cli {

namespace {

constexpr int kValidationExit = 2;
constexpr int kSolverExit = 3;

int report_error(const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << "error_name: " << e.qualified_name() << "\n";
    return e.module() == "cli" && e.name() != "IoError" ? kValidationExit : kSolverExit;
}

}  // namespace

int main_entry(int argc, char** argv) {
    CLI::App app{"Time-periodic solutions of forced damped evolution equations", "semiper"};
    app.require_subcommand(1);
    auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory (default: config output_dir, else ./out)");
    run->add_option("--seed", seed, "Seed for randomized probe vectors");
    run->add_option("--threads", threads, "Worker threads for scans")->check(CLI::PositiveNumber);
    app.add_flag_callback("--version", [] {
        std::cout << "semiper " << kVersion << "\n";
        std::exit(0);
    }, "Print the version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kValidationExit;
    }

    try {
        const Json config = load_config(config_path);
        RunContext ctx;
        if (config.is_object() && config.contains("seed") && config["seed"].is_number_unsigned())
            ctx.seed = config["seed"].get<std::uint64_t>();
        if (config.is_object() && config.contains("threads") && config["threads"].is_number_integer())
            ctx.threads = std::max(1, config["threads"].get<int>());
        if (seed) ctx.seed = *seed;
        if (threads) ctx.threads = *threads;
        if (out_dir.empty()) {
            out_dir = config.is_object() && config.contains("output_dir") && config["output_dir"].is_string()
                          ? config["output_dir"].get<std::string>()
                          : "out";
        }
        const RunResult result = run_experiment(config, ctx);
        const auto files = emit_run(result, config, ctx, out_dir);
        std::cout << "wrote " << files.size() + 1 << " files to " << out_dir << " (manifest.json)\n";
        return 0;
    } catch (const Error& e) {
        return report_error(e);
    }
}

}  // namespace semiper::cli
