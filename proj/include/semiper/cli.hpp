#pragma once

#include "semiper/stability_lab.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace semiper::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

struct Column {
    std::string name;
    std::string unit;
};

struct PlotHint {
    enum class Axes { Linear, LogLog, LogY };
    Axes axes = Axes::Linear;
    std::string title;
    int x = 0;
    std::vector<int> y;                 ///< columns drawn against x
    std::optional<FitRecord> fit;       ///< drawn as C x^{+-exponent} over the window
    bool fit_decays = true;
};

struct Table {
    std::string name;  ///< file stem
    std::vector<Column> columns;
    std::vector<std::vector<double>> rows;
    std::optional<PlotHint> plot;
};

struct StageTime {
    std::string name;
    double seconds = 0.0;
};

struct RunResult {
    std::string report_name = "report";  ///< file stem of the JSON report
    Json report;
    std::vector<Table> tables;
    std::vector<StageTime> stages;
};

struct RunContext {
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Parses the file; raises cli.InvalidConfig on malformed JSON.
Json load_config(const std::filesystem::path& path);

/// Validates and executes the experiment. Errors raised while building
/// models and forcings are rethrown as cli.ValidationFailed.
RunResult run_experiment(const Json& config, const RunContext& ctx);

/// Full-precision CSV: "name [unit]" header, values at 17 significant digits.
std::string csv_text(const Table& table);
Table parse_csv(const std::string& text, const std::string& name = "");

Table scan_table(const ScanResult& scan, const std::string& name);
ScanResult scan_from_table(const Table& table, ScanResult::Kind kind);

void write_file(const std::filesystem::path& path, const std::string& text);
std::string sha256_hex(const std::string& bytes);

/// Gnuplot script drawing every table that carries a plot hint.
std::string plot_script(const std::vector<Table>& tables);

struct EmittedFile {
    std::string path;  ///< relative to the output directory
    std::uintmax_t bytes = 0;
    std::string sha256;
};

/// Writes <report_name>.json, one CSV per table, plots.gp and manifest.json.
std::vector<EmittedFile> emit_run(const RunResult& result, const Json& config, const RunContext& ctx,
                                  const std::filesystem::path& out_dir);

/// Hash of the canonical (sorted-key, compact) config text.
std::string config_hash(const Json& config);

/// Entry point of the semiper tool; returns the process exit code.
int main_entry(int argc, char** argv);

}  // namespace semiper::cli
