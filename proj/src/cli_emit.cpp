#include "cli_internal.hpp"

#include <Eigen/Core>
#include <openssl/evp.h>
#include <openssl/crypto.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace semiper::cli {

namespace {

[[noreturn]] void io_error(const std::string& detail) { detail::raise("cli", "IoError", detail); }

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::vector<Column> scan_columns(ScanResult::Kind kind) {
    switch (kind) {
        case ScanResult::Kind::DecayEnvelope: return {{"t", "time"}, {"h_alpha", "1"}};
        case ScanResult::Kind::SemigroupInverse: return {{"t", "time"}, {"norm_etA_Ainv", "time"}};
        case ScanResult::Kind::Resolvent: return {{"eta", "1/time"}, {"resolvent_norm", "time"}, {"M", "time"}};
        case ScanResult::Kind::Mlog: return {{"eta", "1/time"}, {"M_log", "time"}};
    }
    return {};
}

std::string gnuplot_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "''";
        else out += c;
    }
    return out + "'";
}

}  // namespace

std::string csv_text(const Table& table) {
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out += ',';
        out += table.columns[c].name + " [" + table.columns[c].unit + "]";
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += format_number(row[c]);
        }
        out += '\n';
    }
    return out;
}

Table parse_csv(const std::string& text, const std::string& name) {
    Table t;
    t.name = name;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) io_error("empty CSV");
    for (const auto& cell : split(line, ',')) {
        const auto open = cell.rfind(" [");
        if (open == std::string::npos || cell.back() != ']') io_error("header cell without unit: " + cell);
        t.columns.push_back({cell.substr(0, open), cell.substr(open + 2, cell.size() - open - 3)});
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != t.columns.size()) io_error("row width differs from header");
        std::vector<double> row;
        for (const auto& c : cells) {
            char* end = nullptr;
            const double x = std::strtod(c.c_str(), &end);
            if (end == c.c_str() || *end != '\0') io_error("not a number: " + c);
            row.push_back(x);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table scan_table(const ScanResult& scan, const std::string& name) {
    Table t;
    t.name = name;
    t.columns = scan_columns(scan.kind);
    const bool resolvent = scan.kind == ScanResult::Kind::Resolvent;
    for (std::size_t i = 0; i < scan.abscissae.size(); ++i) {
        if (resolvent)
            t.rows.push_back({scan.abscissae[i], scan.pointwise[i], scan.values[i]});
        else
            t.rows.push_back({scan.abscissae[i], scan.values[i]});
    }
    return t;
}

ScanResult scan_from_table(const Table& table, ScanResult::Kind kind) {
    const auto expected = scan_columns(kind);
    if (table.columns.size() != expected.size()) io_error("table does not hold a " + to_string(kind) + " scan");
    for (std::size_t c = 0; c < expected.size(); ++c) {
        if (table.columns[c].name != expected[c].name) io_error("unexpected column " + table.columns[c].name);
    }
    ScanResult s;
    s.kind = kind;
    for (const auto& row : table.rows) {
        s.abscissae.push_back(row[0]);
        if (kind == ScanResult::Kind::Resolvent) {
            s.pointwise.push_back(row[1]);
            s.values.push_back(row[2]);
        } else {
            s.values.push_back(row[1]);
        }
    }
    return s;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) io_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) io_error("write failed for " + path.string());
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) io_error("SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string plot_script(const std::vector<Table>& tables) {
    std::ostringstream s;
    s << "# gnuplot script; run inside the output directory: gnuplot plots.gp\n";
    s << "set datafile separator ','\n";
    s << "set terminal pngcairo size 900,600\n";
    s << "set grid\n";
    for (const auto& t : tables) {
        if (!t.plot) continue;
        const PlotHint& h = *t.plot;
        s << "\n# " << t.name << "\n";
        s << "set output " << gnuplot_quote(t.name + ".png") << "\n";
        s << "unset logscale\n";
        if (h.axes == PlotHint::Axes::LogLog) s << "set logscale xy\n";
        if (h.axes == PlotHint::Axes::LogY) s << "set logscale y\n";
        s << "set title " << gnuplot_quote(h.title) << "\n";
        s << "set xlabel " << gnuplot_quote(t.columns[h.x].name + " [" + t.columns[h.x].unit + "]") << "\n";
        std::vector<std::string> parts;
        for (int c : h.y) {
            parts.push_back(gnuplot_quote(t.name + ".csv") + " every ::1 using " + std::to_string(h.x + 1) + ":" +
                            std::to_string(c + 1) + " with linespoints title " + gnuplot_quote(t.columns[c].name));
        }
        if (h.fit) {
            const auto& f = *h.fit;
            const double slope = h.fit_decays ? -f.exponent : f.exponent;
            s << "fit_" << t.name << "(x) = (x >= " << format_number(f.window_lo) << " && x <= "
              << format_number(f.window_hi) << ") ? " << format_number(f.constant) << " * x**(" << format_number(slope)
              << ") : 1/0\n";
            char label[64];
            std::snprintf(label, sizeof label, "fit: exponent %.4g, r2 %.4f", f.exponent, f.r2);
            parts.push_back("fit_" + t.name + "(x) with lines lw 2 title " + gnuplot_quote(label));
        }
        s << "plot ";
        for (std::size_t i = 0; i < parts.size(); ++i) s << (i ? ", \\\n     " : "") << parts[i];
        s << "\n";
    }
    s << "unset output\n";
    return s.str();
}

std::string config_hash(const Json& config) {
    const nlohmann::json canonical = nlohmann::json::parse(config.dump());
    return sha256_hex(canonical.dump());
}

std::vector<EmittedFile> emit_run(const RunResult& result, const Json& config, const RunContext& ctx,
                                  const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) io_error("cannot create " + out_dir.string() + ": " + ec.message());

    std::vector<EmittedFile> files;
    auto emit = [&](const std::string& name, const std::string& text) {
        write_file(out_dir / name, text);
        files.push_back({name, text.size(), sha256_hex(text)});
    };
    emit(result.report_name + ".json", result.report.dump(2) + "\n");
    for (const auto& t : result.tables) emit(t.name + ".csv", csv_text(t));
    bool plots = false;
    for (const auto& t : result.tables) plots = plots || t.plot.has_value();
    if (plots) emit("plots.gp", plot_script(result.tables));

    Json manifest;
    manifest["config_hash"] = config_hash(config);
    manifest["seed"] = ctx.seed;
    manifest["threads"] = ctx.threads;
    manifest["versions"] = {
        {"semiper", kVersion},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"openssl", OpenSSL_version(OPENSSL_VERSION)},
        {"compiler", __VERSION__}};
    Json stages = Json::array();
    for (const auto& s : result.stages) stages.push_back({{"stage", s.name}, {"seconds", s.seconds}});
    manifest["stages"] = stages;
    Json listed = Json::array();
    for (const auto& f : files) listed.push_back({{"path", f.path}, {"bytes", f.bytes}, {"sha256", f.sha256}});
    manifest["files"] = listed;
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return files;
}

Json load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) detail::raise("cli", "InvalidConfig", "cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return Json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        detail::raise("cli", "InvalidConfig", path.string() + ": " + e.what());
    }
}

}  // namespace semiper::cli
