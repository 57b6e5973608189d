#include "catch_amalgamated.hpp"

#include "semiper/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef SEMIPER_CONFIG_DIR
#define SEMIPER_CONFIG_DIR "configs"
#endif

using namespace semiper;
using cli::Json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("semiper_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Json config(const std::string& file) { return cli::load_config(fs::path(SEMIPER_CONFIG_DIR) / file); }

int run_cli(const fs::path& cfg, const fs::path& out) {
    std::vector<std::string> args = {"semiper", "run", "--config", cfg.string(), "--out", out.string()};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::main_entry(static_cast<int>(argv.size()), argv.data());
}

Json scalar_config() {
    Json c = config("demo_scalar.json");
    c.erase("output_dir");
    return c;
}

}  // namespace

TEST_CASE("scan tables survive a CSV round trip bit for bit") {
    ScanResult s;
    s.kind = ScanResult::Kind::Resolvent;
    s.abscissae = {0.1, 1.0 / 3.0, 2.5e7};
    s.pointwise = {1e-300, 0.7071067811865476, 123456.789};
    s.values = {1.0, std::nextafter(1.0, 2.0), 3e300};
    const std::string text = cli::csv_text(cli::scan_table(s, "resolvent"));
    CHECK(text.rfind("eta [1/time],resolvent_norm [time],M [time]\n", 0) == 0);
    const ScanResult back = cli::scan_from_table(cli::parse_csv(text, "resolvent"), ScanResult::Kind::Resolvent);
    CHECK(back.abscissae == s.abscissae);
    CHECK(back.pointwise == s.pointwise);
    CHECK(back.values == s.values);

    ScanResult d;
    d.kind = ScanResult::Kind::DecayEnvelope;
    d.abscissae = {0.0, 0.5};
    d.values = {1.0, 0.1};
    const auto dt = cli::parse_csv(cli::csv_text(cli::scan_table(d, "decay")), "decay");
    CHECK(dt.columns.size() == 2);
    CHECK(dt.columns[1].unit == "1");
    CHECK(cli::scan_from_table(dt, ScanResult::Kind::DecayEnvelope).values == d.values);
}

TEST_CASE("empty scans give a header-only CSV") {
    ScanResult s;
    s.kind = ScanResult::Kind::SemigroupInverse;
    const std::string text = cli::csv_text(cli::scan_table(s, "empty"));
    CHECK(text == "t [time],norm_etA_Ainv [time]\n");
    CHECK(cli::parse_csv(text, "empty").rows.empty());
    CHECK_THROWS_AS(cli::scan_from_table(cli::parse_csv(text, "empty"), ScanResult::Kind::Resolvent), Error);
}

TEST_CASE("malformed CSV is rejected") {
    CHECK_THROWS_AS(cli::parse_csv("t,x\n1,2\n", "t"), Error);
    CHECK_THROWS_AS(cli::parse_csv("t [s],x [m]\n1\n", "t"), Error);
    CHECK_THROWS_AS(cli::parse_csv("t [s]\nabc\n", "t"), Error);
}

TEST_CASE("sha256 matches known digests") {
    CHECK(cli::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(cli::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("config hash ignores key order") {
    const Json a = Json::parse(R"({"b": 1, "a": {"y": [1, 2], "x": "s"}})");
    const Json b = Json::parse(R"({"a": {"x": "s", "y": [1, 2]}, "b": 1})");
    CHECK(cli::config_hash(a) == cli::config_hash(b));
    CHECK(cli::config_hash(a) != cli::config_hash(Json::parse(R"({"b": 2, "a": {"y": [1, 2], "x": "s"}})")));
}

TEST_CASE("plot scripts follow the table hints") {
    cli::Table t;
    t.name = "inverse_decay";
    t.columns = {{"t", "time"}, {"norm_etA_Ainv", "time"}};
    t.rows = {{1, 1}, {10, 0.1}};
    FitRecord f;
    f.exponent = 1.0;
    f.constant = 1.0;
    f.window_lo = 2.0;
    f.window_hi = 8.0;
    f.r2 = 1.0;
    t.plot = cli::PlotHint{cli::PlotHint::Axes::LogLog, "decay", 0, {1}, f, true};
    cli::Table bare;
    bare.name = "no_plot";
    const std::string s = cli::plot_script({t, bare});
    CHECK(s.find("set logscale xy") != std::string::npos);
    CHECK(s.find("'inverse_decay.csv' every ::1 using 1:2") != std::string::npos);
    CHECK(s.find("fit_inverse_decay(x) = (x >= 2 && x <= 8) ? 1 * x**(-1) : 1/0") != std::string::npos);
    CHECK(s.find("no_plot") == std::string::npos);
}

TEST_CASE("scalar demo solves to w0 = 1") {
    const auto r = cli::run_experiment(scalar_config(), {});
    CHECK(r.report_name == "periodic_report");
    CHECK(r.report["experiment"] == "periodic_solve");
    for (const auto& [name, m] : r.report["methods"].items()) {
        INFO(name);
        CHECK(std::abs(m["w0"][0].get<double>() - 1.0) < 1e-12);
    }
}

TEST_CASE("manifest lists every emitted file with its size and hash") {
    const auto dir = scratch("manifest");
    const Json c = config("criterion06_resolvent_decay.json");
    const auto r = cli::run_experiment(c, {});
    const auto files = cli::emit_run(r, c, {}, dir);
    const Json m = Json::parse(slurp(dir / "manifest.json"));
    CHECK(m["config_hash"] == cli::config_hash(c));
    CHECK(m["versions"]["semiper"] == cli::kVersion);
    CHECK(!m["stages"].empty());
    REQUIRE(m["files"].size() == files.size());
    bool has_plots = false;
    for (const auto& f : m["files"]) {
        const std::string bytes = slurp(dir / f["path"].get<std::string>());
        CHECK(bytes.size() == f["bytes"].get<std::size_t>());
        CHECK(cli::sha256_hex(bytes) == f["sha256"]);
        has_plots = has_plots || f["path"] == "plots.gp";
    }
    CHECK(has_plots);
    const std::string plots = slurp(dir / "plots.gp");
    CHECK(plots.find("synthetic_alpha1_resolvent.csv") != std::string::npos);
    CHECK(plots.find("set logscale xy") != std::string::npos);
}

TEST_CASE("runs are deterministic") {
    const Json c = config("criterion03_convergence.json");
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    cli::emit_run(cli::run_experiment(c, {7, 1}), c, {7, 1}, a);
    cli::emit_run(cli::run_experiment(c, {7, 1}), c, {7, 1}, b);
    for (const auto& e : fs::directory_iterator(a)) {
        const auto name = e.path().filename();
        if (name == "manifest.json") continue;
        INFO(name.string());
        CHECK(slurp(e.path()) == slurp(b / name));
    }
    const auto other = scratch("det_c");
    cli::emit_run(cli::run_experiment(c, {8, 1}), c, {8, 1}, other);
    CHECK(slurp(a / "gaps.csv") != slurp(other / "gaps.csv"));
}

TEST_CASE("config validation names the offending key") {
    Json c = scalar_config();
    c["solver"]["tolerance"] = 1e-9;
    try {
        cli::run_experiment(c, {});
        FAIL("unknown key accepted");
    } catch (const Error& e) {
        CHECK(e.qualified_name() == "cli.InvalidConfig");
        CHECK(std::string(e.what()).find("tolerance") != std::string::npos);
    }
    Json bad = scalar_config();
    bad["experiment"] = "nonsense";
    CHECK_THROWS_AS(cli::run_experiment(bad, {}), Error);
}

TEST_CASE("exit codes separate validation from solver failures") {
    const auto dir = scratch("exit");
    const fs::path ok = dir / "ok.json";
    cli::write_file(ok, scalar_config().dump());
    CHECK(run_cli(ok, dir / "ok_out") == 0);
    CHECK(fs::exists(dir / "ok_out" / "periodic_report.json"));
    CHECK(fs::exists(dir / "ok_out" / "manifest.json"));

    Json bad = scalar_config();
    bad["model"]["generator"] = "not a matrix";
    const fs::path bad_path = dir / "bad.json";
    cli::write_file(bad_path, bad.dump());
    CHECK(run_cli(bad_path, dir / "bad_out") == 2);

    const fs::path garbage = dir / "garbage.json";
    cli::write_file(garbage, "{ not json");
    CHECK(run_cli(garbage, dir / "garbage_out") == 2);

    // nonzero-mean forcing on the undamped-in-mean circle: solver refuses
    Json k = config("criterion04_kernel.json");
    Json solve = {{"experiment", "periodic_solve"},
                  {"model", k["model"]},
                  {"forcing", k["obstructed_forcing"]},
                  {"solver", {{"methods", {"direct"}}}}};
    const fs::path obstructed = dir / "obstructed.json";
    cli::write_file(obstructed, solve.dump());
    CHECK(run_cli(obstructed, dir / "obstructed_out") == 3);
}

TEST_CASE("resonance demo grows linearly in growth.csv") {
    const auto dir = scratch("resonance");
    const Json c = config("demo_resonance.json");
    const auto r = cli::run_experiment(c, {});
    cli::emit_run(r, c, {}, dir);
    const auto t = cli::parse_csv(slurp(dir / "growth.csv"), "growth");
    REQUIRE(t.columns.size() == 5);
    CHECK(t.columns[0].name == "n");
    const double C_j = r.report["growth"]["C_j"];
    const int n_j = r.report["growth"]["n_j"];
    for (const auto& row : t.rows) {
        if (row[0] < 1 || row[0] > n_j) continue;
        INFO("n = " << row[0]);
        CHECK(row[1] >= 0.8 * C_j * row[0]);
        CHECK(row[3] <= row[4]);
    }
}
