// Runs the shipped criterion configs in-process and prints one PASS/FAIL
// line per acceptance criterion. Exit status is nonzero if any line fails.

#include "semiper/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#ifndef SEMIPER_CONFIG_DIR
#define SEMIPER_CONFIG_DIR "configs"
#endif

using semiper::cli::Json;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

struct Timed {
    Json report;
    double seconds = 0.0;
    std::vector<semiper::cli::StageTime> stages;
};

Timed run(const std::string& file) {
    const auto path = std::filesystem::path(SEMIPER_CONFIG_DIR) / file;
    const Json config = semiper::cli::load_config(path);
    semiper::cli::RunContext ctx;
    if (config.contains("seed")) ctx.seed = config["seed"].get<std::uint64_t>();
    const auto t0 = std::chrono::steady_clock::now();
    auto r = semiper::cli::run_experiment(config, ctx);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(r.report), s, std::move(r.stages)};
}

double num(const Json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

const Json& sub(const Json& suite, const std::string& name) {
    for (const auto& r : suite["runs"]) {
        if (r["name"] == name) return r["report"];
    }
    throw std::runtime_error("suite has no run named " + name);
}

double run_seconds(const Timed& t, const std::string& name) {
    double s = 0.0;
    for (const auto& st : t.stages) {
        if (st.name.rfind(name + "/", 0) == 0) s += st.seconds;
    }
    return s;
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

Outcome c1() {
    Outcome o;
    const auto t = run("criterion01_scalar_oracle.json");
    double worst = 0.0;
    for (const auto& [name, m] : t.report["methods"].items()) worst = std::max(worst, std::abs(num(m["w0"][0]) - 1.0));
    o.require(t.report["methods"].size() == 3, "three methods");
    o.require(worst <= 1e-10, "|w0 - 1| <= 1e-10");
    o.require(t.seconds < 0.1, "runtime < 0.1 s");
    o.detail << "max |w0 - 1| = " << fmt(worst) << ", " << fmt(t.seconds) << " s";
    return o;
}

Outcome c2() {
    Outcome o;
    const auto t = run("criterion02_periodic_residual.json");
    double res = 0.0, agree = 0.0;
    for (const auto& [name, m] : t.report["methods"].items()) res = std::max(res, num(m["relative_residual"]));
    for (const auto& p : t.report["pairwise"]) {
        agree = std::max(agree, num(p["relative_difference"]) / (1.0 + num(p["condition_number"])));
    }
    o.require(t.report["pairwise"].size() == 3, "three method pairs");
    o.require(res <= 1e-8, "||u(T) - w0|| <= 1e-8 ||f||_L1X");
    o.require(agree <= 1e-8, "pairwise agreement <= 1e-8 (1 + cond)");
    o.require(t.seconds < 10.0, "runtime < 10 s");
    o.detail << "residual/||f|| = " << fmt(res) << ", agreement/(1+cond) = " << fmt(agree) << ", " << fmt(t.seconds)
             << " s";
    return o;
}

Outcome c3() {
    Outcome o;
    const auto t = run("criterion03_convergence.json");
    const double err = num(t.report["max_relative_error"]);
    o.require(t.report["samples"].size() == 5, "five random starts");
    o.require(t.report["periods"].get<int>() <= 50, "by n = 50");
    o.require(err <= 0.05, "ratio within 5% of rho");
    o.detail << "rho = " << fmt(num(t.report["spectral_radius"])) << ", worst ratio error = " << fmt(err);
    return o;
}

Outcome c4() {
    Outcome o;
    const auto t = run("criterion04_kernel.json");
    const double res = num(t.report["zero_mean"]["relative_residual"]);
    const std::string err = t.report["nonzero_mean_error"];
    const double proj = num(t.report["projector"]["contour_difference"]);
    o.require(res <= 1e-8, "zero-mean residual <= 1e-8");
    o.require(err == "periodic_solver.KernelObstruction", "nonzero mean raises KernelObstruction");
    o.require(proj <= 1e-8, "Pi0 matches contour projector to 1e-8");
    o.detail << "residual = " << fmt(res) << ", nonzero mean -> " << err << ", |Pi0 - contour| = " << fmt(proj);
    return o;
}

Outcome c5() {
    Outcome o;
    const auto t = run("criterion05_gain_of_derivatives.json");
    double worst = 0.0, weakest_control = 1e300;
    for (const char* name : {"interval", "heat_wave"}) {
        const auto& r = sub(t.report, name);
        std::vector<int> ks;
        for (const auto& row : r["orders"]) {
            ks.push_back(row["k"]);
            worst = std::max(worst, num(row["relative_error"]));
            weakest_control = std::min(weakest_control, num(row["control_relative_error"]));
        }
        o.require(ks == std::vector<int>{1, 2, 3}, std::string(name) + " covers k = 1, 2, 3");
    }
    o.require(worst <= 1e-6, "identity relative error <= 1e-6");
    o.require(weakest_control >= 1e-3, "negative control violates by >= 1e-3");
    o.detail << "max identity error = " << fmt(worst) << ", min control violation = " << fmt(weakest_control);
    return o;
}

Outcome c6() {
    Outcome o;
    const auto t = run("criterion06_resolvent_decay.json");
    for (const char* name : {"synthetic_alpha1", "synthetic_alpha2", "heat_wave"}) {
        const auto& r = sub(t.report, name);
        const double p = num(r["product"]);
        const bool heat = std::string(name) == "heat_wave";
        const double lo = heat ? 0.7 : 0.8, hi = heat ? 1.4 : 1.25;
        o.require(p >= lo && p <= hi, std::string(name) + " product in range");
        const double s = run_seconds(t, name);
        o.require(s < 60.0, std::string(name) + " runtime < 60 s");
        o.detail << name << ": " << fmt(num(r["alpha_hat"])) << " x " << fmt(num(r["beta_hat"])) << " = " << fmt(p)
                 << " (" << fmt(s) << " s); ";
    }
    return o;
}

Outcome c7() {
    Outcome o;
    const auto t = run("criterion07_heat_wave.json");
    const double beta = num(sub(t.report, "decay")["beta_hat"]);
    const auto& per = sub(t.report, "periodic");
    const bool cls = per["class_check"]["verified"].get<bool>() && per["class_check"]["order"].get<int>() == 7;
    const double res = num(per["methods"]["direct"]["relative_residual"]);
    o.require(beta >= 1.0 / 6.0, "fitted beta >= 1/6");
    o.require(cls, "forcing verified in W^{7,1}_per0");
    o.require(res <= 1e-7, "periodic residual <= 1e-7");
    o.detail << "beta = " << fmt(beta) << ", k = 7 class verified = " << (cls ? "yes" : "no")
             << ", residual/||f|| = " << fmt(res);
    return o;
}

Outcome c8() {
    Outcome o;
    const auto t = run("criterion08_interpolated_decay.json");
    for (const char* name : {"interval", "heat_wave"}) {
        for (const auto& row : sub(t.report, name)["alphas"]) {
            const double sup = num(row["sup"]);
            const double change = num(row["relative_change"]);
            o.require(std::isfinite(sup), std::string(name) + " sup finite");
            o.require(change < 0.1, std::string(name) + " sup stable under extension");
            o.detail << name << " alpha=" << fmt(num(row["alpha"])) << ": sup " << fmt(sup) << ", change "
                     << fmt(change) << "; ";
        }
    }
    return o;
}

Outcome c9() {
    Outcome o;
    const auto t = run("criterion09_resonance.json");
    const auto& g = t.report["growth"];
    const double low = num(g["min_norm_over_Cj_n"]);
    const int n_checked = g["n_checked"];
    const double n_expected = std::min<double>(200.0, num(g["n_j"]));
    const double err = num(g["max_error_over_bound"]);
    const double gap = num(t.report["concentration"]["relative_gap"]);
    const double control = num(t.report["control"]["final_norm_over_Cj_n"]);
    o.require(n_checked == static_cast<int>(n_expected), "checked n <= min(200, n_j)");
    o.require(low >= 0.8, "||u(nT)|| >= 0.8 C_j n");
    o.require(err <= 1.0, "error terms <= 1.1 mT ||M_a Phi_j||");
    o.require(gap <= 0.2, "concentration slope within 20% of -d");
    o.require(control < 0.05, "fully damped control: sup/n -> 0");
    o.require(t.seconds < 120.0, "runtime < 120 s");
    o.detail << "min ||u||/(C_j n) = " << fmt(low) << " over n <= " << n_checked << ", error/bound <= " << fmt(err)
             << ", slope gap = " << fmt(gap) << ", control ||u||/(C_j n) = " << fmt(control) << ", "
             << fmt(t.seconds) << " s";
    return o;
}

Outcome c10() {
    Outcome o;
    const auto t = run("criterion10_picard.json");
    const bool conv = t.report["converged"];
    const int it = t.report["iterations"];
    double worst = 0.0;
    for (const auto& r : t.report["ratios"]) worst = std::max(worst, num(r));
    const double res = num(t.report["periodic_residual"]);
    const Json& div = t.report["first_divergent_epsilon"];
    o.require(conv && it <= 30, "converges in <= 30 iterations");
    o.require(!t.report["ratios"].empty(), "at least one contraction ratio measured");
    o.require(worst < 0.5, "contraction ratio < 0.5");
    o.require(res <= 1e-6, "periodic residual <= 1e-6");
    o.require(!div.is_null(), "divergence threshold reported");
    o.detail << it << " iterations, max ratio " << fmt(worst) << ", residual " << fmt(res)
             << ", first divergent eps = " << (div.is_null() ? std::string("none") : fmt(num(div)));
    return o;
}

Outcome c11() {
    Outcome o;
    const auto t = run("criterion11_boundary.json");
    std::vector<double> periods;
    for (const auto& row : t.report["periods"]) {
        periods.push_back(num(row["period"]));
        o.require(num(row["relative_residual"]) <= 1e-8, "residual <= 1e-8 at T = " + fmt(num(row["period"])));
        o.detail << "T=" << fmt(num(row["period"])) << ": " << fmt(num(row["relative_residual"])) << "; ";
    }
    o.require(periods == std::vector<double>{0.1, 1.0, 10.0}, "T in {0.1, 1, 10}");
    return o;
}

Outcome c12() {
    Outcome o;
    const auto t = run("criterion12_invariants.json");
    int models = 0, checks = 0;
    for (const auto& r : t.report["runs"]) {
        ++models;
        for (const auto& c : r["report"]["checks"]) {
            ++checks;
            if (!c["pass"].get<bool>()) o.require(false, r["name"].get<std::string>() + "/" + c["name"].get<std::string>());
        }
    }
    o.detail << checks << " checks over " << models << " models";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"scalar oracle", c1},
        {"periodic residual and method agreement", c2},
        {"convergence to the periodic orbit", c3},
        {"kernel handling on the circle", c4},
        {"gain of derivatives", c5},
        {"resolvent growth against decay rate", c6},
        {"heat-wave decay and k = 7 periodic solve", c7},
        {"interpolated decay envelopes", c8},
        {"resonant growth on the sphere", c9},
        {"nonlinear Picard iteration", c10},
        {"boundary forcing without period restriction", c11},
        {"invariant suites", c12},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "error: " << e.what();
        }
        if (!o.pass) ++failed;
        std::cout << "criterion " << (i + 1) << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << " | "
                  << o.detail.str() << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria pass" << std::endl;
    return failed == 0 ? 0 : 1;
}
