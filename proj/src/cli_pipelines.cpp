#include "cli_internal.hpp"

#include "semiper/periodic_solver.hpp"
#include "semiper/resonance_lab.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

namespace semiper::cli {

namespace {

using Clock = std::chrono::steady_clock;

class Stages {
public:
    explicit Stages(std::vector<StageTime>& out) : out_(out) {}

    template <class F>
    auto run(const std::string& name, F&& body) {
        const auto t0 = Clock::now();
        struct Record {
            Stages* self;
            std::string name;
            Clock::time_point t0;
            ~Record() {
                self->out_.push_back({name, std::chrono::duration<double>(Clock::now() - t0).count()});
            }
        } rec{this, name, t0};
        return body();
    }

    /// Build stages: module errors here mean the inputs were invalid.
    template <class F>
    auto build(F&& body) {
        return run("build", [&] {
            try {
                return body();
            } catch (const Error& e) {
                if (e.module() == "cli") throw;
                detail::raise("cli", "ValidationFailed", e.what());
            }
        });
    }

private:
    std::vector<StageTime>& out_;
};

Json model_json(const BuiltModel& m) {
    Json j;
    j["builder"] = m.builder;
    j["label"] = m.model->label();
    j["dim"] = m.model->dim();
    j["kernel_dim"] = m.model->kernel_basis().size();
    return j;
}

Json forcing_json(const Model& model, const PeriodicForcing& f) {
    Json j;
    j["period"] = f.period();
    const char* rep = "fourier";
    switch (f.representation()) {
        case PeriodicForcing::Representation::Fourier: rep = "fourier"; break;
        case PeriodicForcing::Representation::Separable: rep = "separable"; break;
        case PeriodicForcing::Representation::Sampled: rep = "sampled"; break;
        case PeriodicForcing::Representation::SemigroupPullback: rep = "semigroup_pullback"; break;
    }
    j["representation"] = rep;
    j["class_tag"] = to_string(f.class_tag());
    j["l1_norm"] = l1_norm(f, [&](const Vec& x) { return model.space().norm(x); });
    return j;
}

SolveOptions parse_solve_options(Reader r, std::vector<std::string>* methods = nullptr, std::optional<int>* class_order = nullptr) {
    SolveOptions o;
    o.tol = r.positive("tol", o.tol);
    o.n_max = r.integer("n_max", o.n_max);
    if (o.n_max < 1) config_error(r.path() + ".n_max", "must be >= 1");
    o.verify_periods = r.integer("verify_periods", 3);
    if (o.verify_periods < 0) config_error(r.path() + ".verify_periods", "must be >= 0");
    o.quad.rel_tol = r.positive("quad_rel_tol", o.quad.rel_tol);
    if (methods) {
        if (r.has("methods")) {
            const Json& m = r.raw("methods");
            if (!m.is_array() || m.empty()) config_error(r.path() + ".methods", "expected a nonempty array");
            for (const auto& x : m) {
                const std::string s = x.is_string() ? x.get<std::string>() : "";
                if (s != "series" && s != "direct" && s != "harmonic_balance")
                    config_error(r.path() + ".methods", "expected series, direct or harmonic_balance");
                methods->push_back(s);
            }
        } else {
            *methods = {"series", "direct", "harmonic_balance"};
        }
    }
    if (class_order && r.has("class_order")) *class_order = r.integer("class_order");
    r.done();
    return o;
}

PeriodicSolveReport solve_with(const std::string& method, const Model& m, const PeriodicForcing& f,
                               const SolveOptions& o) {
    if (method == "series") return periodic_w0_series(m, f, o);
    if (method == "harmonic_balance") return periodic_w0_harmonic_balance(m, f, o);
    return periodic_w0_direct(m, f, o);
}

double max_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
}

Json solve_json(const Model& m, const PeriodicSolveReport& r) {
    Json j;
    j["w0_norm"] = m.space().norm(r.w0);
    if (r.w0.size() <= 8) j["w0"] = vec_json(r.w0);
    j["forcing_norm"] = r.forcing_norm;
    j["norm_ratio"] = r.norm_ratio;
    j["residual"] = max_of(r.residual_per_period);
    j["relative_residual"] = r.forcing_norm > 0.0 ? max_of(r.residual_per_period) / r.forcing_norm : 0.0;
    j["residual_per_period"] = r.residual_per_period;
    j["condition"] = r.condition;
    j["kernel_offset"] = r.kernel_offset;
    if (r.method == PeriodicSolveReport::Method::Series) {
        j["series_terms"] = r.series_terms;
        j["tail_estimate"] = r.tail_estimate;
    }
    return j;
}

Vec random_vector(std::mt19937_64& rng, Index n, bool complex) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec v(n);
    for (Index i = 0; i < n; ++i) {
        const double re = g(rng);
        v(i) = complex ? cplx(re, g(rng)) : cplx(re);
    }
    return v;
}

Table scan_plot(const ScanResult& s, const std::string& name, PlotHint::Axes axes, const std::string& title) {
    Table t = scan_table(s, name);
    PlotHint h;
    h.axes = axes;
    h.title = title;
    h.x = 0;
    h.y = {static_cast<int>(t.columns.size()) - 1};
    h.fit = s.fit;
    h.fit_decays = s.kind != ScanResult::Kind::Resolvent;
    t.plot = h;
    return t;
}

// ----------------------------------------------------------------- experiments

RunResult periodic_solve(Reader& cfg, const RunContext&) {
    RunResult out;
    out.report_name = "periodic_report";
    Stages st(out.stages);
    std::vector<std::string> methods;
    std::optional<int> class_order;
    const SolveOptions opts = parse_solve_options(cfg.obj("solver"), &methods, &class_order);
    auto [bm, f] = st.build([&] {
        BuiltModel m = build_model(cfg.obj("model"));
        PeriodicForcing f = build_forcing(m, cfg.obj("forcing"), m.model->dim());
        return std::pair{m, f};
    });
    const Model& m = *bm.model;
    out.report["model"] = model_json(bm);
    out.report["forcing"] = forcing_json(m, f);
    if (class_order) {
        const auto cr = check_class(f, m.space(), *class_order);
        out.report["class_check"] = {{"order", *class_order}, {"verified", cr.class_verified}, {"wk1_norm", cr.wk1_norm}};
    }
    std::vector<PeriodicSolveReport> reports;
    st.run("solve", [&] {
        for (const auto& method : methods) reports.push_back(solve_with(method, m, f, opts));
        return 0;
    });
    Json per = Json::object();
    for (std::size_t i = 0; i < methods.size(); ++i) per[methods[i]] = solve_json(m, reports[i]);
    out.report["methods"] = per;

    Json pairs = Json::array();
    for (std::size_t a = 0; a < reports.size(); ++a) {
        for (std::size_t b = a + 1; b < reports.size(); ++b) {
            const double scale = std::max(m.space().norm(reports[a].w0), 1e-300);
            const double cond = reports[a].condition > 0.0 ? 1.0 / reports[a].condition : 0.0;
            pairs.push_back({{"a", methods[a]},
                             {"b", methods[b]},
                             {"difference", m.space().norm(reports[a].w0 - reports[b].w0)},
                             {"relative_difference", m.space().norm(reports[a].w0 - reports[b].w0) / scale},
                             {"condition_number", cond}});
        }
    }
    out.report["pairwise"] = pairs;

    Table t;
    t.name = "residuals";
    t.columns.push_back({"n", "periods"});
    for (const auto& method : methods) t.columns.push_back({"residual_" + method, "X-norm"});
    for (int n = 0; n < opts.verify_periods; ++n) {
        std::vector<double> row{double(n + 1)};
        for (const auto& r : reports) row.push_back(r.residual_per_period[n]);
        t.rows.push_back(row);
    }
    PlotHint h;
    h.axes = PlotHint::Axes::LogY;
    h.title = "periodic residual per period";
    for (int c = 1; c < static_cast<int>(t.columns.size()); ++c) h.y.push_back(c);
    t.plot = h;
    out.tables.push_back(std::move(t));
    return out;
}

RunResult convergence(Reader& cfg, const RunContext& ctx) {
    RunResult out;
    Stages st(out.stages);
    Reader c = cfg.obj("convergence");
    const int samples = c.integer("samples", 5);
    const int periods = c.integer("periods", 50);
    if (samples < 1 || periods < 2) config_error(c.path(), "need samples >= 1 and periods >= 2");
    c.done();
    auto [bm, f] = st.build([&] {
        BuiltModel m = build_model(cfg.obj("model"));
        PeriodicForcing f = build_forcing(m, cfg.obj("forcing"), m.model->dim());
        return std::pair{m, f};
    });
    const Model& m = *bm.model;
    out.report["model"] = model_json(bm);
    out.report["forcing"] = forcing_json(m, f);

    std::vector<std::vector<double>> gaps;
    double rho = 0.0;
    st.run("solve", [&] {
        SolveOptions o;
        o.verify_periods = 0;
        const Vec w0 = periodic_w0_direct(m, f, o).w0;
        rho = monodromy_radius(m, f.period());
        std::mt19937_64 rng(ctx.seed);
        const bool complex = m.space().field() == FieldTag::Complex;
        for (int s = 0; s < samples; ++s) {
            Vec v0 = w0 + m.deflation() * random_vector(rng, m.dim(), complex);
            gaps.push_back(convergence_gap(m, f, w0, v0, periods));
        }
        return 0;
    });
    out.report["spectral_radius"] = rho;
    Json rows = Json::array();
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const auto& g = gaps[s];
        const double ratio = g[periods] / g[periods - 1];
        const double err = std::abs(ratio - rho) / rho;
        worst = std::max(worst, err);
        rows.push_back({{"sample", s}, {"final_ratio", ratio}, {"relative_error", err}, {"initial_gap", g[0]}});
    }
    out.report["samples"] = rows;
    out.report["periods"] = periods;
    out.report["max_relative_error"] = worst;

    Table t;
    t.name = "gaps";
    t.columns.push_back({"n", "periods"});
    for (int s = 0; s < samples; ++s) t.columns.push_back({"gap_" + std::to_string(s), "X-norm"});
    for (int n = 0; n <= periods; ++n) {
        std::vector<double> row{double(n)};
        for (int s = 0; s < samples; ++s) row.push_back(gaps[s][n]);
        t.rows.push_back(row);
    }
    PlotHint h;
    h.axes = PlotHint::Axes::LogY;
    h.title = "gap to the periodic orbit";
    for (int s = 1; s <= samples; ++s) h.y.push_back(s);
    t.plot = h;
    out.tables.push_back(std::move(t));
    return out;
}

Mat contour_projector(const Mat& A, double r, int points) {
    const Index n = A.rows();
    Mat P = Mat::Zero(n, n);
    for (int k = 0; k < points; ++k) {
        const cplx z = r * std::exp(cplx(0.0, 2.0 * std::numbers::pi * k / points));
        P += (z / static_cast<double>(points)) * (z * Mat::Identity(n, n) - A).inverse();
    }
    return P;
}

RunResult kernel(Reader& cfg, const RunContext&) {
    RunResult out;
    Stages st(out.stages);
    Reader k = cfg.obj("kernel");
    const int points = k.integer("contour_points", 256);
    if (points < 8) config_error(k.path() + ".contour_points", "must be >= 8");
    k.done();
    const SolveOptions opts = parse_solve_options(cfg.obj("solver"));
    auto [bm, f, g] = st.build([&] {
        BuiltModel m = build_model(cfg.obj("model"));
        PeriodicForcing f = build_forcing(m, cfg.obj("forcing"), m.model->dim());
        PeriodicForcing g = build_forcing(m, cfg.obj("obstructed_forcing"), m.model->dim());
        return std::tuple{m, f, g};
    });
    const Model& m = *bm.model;
    out.report["model"] = model_json(bm);
    out.report["forcing"] = forcing_json(m, f);
    st.run("solve", [&] {
        const auto r = periodic_w0_direct(m, f, opts);
        out.report["zero_mean"] = solve_json(m, r);
        std::string name = "none";
        try {
            periodic_w0_direct(m, g, opts);
        } catch (const Error& e) {
            name = e.qualified_name();
        }
        out.report["nonzero_mean_error"] = name;
        return 0;
    });
    st.run("projector", [&] {
        const Vec ev = m.deflated_eigenvalues();
        double gap = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < ev.size(); ++i) gap = std::min(gap, std::abs(ev(i)));
        const Mat P = contour_projector(m.generator(), 0.5 * gap, points);
        const Mat& pi0 = m.pi0();
        out.report["projector"] = {{"contour_radius", 0.5 * gap},
                                   {"contour_points", points},
                                   {"contour_difference", (P - pi0).cwiseAbs().maxCoeff()},
                                   {"idempotence", (pi0 * pi0 - pi0).cwiseAbs().maxCoeff()},
                                   {"A_pi0", (m.generator() * pi0).cwiseAbs().maxCoeff()},
                                   {"pi0_A", (pi0 * m.generator()).cwiseAbs().maxCoeff()}};
        return 0;
    });
    return out;
}

RunResult gain(Reader& cfg, const RunContext&) {
    RunResult out;
    Stages st(out.stages);
    const std::vector<int> orders = cfg.integers("orders");
    auto [bm, f, g] = st.build([&] {
        BuiltModel m = build_model(cfg.obj("model"));
        PeriodicForcing f = build_forcing(m, cfg.obj("forcing"), m.model->dim());
        PeriodicForcing g = build_forcing(m, cfg.obj("control_forcing"), m.model->dim());
        return std::tuple{m, f, g};
    });
    const Model& m = *bm.model;
    out.report["model"] = model_json(bm);
    out.report["forcing"] = forcing_json(m, f);
    out.report["control_forcing"] = forcing_json(m, g);
    st.run("solve", [&] {
        const Vec F = duhamel_FT(m, f);
        const Vec G = duhamel_FT(m, g);
        Json rows = Json::array();
        for (int k : orders) {
            if (k < 1) config_error(cfg.path() + ".orders", "orders must be >= 1");
            Vec AkF = F, AkG = G;
            for (int i = 0; i < k; ++i) {
                AkF = m.generator() * AkF;
                AkG = m.generator() * AkG;
            }
            const Vec shifted = shift_derivative_FT(m, f, k);
            const double err = m.space().norm(shifted - AkF) / std::max(m.space().norm(AkF), 1e-300);
            const Vec control = duhamel_FT(m, g.derivative(k));
            const double cerr = m.space().norm(control - AkG) / std::max(m.space().norm(AkG), 1e-300);
            std::string refused = "none";
            try {
                shift_derivative_FT(m, g, k);
            } catch (const Error& e) {
                refused = e.qualified_name();
            }
            rows.push_back({{"k", k},
                            {"relative_error", err},
                            {"control_relative_error", cerr},
                            {"control_refused", refused}});
        }
        out.report["orders"] = rows;
        return 0;
    });
    return out;
}

CrosscheckOptions parse_crosscheck(Reader& r, int threads) {
    CrosscheckOptions o;
    o.eta_grid = r.grid("eta_grid");
    o.t_grid = r.grid("t_grid");
    o.eta_window = r.optional_window("eta_window");
    o.t_window = r.optional_window("t_window");
    o.threads = threads;
    return o;
}

RunResult crosscheck(Reader& cfg, const RunContext& ctx) {
    RunResult out;
    Stages st(out.stages);
    Reader s = cfg.obj("scan");
    const CrosscheckOptions o = parse_crosscheck(s, ctx.threads);
    const bool with_mlog = s.flag("mlog", false);
    s.done();
    const BuiltModel bm = st.build([&] { return build_model(cfg.obj("model")); });
    out.report["model"] = model_json(bm);
    const auto rec = st.run("scan", [&] { return bt_crosscheck(*bm.model, o); });
    out.report["alpha_hat"] = rec.alpha_hat;
    out.report["beta_hat"] = rec.beta_hat;
    out.report["product"] = rec.product;
    out.report["alpha_fit"] = fit_json(rec.alpha_fit);
    out.report["beta_fit"] = fit_json(rec.beta_fit);
    out.tables.push_back(scan_plot(rec.resolvent, "resolvent", PlotHint::Axes::LogLog, "resolvent bound M(eta)"));
    out.tables.push_back(
        scan_plot(rec.decay, "inverse_decay", PlotHint::Axes::LogLog, "||e^{tA} A^{-1}|| with power-law fit"));
    if (with_mlog) {
        const auto ml = st.run("mlog", [&] { return mlog_bound_curve(rec.resolvent, rec.decay, o.t_window); });
        out.report["mlog"] = {{"C", ml.C},
                              {"hold_fraction", ml.hold_fraction},
                              {"cover_C", ml.cover_C},
                              {"early_cover_C", ml.early_cover_C},
                              {"late_hold_fraction", ml.late_hold_fraction},
                              {"window", {ml.window.first, ml.window.second}}};
        Table t;
        t.name = "mlog_overlay";
        t.columns = {{"t", "time"}, {"measured", "X-norm"}, {"bound", "X-norm"}};
        for (std::size_t i = 0; i < ml.t.size(); ++i) t.rows.push_back({ml.t[i], ml.measured[i], ml.bound[i]});
        PlotHint h;
        h.axes = PlotHint::Axes::LogLog;
        h.title = "decay against C / M_log^{-1}(t / C)";
        h.y = {1, 2};
        t.plot = h;
        out.tables.push_back(std::move(t));
    }
    return out;
}

RunResult decay_scan(Reader& cfg, const RunContext& ctx) {
    RunResult out;
    Stages st(out.stages);
    Reader s = cfg.obj("scan");
    const std::string quantity = s.str("quantity", "inverse");
    if (quantity != "inverse" && quantity != "envelope") config_error(s.path() + ".quantity", "expected inverse or envelope");
    const double alpha = quantity == "envelope" ? s.positive("alpha", 1.0) : 1.0;
    const auto grid = s.grid("t_grid");
    const auto window = s.optional_window("window");
    const bool fit = s.flag("fit", true);
    s.done();
    const BuiltModel bm = st.build([&] { return build_model(cfg.obj("model")); });
    out.report["model"] = model_json(bm);
    ScanResult scan = st.run("scan", [&] {
        return quantity == "inverse" ? semigroup_inverse_decay(*bm.model, grid, ctx.threads)
                                     : decay_envelope(*bm.model, alpha, grid, ctx.threads);
    });
    out.report["quantity"] = quantity;
    out.report["alpha"] = alpha;
    if (fit) {
        const double beta = st.run("fit", [&] { return fit_decay_exponent(scan, window); });
        out.report["beta_hat"] = beta;
        out.report["fit"] = fit_json(*scan.fit);
    }
    out.report["first_value"] = scan.values.front();
    out.report["last_value"] = scan.values.back();
    out.tables.push_back(scan_plot(scan, "decay", PlotHint::Axes::LogLog, "decay scan with power-law fit"));
    return out;
}

RunResult resolvent(Reader& cfg, const RunContext& ctx) {
    RunResult out;
    Stages st(out.stages);
    Reader s = cfg.obj("scan");
    const auto grid = s.grid("eta_grid");
    const auto window = s.optional_window("window");
    const bool fit = s.flag("fit", false);
    s.done();
    const BuiltModel bm = st.build([&] { return build_model(cfg.obj("model")); });
    out.report["model"] = model_json(bm);
    ScanResult scan = st.run("scan", [&] { return resolvent_scan(*bm.model, grid, ctx.threads); });
    if (fit) {
        out.report["alpha_hat"] = st.run("fit", [&] { return fit_resolvent_exponent(scan, window); });
        out.report["fit"] = fit_json(*scan.fit);
    }
    out.report["max_M"] = scan.values.back();
    out.tables.push_back(scan_plot(scan, "resolvent", PlotHint::Axes::LogLog, "resolvent bound M(eta)"));
    return out;
}

RunResult interpolation(Reader& cfg, const RunContext& ctx) {
    RunResult out;
    Stages st(out.stages);
    Reader s = cfg.obj("scan");
    const auto alphas = s.numbers("alphas");
    const auto grid = s.grid("t_grid");
    const auto extended = s.grid("extended_t_grid");
    s.done();
    const BuiltModel bm = st.build([&] { return build_model(cfg.obj("model")); });
    out.report["model"] = model_json(bm);
    Json rows = Json::array();
    st.run("scan", [&] {
        for (double a : alphas) {
            if (!(a > 0.0)) config_error(s.path() + ".alphas", "alphas must be positive");
            const auto base = interpolation_check(*bm.model, a, grid, ctx.threads);
            const auto ext = interpolation_check(*bm.model, a, extended, ctx.threads);
            rows.push_back({{"alpha", a},
                            {"sup", base.sup},
                            {"argmax", base.argmax},
                            {"sup_extended", ext.sup},
                            {"relative_change", std::abs(ext.sup / base.sup - 1.0)}});
            Table t;
            t.name = "ratio_alpha_" + std::to_string(static_cast<int>(std::lround(a * 100)));
            t.columns = {{"t", "time"}, {"ratio", "1"}};
            for (std::size_t i = 0; i < ext.t.size(); ++i) t.rows.push_back({ext.t[i], ext.ratio[i]});
            PlotHint h;
            h.title = "h_alpha(t) / h_1(t/ceil(alpha))^alpha";
            h.y = {1};
            t.plot = h;
            out.tables.push_back(std::move(t));
        }
        return 0;
    });
    out.report["alphas"] = rows;
    return out;
}

Table growth_table(const GrowthExperiment& g, const std::string& name, const std::string& title) {
    Table t;
    t.name = name;
    t.columns = {{"n", "periods"},
                 {"norm", "L2"},
                 {"lower_bound", "L2"},
                 {"error_term", "L2"},
                 {"error_bound", "L2"}};
    for (std::size_t i = 0; i < g.norms.size(); ++i)
        t.rows.push_back({double(g.n_grid[i]), g.norms[i], g.lower_bound_curve[i], g.error_terms[i], g.error_bounds[i]});
    PlotHint h;
    h.title = title;
    h.y = {1, 2};
    t.plot = h;
    return t;
}

Json growth_json(const GrowthExperiment& g, int n_cap) {
    double min_ratio = std::numeric_limits<double>::infinity();
    double sup = 0.0;
    for (int n = 1; n <= n_cap; ++n) min_ratio = std::min(min_ratio, g.norms[n - 1] / (g.C_j * n));
    for (double v : g.norms) sup = std::max(sup, v);
    double worst_error = 0.0;
    for (std::size_t i = 0; i < g.error_terms.size(); ++i)
        worst_error = std::max(worst_error, g.error_terms[i] / g.error_bounds[i]);
    Json j;
    j["period"] = g.period;
    j["C_j"] = g.C_j;
    j["forcing_norm"] = g.forcing_norm;
    j["concentration"] = g.concentration;
    j["c"] = g.c;
    j["n_j"] = g.n_j;
    j["n_checked"] = n_cap;
    j["FT_defect"] = g.FT_defect;
    j["min_norm_over_Cj_n"] = min_ratio;
    j["max_error_over_bound"] = worst_error;
    j["single_period"] = g.single_period;
    j["sup_norm"] = sup;
    j["final_norm_over_n"] = g.norms.back() / g.n_grid.back();
    j["leakage"] = g.leakage;
    return j;
}

RunResult resonance(Reader& cfg, const RunContext&) {
    RunResult out;
    out.report_name = "resonance_report";
    Stages st(out.stages);
    Reader r = cfg.obj("resonance");
    const int j = r.integer("j");
    const int k = r.integer("k", 0);
    const int n_max = r.integer("n_max", 200);
    const int extra = r.integer("extra_degrees", 60);
    if (j < 1 || k < 0 || n_max < 1 || extra < 10) config_error(r.path(), "need j >= 1, k >= 0, n_max >= 1, extra_degrees >= 10");
    std::vector<int> js;
    if (r.has("concentration_degrees")) js = r.integers("concentration_degrees");
    const bool detune = r.flag("detuning", true);
    const auto [a, control, block, control_block] = st.build([&] {
        const DampingProfile a = parse_damping(r.obj("damping"));
        std::optional<DampingProfile> c;
        if (r.has("control_damping")) c = parse_damping(r.obj("control_damping"));
        auto block = build_sphere_schrodinger(j + extra, j, a);
        std::optional<SphereBlockModel> cb;
        if (c) cb = build_sphere_schrodinger(j + extra, j, *c);
        return std::tuple{a, c, block, cb};
    });
    r.done();

    const double lambda = double(j) * (j + 1);
    out.report["j"] = j;
    out.report["k"] = k;
    out.report["jmax"] = j + extra;
    out.report["lambda_j"] = lambda;

    if (!js.empty()) {
        const auto scan = st.run("concentration", [&] { return concentration_scan(a, js, extra); });
        Json rows = Json::array();
        Table t;
        t.name = "concentration";
        t.columns = {{"j", "degree"}, {"norm_a_phi", "L2"}, {"refined_change", "L2"}};
        for (const auto& row : scan.rows) {
            rows.push_back({{"j", row.j}, {"norm", row.norm}, {"refined_change", row.refined_change}});
            t.rows.push_back({double(row.j), row.norm, row.refined_change});
        }
        PlotHint h;
        h.axes = PlotHint::Axes::LogY;
        h.title = "||a Phi_j|| against j";
        h.y = {1};
        t.plot = h;
        out.tables.push_back(std::move(t));
        out.report["concentration"] = {{"rows", rows},
                                       {"slope_j", scan.slope_j},
                                       {"c", scan.c},
                                       {"d", scan.d},
                                       {"relative_gap", scan.relative_gap},
                                       {"r2", scan.r2}};
    }

    const auto g = st.run("growth", [&] { return growth_experiment(block, k, n_max); });
    const int n_cap = static_cast<int>(std::min<long long>(n_max, g.n_j));
    out.report["growth"] = growth_json(g, n_cap);
    out.tables.push_back(growth_table(g, "growth", "||u(nT)|| against the lower bound"));

    if (detune) {
        const double T = 2.0 * std::numbers::pi * (1.0 + 1.0 / (2.0 * lambda));
        const auto d = st.run("detuned", [&] { return growth_experiment(block, k, n_max, T); });
        Json dj = growth_json(d, std::min(n_cap, n_max));
        dj["sup_over_single_period"] = dj["sup_norm"].get<double>() / d.single_period;
        out.report["detuned"] = dj;
        out.tables.push_back(growth_table(d, "detuned", "detuned period"));
    }
    if (control_block) {
        const auto c = st.run("control", [&] {
            return growth_experiment(block, k, n_max, 2.0 * std::numbers::pi, &*control_block);
        });
        Json cj = growth_json(c, std::min(n_cap, n_max));
        cj["final_norm_over_Cj_n"] = c.norms.back() / (c.C_j * c.n_grid.back());
        out.report["control"] = cj;
        out.tables.push_back(growth_table(c, "control", "damping on the whole sphere"));
    }
    return out;
}

RunResult picard(Reader& cfg, const RunContext&) {
    RunResult out;
    Stages st(out.stages);
    Reader p = cfg.obj("picard");
    PicardOptions o;
    o.nodes = p.integer("nodes", o.nodes);
    o.max_iter = p.integer("max_iter", o.max_iter);
    o.tol = p.positive("tol", o.tol);
    o.check_steps = p.integer("check_steps", o.check_steps);
    const double eps = p.positive("epsilon");
    std::vector<double> sweep;
    if (p.has("sweep")) sweep = p.numbers("sweep");
    Nonlinearity g;
    g.coeffs = p.numbers("coefficients");
    p.done();
    auto [bm, f] = st.build([&] {
        g.validate();
        BuiltModel m = build_model(cfg.obj("model"));
        PeriodicForcing f = build_forcing(m, cfg.obj("forcing"), m.model->dim());
        return std::pair{m, f};
    });
    const Model& m = *bm.model;
    out.report["model"] = model_json(bm);
    out.report["forcing"] = forcing_json(m, f);
    out.report["epsilon"] = eps;
    const auto fe = PeriodicForcing::combine(eps, f, 0.0, f);
    const auto rep = st.run("solve", [&] { return picard_nonlinear(m, fe, g, o); });
    double max_ratio = 0.0;
    for (double r : rep.ratios) max_ratio = std::max(max_ratio, r);
    out.report["converged"] = rep.converged;
    out.report["diverged"] = rep.diverged;
    out.report["iterations"] = rep.iterations;
    out.report["max_ratio"] = max_ratio;
    out.report["ratios"] = rep.ratios;
    out.report["periodic_residual"] = rep.periodic_residual;
    Table t;
    t.name = "picard_gaps";
    t.columns = {{"iteration", "1"}, {"gap", "X-norm"}};
    for (std::size_t i = 0; i < rep.gaps.size(); ++i) t.rows.push_back({double(i + 1), rep.gaps[i]});
    PlotHint h;
    h.axes = PlotHint::Axes::LogY;
    h.title = "Picard iteration gaps";
    h.y = {1};
    t.plot = h;
    out.tables.push_back(std::move(t));
    if (!sweep.empty()) {
        const auto sw = st.run("sweep", [&] { return picard_epsilon_sweep(m, f, g, sweep, o); });
        Json rows = Json::array();
        for (const auto& row : sw.rows)
            rows.push_back({{"epsilon", row.epsilon},
                            {"converged", row.converged},
                            {"iterations", row.iterations},
                            {"max_ratio", row.max_ratio}});
        out.report["sweep"] = rows;
        out.report["first_divergent_epsilon"] = sw.first_divergent ? Json(*sw.first_divergent) : Json(nullptr);
    }
    return out;
}

RunResult boundary(Reader& cfg, const RunContext&) {
    RunResult out;
    Stages st(out.stages);
    Reader b = cfg.obj("boundary");
    const auto periods = b.numbers("periods");
    const SolveOptions opts = parse_solve_options(cfg.obj("solver"));
    auto [bm, profile] = st.build([&] {
        BuiltModel m = build_model(cfg.obj("model"));
        if (!m.model->control()) detail::raise("periodic_solver", "MissingControl", "model has no control operator");
        return std::pair{m, parse_profile(b.obj("profile"))};
    });
    b.done();
    const Model& m = *bm.model;
    out.report["model"] = model_json(bm);
    Json rows = Json::array();
    st.run("solve", [&] {
        for (double T : periods) {
            if (!(T > 0.0)) config_error(b.path() + ".periods", "periods must be positive");
            const auto g = PeriodicForcing::separable(T, {{profile, Vec::Ones(1)}});
            const auto r = boundary_periodic_solve(m, g, opts);
            const double res = max_of(r.solve.residual_per_period);
            const double w = m.space().norm(r.solve.w0);
            rows.push_back({{"period", T},
                            {"w0_norm", w},
                            {"residual", res},
                            {"relative_residual", res / std::max(w, 1e-300)},
                            {"g_l2", r.g_l2},
                            {"admissibility", r.admissibility},
                            {"measured_C", r.measured_C}});
        }
        return 0;
    });
    out.report["periods"] = rows;
    return out;
}

RunResult invariants(Reader& cfg, const RunContext& ctx) {
    RunResult out;
    Stages st(out.stages);
    Reader inv = cfg.obj("invariants");
    const double tol_semigroup = inv.positive("semigroup_tol", 1e-9);
    const double tol_power = inv.positive("power_tol", 1e-8);
    const double tol_projector = inv.positive("projector_tol", 1e-10);
    const double tol_linearity = inv.positive("linearity_tol", 1e-10);
    const double period = inv.positive("period", 1.0);
    inv.done();
    const BuiltModel bm = st.build([&] { return build_model(cfg.obj("model")); });
    const Model& m = *bm.model;
    out.report["model"] = model_json(bm);
    std::mt19937_64 rng(ctx.seed);
    const bool complex = m.space().field() == FieldTag::Complex;
    Json checks = Json::array();
    auto add = [&](const std::string& name, double defect, double tol) {
        checks.push_back({{"name", name}, {"defect", defect}, {"tolerance", tol}, {"pass", defect <= tol}});
    };
    st.run("checks", [&] {
        const auto& X = m.space();
        double sg = 0.0;
        for (auto [s, t] : {std::pair{0.3, 0.7}, std::pair{1.0, 2.5}, std::pair{0.05, 4.0}}) {
            const Vec x = random_vector(rng, m.dim(), complex);
            const Vec lhs = m.propagate(s + t, x);
            const Vec rhs = m.propagate(s, m.propagate(t, x));
            sg = std::max(sg, X.norm(lhs - rhs) / X.norm(x));
        }
        add("semigroup_law", sg, tol_semigroup);

        const Mat P1 = fractional_power(m, 1.0);
        const double a_norm = X.operator_norm(m.generator());
        add("power_one", X.operator_norm(P1 + m.generator() * m.deflation()) / std::max(a_norm, 1e-300), tol_power);
        double law = 0.0;
        for (auto [a, b] : {std::pair{0.5, 0.5}, std::pair{0.3, 1.2}, std::pair{1.0, 1.0}}) {
            const Mat lhs = fractional_power(m, a) * fractional_power(m, b);
            const Mat rhs = fractional_power(m, a + b);
            law = std::max(law, X.operator_norm(lhs - rhs) / std::max(X.operator_norm(rhs), 1e-300));
        }
        add("power_addition", law, tol_power);

        const Mat& pi0 = m.pi0();
        const double scale = std::max(1.0, a_norm);
        add("projector_idempotent", (pi0 * pi0 - pi0).cwiseAbs().maxCoeff(), tol_projector);
        add("projector_annihilates_A",
            std::max((m.generator() * pi0).cwiseAbs().maxCoeff(), (pi0 * m.generator()).cwiseAbs().maxCoeff()) / scale,
            tol_projector);

        std::vector<FourierTerm> t1, t2;
        for (int k = -2; k <= 2; ++k) {
            t1.push_back({k, random_vector(rng, m.dim(), true)});
            t2.push_back({k, random_vector(rng, m.dim(), true)});
        }
        const auto f = PeriodicForcing::fourier(period, t1);
        const auto g = PeriodicForcing::fourier(period, t2);
        const cplx al(0.7, -0.2), be(-1.3, 0.4);
        QuadratureOptions quad;
        quad.method = QuadratureOptions::Method::Quadrature;
        const Vec lhs = duhamel_FT(m, PeriodicForcing::combine(al, f, be, g), quad);
        const Vec rhs = al * duhamel_FT(m, f, quad) + be * duhamel_FT(m, g, quad);
        add("FT_linearity", X.norm(lhs - rhs) / std::max(X.norm(rhs), 1e-300), tol_linearity);
        return 0;
    });
    bool all = true;
    for (const auto& c : checks) all = all && c["pass"].get<bool>();
    out.report["checks"] = checks;
    out.report["all_pass"] = all;
    return out;
}

RunResult dispatch(const std::string& kind, Reader& cfg, const RunContext& ctx);

RunResult suite(Reader& cfg, const RunContext& ctx) {
    RunResult out;
    const Json& runs = cfg.raw("runs");
    if (!runs.is_array() || runs.empty()) config_error(cfg.path() + ".runs", "expected a nonempty array");
    Json reports = Json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        Reader r(runs[i], cfg.path() + ".runs[" + std::to_string(i) + "]");
        const std::string name = r.str("name");
        const std::string kind = r.str("experiment");
        if (kind == "suite") config_error(r.path() + ".experiment", "suites do not nest");
        RunResult sub = dispatch(kind, r, ctx);
        r.done();
        reports.push_back({{"name", name}, {"experiment", kind}, {"report", sub.report}});
        for (auto& t : sub.tables) {
            t.name = name + "_" + t.name;
            out.tables.push_back(std::move(t));
        }
        for (auto& s : sub.stages) out.stages.push_back({name + "/" + s.name, s.seconds});
    }
    out.report["runs"] = reports;
    return out;
}

RunResult dispatch(const std::string& kind, Reader& cfg, const RunContext& ctx) {
    using Fn = RunResult (*)(Reader&, const RunContext&);
    static const std::vector<std::pair<std::string, Fn>> table = {
        {"periodic_solve", periodic_solve}, {"convergence", convergence},
        {"kernel", kernel},                 {"gain_of_derivatives", gain},
        {"bt_crosscheck", crosscheck},      {"decay_scan", decay_scan},
        {"resolvent_scan", resolvent},      {"interpolation", interpolation},
        {"resonance", resonance},           {"picard", picard},
        {"boundary", boundary},             {"invariants", invariants},
        {"suite", suite},
    };
    for (const auto& [name, fn] : table) {
        if (name == kind) return fn(cfg, ctx);
    }
    config_error(cfg.path() + ".experiment", "unknown experiment '" + kind + "'");
}

}  // namespace

RunResult run_experiment(const Json& config, const RunContext& ctx) {
    Reader cfg(config, "config");
    const std::string kind = cfg.str("experiment");
    for (const char* meta : {"name", "description", "seed", "threads", "output_dir"}) {
        if (cfg.has(meta)) cfg.raw(meta);
    }
    if (cfg.has("seed") && !(config["seed"].is_number_integer() && config["seed"].get<long long>() >= 0))
        config_error("config.seed", "expected a nonnegative integer");
    if (cfg.has("threads") && !(config["threads"].is_number_integer() && config["threads"].get<int>() >= 1))
        config_error("config.threads", "expected a positive integer");
    RunResult r = dispatch(kind, cfg, ctx);
    cfg.done();
    Json report;
    report["experiment"] = kind;
    if (config.contains("name")) report["name"] = config["name"];
    for (auto& item : r.report.items()) report[item.key()] = item.value();
    r.report = std::move(report);
    return r;
}

}  // namespace semiper::cli
