#include "cli_internal.hpp"

#include <cmath>
#include <numbers>

namespace semiper::cli {

void config_error(const std::string& path, const std::string& detail) {
    detail::raise("cli", "InvalidConfig", path + ": " + detail);
}

Reader::Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_, "expected an object");
}

bool Reader::has(const std::string& key) const { return j_.contains(key); }

const Json& Reader::get(const std::string& key) {
    if (!j_.contains(key)) config_error(at(key), "missing");
    used_.insert(key);
    return j_.at(key);
}

const Json& Reader::raw(const std::string& key) { return get(key); }

double Reader::num(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_number()) config_error(at(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) config_error(at(key), "must be finite");
    return x;
}

double Reader::num(const std::string& key, double fallback) { return has(key) ? num(key) : fallback; }

double Reader::positive(const std::string& key) {
    const double x = num(key);
    if (!(x > 0.0)) config_error(at(key), "must be positive");
    return x;
}

double Reader::positive(const std::string& key, double fallback) { return has(key) ? positive(key) : fallback; }

int Reader::integer(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_number_integer()) config_error(at(key), "expected an integer");
    return v.get<int>();
}

int Reader::integer(const std::string& key, int fallback) { return has(key) ? integer(key) : fallback; }

std::string Reader::str(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_string()) config_error(at(key), "expected a string");
    return v.get<std::string>();
}

std::string Reader::str(const std::string& key, const std::string& fallback) {
    return has(key) ? str(key) : fallback;
}

bool Reader::flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = get(key);
    if (!v.is_boolean()) config_error(at(key), "expected true or false");
    return v.get<bool>();
}

std::vector<double> Reader::numbers(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_array() || v.empty()) config_error(at(key), "expected a nonempty array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) config_error(at(key), "expected numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

std::vector<int> Reader::integers(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_array() || v.empty()) config_error(at(key), "expected a nonempty array of integers");
    std::vector<int> out;
    for (const auto& x : v) {
        if (!x.is_number_integer()) config_error(at(key), "expected integers");
        out.push_back(x.get<int>());
    }
    return out;
}

std::pair<double, double> Reader::window(const std::string& key) {
    const auto w = numbers(key);
    if (w.size() != 2 || !(w[0] < w[1])) config_error(at(key), "expected [lo, hi] with lo < hi");
    return {w[0], w[1]};
}

std::optional<std::pair<double, double>> Reader::optional_window(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return window(key);
}

std::vector<double> Reader::grid(const std::string& key) {
    const Json& v = get(key);
    if (v.is_array()) return numbers(key);
    Reader g(v, at(key));
    std::vector<double> out;
    auto spec = [&](const char* kind) {
        const auto p = g.numbers(kind);
        if (p.size() != 3 || p[2] < 2 || p[2] != std::floor(p[2]))
            config_error(g.path() + "." + kind, "expected [start, stop, count] with count >= 2");
        return p;
    };
    if (g.has("linear")) {
        const auto p = spec("linear");
        const int n = static_cast<int>(p[2]);
        for (int i = 0; i < n; ++i) out.push_back(p[0] + (p[1] - p[0]) * i / (n - 1));
    } else if (g.has("geometric")) {
        const auto p = spec("geometric");
        if (!(p[0] > 0.0 && p[1] > 0.0)) config_error(g.path(), "geometric grids need positive ends");
        const int n = static_cast<int>(p[2]);
        for (int i = 0; i < n; ++i) out.push_back(p[0] * std::pow(p[1] / p[0], static_cast<double>(i) / (n - 1)));
    } else if (g.has("values")) {
        out = g.numbers("values");
    } else {
        config_error(g.path(), "expected linear, geometric or values");
    }
    g.done();
    return out;
}

Reader Reader::obj(const std::string& key) { return Reader(get(key), at(key)); }

void Reader::done() const {
    for (const auto& item : j_.items()) {
        if (!used_.count(item.key())) config_error(at(item.key()), "unknown key");
    }
}

namespace {

cplx parse_scalar(const Json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    config_error(path, "expected a number or [re, im]");
}

}  // namespace

DampingProfile parse_damping(Reader r) {
    const std::string kind = r.str("kind");
    DampingProfile a;
    if (kind == "constant") {
        a = DampingProfile::constant(r.num("amplitude"));
    } else if (kind == "bump") {
        a = DampingProfile::bump(r.num("amplitude"), r.num("center"), r.positive("width"));
    } else if (kind == "power_cutoff") {
        a = DampingProfile::power_cutoff(r.num("amplitude"), r.num("center"), r.num("cutoff", 0.0),
                                         r.positive("exponent"));
    } else if (kind == "axisymmetric_cap") {
        a = DampingProfile::cap(r.num("amplitude"), r.num("s0"), r.positive("width"));
    } else {
        config_error(r.path() + ".kind", "unknown damping kind '" + kind + "'");
    }
    r.done();
    return a;
}

BuiltModel build_model(Reader r) {
    BuiltModel b;
    b.builder = r.str("builder");
    if (b.builder == "matrix") {
        const Json& rows = r.raw("generator");
        if (!rows.is_array() || rows.empty()) config_error(r.path() + ".generator", "expected a square array");
        const Index n = static_cast<Index>(rows.size());
        Mat A(n, n);
        bool complex = false;
        for (Index i = 0; i < n; ++i) {
            if (!rows[i].is_array() || static_cast<Index>(rows[i].size()) != n)
                config_error(r.path() + ".generator", "expected a square array");
            for (Index k = 0; k < n; ++k) {
                A(i, k) = parse_scalar(rows[i][k], r.path() + ".generator");
                complex = complex || A(i, k).imag() != 0.0;
            }
        }
        Mat G = Mat::Identity(n, n);
        if (r.has("gram")) {
            const Json& g = r.raw("gram");
            if (!g.is_array() || static_cast<Index>(g.size()) != n) config_error(r.path() + ".gram", "shape mismatch");
            for (Index i = 0; i < n; ++i) {
                if (!g[i].is_array() || static_cast<Index>(g[i].size()) != n)
                    config_error(r.path() + ".gram", "shape mismatch");
                for (Index k = 0; k < n; ++k) G(i, k) = parse_scalar(g[i][k], r.path() + ".gram");
            }
        }
        const std::string field = r.str("field", complex ? "complex" : "real");
        if (field != "real" && field != "complex") config_error(r.path() + ".field", "expected real or complex");
        ModelOptions opts;
        opts.label = r.str("label", "matrix");
        b.model = Model::create(make_state_space(n, G, field == "real" ? FieldTag::Real : FieldTag::Complex), A,
                                std::move(opts));
    } else if (b.builder == "damped_wave_interval") {
        b.length = r.positive("length", 1.0);
        b.model = build_damped_wave_interval(r.integer("n"), b.length, parse_damping(r.obj("damping")));
    } else if (b.builder == "damped_wave_circle") {
        b.length = r.positive("length", 2.0 * std::numbers::pi);
        b.model = build_damped_wave_circle(r.integer("n"), parse_damping(r.obj("damping")), b.length);
    } else if (b.builder == "heat_wave_1d") {
        b.model = build_heat_wave_1d(r.integer("n_heat"), r.integer("n_wave"));
    } else if (b.builder == "boundary_forced_wave") {
        b.length = r.positive("length", 1.0);
        const int n = r.integer("n");
        const auto a = parse_damping(r.obj("damping"));
        b.model = build_boundary_forced_wave(n, b.length, a, r.positive("eta"));
    } else if (b.builder == "sphere_schrodinger") {
        const int jmax = r.integer("jmax");
        const int m = r.integer("m");
        const auto a = parse_damping(r.obj("damping"));
        b.sphere = build_sphere_schrodinger(jmax, m, a, r.integer("nodes", 0));
        b.model = b.sphere->model;
    } else if (b.builder == "synthetic_normal") {
        b.model = build_synthetic_normal(r.positive("alpha"), r.integer("modes"), r.flag("real_pairs", false));
    } else {
        config_error(r.path() + ".builder", "unknown builder '" + b.builder + "'");
    }
    r.done();
    return b;
}

Vec build_vector(const BuiltModel& m, Reader r, Index dim) {
    const std::string kind = r.str("kind");
    Vec v = Vec::Zero(dim);
    if (kind == "ones") {
        v.setOnes();
    } else if (kind == "unit") {
        const int i = r.integer("index");
        if (i < 0 || i >= dim) config_error(r.path() + ".index", "out of range");
        v(i) = 1.0;
    } else if (kind == "values") {
        const Json& vals = r.raw("values");
        if (!vals.is_array() || static_cast<Index>(vals.size()) != dim)
            config_error(r.path() + ".values", "expected " + std::to_string(dim) + " entries");
        for (Index i = 0; i < dim; ++i) v(i) = parse_scalar(vals[i], r.path() + ".values");
    } else if (kind == "smooth") {
        for (Index i = 0; i < dim; ++i) v(i) = std::sin(0.7 * i + 0.3) + 0.2;
    } else if (kind == "equatorial") {
        if (!m.sphere) config_error(r.path(), "equatorial vectors need a sphere_schrodinger model");
        v = equatorial_harmonic(*m.sphere);
    } else if (kind == "profile") {
        const auto& lay = m.model->layout();
        if (!lay) config_error(r.path(), "profile vectors need a wave model with a grid layout");
        const std::string component = r.str("component", "velocity");
        if (component != "position" && component != "velocity")
            config_error(r.path() + ".component", "expected position or velocity");
        const Index offset = component == "position" ? lay->position : lay->velocity;
        const std::string shape = r.str("shape");
        const double L = lay->nodes.back() + lay->h;
        if (shape == "sine") {
            const int mode = r.integer("mode", 1);
            for (Index i = 0; i < lay->n; ++i) v(offset + i) = std::sin(mode * std::numbers::pi * lay->nodes[i] / L);
        } else if (shape == "bump") {
            const double c = r.num("center"), w = r.positive("width");
            for (Index i = 0; i < lay->n; ++i) {
                const double s = (lay->nodes[i] - c) / w;
                v(offset + i) = std::abs(s) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
            }
        } else if (shape == "cosine") {
            const int mode = r.integer("mode", 1);
            for (Index i = 0; i < lay->n; ++i)
                v(offset + i) = std::cos(2.0 * mode * std::numbers::pi * lay->nodes[i] / L);
        } else {
            config_error(r.path() + ".shape", "expected sine, cosine or bump");
        }
    } else {
        config_error(r.path() + ".kind", "unknown vector kind '" + kind + "'");
    }
    if (r.has("scale")) v *= parse_scalar(r.raw("scale"), r.path() + ".scale");
    r.done();
    return v;
}

TimeProfile parse_profile(Reader r) {
    const auto kind = time_profile_kind_from_string(r.str("kind"));
    TimeProfile p;
    switch (kind) {
        case TimeProfile::Kind::Constant: p = TimeProfile::constant(); break;
        case TimeProfile::Kind::Bump: p = TimeProfile::bump(r.positive("sharpness", 1.0)); break;
        case TimeProfile::Kind::SinPower: p = TimeProfile::sin_power(r.integer("power")); break;
        case TimeProfile::Kind::Cos: p = TimeProfile::cosine(r.integer("harmonic", 1)); break;
        case TimeProfile::Kind::Sin: p = TimeProfile::sine(r.integer("harmonic", 1)); break;
    }
    r.done();
    return p;
}

PeriodicForcing build_forcing(const BuiltModel& m, Reader r, Index dim) {
    const double T = r.positive("period");
    const std::string rep = r.str("representation");
    const Json& terms = r.raw("terms");
    if (!terms.is_array() || terms.empty()) config_error(r.path() + ".terms", "expected a nonempty array");
    PeriodicForcing f;
    if (rep == "fourier") {
        std::vector<FourierTerm> out;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            Reader t(terms[i], r.path() + ".terms[" + std::to_string(i) + "]");
            FourierTerm ft;
            ft.k = t.integer("k");
            const cplx c = t.has("coeff") ? parse_scalar(t.raw("coeff"), t.path() + ".coeff") : cplx(1.0);
            ft.coeff = c * build_vector(m, t.obj("vector"), dim);
            t.done();
            out.push_back(std::move(ft));
        }
        f = PeriodicForcing::fourier(T, std::move(out));
    } else if (rep == "separable") {
        std::vector<SeparableTerm> out;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            Reader t(terms[i], r.path() + ".terms[" + std::to_string(i) + "]");
            SeparableTerm st;
            st.profile = parse_profile(t.obj("profile"));
            st.vector = build_vector(m, t.obj("vector"), dim);
            t.done();
            out.push_back(std::move(st));
        }
        f = PeriodicForcing::separable(T, std::move(out));
    } else {
        config_error(r.path() + ".representation", "expected fourier or separable");
    }
    r.done();
    return f;
}

Json fit_json(const FitRecord& fit) {
    Json j;
    j["exponent"] = fit.exponent;
    j["constant"] = fit.constant;
    j["window"] = {fit.window_lo, fit.window_hi};
    j["r2"] = fit.r2;
    j["points"] = fit.points;
    return j;
}

Json vec_json(const Vec& v) {
    Json out = Json::array();
    bool complex = false;
    for (Index i = 0; i < v.size(); ++i) complex = complex || v(i).imag() != 0.0;
    for (Index i = 0; i < v.size(); ++i) {
        if (complex)
            out.push_back({v(i).real(), v(i).imag()});
        else
            out.push_back(v(i).real());
    }
    return out;
}

}  // namespace semiper::cli
