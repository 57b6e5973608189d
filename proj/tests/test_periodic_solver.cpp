#include "catch_amalgamated.hpp"

#include "semiper/models.hpp"
#include "semiper/periodic_solver.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace semiper;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

ModelPtr scalar_model(cplx lambda, FieldTag field = FieldTag::Real) {
    return Model::create(make_state_space(1, Mat::Identity(1, 1), field), Mat::Constant(1, 1, lambda));
}

std::string error_name(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.name();
    }
    return "";
}

/// sum_k sin(2 pi k t/T) v_k with smooth vectors
PeriodicForcing sine_series(const Model& m, double T, int harmonics) {
    std::vector<FourierTerm> terms;
    for (int k = 1; k <= harmonics; ++k) {
        Vec v(m.dim());
        for (Index i = 0; i < m.dim(); ++i) v(i) = std::cos(0.3 * k * i) / k;
        terms.push_back({k, cplx(0.0, -0.5) * v});
        terms.push_back({-k, cplx(0.0, 0.5) * v});
    }
    return PeriodicForcing::fourier(T, terms);
}

Vec random_vector(Index n, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> d;
    Vec v(n);
    for (Index i = 0; i < n; ++i) v(i) = d(gen);
    return v;
}

}  // namespace

TEST_CASE("scalar oracle for all three methods", "[periodic]") {
    const auto m = scalar_model(-1.0);
    const double T = 2.0 * pi;
    const auto f = PeriodicForcing::fourier(T, {{0, Vec::Ones(1)}});
    const auto s = periodic_w0_series(*m, f);
    CHECK(std::abs(s.w0(0) - 1.0) < 1e-12);
    CHECK(s.series_terms >= 4);
    CHECK(std::abs(periodic_w0_direct(*m, f).w0(0) - 1.0) < 1e-12);
    CHECK(std::abs(periodic_w0_harmonic_balance(*m, f).w0(0) - 1.0) < 1e-12);

    const auto tone = PeriodicForcing::fourier(T, {{1, Vec::Ones(1)}});
    CHECK(std::abs(periodic_w0_harmonic_balance(*m, tone).w0(0) - 1.0 / cplx(1.0, 1.0)) < 1e-14);
    CHECK(std::abs(periodic_w0_direct(*m, tone).w0(0) - 1.0 / cplx(1.0, 1.0)) < 1e-12);

    const auto orbit = verify_orbit(*m, f, s.w0, 20);
    for (double r : orbit.residuals) CHECK(r < 1e-12);
}

TEST_CASE("identity monodromy is singular", "[periodic]") {
    const auto m = scalar_model(cplx(0.0, 1.0), FieldTag::Complex);
    const auto f = PeriodicForcing::fourier(2.0 * pi, {{0, Vec::Ones(1)}});
    CHECK(error_name([&] { periodic_w0_direct(*m, f); }) == "SingularMonodromy");
    const auto tone = PeriodicForcing::fourier(2.0 * pi, {{1, Vec::Ones(1)}});
    CHECK(error_name([&] { periodic_w0_harmonic_balance(*m, tone); }) == "ResonantHarmonic");
}

TEST_CASE("methods agree on the damped interval", "[periodic]") {
    const auto m = build_damped_wave_interval(40, 1.0, DampingProfile::constant(1.0));
    const double T = 1.0;
    const auto f = sine_series(*m, T, 5);
    const auto s = periodic_w0_series(*m, f);
    const auto d = periodic_w0_direct(*m, f);
    const auto h = periodic_w0_harmonic_balance(*m, f);
    const auto& X = m->space();
    const double scale = X.norm(d.w0);
    CHECK(X.norm(s.w0 - d.w0) <= 1e-9 * scale * (1.0 + d.condition));
    CHECK(X.norm(h.w0 - d.w0) <= 1e-9 * scale);
    REQUIRE(d.residual_per_period.size() == 1);
    CHECK(d.residual_per_period[0] <= 1e-8 * d.forcing_norm);
    CHECK(d.condition > 0.0);
    CHECK(h.amplification.size() == 10);

    const auto orbit = verify_orbit(*m, f, d.w0, 3);
    CHECK(orbit.closed_form_discrepancy <= 1e-9 * scale);

    // the harmonic balance trajectory returns to w0 after one period
    CHECK(X.norm(harmonic_balance_state(*m, f, T) - h.w0) < 1e-12 * scale);
}

TEST_CASE("perturbed start decays like the free monodromy", "[periodic]") {
    const auto m = build_damped_wave_interval(30, 1.0, DampingProfile::bump(3.0, 0.4, 0.3));
    const double T = 0.7;
    const auto f = sine_series(*m, T, 2);
    const Vec w0 = periodic_w0_direct(*m, f).w0;
    const Vec e = 1e-3 * random_vector(m->dim(), 7);
    const auto gaps = convergence_gap(*m, f, w0, Vec(w0 + e), 6);
    for (int n = 1; n <= 6; ++n) {
        const double free = m->space().norm(m->propagate(n * T, e));
        CHECK(gaps[n] == Approx(free).epsilon(1e-8));
    }
    // against the perturbed datum the orbit check sees ||e^{nAT} e - e||
    const auto orbit = verify_orbit(*m, f, Vec(w0 + e), 2);
    CHECK(orbit.residuals[1] == Approx(m->space().norm(Vec(m->propagate(2 * T, e) - e))).epsilon(1e-8));
}

TEST_CASE("gap ratios approach the monodromy radius", "[periodic]") {
    const auto m = build_damped_wave_interval(60, 1.0, DampingProfile::constant(8.0));
    const double T = 0.25;
    const auto f = sine_series(*m, T, 3);
    const Vec w0 = periodic_w0_direct(*m, f).w0;
    const double rho = monodromy_radius(*m, T);
    CHECK(rho == Approx(std::exp(T * (-4.0 + std::sqrt(16.0 - pi * pi)))).epsilon(1e-3));
    for (unsigned seed = 1; seed <= 5; ++seed) {
        const auto gaps = convergence_gap(*m, f, w0, random_vector(m->dim(), seed), 50);
        CHECK(std::abs(gaps[50] / gaps[49] / rho - 1.0) < 0.05);
    }
    const auto same = convergence_gap(*m, f, w0, w0, 5);
    for (double g : same) CHECK(g < 1e-12 * m->space().norm(w0));
}

TEST_CASE("kernel models: zero mean solves, nonzero mean is refused", "[periodic]") {
    const auto m = build_damped_wave_circle(24, DampingProfile::bump(2.0, pi, 2.5));
    const double T = 1.3;
    const Index n = 24;
    const auto& lay = *m->layout();
    Vec v = Vec::Zero(m->dim());
    for (Index i = 0; i < n; ++i) v(lay.velocity + i) = std::cos(2.0 * pi * i / n);
    const auto f = PeriodicForcing::separable(T, {{TimeProfile::sin_power(2), v}});
    const auto d = periodic_w0_direct(*m, f);
    const auto s = periodic_w0_series(*m, f);
    CHECK(d.residual_per_period[0] <= 1e-8 * d.forcing_norm);
    CHECK(m->space().norm(s.w0 - d.w0) <= 1e-9 * m->space().norm(d.w0));
    CHECK((m->pi0() * d.w0).norm() < 1e-12);

    Vec c = Vec::Zero(m->dim());
    for (Index i = 0; i < n; ++i) c(lay.velocity + i) = 1.0;
    const auto g = PeriodicForcing::separable(T, {{TimeProfile::sin_power(2), c}});
    CHECK(error_name([&] { periodic_w0_direct(*m, g); }) == "KernelObstruction");
    CHECK(error_name([&] { periodic_w0_series(*m, g); }) == "KernelObstruction");

    // gaps settle on the invariant kernel component
    Vec v0 = random_vector(m->dim(), 3);
    const auto gaps = convergence_gap(*m, f, d.w0, v0, 400);
    const double offset = m->space().norm(Vec(m->pi0() * (v0 - d.w0)));
    CHECK(gaps.back() == Approx(offset).epsilon(1e-6));
}

TEST_CASE("periodic datum is linear in the forcing", "[periodic]") {
    const auto m = build_damped_wave_interval(20, 1.0, DampingProfile::constant(0.5));
    const double T = 1.5;
    const auto f = sine_series(*m, T, 2);
    const auto g = sine_series(*m, T, 4);
    const cplx a(1.5, -0.5), b(0.25, 2.0);
    const Vec lhs = periodic_w0_direct(*m, PeriodicForcing::combine(a, f, b, g)).w0;
    const Vec rhs = a * periodic_w0_direct(*m, f).w0 + b * periodic_w0_direct(*m, g).w0;
    CHECK(m->space().norm(lhs - rhs) <= 1e-9 * m->space().norm(rhs));
}

TEST_CASE("norm ratio is bounded by the summed semigroup", "[periodic]") {
    const auto m = build_damped_wave_interval(20, 1.0, DampingProfile::constant(1.0));
    const double T = 0.8;
    const auto f = sine_series(*m, T, 3);
    const auto d = periodic_w0_direct(*m, f);
    const double sup = semigroup_bound(*m, T);
    double sum = 0.0;
    for (int n = 0; n < 400; ++n) sum += m->semigroup_norm(n * T);
    CHECK(d.norm_ratio <= sum * sup * (1.0 + 1e-9));
}

TEST_CASE("boundary forced periodic solutions", "[periodic]") {
    const auto m = build_boundary_forced_wave(30, 1.0, DampingProfile::constant(1.0), 0.5);
    for (double T : {0.1, 1.0, 10.0}) {
        const auto g = PeriodicForcing::separable(T, {{TimeProfile::sin_power(2), Vec::Ones(1)}});
        const auto r = boundary_periodic_solve(*m, g);
        REQUIRE(r.solve.residual_per_period.size() == 1);
        CHECK(r.solve.residual_per_period[0] <= 1e-8 * m->space().norm(r.solve.w0));
        CHECK(r.measured_C <= r.admissibility * semigroup_bound(*m, T) * 1e3);
        CHECK(r.g_l2 == Approx(std::sqrt(3.0 * T / 8.0)).epsilon(1e-10));
    }
    const auto zero = PeriodicForcing::separable(1.0, {{TimeProfile::constant(), Vec::Zero(1)}});
    CHECK(boundary_periodic_solve(*m, zero).solve.w0.norm() == 0.0);
}

TEST_CASE("Picard iteration", "[periodic]") {
    SECTION("zero nonlinearity is one linear solve") {
        const auto m = build_damped_wave_interval(16, 1.0, DampingProfile::constant(1.0));
        const auto f = sine_series(*m, 1.0, 2);
        const auto r = picard_nonlinear(*m, f, Nonlinearity{{0.0, 0.0}});
        CHECK(r.converged);
        CHECK(r.iterations == 1);
        const Vec lin = periodic_w0_direct(*m, f).w0;
        CHECK(m->space().norm(r.w0 - lin) <= 1e-12 * m->space().norm(lin));
    }
    SECTION("scalar quadratic ODE residual") {
        // u' = -u + eps cos t + u^2
        const double eps = 0.01;
        const auto m = scalar_model(-1.0);
        const auto f = PeriodicForcing::fourier(2.0 * pi, {{1, Vec::Constant(1, 0.5 * eps)}, {-1, Vec::Constant(1, 0.5 * eps)}});
        PicardOptions opts;
        opts.nodes = 32;
        const auto r = picard_nonlinear(*m, f, Nonlinearity{{0.0, 0.0, 1.0}}, opts);
        REQUIRE(r.converged);
        // spectral derivative of the nodal trajectory
        const int N = opts.nodes;
        for (int i = 0; i < N; ++i) {
            cplx du = 0.0;
            for (int k = -N / 2 + 1; k < N / 2; ++k) {
                cplx c = 0.0;
                for (int j = 0; j < N; ++j) c += std::exp(cplx(0.0, -2.0 * pi * k * j / N)) * r.trajectory[j](0);
                c /= static_cast<double>(N);
                du += cplx(0.0, k) * c * std::exp(cplx(0.0, 2.0 * pi * k * i / N));
            }
            const double t = 2.0 * pi * i / N;
            const cplx u = r.trajectory[i](0);
            CHECK(std::abs(du - (-u + eps * std::cos(t) + u * u)) < 1e-6);
        }
        CHECK(r.periodic_residual < 1e-8);
    }
    SECTION("cubic damping on the interval and the epsilon sweep") {
        const auto m = build_damped_wave_interval(24, 1.0, DampingProfile::constant(1.0));
        const auto f = sine_series(*m, 1.0, 2);
        const Nonlinearity g{{0.0, 0.0, 0.0, -1.0}};
        const auto r = picard_nonlinear(*m, PeriodicForcing::combine(1e-3, f, 0.0, f), g);
        CHECK(r.converged);
        CHECK(r.iterations <= 30);
        for (double q : r.ratios) CHECK(q < 0.5);
        CHECK(r.periodic_residual < 1e-6);

        const auto sweep = picard_epsilon_sweep(*m, f, g, {1e-3, 1e-1, 1.0, 10.0, 100.0, 1000.0});
        REQUIRE(sweep.first_divergent.has_value());
        CHECK(sweep.rows.front().converged);
        CHECK(sweep.rows[0].max_ratio <= sweep.rows[1].max_ratio + 1e-12);
    }
    CHECK_THROWS_AS((Nonlinearity{{0.0, 1.0}}.validate()), Error);
}
