#include "catch_amalgamated.hpp"

#include "semiper/models.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace semiper;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

double energy(const Model& m, const Vec& x) {
    const double n = m.space().norm(x);
    return n * n;
}

// Spectral projector by trapezoid quadrature of the resolvent on |z| = r.
Mat contour_projector(const Mat& A, double r, int points) {
    const Index n = A.rows();
    Mat P = Mat::Zero(n, n);
    for (int k = 0; k < points; ++k) {
        const cplx z = r * std::exp(cplx(0.0, 2.0 * pi * k / points));
        // (1/2 pi i) * R(z) * dz, dz = i z dtheta
        P += (z / static_cast<double>(points)) * (z * Mat::Identity(n, n) - A).inverse();
    }
    return P;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<cplx> lowest_modes(const Model& m, int count) {
    Vec ev = m.eigenvalues();
    std::vector<cplx> v(ev.data(), ev.data() + ev.size());
    std::vector<cplx> upper;
    for (cplx z : v)
        if (z.imag() >= 0.0) upper.push_back(z);
    std::sort(upper.begin(), upper.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
    upper.resize(count);
    return upper;
}

}  // namespace

TEST_CASE("damping profiles", "[models][damping]") {
    auto c = DampingProfile::constant(2.0);
    CHECK(c(0.3) == 2.0);
    auto b = DampingProfile::bump(1.5, 0.5, 0.25);
    CHECK(b(0.5) == Approx(1.5));
    CHECK(b(0.75) == 0.0);
    CHECK(b(0.2) == 0.0);
    auto p = DampingProfile::power_cutoff(1.0, 0.0, 0.0, 2.0);
    CHECK(p(0.5) == Approx(0.25));
    auto cap = DampingProfile::cap(0.1, 0.8, 0.02);
    CHECK(cap(0.8) == 0.0);
    CHECK(cap(-0.5) == 0.0);
    CHECK(cap(0.9) == Approx(0.1 * std::exp(-0.2)));
    CHECK(cap(-0.9) == cap(0.9));
    for (double x = -1.0; x <= 1.0; x += 0.01) {
        CHECK(cap(x) >= 0.0);
        CHECK(b(x) >= 0.0);
    }
    CHECK(damping_kind_from_string(to_string(DampingProfile::Kind::AxisymmetricCap)) ==
          DampingProfile::Kind::AxisymmetricCap);
}

TEST_CASE("interval wave: undamped and constant damping", "[models][interval]") {
    auto undamped = build_damped_wave_interval(20, 1.0, DampingProfile::constant(0.0));
    CHECK_FALSE(spectrum_report(*undamped).assumptions_ok);

    const double c = 0.7;
    auto m = build_damped_wave_interval(30, 1.0, DampingProfile::constant(c));
    auto report = spectrum_report(*m);
    CHECK(report.assumptions_ok);
    for (Index k = 0; k < report.eigenvalues.size(); ++k) {
        CHECK(report.eigenvalues(k).real() >= -c - 1e-10);
        CHECK(report.eigenvalues(k).real() < 0.0);
    }
    std::mt19937 rng(1);
    std::normal_distribution<double> g(0.0, 1.0);
    Vec x(m->dim());
    for (Index i = 0; i < x.size(); ++i) x(i) = g(rng);
    double prev = energy(*m, x);
    for (int step = 1; step <= 200; ++step) {
        const double e = energy(*m, m->propagate(0.05 * step, x));
        CHECK(e <= prev * (1.0 + 1e-12));
        prev = e;
    }
}

TEST_CASE("interval wave: bump damping is strongly stable", "[models][interval]") {
    auto m = build_damped_wave_interval(40, 1.0, DampingProfile::bump(4.0, 0.125, 0.1));
    CHECK(spectrum_report(*m).assumptions_ok);
    const double h50 = m->semigroup_norm(50.0);
    const double h400 = m->semigroup_norm(400.0);
    CHECK(h400 < h50);
    CHECK(h400 < 0.05);
}

TEST_CASE("interval wave: grid refinement is second order", "[models][interval]") {
    for (const auto& profile : {DampingProfile::constant(1.0), DampingProfile::bump(2.0, 0.4, 0.3)}) {
        std::vector<double> logh, logdiff;
        for (int n : {20, 40, 80}) {
            auto coarse = lowest_modes(*build_damped_wave_interval(n, 1.0, profile), 5);
            auto fine = lowest_modes(*build_damped_wave_interval(2 * n + 1, 1.0, profile), 5);
            double diff = 0.0;
            for (int k = 0; k < 5; ++k) diff = std::max(diff, std::abs(coarse[k] - fine[k]));
            logh.push_back(std::log(1.0 / (n + 1)));
            logdiff.push_back(std::log(diff));
        }
        CHECK(slope(logh, logdiff) >= 1.8);
    }
}

TEST_CASE("circle wave: kernel and projector", "[models][circle]") {
    const int n = 24;
    auto m = build_damped_wave_circle(n, DampingProfile::constant(1.0));
    Vec e0 = Vec::Zero(2 * n);
    e0.head(n).setOnes();
    CHECK((m->generator() * e0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((m->pi0() * e0 - e0).norm() < 1e-14);

    std::mt19937 rng(2);
    std::normal_distribution<double> g(0.0, 1.0);
    Vec x(2 * n);
    for (Index i = 0; i < x.size(); ++i) x(i) = g(rng);
    const cplx mean = x.sum() / static_cast<double>(n);  // mean(u0 + u1) with a = 1
    Vec expect = mean * e0;
    CHECK((m->pi0() * x - expect).norm() < 1e-13);

    CHECK((m->pi0() * m->pi0() - m->pi0()).norm() < 1e-12);
    CHECK((m->pi0() * m->generator()).norm() < 1e-10);
    CHECK((m->generator() * m->pi0()).norm() < 1e-10);
    CHECK(spectrum_report(*m).assumptions_ok);
}

TEST_CASE("circle wave: projector matches contour integral", "[models][circle]") {
    const int n = 16;
    auto m = build_damped_wave_circle(n, DampingProfile::bump(3.0, 2.0, 1.0));
    Vec ev = m->deflated_eigenvalues();
    double gap = 1e300;
    for (Index k = 0; k < ev.size(); ++k) gap = std::min(gap, std::abs(ev(k)));
    const Mat contour = contour_projector(m->generator(), 0.5 * gap, 256);
    CHECK((contour - m->pi0()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((kernel_projector(*m) - m->pi0()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("circle wave: zero-mean states stay deflated", "[models][circle]") {
    const int n = 20;
    auto m = build_damped_wave_circle(n, DampingProfile::bump(2.0, 1.0, 0.8));
    std::mt19937 rng(4);
    std::normal_distribution<double> g(0.0, 1.0);
    Vec x(2 * n);
    for (Index i = 0; i < x.size(); ++i) x(i) = g(rng);
    x = m->deflation() * x;
    for (double t : {0.5, 3.0, 17.0}) {
        const Vec y = m->propagate(t, x);
        CHECK(m->space().norm(m->pi0() * y) <= 1e-9 * m->space().norm(x));
    }
    // e^{tA} = e^{tA'}(I - Pi0) + Pi0 and the kernel component is conserved
    Vec z = Vec::Random(2 * n);
    const Vec zt = m->propagate(4.0, z);
    CHECK((m->pi0() * zt - m->pi0() * z).norm() < 1e-10 * z.norm());
    try {
        build_damped_wave_circle(n, DampingProfile::constant(0.0));
        FAIL("expected ZeroDamping");
    } catch (const Error& e) {
        CHECK(e.name() == "ZeroDamping");
    }
}

TEST_CASE("normalized Legendre functions are orthonormal", "[models][sphere]") {
    const auto& rule = gauss_legendre(200);
    for (int m : {0, 3, 10}) {
        for (int l1 = m; l1 <= m + 12; l1 += 3) {
            for (int l2 = m; l2 <= m + 12; l2 += 4) {
                double s = 0.0;
                for (int q = 0; q < 200; ++q)
                    s += rule.weights[q] * normalized_legendre(l1, m, rule.nodes[q]) *
                         normalized_legendre(l2, m, rule.nodes[q]);
                CHECK(std::abs(s - (l1 == l2 ? 1.0 : 0.0)) < 1e-12);
            }
        }
    }
    // Independent check against the libstdc++ spherical harmonics (Condon-Shortley phase removed).
    for (int m : {0, 2, 7}) {
        for (int l = m; l <= m + 20; l += 5) {
            for (double theta : {0.3, 1.1, 2.0}) {
                const double ref = std::pow(-1.0, m) * std::sph_legendre(l, m, theta) * std::sqrt(2.0 * pi);
                CHECK(normalized_legendre(l, m, std::cos(theta)) == Approx(ref).epsilon(1e-10).margin(1e-14));
            }
        }
    }
}

TEST_CASE("sphere block: undamped and constant damping", "[models][sphere]") {
    auto free = build_sphere_schrodinger(20, 3, DampingProfile::constant(0.0));
    for (int l = 3; l <= 20; ++l) {
        CHECK(free.lambda[l - 3] == static_cast<double>(l * (l + 1)));
        CHECK(free.model->generator()(l - 3, l - 3) == cplx(0.0, l * (l + 1.0)));
    }
    const Mat E = free.model->propagator(2.0 * pi);
    CHECK((E - Mat::Identity(18, 18)).cwiseAbs().maxCoeff() < 1e-10);
    const Mat Et = free.model->propagator(0.37);
    for (int l = 3; l <= 20; ++l) CHECK(std::abs(Et(l - 3, l - 3) - std::exp(cplx(0.0, l * (l + 1.0) * 0.37))) < 1e-12);

    auto flat = build_sphere_schrodinger(15, 0, DampingProfile::constant(0.3));
    CHECK((flat.damping - 0.3 * Mat::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("sphere block: M_a matches latitude-longitude quadrature", "[models][sphere]") {
    const auto cap = DampingProfile::cap(0.1, 0.8, 0.02);
    const int m = 4, jmax = 24;
    auto block = build_sphere_schrodinger(jmax, m, cap);
    const Mat& M = block.damping;
    CHECK((M - M.adjoint()).norm() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    CHECK(es.eigenvalues().minCoeff() > -1e-14);

    // theta: composite Gauss on 400 panels; phi: 16-point trapezoid.
    const int panels = 400, order = 8, nphi = 16;
    const auto& rule = gauss_legendre(order);
    const int size = jmax - m + 1;
    Mat brute = Mat::Zero(size, size);
    for (int p = 0; p < panels; ++p) {
        const double a0 = pi * p / panels, a1 = pi * (p + 1) / panels;
        for (int q = 0; q < order; ++q) {
            const double th = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * rule.nodes[q];
            const double w = 0.5 * (a1 - a0) * rule.weights[q] * std::sin(th) * cap(std::cos(th));
            if (w == 0.0) continue;
            Vec y(size);
            for (int k = 0; k < nphi; ++k) {
                const double ph = 2.0 * pi * k / nphi;
                for (int l = m; l <= jmax; ++l)
                    y(l - m) = std::pow(-1.0, m) * std::sph_legendre(l, m, th) * std::exp(cplx(0.0, m * ph));
                brute += (w * 2.0 * pi / nphi) * y.conjugate() * y.transpose();
            }
        }
    }
    CHECK((brute - M).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("equatorial harmonic", "[models][sphere]") {
    auto b0 = build_sphere_schrodinger(10, 0, DampingProfile::constant(0.0));
    Vec phi0 = equatorial_harmonic(b0);
    CHECK(phi0.norm() == Approx(1.0));
    CHECK(phi0(0) == cplx(1.0, 0.0));
    // l = 0 function is the constant 1/sqrt(4 pi)
    CHECK(normalized_legendre(0, 0, 0.3) / std::sqrt(2.0 * pi) == Approx(1.0 / std::sqrt(4.0 * pi)));

    for (int j : {5, 10, 20}) {
        auto b = build_sphere_schrodinger(j + 5, j, DampingProfile::constant(0.0));
        CHECK(equatorial_harmonic(b).norm() == Approx(1.0));
        // |Phi_j|^2 integrated over the cap B(N, r) vs the closed-form estimate
        const double r = 0.6;
        const auto& rule = gauss_legendre(200);
        const double lo = std::cos(r);
        double mass = 0.0;
        for (int q = 0; q < 200; ++q) {
            const double x = 0.5 * (lo + 1.0) + 0.5 * (1.0 - lo) * rule.nodes[q];
            const double p = normalized_legendre(j, j, x);
            mass += 0.5 * (1.0 - lo) * rule.weights[q] * p * p;
        }
        // c_j^2 = 1 / ||(x1 + i x2)^j||^2 = 1 / (2 pi * 2^{2j+1} (j!)^2 / (2j+1)!)
        const double log_norm2 = std::log(2.0 * pi) + (2 * j + 1) * std::log(2.0) + 2.0 * std::lgamma(j + 1.0) -
                                 std::lgamma(2.0 * j + 2.0);
        const double model = pi / (j + 1) * std::pow(std::sin(r), 2 * j + 2) / std::cos(r) * std::exp(-log_norm2);
        const double R = mass / model - 1.0;
        CHECK(std::abs(R) <= std::pow(std::tan(r), 2) / (2.0 * j + 2.0));
    }
}

TEST_CASE("sphere block: equatorial damping is exponentially small in j", "[models][sphere]") {
    const auto cap = DampingProfile::cap(0.1, 0.8, 0.02);
    std::vector<double> js, logs;
    for (int j : {4, 8, 12, 16}) {
        auto b = build_sphere_schrodinger(j + 40, j, cap);
        auto r = spectrum_report(*b.model);
        CHECK(r.distance_to_axis > 0.0);
        js.push_back(j);
        logs.push_back(std::log(r.distance_to_axis));
    }
    for (std::size_t i = 1; i < logs.size(); ++i) CHECK(logs[i] < logs[i - 1]);
    CHECK(slope(js, logs) < -0.5);
}

TEST_CASE("heat-wave: dissipative and stable", "[models][heat_wave]") {
    auto m = build_heat_wave_1d(20, 20);
    CHECK(spectrum_report(*m).assumptions_ok);
    const Mat GA = m->space().gram() * m->generator();
    Eigen::SelfAdjointEigenSolver<Mat> es(GA + GA.adjoint());
    CHECK(es.eigenvalues().maxCoeff() < 1e-10);

    std::mt19937 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    Vec x(m->dim());
    for (Index i = 0; i < x.size(); ++i) x(i) = g(rng);
    const double e0 = energy(*m, x);
    double prev = e0;
    const double dt = 0.02;
    for (int step = 1; step <= 250; ++step) {
        const double e = energy(*m, m->propagate(dt * step, x));
        CHECK(e - prev <= 1e-8 * dt * e0);
        prev = e;
    }
    try {
        build_heat_wave_1d(2, 10);
        FAIL("expected InvalidGrid");
    } catch (const Error& e) {
        CHECK(e.name() == "InvalidGrid");
    }
}

TEST_CASE("boundary-forced wave: lifting operator", "[models][boundary]") {
    const int n = 30;
    auto m = build_boundary_forced_wave(n, 1.0, DampingProfile::bump(3.0, 0.5, 0.2), 0.5);
    REQUIRE(m->control().has_value());
    const Mat& B = *m->control();
    CHECK(B.cols() == 1);
    // steady state A x = -B: discrete harmonic lifting u = 1 - x/L, v = 0
    const Vec x = m->generator().partialPivLu().solve(-B.col(0));
    const auto& layout = *m->layout();
    for (int i = 0; i < n; ++i) {
        CHECK(std::abs(x(i) - (1.0 - layout.nodes[i])) < 1e-12);
        CHECK(std::abs(x(n + i)) < 1e-12);
    }
    try {
        build_boundary_forced_wave(n, 1.0, DampingProfile::bump(3.0, 0.5, 0.2), 5.0);
        FAIL("expected InvalidDamping");
    } catch (const Error& e) {
        CHECK(e.name() == "InvalidDamping");
    }
}
