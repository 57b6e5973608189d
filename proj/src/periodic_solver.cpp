#include "semiper/periodic_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace semiper {

namespace {

constexpr const char* kModule = "periodic_solver";
constexpr double kPi = std::numbers::pi;

[[noreturn]] void fail(const char* name, const std::string& detail) {
    detail::raise(kModule, name, detail);
}

void check_dims(const Model& model, const PeriodicForcing& f) {
    if (f.dim() != model.dim()) {
        std::ostringstream msg;
        msg << "forcing has length " << f.dim() << ", model has dim " << model.dim();
        fail("DimensionMismatch", msg.str());
    }
}

double forcing_l1(const Model& model, const PeriodicForcing& f) {
    return l1_norm(f, [&](const Vec& v) { return model.space().norm(v); });
}

/// Removes the Pi0 component of F_T, refusing when it is not negligible.
Vec deflate_checked(const Model& model, const Vec& FT, double tol) {
    if (!model.has_kernel()) return FT;
    const Vec k = model.pi0() * FT;
    const double kn = model.space().norm(k);
    const double scale = model.space().norm(FT);
    if (kn > tol * std::max(scale, 1e-300)) {
        std::ostringstream msg;
        msg << "||Pi0 F_T|| = " << kn << " (relative " << kn / std::max(scale, 1e-300)
            << "); the kernel component grows linearly";
        fail("KernelObstruction", msg.str());
    }
    return FT - k;
}

/// Singular values of the whitened deflated I - M, smallest first, kernel zeros dropped.
double deflated_smallest_singular(const Model& model, const Mat& M) {
    const Index n = model.dim();
    Mat D = (Mat::Identity(n, n) - M) * model.deflation();
    const Mat W = model.space().to_orthonormal_frame(D);
    Eigen::BDCSVD<Mat> svd(W);
    const auto& s = svd.singularValues();
    const Index skip = static_cast<Index>(model.kernel_basis().size());
    return s(n - 1 - skip);
}

void finish(const Model& model, const PeriodicForcing& f, PeriodicSolveReport& r, const SolveOptions& opts) {
    r.forcing_norm = forcing_l1(model, f);
    r.norm_ratio = r.forcing_norm > 0.0 ? model.space().norm(r.w0) / r.forcing_norm : 0.0;
    if (opts.verify_periods > 0) r.residual_per_period = verify_orbit(model, f, r.w0, opts.verify_periods, opts.quad).residuals;
}

}  // namespace

std::string to_string(PeriodicSolveReport::Method method) {
    switch (method) {
        case PeriodicSolveReport::Method::Series: return "series";
        case PeriodicSolveReport::Method::Direct: return "direct";
        case PeriodicSolveReport::Method::HarmonicBalance: return "harmonic_balance";
    }
    return "direct";
}

double monodromy_radius(const Model& model, double T) {
    if (model.diagonalizable()) {
        double r = 0.0;
        const Vec ev = model.deflated_eigenvalues();
        for (Index k = 0; k < ev.size(); ++k) r = std::max(r, std::exp(ev(k).real() * T));
        return r;
    }
    const Mat M = model.propagator(T) * model.deflation();
    Eigen::ComplexEigenSolver<Mat> es(M, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

PeriodicSolveReport periodic_w0_series(const Model& model, const PeriodicForcing& f, const SolveOptions& opts) {
    check_dims(model, f);
    PeriodicSolveReport r;
    r.method = PeriodicSolveReport::Method::Series;
    const double T = f.period();
    const Vec FT_full = duhamel_FT(model, f, opts.quad);
    if (model.has_kernel()) r.kernel_offset = model.space().norm(Vec(model.pi0() * FT_full));
    const Vec FT = deflate_checked(model, FT_full, std::max(opts.tol, 1e-10));
    const Mat M = model.propagator(T);
    const double base = model.space().norm(FT);
    Vec term = FT;
    Vec sum = Vec::Zero(model.dim());
    int n = 0;
    double tn = base;
    while (tn > opts.tol * base) {
        if (n >= opts.n_max) {
            std::ostringstream msg;
            msg << "series did not reach tolerance after " << n << " terms; deflated spectral radius of e^{AT} is "
                << monodromy_radius(model, T);
            fail("SlowConvergence", msg.str());
        }
        sum += term;
        term = M * term;
        ++n;
        tn = model.space().norm(term);
    }
    r.series_terms = n;
    const double rho = monodromy_radius(model, T);
    r.tail_estimate = rho < 1.0 ? tn / (1.0 - rho) : tn;
    r.w0 = sum;
    r.condition = deflated_smallest_singular(model, M);
    finish(model, f, r, opts);
    return r;
}

PeriodicSolveReport periodic_w0_direct(const Model& model, const PeriodicForcing& f, const SolveOptions& opts) {
    check_dims(model, f);
    PeriodicSolveReport r;
    r.method = PeriodicSolveReport::Method::Direct;
    const Vec FT_full = duhamel_FT(model, f, opts.quad);
    if (model.has_kernel()) r.kernel_offset = model.space().norm(Vec(model.pi0() * FT_full));
    const Vec FT = deflate_checked(model, FT_full, std::max(opts.tol, 1e-10));
    const Mat M = model.propagator(f.period());
    r.condition = deflated_smallest_singular(model, M);
    if (r.condition < 1e-12) {
        std::ostringstream msg;
        msg << "I - e^{AT} is singular on range(I - Pi0): smallest singular value " << r.condition;
        fail("SingularMonodromy", msg.str());
    }
    // I - M + Pi0 is invertible and maps range(I - Pi0) to itself
    const Index n = model.dim();
    const Mat S = Mat::Identity(n, n) - M + model.pi0();
    r.w0 = S.partialPivLu().solve(FT);
    finish(model, f, r, opts);
    return r;
}

namespace {

/// (i w - A)^{-1}(I - Pi0) x by a dense solve against i w - A + Pi0.
Vec deflated_resolvent_apply(const Model& model, double w, const Vec& x) {
    const Index n = model.dim();
    const Vec ev = model.deflated_eigenvalues();
    double dist = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < ev.size(); ++k) dist = std::min(dist, std::abs(cplx(0.0, w) - ev(k)));
    if (dist < 1e-12 * std::max(1.0, std::abs(w))) {
        std::ostringstream msg;
        msg << "i*" << w << " lies on the spectrum (distance " << dist << ")";
        fail("ResonantHarmonic", msg.str());
    }
    Mat S = cplx(0.0, w) * Mat::Identity(n, n) - model.generator();
    if (model.has_kernel()) S += model.pi0();
    const Vec rhs = model.has_kernel() ? Vec(x - model.pi0() * x) : x;
    return S.partialPivLu().solve(rhs);
}

void require_fourier(const PeriodicForcing& f) {
    if (f.representation() != PeriodicForcing::Representation::Fourier)
        fail("InvalidForcing", "harmonic balance needs a trigonometric polynomial forcing");
}

}  // namespace

PeriodicSolveReport periodic_w0_harmonic_balance(const Model& model, const PeriodicForcing& f, const SolveOptions& opts) {
    check_dims(model, f);
    require_fourier(f);
    PeriodicSolveReport r;
    r.method = PeriodicSolveReport::Method::HarmonicBalance;
    r.w0 = Vec::Zero(model.dim());
    for (const auto& term : f.fourier_terms()) {
        const double w = 2.0 * kPi * term.k / f.period();
        if (model.has_kernel() && term.k == 0) {
            const Vec k0 = model.pi0() * term.coeff;
            const double kn = model.space().norm(k0);
            if (kn > std::max(opts.tol, 1e-10) * std::max(model.space().norm(term.coeff), 1e-300)) {
                std::ostringstream msg;
                msg << "mean forcing has kernel component " << kn;
                fail("KernelObstruction", msg.str());
            }
        } else if (model.has_kernel()) {
            r.kernel_offset += model.space().norm(Vec(model.pi0() * term.coeff)) / std::abs(w);
        }
        r.w0 += deflated_resolvent_apply(model, w, term.coeff);
        r.amplification.emplace_back(term.k, resolvent_norm(model, w));
    }
    r.condition = deflated_smallest_singular(model, model.propagator(f.period()));
    finish(model, f, r, opts);
    return r;
}

Vec harmonic_balance_state(const Model& model, const PeriodicForcing& f, double t) {
    check_dims(model, f);
    require_fourier(f);
    Vec u = Vec::Zero(model.dim());
    for (const auto& term : f.fourier_terms()) {
        const double w = 2.0 * kPi * term.k / f.period();
        u += std::exp(cplx(0.0, w * t)) * deflated_resolvent_apply(model, w, term.coeff);
    }
    return u;
}

OrbitCheck verify_orbit(const Model& model, const PeriodicForcing& f, const Vec& w0, int n_periods,
                        const QuadratureOptions& quad) {
    check_dims(model, f);
    const double T = f.period();
    QuadratureOptions q = quad;
    q.method = QuadratureOptions::Method::Quadrature;
    const Vec FT = duhamel_FT(model, f, quad);
    const Mat M = model.propagator(T);
    OrbitCheck out;
    Vec u = w0;
    Vec closed = w0;
    for (int n = 0; n < n_periods; ++n) {
        u = M * u + duhamel(model, f, n * T, (n + 1) * T, q).value;
        closed = M * closed + FT;
        out.residuals.push_back(model.space().norm(u - w0));
        out.closed_form_discrepancy = std::max(out.closed_form_discrepancy, model.space().norm(u - closed));
    }
    return out;
}

std::vector<double> convergence_gap(const Model& model, const PeriodicForcing& f, const Vec& w0, const Vec& v0,
                                    int n_periods) {
    check_dims(model, f);
    if (v0.size() != model.dim() || w0.size() != model.dim()) fail("DimensionMismatch", "initial data has wrong length");
    const Vec FT = duhamel_FT(model, f);
    const Mat M = model.propagator(f.period());
    std::vector<double> gaps;
    Vec u = v0;
    gaps.push_back(model.space().norm(u - w0));
    for (int n = 0; n < n_periods; ++n) {
        u = M * u + FT;
        gaps.push_back(model.space().norm(u - w0));
    }
    return gaps;
}

BoundaryPeriodicReport boundary_periodic_solve(const Model& model, const PeriodicForcing& g, const SolveOptions& opts) {
    if (!model.control()) fail("MissingControl", "model has no input operator");
    if (g.dim() != 1) fail("InvalidForcing", "boundary data must be scalar");
    BoundaryPeriodicReport out;
    const PeriodicForcing lifted = g.with_input_operator(*model.control());
    out.solve = periodic_w0_direct(model, lifted, opts);
    out.g_l2 = std::sqrt(l1_norm(g, [](const Vec& v) { return v.squaredNorm(); }));
    out.admissibility = admissibility_constant(model, g.period());
    out.measured_C = out.g_l2 > 0.0 ? model.space().norm(out.solve.w0) / out.g_l2 : 0.0;
    return out;
}

// ----------------------------------------------------------------- nonlinear

cplx Nonlinearity::operator()(cplx u) const {
    cplx r = 0.0;
    for (std::size_t p = coeffs.size(); p-- > 0;) r = r * u + coeffs[p];
    return r;
}

void Nonlinearity::validate() const {
    if (coeffs.size() >= 1 && coeffs[0] != 0.0) fail("InvalidNonlinearity", "g(0) must vanish");
    if (coeffs.size() >= 2 && coeffs[1] != 0.0) fail("InvalidNonlinearity", "g'(0) must vanish");
    for (double c : coeffs)
        if (!std::isfinite(c)) fail("InvalidNonlinearity", "non-finite coefficient");
}

Vec Nonlinearity::apply(const Model& model, const Vec& x) const {
    Vec out = Vec::Zero(x.size());
    if (model.layout()) {
        const WaveLayout& lay = *model.layout();
        for (Index i = 0; i < lay.n; ++i) out(lay.velocity + i) = (*this)(x(lay.position + i));
    } else {
        for (Index i = 0; i < x.size(); ++i) out(i) = (*this)(x(i));
    }
    return out;
}

Vec nonlinear_period_map(const Model& model, const PeriodicForcing& f, const Nonlinearity& g, const Vec& u0, int steps) {
    check_dims(model, f);
    const double T = f.period();
    const double h = T / steps;
    const Mat E = model.propagator(h);
    const Mat Eh = model.propagator(0.5 * h);
    auto F = [&](double t, const Vec& u) -> Vec { return f.eval(t) + g.apply(model, u); };
    Vec u = u0;
    for (int s = 0; s < steps; ++s) {
        const double t = s * h;
        const Vec k1 = F(t, u);
        const Vec Eu = Eh * u;
        const Vec k2 = F(t + 0.5 * h, Vec(Eh * (u + 0.5 * h * k1)));
        const Vec k3 = F(t + 0.5 * h, Vec(Eu + 0.5 * h * k2));
        const Vec k4 = F(t + h, Vec(E * u + h * (Eh * k3)));
        u = E * u + (h / 6.0) * (E * k1 + 2.0 * (Eh * (k2 + k3)) + k4);
    }
    return u;
}

PicardReport picard_nonlinear(const Model& model, const PeriodicForcing& f, const Nonlinearity& g,
                              const PicardOptions& opts) {
    check_dims(model, f);
    g.validate();
    if (opts.nodes < 4 || opts.nodes % 2 != 0) fail("InvalidOptions", "nodes must be even and >= 4");
    const int N = opts.nodes;
    const double T = f.period();
    const double h = T / N;
    const Index n = model.dim();

    // periodic response to f at the nodes, fixed across iterations
    SolveOptions lin;
    lin.verify_periods = 0;
    const Vec w_lin = periodic_w0_direct(model, f, lin).w0;
    const Mat E = model.propagator(h);
    std::vector<Vec> Uf(N);
    Uf[0] = w_lin;
    for (int i = 0; i + 1 < N; ++i) Uf[i + 1] = E * Uf[i] + duhamel(model, f, i * h, (i + 1) * h).value;

    // deflated resolvents per harmonic k = -N/2..N/2
    const int K = N / 2;
    std::vector<Eigen::PartialPivLU<Mat>> lus;
    for (int k = -K; k <= K; ++k) {
        const double w = 2.0 * kPi * k / T;
        Mat S = cplx(0.0, w) * Mat::Identity(n, n) - model.generator();
        if (model.has_kernel()) S += model.pi0();
        lus.emplace_back(S);
    }

    PicardReport rep;
    std::vector<Vec> u = Uf;
    int bad = 0;
    for (int m = 1; m <= opts.max_iter; ++m) {
        std::vector<Vec> src(N);
        for (int i = 0; i < N; ++i) src[i] = g.apply(model, u[i]);
        // trigonometric interpolation of the source, Nyquist term split evenly
        std::vector<Vec> next = Uf;
        for (int k = -K; k <= K; ++k) {
            Vec c = Vec::Zero(n);
            for (int i = 0; i < N; ++i) c += std::exp(cplx(0.0, -2.0 * kPi * k * i / N)) * src[i];
            c /= static_cast<double>(N);
            if (std::abs(k) == K) c *= 0.5;
            if (model.has_kernel()) {
                const Vec k0 = model.pi0() * c;
                if (k == 0 && model.space().norm(k0) > 1e-12 * std::max(model.space().norm(c), 1e-300))
                    fail("KernelObstruction", "nonlinear source has a kernel component");
                c -= k0;
            }
            if (c.squaredNorm() == 0.0) continue;
            const Vec r = lus[k + K].solve(c);
            for (int i = 0; i < N; ++i) next[i] += std::exp(cplx(0.0, 2.0 * kPi * k * i / N)) * r;
        }
        double gap = 0.0, size = 0.0;
        for (int i = 0; i < N; ++i) {
            gap = std::max(gap, model.space().norm(next[i] - u[i]));
            size = std::max(size, model.space().norm(next[i]));
        }
        u = std::move(next);
        rep.iterations = m;
        rep.gaps.push_back(gap);
        if (rep.gaps.size() >= 2) rep.ratios.push_back(gap / std::max(rep.gaps[rep.gaps.size() - 2], 1e-300));
        if (!std::isfinite(gap)) {
            rep.diverged = true;
            break;
        }
        if (gap <= opts.tol * std::max(size, 1e-300)) {
            rep.converged = true;
            break;
        }
        bad = (!rep.ratios.empty() && rep.ratios.back() >= 1.0) ? bad + 1 : 0;
        if (bad >= 3) {
            rep.diverged = true;
            break;
        }
    }
    rep.w0 = u[0];
    rep.trajectory = u;
    if (rep.converged) {
        const Vec uT = nonlinear_period_map(model, f, g, rep.w0, opts.check_steps);
        rep.periodic_residual = model.space().norm(uT - rep.w0) / std::max(model.space().norm(rep.w0), 1e-300);
    }
    return rep;
}

EpsilonSweep picard_epsilon_sweep(const Model& model, const PeriodicForcing& f, const Nonlinearity& g,
                                  const std::vector<double>& epsilons, const PicardOptions& opts) {
    EpsilonSweep out;
    for (double eps : epsilons) {
        const PeriodicForcing fe = PeriodicForcing::combine(eps, f, 0.0, f);
        const PicardReport r = picard_nonlinear(model, fe, g, opts);
        EpsilonSweepRow row;
        row.epsilon = eps;
        row.converged = r.converged;
        row.iterations = r.iterations;
        for (double q : r.ratios) row.max_ratio = std::max(row.max_ratio, q);
        out.rows.push_back(row);
        if (!r.converged && !out.first_divergent) out.first_divergent = eps;
    }
    return out;
}

}  // namespace semiper
