#include "semiper/resonance_lab.hpp"

#include <cmath>
#include <sstream>

namespace semiper {

namespace {

constexpr const char* kModule = "resonance_lab";

[[noreturn]] void fail(const char* name, const std::string& detail) {
    detail::raise(kModule, name, detail);
}

Vec sobolev_weights(const SphereBlockModel& block, int k) {
    Vec w(block.jmax - block.m + 1);
    for (int l = block.m; l <= block.jmax; ++l) w(l - block.m) = std::pow(1.0 + double(l) * (l + 1), 0.5 * k);
    return w;
}

struct Line {
    double slope = 0.0;
    double r2 = 0.0;
};

Line fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    Line l;
    l.slope = sxy / sxx;
    l.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return l;
}

}  // namespace

ConcentrationScan concentration_scan(const DampingProfile& a, const std::vector<int>& j_list, int extra_degrees) {
    if (j_list.size() < 2) fail("InvalidDegree", "concentration fit needs at least two degrees");
    if (extra_degrees < 1) fail("InvalidDegree", "extra_degrees must be >= 1");
    if (a.kind != DampingProfile::Kind::AxisymmetricCap) fail("InvalidDamping", "concentration scan needs a cap profile");

    ConcentrationScan scan;
    std::vector<double> sq, js, logs;
    for (int j : j_list) {
        if (j < 0) fail("InvalidDegree", "degrees must be >= 0");
        const auto block = build_sphere_schrodinger(j + extra_degrees, j, a);
        const auto fine = build_sphere_schrodinger(j + extra_degrees, j, a, 2 * block.quadrature_nodes);
        ConcentrationRow row;
        row.j = j;
        row.jmax = block.jmax;
        row.norm = block.damping.col(0).norm();
        row.refined_change = std::abs(fine.damping.col(0).norm() - row.norm);
        scan.rows.push_back(row);
        sq.push_back(std::sqrt(double(j) * (j + 1)));
        js.push_back(j);
        logs.push_back(std::log(row.norm));
    }
    const Line by_sqrt = fit_line(sq, logs);
    const Line by_j = fit_line(js, logs);
    scan.c = -by_sqrt.slope;
    scan.slope_j = by_j.slope;
    scan.r2 = by_j.r2;
    scan.d = -0.5 * std::log(1.0 - a.cutoff * a.cutoff);
    scan.relative_gap = std::abs(scan.slope_j + scan.d) / scan.d;
    if (!(by_j.slope < 0.0)) {
        std::ostringstream msg;
        msg << "log ||a Phi_j|| does not decrease in j (slope " << by_j.slope << ")";
        fail("NoConcentration", msg.str());
    }
    return scan;
}

double sobolev_norm(const SphereBlockModel& block, int k, const Vec& x) {
    return sobolev_weights(block, k).cwiseProduct(x).norm();
}

ResonantForcing resonant_forcing(const SphereBlockModel& block, int k, double period, double max_backward_growth) {
    if (k < 0) fail("InvalidOrder", "regularity order must be >= 0");
    if (!(period > 0.0)) fail("InvalidPeriod", "period must be positive");
    const Vec w = sobolev_weights(block, k);
    const Vec winv = w.cwiseInverse();
    const Model& m = *block.model;

    double bound = 1.0;
    const int samples = 64;
    for (int i = 1; i <= samples; ++i) {
        const double tau = period * i / samples;
        const Mat S = w.asDiagonal() * m.propagator(-tau, true) * winv.asDiagonal();
        const double s = Eigen::JacobiSVD<Mat>(S).singularValues()(0);
        if (!(s <= max_backward_growth)) {
            std::ostringstream msg;
            msg << "||e^{-sA}||_{H^" << k << "} = " << s << " at s = " << tau;
            fail("BackwardGrowthExcessive", msg.str());
        }
        bound = std::max(bound, s);
    }

    const double lambda = double(block.m) * (block.m + 1);
    ResonantForcing r;
    r.propagation_bound = bound;
    r.C_j = std::pow(1.0 + lambda, -0.5 * k) / bound;
    r.forcing = PeriodicForcing::pullback(period, block.model, equatorial_harmonic(block), r.C_j);
    r.l1_norm = l1_norm(r.forcing, [&](const Vec& x) { return w.cwiseProduct(x).norm(); });
    return r;
}

std::vector<Vec> period_sequence(const Model& response, const PeriodicForcing& f, int n_max) {
    if (n_max < 1) fail("InvalidOptions", "n_max must be >= 1");
    if (f.dim() != response.dim()) fail("DimensionMismatch", "forcing and model dimensions differ");
    const Mat M = response.propagator(f.period());
    const Vec FT = duhamel_FT(response, f);
    std::vector<Vec> out;
    out.reserve(n_max);
    Vec u = FT;
    out.push_back(u);
    for (int n = 2; n <= n_max; ++n) {
        u = M * u + FT;
        out.push_back(u);
    }
    return out;
}

GrowthExperiment growth_experiment(const SphereBlockModel& block, int k, int n_max, double period,
                                   const SphereBlockModel* response) {
    const SphereBlockModel& target = response ? *response : block;
    if (target.m != block.m || target.jmax != block.jmax) fail("DimensionMismatch", "response block has another shape");

    const auto rf = resonant_forcing(block, k, period);
    const double lambda = double(block.m) * (block.m + 1);
    const Vec phi = equatorial_harmonic(block);

    GrowthExperiment g;
    g.j = block.m;
    g.jmax = block.jmax;
    g.k = k;
    g.period = period;
    g.C_j = rf.C_j;
    g.forcing_norm = rf.l1_norm;
    g.concentration = (target.damping * phi).norm();
    g.c = lambda > 0.0 && g.concentration > 0.0 ? -std::log(g.concentration) / std::sqrt(lambda) : 0.0;
    g.n_j = static_cast<long long>(std::ceil(std::pow(lambda, 0.5 * k + 1.0)));

    const auto seq = period_sequence(*target.model, rf.forcing, n_max);
    g.FT_defect = (seq.front() - rf.C_j * phi).norm() / rf.C_j;
    g.single_period = seq.front().norm();

    const Mat M = target.model->propagator(period);
    Vec x = phi;
    for (int n = 1; n <= n_max; ++n) {
        g.n_grid.push_back(n);
        g.norms.push_back(seq[n - 1].norm());
        g.lower_bound_curve.push_back(rf.C_j * n * (1.0 - n * period * g.concentration));
        x = M * x;
        const cplx free = std::exp(cplx(0.0, lambda * n * period));
        g.error_terms.push_back((x - free * phi).norm());
        g.error_bounds.push_back(1.1 * n * period * g.concentration);
    }
    const Vec& last = seq.back();
    const Index top = std::min<Index>(10, last.size());
    const double total = last.squaredNorm();
    g.leakage = total > 0.0 ? last.tail(top).squaredNorm() / total : 0.0;
    return g;
}

}  // namespace semiper
