#include "semiper/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace semiper {

namespace {

constexpr const char* kModule = "models";

RMat dirichlet_laplacian(int n, double h) {
    RMat D = RMat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        D(i, i) = -2.0 / (h * h);
        if (i > 0) D(i, i - 1) = 1.0 / (h * h);
        if (i + 1 < n) D(i, i + 1) = 1.0 / (h * h);
    }
    return D;
}

RMat periodic_laplacian(int n, double h) {
    RMat D = RMat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        D(i, i) = -2.0 / (h * h);
        D(i, (i + 1) % n) += 1.0 / (h * h);
        D(i, (i + n - 1) % n) += 1.0 / (h * h);
    }
    return D;
}

RMat wave_generator(const RMat& D, const RVec& a) {
    const Index n = D.rows();
    RMat A = RMat::Zero(2 * n, 2 * n);
    A.topRightCorner(n, n) = RMat::Identity(n, n);
    A.bottomLeftCorner(n, n) = D;
    A.bottomRightCorner(n, n) = -RMat(a.asDiagonal());
    return A;
}

void check_grid(int n, const char* what) {
    if (n < 3) {
        std::ostringstream msg;
        msg << what << " needs at least 3 nodes, got " << n;
        detail::raise(kModule, "InvalidGrid", msg.str());
    }
}

}  // namespace

// ------------------------------------------------------------ DampingProfile

DampingProfile DampingProfile::constant(double amplitude) {
    DampingProfile p;
    p.kind = Kind::Constant;
    p.amplitude = amplitude;
    return p;
}

DampingProfile DampingProfile::bump(double amplitude, double center, double width) {
    DampingProfile p;
    p.kind = Kind::Bump;
    p.amplitude = amplitude;
    p.center = center;
    p.width = width;
    return p;
}

DampingProfile DampingProfile::power_cutoff(double amplitude, double center, double cutoff, double exponent) {
    DampingProfile p;
    p.kind = Kind::PowerCutoff;
    p.amplitude = amplitude;
    p.center = center;
    p.cutoff = cutoff;
    p.exponent = exponent;
    return p;
}

DampingProfile DampingProfile::cap(double amplitude, double s0, double width) {
    DampingProfile p;
    p.kind = Kind::AxisymmetricCap;
    p.amplitude = amplitude;
    p.cutoff = s0;
    p.width = width;
    return p;
}

double DampingProfile::operator()(double x) const {
    switch (kind) {
        case Kind::Constant:
            return amplitude;
        case Kind::Bump: {
            const double r = (x - center) / width;
            if (std::abs(r) >= 1.0) return 0.0;
            return amplitude * std::exp(1.0 - 1.0 / (1.0 - r * r));
        }
        case Kind::PowerCutoff: {
            const double d = std::abs(x - center) - cutoff;
            return d > 0.0 ? amplitude * std::pow(d, exponent) : 0.0;
        }
        case Kind::AxisymmetricCap: {
            const double d = std::abs(x) - cutoff;
            return d > 0.0 ? amplitude * std::exp(-width / d) : 0.0;
        }
    }
    return 0.0;
}

std::vector<double> DampingProfile::breakpoints() const {
    switch (kind) {
        case Kind::Constant:
            return {};
        case Kind::Bump:
            return {center - width, center + width};
        case Kind::PowerCutoff:
            return cutoff > 0.0 ? std::vector<double>{center - cutoff, center + cutoff} : std::vector<double>{center};
        case Kind::AxisymmetricCap:
            return {-cutoff, cutoff};
    }
    return {};
}

void DampingProfile::validate() const {
    std::ostringstream msg;
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) msg << "amplitude must be finite and >= 0";
    else if (kind == Kind::Bump && !(width > 0.0)) msg << "bump width must be > 0";
    else if (kind == Kind::PowerCutoff && (!(cutoff >= 0.0) || !(exponent >= 0.0))) msg << "power_cutoff needs cutoff >= 0 and exponent >= 0";
    else if (kind == Kind::AxisymmetricCap && (!(cutoff >= 0.0 && cutoff < 1.0) || !(width > 0.0))) msg << "cap needs 0 <= s0 < 1 and width > 0";
    if (!msg.str().empty()) detail::raise(kModule, "InvalidDamping", msg.str());
}

std::string to_string(DampingProfile::Kind kind) {
    switch (kind) {
        case DampingProfile::Kind::Constant: return "constant";
        case DampingProfile::Kind::Bump: return "bump";
        case DampingProfile::Kind::PowerCutoff: return "power_cutoff";
        case DampingProfile::Kind::AxisymmetricCap: return "axisymmetric_cap";
    }
    return "constant";
}

DampingProfile::Kind damping_kind_from_string(const std::string& name) {
    if (name == "constant") return DampingProfile::Kind::Constant;
    if (name == "bump") return DampingProfile::Kind::Bump;
    if (name == "power_cutoff") return DampingProfile::Kind::PowerCutoff;
    if (name == "axisymmetric_cap") return DampingProfile::Kind::AxisymmetricCap;
    detail::raise(kModule, "InvalidDamping", "unknown damping kind '" + name + "'");
}

// ------------------------------------------------------------------ builders

ModelPtr build_damped_wave_interval(int n, double length, const DampingProfile& a) {
    check_grid(n, "interval wave");
    if (!(length > 0.0)) detail::raise(kModule, "InvalidGrid", "length must be > 0");
    a.validate();
    const double h = length / (n + 1);
    WaveLayout layout{n, 0, n, h, {}};
    RVec coeff(n);
    for (int i = 0; i < n; ++i) {
        layout.nodes.push_back((i + 1) * h);
        coeff(i) = a(layout.nodes.back());
    }
    const RMat D = dirichlet_laplacian(n, h);
    RMat G = RMat::Zero(2 * n, 2 * n);
    G.topLeftCorner(n, n) = -h * D;
    G.bottomRightCorner(n, n) = h * RMat::Identity(n, n);

    ModelOptions opts;
    opts.layout = layout;
    opts.label = "damped_wave_interval";
    return Model::create(make_state_space(2 * n, G.cast<cplx>(), FieldTag::Real),
                         wave_generator(D, coeff).cast<cplx>(), std::move(opts));
}

ModelPtr build_damped_wave_circle(int n, const DampingProfile& a, double length) {
    check_grid(n, "circle wave");
    if (!(length > 0.0)) detail::raise(kModule, "InvalidGrid", "length must be > 0");
    a.validate();
    const double h = length / n;
    WaveLayout layout{n, 0, n, h, {}};
    RVec coeff(n);
    for (int i = 0; i < n; ++i) {
        layout.nodes.push_back(i * h);
        coeff(i) = a(layout.nodes.back());
    }
    const double total = coeff.sum();
    if (!(total > 0.0)) detail::raise(kModule, "ZeroDamping", "integral of a vanishes on the grid");

    // Pi0 (u0, u1) = sum(a u0 + u1) / sum(a) * (1, 0)
    RVec ell(2 * n), e0 = RVec::Zero(2 * n);
    ell << coeff / total, RVec::Constant(n, 1.0 / total);
    e0.head(n).setOnes();
    const RMat pi0 = e0 * ell.transpose();

    const RMat D = periodic_laplacian(n, h);
    RMat G = RMat::Zero(2 * n, 2 * n);
    G.topLeftCorner(n, n) = -h * D;
    G.bottomRightCorner(n, n) = h * RMat::Identity(n, n);
    G += length * ell * ell.transpose();

    ModelOptions opts;
    opts.kernel_basis = {e0.cast<cplx>()};
    opts.pi0 = pi0.cast<cplx>();
    opts.layout = layout;
    opts.label = "damped_wave_circle";
    return Model::create(make_state_space(2 * n, G.cast<cplx>(), FieldTag::Real),
                         wave_generator(D, coeff).cast<cplx>(), std::move(opts));
}

namespace {

// Values of normalized_legendre(l, m, x) for l = m..jmax.
void legendre_column(int m, int jmax, double x, RVec& out) {
    const double s = std::sqrt(std::max(0.0, 1.0 - x * x));
    double pmm = std::sqrt(0.5);
    for (int k = 1; k <= m; ++k) pmm *= std::sqrt((2.0 * k + 1.0) / (2.0 * k)) * s;
    out(0) = pmm;
    if (jmax == m) return;
    out(1) = std::sqrt(2.0 * m + 3.0) * x * pmm;
    for (int k = m + 2; k <= jmax; ++k) {
        const double kk = static_cast<double>(k);
        const double a = std::sqrt((4.0 * kk * kk - 1.0) / (kk * kk - m * m));
        const double b = std::sqrt(((kk - 1.0) * (kk - 1.0) - m * m) / (4.0 * (kk - 1.0) * (kk - 1.0) - 1.0));
        out(k - m) = a * (x * out(k - m - 1) - b * out(k - m - 2));
    }
}

}  // namespace

double normalized_legendre(int l, int m, double x) {
    if (m < 0 || l < m) return 0.0;
    RVec col(l - m + 1);
    legendre_column(m, l, x, col);
    return col(l - m);
}

namespace {

RMat sphere_damping_matrix(int jmax, int m, const DampingProfile& a, int nodes) {
    const int size = jmax - m + 1;
    std::vector<double> cuts{-1.0};
    for (double b : a.breakpoints()) {
        if (b > -1.0 && b < 1.0) cuts.push_back(b);
    }
    cuts.push_back(1.0);
    std::sort(cuts.begin(), cuts.end());
    const GaussRule& rule = gauss_legendre(nodes);
    RMat M = RMat::Zero(size, size);
    RVec p(size);
    for (std::size_t piece = 0; piece + 1 < cuts.size(); ++piece) {
        const double lo = cuts[piece], hi = cuts[piece + 1];
        if (hi - lo <= 0.0) continue;
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (int q = 0; q < nodes; ++q) {
            const double x = mid + half * rule.nodes[q];
            const double w = half * rule.weights[q] * a(x);
            if (w == 0.0) continue;
            legendre_column(m, jmax, x, p);
            M.noalias() += w * p * p.transpose();
        }
    }
    return 0.5 * (M + M.transpose());
}

}  // namespace

SphereBlockModel build_sphere_schrodinger(int jmax, int m, const DampingProfile& a, int nodes) {
    if (m < 0 || m > jmax) {
        std::ostringstream msg;
        msg << "need 0 <= m <= jmax, got m=" << m << " jmax=" << jmax;
        detail::raise(kModule, "InvalidGrid", msg.str());
    }
    a.validate();
    SphereBlockModel block;
    block.m = m;
    block.jmax = jmax;
    block.profile = a;
    block.quadrature_nodes = std::max(nodes, 2 * jmax + 16);
    const int size = jmax - m + 1;

    block.damping = sphere_damping_matrix(jmax, m, a, block.quadrature_nodes).cast<cplx>();
    const RMat refined = sphere_damping_matrix(jmax, m, a, (3 * block.quadrature_nodes + 1) / 2);
    const double change = (refined.cast<cplx>() - block.damping).cwiseAbs().maxCoeff();
    if (change > 1e-10) {
        std::ostringstream msg;
        msg << "50% more nodes changes M_a by " << change;
        detail::raise(kModule, "QuadratureUnderResolved", msg.str());
    }

    Mat A = -block.damping;
    for (int l = m; l <= jmax; ++l) {
        block.lambda.push_back(static_cast<double>(l) * (l + 1));
        A(l - m, l - m) += cplx(0.0, block.lambda.back());
    }
    ModelOptions opts;
    opts.label = "sphere_schrodinger";
    block.model = Model::create(make_state_space(size, Mat::Identity(size, size)), A, std::move(opts));
    return block;
}

Vec equatorial_harmonic(const SphereBlockModel& block) {
    Vec phi = Vec::Zero(block.jmax - block.m + 1);
    phi(0) = 1.0;
    return phi;
}

ModelPtr build_heat_wave_1d(int nH, int nW) {
    check_grid(nH, "heat part");
    check_grid(nW, "wave part");
    const double hH = 1.0 / nH, hW = 1.0 / nW;
    const int nu = nH, nw = nW, nv = nW - 1;
    const int dim = nu + nw + nv;
    auto iu = [](int i) { return i; };
    auto iw = [&](int j) { return nu + j; };
    auto iv = [&](int j) { return nu + nw + j - 1; };

    RMat A = RMat::Zero(dim, dim);
    RMat G = RMat::Zero(dim, dim);
    for (int i = 0; i < nH; ++i) {
        const bool interface = (i == nH - 1);
        const double mass = interface ? 0.5 * (hH + hW) : hH;
        if (i > 0) A(iu(i), iu(i - 1)) += 1.0 / (hH * mass);
        if (!interface) {
            A(iu(i), iu(i)) -= 2.0 / (hH * mass);
            A(iu(i), iu(i + 1)) += 1.0 / (hH * mass);
        } else {
            // heat flux in from the left, wave flux w_x(0+) from the right
            A(iu(i), iu(i)) -= 1.0 / (hH * mass);
            A(iu(i), iw(0)) -= 1.0 / (hW * mass);
            A(iu(i), iw(1)) += 1.0 / (hW * mass);
        }
        G(iu(i), iu(i)) = 0.5 * mass;
    }
    A(iw(0), iu(nH - 1)) = 1.0;
    for (int j = 1; j < nW; ++j) {
        A(iw(j), iv(j)) = 1.0;
        A(iv(j), iw(j - 1)) += 1.0 / (hW * hW);
        A(iv(j), iw(j)) -= 2.0 / (hW * hW);
        if (j + 1 < nW) A(iv(j), iw(j + 1)) += 1.0 / (hW * hW);
        G(iv(j), iv(j)) = 0.5 * hW;
    }
    // 1/2 |w_x|^2 over elements [x_j, x_{j+1}], w(1) = 0
    for (int j = 0; j < nW; ++j) {
        G(iw(j), iw(j)) += 0.5 / hW;
        if (j + 1 < nW) {
            G(iw(j + 1), iw(j + 1)) += 0.5 / hW;
            G(iw(j), iw(j + 1)) -= 0.5 / hW;
            G(iw(j + 1), iw(j)) -= 0.5 / hW;
        }
    }
    ModelOptions opts;
    opts.label = "heat_wave_1d";
    return Model::create(make_state_space(dim, G.cast<cplx>(), FieldTag::Real), A.cast<cplx>(), std::move(opts));
}

ModelPtr build_boundary_forced_wave(int n, double length, const DampingProfile& a, double eta) {
    check_grid(n, "boundary-forced wave");
    const double h = length / (n + 1);
    bool strong = false;
    for (int i = 1; i <= n; ++i) strong = strong || a(i * h) >= eta;
    if (!(eta > 0.0) || !strong) {
        std::ostringstream msg;
        msg << "damping never reaches eta = " << eta << " on the grid";
        detail::raise(kModule, "InvalidDamping", msg.str());
    }
    auto base = build_damped_wave_interval(n, length, a);
    Mat B = Mat::Zero(2 * n, 1);
    B(n, 0) = 1.0 / (h * h);
    ModelOptions opts;
    opts.control = B;
    opts.layout = base->layout();
    opts.label = "boundary_forced_wave";
    return Model::create(base->space(), base->generator(), std::move(opts));
}

}  // namespace semiper
