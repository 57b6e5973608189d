#pragma once

#include "semiper/operator_core.hpp"

#include <numbers>
#include <string>
#include <vector>

namespace semiper {

/// Nonnegative damping coefficient of one spatial variable.
///
///   constant:          a(x) = amplitude
///   bump:              a(x) = amplitude * exp(1 - 1/(1 - r^2)), r = (x - center)/width, |r| < 1
///   power_cutoff:      a(x) = amplitude * max(0, |x - center| - cutoff)^exponent
///   axisymmetric_cap:  a(x3) = amplitude * exp(-width/(|x3| - cutoff)) for |x3| > cutoff
struct DampingProfile {
    enum class Kind { Constant, Bump, PowerCutoff, AxisymmetricCap };

    Kind kind = Kind::Constant;
    double amplitude = 0.0;
    double center = 0.0;
    double width = 1.0;
    double cutoff = 0.0;
    double exponent = 1.0;

    static DampingProfile constant(double amplitude);
    static DampingProfile bump(double amplitude, double center, double width);
    static DampingProfile power_cutoff(double amplitude, double center, double cutoff, double exponent);
    static DampingProfile cap(double amplitude, double s0, double width);

    double operator()(double x) const;
    /// Points where the profile stops being smooth (support edges).
    std::vector<double> breakpoints() const;
    void validate() const;
};

std::string to_string(DampingProfile::Kind kind);
DampingProfile::Kind damping_kind_from_string(const std::string& name);

/// Damped string on (0, L), Dirichlet ends, n interior nodes.
/// State (u, v); Gram = energy form.
ModelPtr build_damped_wave_interval(int n, double length, const DampingProfile& a);

/// Damped string on the circle of circumference `length`, n nodes.
/// Kernel = constants; Pi0 in closed form. The Gram is the energy seminorm
/// plus length * |<l, x>|^2 with l = (a, 1)/sum(a), which is a norm that
/// makes Pi0 orthogonal and restricts to the seminorm on range(I - Pi0).
ModelPtr build_damped_wave_circle(int n, const DampingProfile& a, double length = 2.0 * std::numbers::pi);

/// Azimuthal block of i u_t - Laplacian u + i a u = 0 on the unit sphere.
struct SphereBlockModel {
    int m = 0;
    int jmax = 0;
    int quadrature_nodes = 0;  ///< Gauss nodes per smooth piece of [-1, 1]
    std::vector<double> lambda;  ///< l(l+1), l = m..jmax
    Mat damping;                 ///< M_a in the orthonormal degree basis
    DampingProfile profile;
    ModelPtr model;              ///< A = i Lambda - M_a, Gram = I

    Index index_of_degree(int l) const { return l - m; }
};

SphereBlockModel build_sphere_schrodinger(int jmax, int m, const DampingProfile& a, int nodes = 0);

/// Coordinates of the L2-normalized restriction of (x1 + i x2)^j (block m = j).
Vec equatorial_harmonic(const SphereBlockModel& block);

/// Orthonormal associated Legendre function: Y_l^m = P(l, m, cos theta) e^{i m phi} / sqrt(2 pi),
/// no Condon-Shortley phase, so P(m, m, x) > 0 on (-1, 1).
double normalized_legendre(int l, int m, double x);

/// Heat on (-1, 0) coupled to a wave on (0, 1) through the interface x = 0.
/// Lumped-mass elements; the interface node carries the heat unknown and the
/// wave displacement w0 with w0' = u(0). State (u_1..u_nH, w_0..w_{nW-1}, v_1..v_{nW-1}).
ModelPtr build_heat_wave_1d(int nH, int nW);

/// Interval damped wave with boundary input at x = 0: B = e_{v_1} / h^2.
/// Requires a(x_i) >= eta at some node.
ModelPtr build_boundary_forced_wave(int n, double length, const DampingProfile& a, double eta);

}  // namespace semiper
