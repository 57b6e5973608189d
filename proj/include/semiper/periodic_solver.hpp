#pragma once

#include "semiper/forcing.hpp"

#include <optional>
#include <string>
#include <vector>

namespace semiper {

struct PeriodicSolveReport {
    enum class Method { Series, Direct, HarmonicBalance };

    Vec w0;
    Method method = Method::Direct;
    int series_terms = 0;                      ///< N used (series only)
    std::vector<double> residual_per_period;   ///< ||u(nT) - w0||_X, n = 1..
    double forcing_norm = 0.0;                 ///< ||f||_{L1(0,T;X)}
    double norm_ratio = 0.0;                   ///< ||w0||_X / forcing_norm
    double tail_estimate = 0.0;                ///< series only
    double condition = 0.0;                    ///< smallest singular value of I - e^{AT} on range(I - Pi0)
    double kernel_offset = 0.0;                ///< ||Pi0 x|| of the discarded invariant component
    std::vector<std::pair<int, double>> amplification;  ///< (k, ||R(i w_k)||), harmonic balance only
};

std::string to_string(PeriodicSolveReport::Method method);

struct SolveOptions {
    double tol = 1e-12;
    int n_max = 100000;
    int verify_periods = 1;
    QuadratureOptions quad;
};

/// w0 = sum_n e^{nAT} F_T, truncated when ||e^{NAT} F_T|| <= tol ||F_T||.
PeriodicSolveReport periodic_w0_series(const Model& model, const PeriodicForcing& f, const SolveOptions& opts = {});

/// (I - e^{AT}) w0 = F_T on range(I - Pi0).
PeriodicSolveReport periodic_w0_direct(const Model& model, const PeriodicForcing& f, const SolveOptions& opts = {});

/// w0 = sum_k (i w_k - A)^{-1} f_k for a trigonometric polynomial.
PeriodicSolveReport periodic_w0_harmonic_balance(const Model& model, const PeriodicForcing& f,
                                                 const SolveOptions& opts = {});

/// u(t) = sum_k e^{i w_k t} (i w_k - A)^{-1} f_k on range(I - Pi0).
Vec harmonic_balance_state(const Model& model, const PeriodicForcing& f, double t);

struct OrbitCheck {
    std::vector<double> residuals;     ///< ||u(nT) - w0||_X, n = 1..n_periods
    double closed_form_discrepancy = 0.0;  ///< max_n ||u(nT) - (e^{nAT} w0 + sum_m e^{mAT} F_T)||_X
};

/// Propagates n_periods periods with per-period Duhamel quadrature.
OrbitCheck verify_orbit(const Model& model, const PeriodicForcing& f, const Vec& w0, int n_periods,
                        const QuadratureOptions& quad = {});

/// ||u(nT) - w0||_X for n = 0..n_periods starting from v0.
std::vector<double> convergence_gap(const Model& model, const PeriodicForcing& f, const Vec& w0, const Vec& v0,
                                    int n_periods);

/// Deflated spectral radius of e^{AT}.
double monodromy_radius(const Model& model, double T);

struct BoundaryPeriodicReport {
    PeriodicSolveReport solve;
    double g_l2 = 0.0;           ///< ||g||_{L2(0,T)}
    double admissibility = 0.0;  ///< C_T with ||Phi_T g|| <= C_T ||g||_{L2}
    double measured_C = 0.0;     ///< ||w0||_X / ||g||_{L2}
};

BoundaryPeriodicReport boundary_periodic_solve(const Model& model, const PeriodicForcing& g, const SolveOptions& opts = {});

/// Polynomial nonlinearity g(u) = sum_p c_p u^p with c_0 = c_1 = 0. On wave
/// models it acts on positions and enters the velocity equation; otherwise
/// it acts on the whole state.
struct Nonlinearity {
    std::vector<double> coeffs;
    cplx operator()(cplx u) const;
    Vec apply(const Model& model, const Vec& x) const;
    void validate() const;
};

struct PicardOptions {
    int nodes = 64;      ///< uniform time nodes per period
    int max_iter = 30;
    double tol = 1e-10;  ///< relative sup-in-time gap
    int check_steps = 400;
};

struct PicardReport {
    bool converged = false;
    bool diverged = false;
    int iterations = 0;
    std::vector<double> gaps;    ///< sup_i ||u_{m+1}(t_i) - u_m(t_i)||_X
    std::vector<double> ratios;  ///< gaps[m] / gaps[m - 1]
    Vec w0;
    std::vector<Vec> trajectory;   ///< u(t_i), t_i = iT/nodes
    double periodic_residual = 0.0;  ///< ||u(T) - w0||_X / ||w0||_X under the nonlinear flow
};

PicardReport picard_nonlinear(const Model& model, const PeriodicForcing& f, const Nonlinearity& g,
                              const PicardOptions& opts = {});

/// One period of u' = Au + f + g(u) by the fourth-order Lawson scheme.
Vec nonlinear_period_map(const Model& model, const PeriodicForcing& f, const Nonlinearity& g, const Vec& u0,
                         int steps);

struct EpsilonSweepRow {
    double epsilon = 0.0;
    bool converged = false;
    int iterations = 0;
    double max_ratio = 0.0;
};

struct EpsilonSweep {
    std::vector<EpsilonSweepRow> rows;
    std::optional<double> first_divergent;  ///< smallest epsilon without convergence
};

/// Picard runs for epsilon * f over the list (ascending).
EpsilonSweep picard_epsilon_sweep(const Model& model, const PeriodicForcing& f, const Nonlinearity& g,
                                  const std::vector<double>& epsilons, const PicardOptions& opts = {});

}  // namespace semiper
