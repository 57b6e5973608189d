#pragma once

#include "semiper/forcing.hpp"
#include "semiper/models.hpp"

#include <numbers>
#include <vector>

namespace semiper {

struct ConcentrationRow {
    int j = 0;
    int jmax = 0;
    double norm = 0.0;            ///< ||M_a Phi_j||
    double refined_change = 0.0;  ///< |change| of the norm with twice the quadrature nodes
};

struct ConcentrationScan {
    std::vector<ConcentrationRow> rows;
    double c = 0.0;          ///< -slope of log ||a Phi_j|| against sqrt(j(j+1))
    double slope_j = 0.0;    ///< slope of log ||a Phi_j|| against j
    double r2 = 0.0;
    double d = 0.0;          ///< -log(sin r), sin r = sqrt(1 - s0^2) for a cap at |x3| > s0
    double relative_gap = 0.0;  ///< |slope_j + d| / d
};

/// ||M_a Phi_j|| per block m = j, truncated at jmax = j + extra_degrees.
ConcentrationScan concentration_scan(const DampingProfile& a, const std::vector<int>& j_list, int extra_degrees = 60);

/// H^k norm on a block: l2 weighted by (1 + l(l+1))^{k/2}.
double sobolev_norm(const SphereBlockModel& block, int k, const Vec& x);

struct ResonantForcing {
    PeriodicForcing forcing;
    double C_j = 0.0;
    double propagation_bound = 0.0;  ///< sup_{s in [0,T]} ||e^{-sA}||_{H^k -> H^k}
    double l1_norm = 0.0;            ///< ||f||_{L1(0,T; H^k)}
};

/// f(s) = C_j e^{(s - T)A} Phi_j / T with C_j = (1 + lambda_j)^{-k/2} / propagation_bound.
ResonantForcing resonant_forcing(const SphereBlockModel& block, int k, double period = 2.0 * std::numbers::pi,
                                 double max_backward_growth = 1e6);

/// u((n+1)T) = e^{AT} u(nT) + F_T from u(0) = 0; returns u(nT), n = 1..n_max.
std::vector<Vec> period_sequence(const Model& response, const PeriodicForcing& f, int n_max);

struct GrowthExperiment {
    int j = 0;
    int jmax = 0;
    int k = 0;
    double period = 0.0;
    double C_j = 0.0;
    double forcing_norm = 0.0;
    double concentration = 0.0;  ///< measured ||M_a Phi_j|| = e^{-c sqrt(lambda_j)}
    double c = 0.0;
    long long n_j = 0;           ///< ceil(lambda_j^{k/2 + 1})
    double FT_defect = 0.0;      ///< ||F_T - C_j Phi_j|| / C_j
    std::vector<int> n_grid;
    std::vector<double> norms;              ///< ||u(nT)||
    std::vector<double> lower_bound_curve;  ///< C_j n (1 - nT e^{-c sqrt(lambda_j)})
    std::vector<double> error_terms;        ///< ||(e^{mTA} - e^{mTA_0}) Phi_j||
    std::vector<double> error_bounds;       ///< 1.1 m T ||M_a Phi_j||
    double single_period = 0.0;             ///< ||u(T)||
    double leakage = 0.0;                   ///< share of ||u(n_max T)||^2 in the top 10 degrees
};

/// Resonant growth on `block` (Phi_j with j = block.m). When `response` is
/// given, the same forcing drives that model instead (contrast runs).
GrowthExperiment growth_experiment(const SphereBlockModel& block, int k, int n_max,
                                   double period = 2.0 * std::numbers::pi,
                                   const SphereBlockModel* response = nullptr);

}  // namespace semiper
