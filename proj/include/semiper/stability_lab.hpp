#pragma once

#include "semiper/operator_core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace semiper {

/// Least-squares fit of log y = log C + s log x on [lo, hi].
/// exponent = -s for decays, +s for growths (see ScanResult::Kind).
struct FitRecord {
    double exponent = 0.0;
    double constant = 0.0;
    double window_lo = 0.0;
    double window_hi = 0.0;
    double r2 = 0.0;
    int points = 0;
};

struct ScanResult {
    enum class Kind { DecayEnvelope, Resolvent, SemigroupInverse, Mlog };

    Kind kind = Kind::DecayEnvelope;
    double alpha = 0.0;              ///< domain exponent (decay envelopes)
    std::vector<double> abscissae;   ///< t or eta
    std::vector<double> values;      ///< h_alpha(t), M(eta), ||e^{tA}A^{-1}||, M_log(eta)
    std::vector<double> pointwise;   ///< ||R(i eta)|| for resolvent scans
    std::optional<FitRecord> fit;
};

std::string to_string(ScanResult::Kind kind);
ScanResult::Kind scan_kind_from_string(const std::string& name);

/// Work split over `threads` workers; results are written by index.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

/// h_alpha(t) = ||e^{tA}(I - Pi0)|| from the Hilbertian domain norm
/// x^* (G + (-A)^{alpha*} G (-A)^alpha) x to the X norm.
ScanResult decay_envelope(const Model& model, double alpha, const std::vector<double>& t_grid, int threads = 1);

/// ||e^{tA} A^{-1}(I - Pi0)||_X on the grid.
ScanResult semigroup_inverse_decay(const Model& model, const std::vector<double>& t_grid, int threads = 1);

/// Default window: the last half-decade of the abscissae.
std::pair<double, double> default_window(const std::vector<double>& grid);

/// Power-law fit on [lo, hi] against the running minimum (decays) or the
/// values (growths). Raises PoorFit when r2 < min_r2 or fewer than 10 points.
FitRecord fit_power_law(const std::vector<double>& x, const std::vector<double>& y, double lo, double hi,
                        bool decay, double min_r2 = 0.9);

/// beta from a decay scan; stores the fit in the scan.
double fit_decay_exponent(ScanResult& scan, std::optional<std::pair<double, double>> window = std::nullopt);

/// Pointwise ||R(i eta)|| and the running maximum M(eta) over [-eta, eta].
ScanResult resolvent_scan(const Model& model, const std::vector<double>& eta_grid, int threads = 1);

/// alpha-hat from M(eta) on the window; stores the fit.
double fit_resolvent_exponent(ScanResult& scan, std::optional<std::pair<double, double>> window = std::nullopt);

struct CrosscheckOptions {
    std::vector<double> eta_grid;
    std::vector<double> t_grid;
    std::optional<std::pair<double, double>> eta_window;
    std::optional<std::pair<double, double>> t_window;
    int threads = 1;
};

struct CrosscheckRecord {
    double alpha_hat = 0.0;
    double beta_hat = 0.0;
    double product = 0.0;
    FitRecord alpha_fit;
    FitRecord beta_fit;
    ScanResult resolvent;
    ScanResult decay;
};

/// alpha-hat from M(eta), beta-hat from ||e^{tA} A^{-1}||, and their product.
CrosscheckRecord bt_crosscheck(const Model& model, const CrosscheckOptions& opts);

struct InterpolationCheck {
    double alpha = 0.0;
    std::vector<double> t;
    std::vector<double> ratio;  ///< h_alpha(t) / h_1(t/ceil(alpha))^alpha
    double sup = 0.0;
    double argmax = 0.0;
};

InterpolationCheck interpolation_check(const Model& model, double alpha, const std::vector<double>& t_grid,
                                       int threads = 1);

/// Monotone piecewise cubic (Fritsch-Carlson) interpolant.
class Pchip {
public:
    Pchip(std::vector<double> x, std::vector<double> y);
    double operator()(double x) const;

private:
    std::vector<double> x_, y_, d_;
};

struct MlogRecord {
    ScanResult mlog;                 ///< M_log on the eta grid
    std::vector<double> t;
    std::vector<double> measured;    ///< ||e^{tA} A^{-1}||
    std::vector<double> bound;       ///< C / M_log^{-1}(t / C), NaN where t/C leaves the inverted range
    std::vector<double> mlog_inverse;  ///< M_log^{-1}(t) (NaN outside the range)
    double C = 0.0;                  ///< least-squares fit in log space
    double hold_fraction = 0.0;      ///< fraction of window points with measured <= bound
    double cover_C = 0.0;            ///< smallest C with the bound holding on the whole window
    double early_cover_C = 0.0;      ///< smallest C covering the first half of the window
    double late_hold_fraction = 0.0; ///< second-half points under the early_cover_C bound
    std::pair<double, double> window;
};

/// M_log(eta) = M(eta)(log(1 + M(eta)) + log(1 + eta)), its monotone inverse,
/// and the overlay C / M_log^{-1}(t/C) against ||e^{tA} A^{-1}||.
MlogRecord mlog_bound_curve(const Model& model, const std::vector<double>& eta_grid, const std::vector<double>& t_grid,
                            std::optional<std::pair<double, double>> t_window = std::nullopt, int threads = 1);

/// Same from precomputed scans.
MlogRecord mlog_bound_curve(const ScanResult& resolvent, const ScanResult& inverse_decay,
                            std::optional<std::pair<double, double>> t_window = std::nullopt);

/// Diagonal normal model with eigenvalues -k^{-alpha} + i k, k = 1..modes
/// (and conjugates when `real_pairs`), so that ||R(i eta)|| ~ eta^alpha.
ModelPtr build_synthetic_normal(double alpha, int modes, bool real_pairs = false);

}  // namespace semiper
