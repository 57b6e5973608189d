#include "semiper/stability_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace semiper {

namespace {

constexpr const char* kModule = "stability_lab";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail(const char* name, const std::string& detail) {
    detail::raise(kModule, name, detail);
}

void check_grid(const std::vector<double>& grid, const char* what) {
    if (grid.empty()) fail("InvalidGrid", std::string(what) + " grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i]) || grid[i] < 0.0) fail("InvalidGrid", std::string(what) + " grid needs finite values >= 0");
        if (i > 0 && !(grid[i] > grid[i - 1])) fail("InvalidGrid", std::string(what) + " grid must increase");
    }
}

/// Upper Cholesky factor inverse L^{-*} of a Hermitian positive definite matrix.
Mat inverse_upper_factor(const Mat& G) {
    Eigen::LLT<Mat> llt(0.5 * (G + G.adjoint()));
    if (llt.info() != Eigen::Success) fail("NotPositiveDefinite", "domain Gram is not positive definite");
    const Index n = G.rows();
    return llt.matrixU().solve(Mat::Identity(n, n));
}

}  // namespace

std::string to_string(ScanResult::Kind kind) {
    switch (kind) {
        case ScanResult::Kind::DecayEnvelope: return "decay_envelope";
        case ScanResult::Kind::Resolvent: return "resolvent";
        case ScanResult::Kind::SemigroupInverse: return "semigroup_inverse";
        case ScanResult::Kind::Mlog: return "mlog";
    }
    return "decay_envelope";
}

ScanResult::Kind scan_kind_from_string(const std::string& name) {
    if (name == "decay_envelope") return ScanResult::Kind::DecayEnvelope;
    if (name == "resolvent") return ScanResult::Kind::Resolvent;
    if (name == "semigroup_inverse") return ScanResult::Kind::SemigroupInverse;
    if (name == "mlog") return ScanResult::Kind::Mlog;
    fail("InvalidScan", "unknown scan kind '" + name + "'");
}

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += threads) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

ScanResult decay_envelope(const Model& model, double alpha, const std::vector<double>& t_grid, int threads) {
    check_grid(t_grid, "t");
    const Mat Pa = fractional_power(model, alpha);
    const Mat& G = model.space().gram();
    const Mat Ga = G + Pa.adjoint() * G * Pa;
    const Mat Linv = inverse_upper_factor(Ga);
    ScanResult out;
    out.kind = ScanResult::Kind::DecayEnvelope;
    out.alpha = alpha;
    out.abscissae = t_grid;
    out.values.assign(t_grid.size(), 0.0);
    if (model.diagonalizable()) {
        const Mat Q = model.modal_map() * Linv;
        const Mat& P = model.whitened_vectors();
        const Vec& lam = model.shifted_eigenvalues();
        parallel_for(static_cast<int>(t_grid.size()), threads, [&](int i) {
            Vec d(lam.size());
            for (Index k = 0; k < lam.size(); ++k) d(k) = model.kernel_mode()[k] ? 0.0 : std::exp(t_grid[i] * lam(k));
            out.values[i] = factored_norm(P, d, Q);
        });
    } else {
        parallel_for(static_cast<int>(t_grid.size()), threads, [&](int i) {
            const Mat E = model.propagator(t_grid[i]) * model.deflation();
            out.values[i] = spectral_norm(model.space().whiten(E) * Linv);
        });
    }
    return out;
}

ScanResult semigroup_inverse_decay(const Model& model, const std::vector<double>& t_grid, int threads) {
    check_grid(t_grid, "t");
    ScanResult out;
    out.kind = ScanResult::Kind::SemigroupInverse;
    out.abscissae = t_grid;
    out.values.assign(t_grid.size(), 0.0);
    const Vec& lam = model.shifted_eigenvalues();
    for (Index k = 0; k < lam.size(); ++k) {
        if (!model.kernel_mode()[k] && std::abs(lam(k)) < 1e-13) fail("SingularGenerator", "A is singular on range(I - Pi0)");
    }
    if (model.diagonalizable()) {
        parallel_for(static_cast<int>(t_grid.size()), threads, [&](int i) {
            Vec d(lam.size());
            for (Index k = 0; k < lam.size(); ++k)
                d(k) = model.kernel_mode()[k] ? 0.0 : std::exp(t_grid[i] * lam(k)) / lam(k);
            out.values[i] = model.modal_operator_norm(d);
        });
    } else {
        const Mat Ainv = (model.shifted_generator() + model.pi0()).partialPivLu().solve(Mat(model.deflation()));
        parallel_for(static_cast<int>(t_grid.size()), threads, [&](int i) {
            out.values[i] = model.space().operator_norm(model.propagator(t_grid[i]) * Ainv);
        });
    }
    return out;
}

std::pair<double, double> default_window(const std::vector<double>& grid) {
    if (grid.empty()) fail("InvalidGrid", "empty grid");
    const double hi = grid.back();
    return {hi / std::sqrt(10.0), hi};
}

FitRecord fit_power_law(const std::vector<double>& x, const std::vector<double>& y, double lo, double hi, bool decay,
                        double min_r2) {
    if (x.size() != y.size()) fail("InvalidScan", "abscissae and values differ in length");
    std::vector<double> ys = y;
    if (decay) {
        for (std::size_t i = 1; i < ys.size(); ++i) ys[i] = std::min(ys[i], ys[i - 1]);
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= lo && x[i] <= hi && x[i] > 0.0 && ys[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(ys[i]));
        }
    }
    FitRecord fit;
    fit.window_lo = lo;
    fit.window_hi = hi;
    fit.points = static_cast<int>(lx.size());
    if (lx.size() < 10) {
        std::ostringstream msg;
        msg << "fit window [" << lo << ", " << hi << "] holds " << lx.size() << " points, need 10";
        fail("PoorFit", msg.str());
    }
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - intercept - slope * lx[i];
        ss_res += r * r;
    }
    fit.r2 = syy > 1e-300 ? 1.0 - ss_res / syy : (ss_res < 1e-24 ? 1.0 : 0.0);
    fit.exponent = decay ? -slope : slope;
    fit.constant = std::exp(intercept);
    if (fit.r2 < min_r2) {
        std::ostringstream msg;
        msg << "log-log fit has r2 = " << fit.r2 << " < " << min_r2;
        fail("PoorFit", msg.str());
    }
    return fit;
}

double fit_decay_exponent(ScanResult& scan, std::optional<std::pair<double, double>> window) {
    if (scan.kind != ScanResult::Kind::DecayEnvelope && scan.kind != ScanResult::Kind::SemigroupInverse)
        fail("InvalidScan", "decay fit needs a decay scan");
    const auto [lo, hi] = window.value_or(default_window(scan.abscissae));
    scan.fit = fit_power_law(scan.abscissae, scan.values, lo, hi, true);
    return scan.fit->exponent;
}

ScanResult resolvent_scan(const Model& model, const std::vector<double>& eta_grid, int threads) {
    check_grid(eta_grid, "eta");
    const bool symmetric = model.generator().imag().cwiseAbs().maxCoeff() == 0.0 &&
                           model.space().gram().imag().cwiseAbs().maxCoeff() == 0.0;
    ScanResult out;
    out.kind = ScanResult::Kind::Resolvent;
    out.abscissae = eta_grid;
    out.pointwise.assign(eta_grid.size(), 0.0);

    // Peaks sit near Im(lambda); those inside the scanned range are sampled too.
    std::vector<double> peaks;
    const Vec ev = model.deflated_eigenvalues();
    for (Index k = 0; k < ev.size(); ++k) {
        const double y = ev(k).imag();
        if (std::abs(y) <= eta_grid.back() && (!symmetric || y >= 0.0)) peaks.push_back(y);
    }
    std::sort(peaks.begin(), peaks.end());
    peaks.erase(std::unique(peaks.begin(), peaks.end()), peaks.end());

    std::vector<double> negative(eta_grid.size(), 0.0);
    std::vector<double> at_peak(peaks.size(), 0.0);
    const int n_grid = static_cast<int>(eta_grid.size());
    parallel_for(n_grid + static_cast<int>(peaks.size()), threads, [&](int i) {
        if (i < n_grid) {
            out.pointwise[i] = resolvent_norm(model, eta_grid[i]);
            negative[i] = symmetric || eta_grid[i] == 0.0 ? out.pointwise[i] : resolvent_norm(model, -eta_grid[i]);
        } else {
            at_peak[i - n_grid] = resolvent_norm(model, peaks[i - n_grid]);
        }
    });
    // M(eta): running maximum over [-eta, eta]
    out.values.resize(eta_grid.size());
    double run = 0.0;
    for (std::size_t i = 0; i < eta_grid.size(); ++i) {
        run = std::max({run, out.pointwise[i], negative[i]});
        for (std::size_t p = 0; p < peaks.size(); ++p)
            if (std::abs(peaks[p]) <= eta_grid[i]) run = std::max(run, at_peak[p]);
        out.values[i] = run;
    }
    return out;
}

double fit_resolvent_exponent(ScanResult& scan, std::optional<std::pair<double, double>> window) {
    if (scan.kind != ScanResult::Kind::Resolvent) fail("InvalidScan", "resolvent fit needs a resolvent scan");
    const auto [lo, hi] = window.value_or(default_window(scan.abscissae));
    scan.fit = fit_power_law(scan.abscissae, scan.values, lo, hi, false);
    return scan.fit->exponent;
}

CrosscheckRecord bt_crosscheck(const Model& model, const CrosscheckOptions& opts) {
    CrosscheckRecord rec;
    rec.resolvent = resolvent_scan(model, opts.eta_grid, opts.threads);
    rec.alpha_hat = fit_resolvent_exponent(rec.resolvent, opts.eta_window);
    rec.alpha_fit = *rec.resolvent.fit;
    rec.decay = semigroup_inverse_decay(model, opts.t_grid, opts.threads);
    rec.beta_hat = fit_decay_exponent(rec.decay, opts.t_window);
    rec.beta_fit = *rec.decay.fit;
    rec.product = rec.alpha_hat * rec.beta_hat;
    return rec;
}

InterpolationCheck interpolation_check(const Model& model, double alpha, const std::vector<double>& t_grid, int threads) {
    if (!(alpha > 0.0)) fail("InvalidExponent", "alpha must be > 0");
    const double m = std::ceil(alpha);
    std::vector<double> scaled;
    for (double t : t_grid) scaled.push_back(t / m);
    const ScanResult ha = decay_envelope(model, alpha, t_grid, threads);
    const ScanResult h1 = decay_envelope(model, 1.0, scaled, threads);
    InterpolationCheck out;
    out.alpha = alpha;
    out.t = t_grid;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const double r = ha.values[i] / std::pow(h1.values[i], alpha);
        out.ratio.push_back(r);
        if (r > out.sup) {
            out.sup = r;
            out.argmax = t_grid[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------- PCHIP

Pchip::Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) fail("InvalidGrid", "interpolation needs at least two points");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1])) fail("NonMonotone", "interpolation abscissae must increase");
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    d_.assign(n, 0.0);
    if (n == 2) {
        d_[0] = d_[1] = delta[0];
        return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] > 0.0) {
            const double w1 = 2.0 * h[i] + h[i - 1], w2 = h[i] + 2.0 * h[i - 1];
            d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (d * d0 <= 0.0) return 0.0;
        if (d0 * d1 <= 0.0 && std::abs(d) > std::abs(3.0 * d0)) return 3.0 * d0;
        return d;
    };
    d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

double Pchip::operator()(double x) const {
    if (x <= x_.front()) return y_.front();
    if (x >= x_.back()) return y_.back();
    const std::size_t i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double s = (x - x_[i]) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
}

// ----------------------------------------------------------------------- mlog

MlogRecord mlog_bound_curve(const ScanResult& resolvent, const ScanResult& inverse_decay,
                            std::optional<std::pair<double, double>> t_window) {
    if (resolvent.kind != ScanResult::Kind::Resolvent || inverse_decay.kind != ScanResult::Kind::SemigroupInverse)
        fail("InvalidScan", "mlog overlay needs a resolvent scan and a semigroup-inverse scan");
    MlogRecord rec;
    rec.mlog.kind = ScanResult::Kind::Mlog;
    rec.mlog.abscissae = resolvent.abscissae;
    const auto& eta = resolvent.abscissae;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        const double M = resolvent.values[i];
        rec.mlog.values.push_back(M * (std::log1p(M) + std::log1p(eta[i])));
    }
    const auto& ml = rec.mlog.values;
    for (std::size_t i = 1; i < ml.size(); ++i) {
        if (ml[i] < ml[i - 1] * (1.0 - 1e-9)) {
            std::ostringstream msg;
            msg << "M_log decreases between eta = " << eta[i - 1] << " and " << eta[i];
            fail("NonMonotone", msg.str());
        }
    }
    // inverse through the strictly increasing part
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < ml.size(); ++i) {
        if (xs.empty() || ml[i] > xs.back()) {
            xs.push_back(ml[i]);
            ys.push_back(eta[i]);
        }
    }
    if (xs.size() < 2) fail("NonMonotone", "M_log is flat on the grid");
    const Pchip inverse(xs, ys);
    const double smin = xs.front(), smax = xs.back();
    auto minv = [&](double s) { return (s < smin || s > smax) ? kNaN : inverse(s); };

    rec.t = inverse_decay.abscissae;
    rec.measured = inverse_decay.values;
    rec.window = t_window.value_or(default_window(rec.t));
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < rec.t.size(); ++i)
        if (rec.t[i] >= rec.window.first && rec.t[i] <= rec.window.second) idx.push_back(i);
    if (idx.size() < 3) fail("PoorFit", "mlog window holds fewer than 3 points");

    auto bound = [&](double C, double t) {
        const double m = minv(t / C);
        return std::isnan(m) || m <= 0.0 ? kNaN : C / m;
    };
    auto objective = [&](double logC) {
        const double C = std::exp(logC);
        double s = 0.0;
        int used = 0;
        for (std::size_t i : idx) {
            const double b = bound(C, rec.t[i]);
            if (std::isnan(b)) {
                s += 1e3;  // outside the inverted range
                continue;
            }
            const double r = std::log(rec.measured[i]) - std::log(b);
            s += r * r;
            ++used;
        }
        return used > 0 ? s : std::numeric_limits<double>::infinity();
    };
    // coarse scan then golden section in log C
    double best = 0.0, best_val = std::numeric_limits<double>::infinity();
    for (int k = -400; k <= 400; ++k) {
        const double lc = 0.05 * k;
        const double v = objective(lc);
        if (v < best_val) {
            best_val = v;
            best = lc;
        }
    }
    double a = best - 0.05, b = best + 0.05;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 80; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (objective(c) < objective(d)) {
            b = d;
        } else {
            a = c;
        }
    }
    rec.C = std::exp(0.5 * (a + b));

    int holds = 0;
    for (std::size_t i = 0; i < rec.t.size(); ++i) {
        rec.bound.push_back(bound(rec.C, rec.t[i]));
        rec.mlog_inverse.push_back(minv(rec.t[i]));
    }
    for (std::size_t i : idx)
        if (!std::isnan(rec.bound[i]) && rec.measured[i] <= rec.bound[i]) ++holds;
    rec.hold_fraction = static_cast<double>(holds) / idx.size();

    // smallest C covering a set of points; the bound increases with C
    auto cover = [&](const std::vector<std::size_t>& pts) {
        auto covers = [&](double C) {
            for (std::size_t i : pts) {
                const double bb = bound(C, rec.t[i]);
                if (std::isnan(bb) || rec.measured[i] > bb) return false;
            }
            return true;
        };
        double lo = std::log(rec.C), hi = lo;
        int guard = 0;
        while (!covers(std::exp(hi)) && guard++ < 200) hi += 0.25;
        if (!covers(std::exp(hi))) return kNaN;
        while (covers(std::exp(lo)) && guard++ < 400) lo -= 0.25;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (covers(std::exp(mid))) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return std::exp(hi);
    };
    rec.cover_C = cover(idx);
    const std::size_t half = idx.size() / 2;
    rec.early_cover_C = cover(std::vector<std::size_t>(idx.begin(), idx.begin() + half));
    if (!std::isnan(rec.early_cover_C)) {
        int late = 0;
        for (std::size_t j = half; j < idx.size(); ++j) {
            const double bb = bound(rec.early_cover_C, rec.t[idx[j]]);
            if (!std::isnan(bb) && rec.measured[idx[j]] <= bb) ++late;
        }
        rec.late_hold_fraction = static_cast<double>(late) / (idx.size() - half);
    }
    return rec;
}

MlogRecord mlog_bound_curve(const Model& model, const std::vector<double>& eta_grid, const std::vector<double>& t_grid,
                            std::optional<std::pair<double, double>> t_window, int threads) {
    const ScanResult r = resolvent_scan(model, eta_grid, threads);
    const ScanResult d = semigroup_inverse_decay(model, t_grid, threads);
    return mlog_bound_curve(r, d, t_window);
}

// ------------------------------------------------------------------ synthetic

ModelPtr build_synthetic_normal(double alpha, int modes, bool real_pairs) {
    if (!(alpha > 0.0) || modes < 1) fail("InvalidModel", "need alpha > 0 and modes >= 1");
    if (real_pairs) {
        const Index n = 2 * modes;
        Mat A = Mat::Zero(n, n);
        for (int k = 1; k <= modes; ++k) {
            const Index i = 2 * (k - 1);
            const double re = -std::pow(k, -alpha);
            A(i, i) = re;
            A(i + 1, i + 1) = re;
            A(i, i + 1) = k;
            A(i + 1, i) = -k;
        }
        ModelOptions opts;
        opts.label = "synthetic_normal";
        return Model::create(make_state_space(n, Mat::Identity(n, n), FieldTag::Real), A, opts);
    }
    Mat A = Mat::Zero(modes, modes);
    for (int k = 1; k <= modes; ++k) A(k - 1, k - 1) = cplx(-std::pow(k, -alpha), k);
    ModelOptions opts;
    opts.label = "synthetic_normal";
    return Model::create(make_state_space(modes, Mat::Identity(modes, modes), FieldTag::Complex), A, opts);
}

}  // namespace semiper
