#include "semiper/linalg.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace semiper {

namespace {

GaussRule build_gauss(int n) {
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // one more derivative evaluation at the converged root
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
    static std::mutex mutex;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_gauss(n)).first;
    return it->second;
}

double spectral_norm(const Mat& M) {
    if (M.size() == 0) return 0.0;
    Eigen::BDCSVD<Mat> svd(M);
    return svd.singularValues()(0);
}

double smallest_singular_value(const Mat& M) {
    if (M.size() == 0) return 0.0;
    Eigen::BDCSVD<Mat> svd(M);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

double factored_norm(const Mat& P, const Vec& d, const Mat& Q) {
    if (Q.cols() <= 48) return spectral_norm(P * d.asDiagonal() * Q);
    return lanczos_norm(
        Q.cols(),
        [&](const Vec& x) -> Vec { return P * (d.asDiagonal() * (Q * x)); },
        [&](const Vec& y) -> Vec { return Q.adjoint() * (d.conjugate().asDiagonal() * (P.adjoint() * y)); });
}

}  // namespace semiper
