#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

namespace semiper {

template <class Apply, class ApplyAdjoint>
double lanczos_norm(Index cols, Apply&& apply, ApplyAdjoint&& apply_adjoint) {
    if (cols == 0) return 0.0;
    const Index kmax = std::min<Index>(cols, 300);

    // Fixed seed: norms must be reproducible run to run.
    std::mt19937_64 rng(0x5eed1234ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec q(cols);
    for (Index i = 0; i < cols; ++i) q(i) = cplx(gauss(rng), gauss(rng));
    q.normalize();

    Mat basis(cols, kmax);
    std::vector<double> alpha, beta;
    double theta = 0.0;
    for (Index k = 0; k < kmax; ++k) {
        basis.col(k) = q;
        Vec w = apply_adjoint(apply(q));
        const double a = std::real(q.dot(w));
        alpha.push_back(a);
        w -= a * q;
        if (k > 0) w -= beta.back() * basis.col(k - 1);
        // Two passes of Gram-Schmidt against the whole basis.
        for (int pass = 0; pass < 2; ++pass) {
            const Vec c = basis.leftCols(k + 1).adjoint() * w;
            w -= basis.leftCols(k + 1) * c;
        }
        const double b = w.norm();

        const Index m = k + 1;
        RVec diag(m), sub(std::max<Index>(m - 1, 1));
        for (Index i = 0; i < m; ++i) diag(i) = alpha[i];
        for (Index i = 0; i + 1 < m; ++i) sub(i) = beta[i];
        Eigen::SelfAdjointEigenSolver<RMat> es;
        es.computeFromTridiagonal(diag, sub.head(m - 1), Eigen::ComputeEigenvectors);
        theta = std::max(0.0, es.eigenvalues()(m - 1));
        const double resid = b * std::abs(es.eigenvectors()(m - 1, m - 1));
        if (b <= 1e-14 * std::max(theta, 1e-300) || resid <= 1e-12 * theta) break;
        beta.push_back(b);
        q = w / b;
    }
    return std::sqrt(theta);
}

}  // namespace semiper
