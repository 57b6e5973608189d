#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace semiper {

using cplx = std::complex<double>;
using Index = Eigen::Index;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Cached for repeated orders; thread-safe.
const GaussRule& gauss_legendre(int n);

/// Largest singular value of a dense matrix.
double spectral_norm(const Mat& M);

/// Smallest singular value of a dense square matrix.
double smallest_singular_value(const Mat& M);

/// Spectral norm of P * diag(d) * Q without forming the product.
/// Dense SVD for small sizes, Lanczos on M^*M with full
/// reorthogonalization otherwise.
double factored_norm(const Mat& P, const Vec& d, const Mat& Q);

/// Same as factored_norm but with the middle factor applied by callbacks;
/// `apply(x)` computes M x and `apply_adjoint(y)` computes M^* y.
template <class Apply, class ApplyAdjoint>
double lanczos_norm(Index cols, Apply&& apply, ApplyAdjoint&& apply_adjoint);

}  // namespace semiper

#include "semiper/detail/lanczos.hpp"
