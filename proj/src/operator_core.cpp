#include "semiper/operator_core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

namespace semiper {

namespace {

constexpr const char* kModule = "operator_core";

bool is_real(const Mat& M) {
    return M.imag().cwiseAbs().maxCoeff() == 0.0;
}

Mat realify_if(const Mat& M, bool real) {
    if (!real) return M;
    return M.real().cast<cplx>();
}

bool all_finite(const Mat& M) {
    return M.allFinite();
}

Mat projector_from_kernel(const Mat& A, const std::vector<Vec>& basis) {
    const Index n = A.rows();
    const Index r = static_cast<Index>(basis.size());
    Mat R(n, r);
    for (Index j = 0; j < r; ++j) R.col(j) = basis[j];
    Eigen::BDCSVD<Mat> svd(A.adjoint(), Eigen::ComputeFullV);
    // Right singular vectors of A^* for the r smallest singular values span
    // the left null space of A.
    Mat left = svd.matrixV().rightCols(r);
    Mat S = left.adjoint() * R;
    return R * S.partialPivLu().solve(left.adjoint());
}

std::atomic<bool> g_backward_warned{false};

}  // namespace

// ---------------------------------------------------------------- StateSpace

StateSpace make_state_space(Index dim, const Mat& gram, FieldTag field) {
    if (dim <= 0 || gram.rows() != dim || gram.cols() != dim) {
        std::ostringstream msg;
        msg << "gram must be " << dim << "x" << dim << ", got " << gram.rows() << "x" << gram.cols();
        detail::raise(kModule, "NonHermitian", msg.str());
    }
    if (!all_finite(gram)) detail::raise(kModule, "NonHermitian", "gram has non-finite entries");
    const double scale = std::max(gram.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double asym = (gram - gram.adjoint()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale) {
        std::ostringstream msg;
        msg << "max |G - G^*| = " << asym << " exceeds 1e-12 relative";
        detail::raise(kModule, "NonHermitian", msg.str());
    }
    StateSpace space;
    space.gram_ = 0.5 * (gram + gram.adjoint());
    space.field_ = field;
    Eigen::LLT<Mat> llt(space.gram_);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
        const RVec d = llt.matrixL().toDenseMatrix().diagonal().real();
        ok = d.minCoeff() > 0.0 && d.allFinite();
    }
    if (!ok) {
        Eigen::SelfAdjointEigenSolver<Mat> es(space.gram_, Eigen::EigenvaluesOnly);
        std::ostringstream msg;
        msg << "smallest eigenvalue of gram is " << es.eigenvalues()(0);
        detail::raise(kModule, "NotPositiveDefinite", msg.str());
    }
    space.upper_ = llt.matrixU();
    return space;
}

double StateSpace::norm(const Vec& x) const {
    return (upper_.triangularView<Eigen::Upper>() * x).norm();
}

cplx StateSpace::inner(const Vec& x, const Vec& y) const {
    return y.dot(gram_ * x);
}

Vec StateSpace::whiten(const Vec& x) const {
    return upper_.triangularView<Eigen::Upper>() * x;
}

Mat StateSpace::whiten(const Mat& X) const {
    return upper_.triangularView<Eigen::Upper>() * X;
}

Mat StateSpace::unwhiten_right(const Mat& X) const {
    return upper_.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(X);
}

Mat StateSpace::to_orthonormal_frame(const Mat& M) const {
    return unwhiten_right(whiten(M));
}

double StateSpace::operator_norm(const Mat& M) const {
    return spectral_norm(to_orthonormal_frame(M));
}

// --------------------------------------------------------------------- Model

ModelPtr Model::create(StateSpace space, Mat A, ModelOptions options) {
    const Index n = space.dim();
    if (A.rows() != n || A.cols() != n) {
        std::ostringstream msg;
        msg << "generator is " << A.rows() << "x" << A.cols() << ", space has dim " << n;
        detail::raise(kModule, "DimensionMismatch", msg.str());
    }
    if (!all_finite(A)) detail::raise(kModule, "NonFiniteInput", "generator has non-finite entries");

    std::shared_ptr<Model> model(new Model());
    model->space_ = std::move(space);
    model->A_ = std::move(A);
    model->kernel_basis_ = std::move(options.kernel_basis);
    for (const Vec& v : model->kernel_basis_) {
        if (v.size() != n) detail::raise(kModule, "DimensionMismatch", "kernel vector has wrong length");
    }
    if (options.pi0) {
        model->pi0_ = *options.pi0;
    } else if (model->has_kernel()) {
        model->pi0_ = projector_from_kernel(model->A_, model->kernel_basis_);
    } else {
        model->pi0_ = Mat::Zero(n, n);
    }
    if (options.control && options.control->rows() != n) {
        detail::raise(kModule, "DimensionMismatch", "control operator has wrong row count");
    }
    model->control_ = std::move(options.control);
    model->layout_ = std::move(options.layout);
    model->label_ = std::move(options.label);
    model->deflate_ = Mat::Identity(n, n) - model->pi0_;
    model->As_ = model->A_ - model->pi0_;
    model->factorize();
    return model;
}

void Model::factorize() {
    const Index n = dim();
    if (is_real(As_)) {
        Eigen::EigenSolver<RMat> es(As_.real());
        lambda_ = es.eigenvalues();
        V_ = es.eigenvectors();
    } else {
        Eigen::ComplexEigenSolver<Mat> es(As_);
        lambda_ = es.eigenvalues();
        V_ = es.eigenvectors();
    }
    for (Index k = 0; k < n; ++k) {
        const double nk = V_.col(k).norm();
        if (nk > 0) V_.col(k) /= nk;
    }
    Eigen::PartialPivLU<Mat> lu(V_);
    Mat Vinv = lu.inverse();
    cond_ = V_.cwiseAbs().colwise().sum().maxCoeff() * Vinv.cwiseAbs().colwise().sum().maxCoeff();
    diagonalizable_ = std::isfinite(cond_) && cond_ <= 1e8;

    kernel_mode_.assign(n, false);
    if (has_kernel()) {
        for (Index k = 0; k < n; ++k) kernel_mode_[k] = (pi0_ * V_.col(k)).norm() > 0.5;
    }
    Vinv_deflated_ = Vinv * deflate_;
    for (Index k = 0; k < n; ++k) {
        if (kernel_mode_[k]) Vinv_deflated_.row(k).setZero();
    }
    P_ = space_.whiten(V_);
    Q_ = space_.unwhiten_right(Vinv_deflated_);
    normal_ = diagonalizable_ && (P_.adjoint() * P_ - Mat::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10;
}

double Model::modal_operator_norm(const Vec& d) const {
    if (normal_) {
        double m = 0.0;
        for (Index k = 0; k < d.size(); ++k)
            if (!kernel_mode_[k]) m = std::max(m, std::abs(d(k)));
        return m;
    }
    return factored_norm(P_, d, Q_);
}

Vec Model::deflated_eigenvalues() const {
    std::vector<cplx> out;
    for (Index k = 0; k < lambda_.size(); ++k) {
        if (!kernel_mode_[k]) out.push_back(lambda_(k));
    }
    return Eigen::Map<Vec>(out.data(), static_cast<Index>(out.size()));
}

Vec Model::eigenvalues() const {
    Vec ev = lambda_;
    for (Index k = 0; k < ev.size(); ++k) {
        if (kernel_mode_[k]) ev(k) = 0.0;
    }
    return ev;
}

Vec Model::to_modal(const Vec& x) const {
    return Vinv_deflated_ * x;
}

Mat Model::deflated_function(const Vec& f_lambda) const {
    if (!diagonalizable_) {
        detail::raise(kModule, "NotDiagonalizable", "spectral function requested on a defective generator");
    }
    Vec f = f_lambda;
    for (Index k = 0; k < f.size(); ++k) {
        if (kernel_mode_[k]) f(k) = 0.0;
    }
    return V_ * f.asDiagonal() * Vinv_deflated_;
}

void Model::check_time(double t, bool group_allowed) const {
    if (!std::isfinite(t)) detail::raise(kModule, "NonFiniteInput", "time is not finite");
    if (t < 0.0 && !group_allowed) {
        detail::raise(kModule, "BackwardTimeDisallowed", "negative time without group_allowed");
    }
    if (t < 0.0) {
        double growth = 1.0;
        for (Index k = 0; k < lambda_.size(); ++k) {
            if (!kernel_mode_[k]) growth = std::max(growth, std::exp(t * lambda_(k).real()));
        }
        if (growth * (diagonalizable_ ? 1.0 : cond_) > 1e6 && !g_backward_warned.exchange(true)) {
            std::cerr << "warning: backward propagation over " << -t << " grows by about " << growth
                      << " (monitor threshold 1e6)\n";
        }
    }
}

Mat Model::propagator(double t, bool group_allowed) const {
    check_time(t, group_allowed);
    Mat E;
    if (diagonalizable_) {
        Vec e = (t * lambda_.array()).exp().matrix();
        E = deflated_function(e) + pi0_;
    } else {
        Mat tA = t * As_;
        E = Mat(tA.exp()) * deflate_ + pi0_;
    }
    return realify_if(E, is_real(A_) && is_real(pi0_));
}

Vec Model::propagate(double t, const Vec& x, bool group_allowed) const {
    if (x.size() != dim()) detail::raise(kModule, "DimensionMismatch", "state has wrong length");
    if (!x.allFinite()) detail::raise(kModule, "NonFiniteInput", "state has non-finite entries");
    check_time(t, group_allowed);
    if (!diagonalizable_) return propagator(t, group_allowed) * x;
    Vec y = Vinv_deflated_ * x;
    y.array() *= (t * lambda_.array()).exp();
    Vec out = V_ * y + pi0_ * x;
    if (is_real(A_) && is_real(pi0_) && x.imag().cwiseAbs().maxCoeff() == 0.0) {
        out = out.real().cast<cplx>();
    }
    return out;
}

double Model::semigroup_norm(double t, bool group_allowed) const {
    check_time(t, group_allowed);
    if (diagonalizable_ && !has_kernel()) {
        Vec e = (t * lambda_.array()).exp().matrix();
        return modal_operator_norm(e);
    }
    return space_.operator_norm(propagator(t, group_allowed));
}

Vec propagate(const Model& model, double t, const Vec& x, bool group_allowed) {
    return model.propagate(t, x, group_allowed);
}

// ---------------------------------------------------------------- operations

Mat fractional_power(const Model& model, double alpha) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        detail::raise(kModule, "InvalidExponent", "alpha must be finite and >= 0");
    }
    const Vec& lam = model.shifted_eigenvalues();
    for (Index k = 0; k < lam.size(); ++k) {
        if (model.kernel_mode()[k]) continue;
        const cplx mu = -lam(k);
        if (std::abs(mu.imag()) <= 1e-14 * std::abs(mu) && mu.real() <= 0.0) {
            std::ostringstream msg;
            msg << "eigenvalue " << mu << " of -A lies on (-inf, 0]";
            detail::raise(kModule, "SpectrumOnCut", msg.str());
        }
    }
    const bool real = is_real(model.generator()) && is_real(model.pi0());
    const double rounded = std::round(alpha);
    if (alpha == rounded && alpha <= 64) {
        Mat out = model.deflation();
        const Mat minusA = -model.shifted_generator();
        for (int i = 0; i < static_cast<int>(rounded); ++i) out = minusA * out;
        return out;
    }
    if (model.diagonalizable()) {
        Vec f(lam.size());
        for (Index k = 0; k < lam.size(); ++k) f(k) = std::pow(-lam(k), alpha);
        return realify_if(model.deflated_function(f), real);
    }
    Mat minusA = -model.shifted_generator();
    Eigen::MatrixPower<Mat> power(minusA);
    return realify_if(Mat(power(alpha)) * model.deflation(), real);
}

double norm_domain(const Model& model, double alpha, const Vec& x) {
    if (model.has_kernel()) {
        const double kx = model.space().norm(model.pi0() * x);
        if (kx > 1e-10 * model.space().norm(x)) {
            std::ostringstream msg;
            msg << "||Pi0 x|| = " << kx;
            detail::raise(kModule, "KernelComponentPresent", msg.str());
        }
    }
    return model.space().norm(x) + model.space().norm(fractional_power(model, alpha) * x);
}

double resolvent_norm(const Model& model, double eta) {
    if (!std::isfinite(eta)) detail::raise(kModule, "NonFiniteInput", "eta is not finite");
    const cplx z(0.0, eta);
    const double floor = 1e-13;
    if (model.diagonalizable()) {
        const Vec& lam = model.shifted_eigenvalues();
        Vec d(lam.size());
        double dist = std::numeric_limits<double>::infinity();
        for (Index k = 0; k < lam.size(); ++k) {
            if (model.kernel_mode()[k]) {
                d(k) = 0.0;
                continue;
            }
            const cplx gap = z - lam(k);
            dist = std::min(dist, std::abs(gap));
            d(k) = 1.0 / gap;
        }
        if (dist < floor) {
            std::ostringstream msg;
            msg << "dist(i*" << eta << ", spectrum) = " << dist;
            detail::raise(kModule, "OnSpectrum", msg.str());
        }
        const double value = model.modal_operator_norm(d);
        if (!std::isfinite(value) || value > 1.0 / floor) {
            detail::raise(kModule, "OnSpectrum", "resolvent norm exceeds 1e13");
        }
        return value;
    }
    const Index n = model.dim();
    Mat shifted = z * Mat::Identity(n, n) - model.shifted_generator();
    if (smallest_singular_value(model.space().to_orthonormal_frame(shifted)) < floor) {
        detail::raise(kModule, "OnSpectrum", "smallest singular value below 1e-13");
    }
    Mat R = shifted.partialPivLu().solve(model.deflation());
    return model.space().operator_norm(R);
}

Mat kernel_projector(const Model& model) {
    if (!model.has_kernel()) return Mat::Zero(model.dim(), model.dim());
    return projector_from_kernel(model.generator(), model.kernel_basis());
}

SpectrumReport spectrum_report(const Model& model) {
    SpectrumReport report;
    report.eigenvalues = model.eigenvalues();
    const Vec& lam = model.shifted_eigenvalues();
    report.abscissa = -std::numeric_limits<double>::infinity();
    report.distance_to_axis = std::numeric_limits<double>::infinity();
    report.max_real_part = -std::numeric_limits<double>::infinity();
    for (Index k = 0; k < report.eigenvalues.size(); ++k) {
        report.max_real_part = std::max(report.max_real_part, report.eigenvalues(k).real());
        if (model.kernel_mode()[k]) continue;
        report.abscissa = std::max(report.abscissa, lam(k).real());
        report.distance_to_axis = std::min(report.distance_to_axis, std::abs(lam(k).real()));
    }
    const double scale = std::max(1.0, model.generator().cwiseAbs().colwise().sum().maxCoeff());
    report.tolerance = 50.0 * std::numeric_limits<double>::epsilon() * scale;
    report.assumptions_ok = report.max_real_part <= 1e-10 && report.abscissa < -report.tolerance;
    return report;
}

// ------------------------------------------------------------- DecayFunction

double DecayFunction::operator()(double t) const {
    if (t_grid.empty()) return 0.0;
    if (t <= t_grid.front()) return values.front();
    if (t >= t_grid.back()) return values.back();
    const auto it = std::upper_bound(t_grid.begin(), t_grid.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - t_grid.begin());
    const double w = (t - t_grid[i - 1]) / (t_grid[i] - t_grid[i - 1]);
    return (1.0 - w) * values[i - 1] + w * values[i];
}

void DecayFunction::validate() const {
    if (t_grid.size() != values.size()) detail::raise(kModule, "InvalidDecayFunction", "size mismatch");
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (!std::isfinite(values[i]) || !std::isfinite(t_grid[i])) {
            detail::raise(kModule, "InvalidDecayFunction", "non-finite sample");
        }
        if (i > 0 && !(t_grid[i] > t_grid[i - 1])) {
            detail::raise(kModule, "InvalidDecayFunction", "t_grid not strictly increasing");
        }
    }
}

}  // namespace semiper
