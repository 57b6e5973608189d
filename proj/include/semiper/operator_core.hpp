#pragma once

#include "semiper/errors.hpp"
#include "semiper/linalg.hpp"

#include <Eigen/Cholesky>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace semiper {

enum class FieldTag { Real, Complex };

/// Coordinate space with the norm ||x||^2 = x^* G x.
class StateSpace {
public:
    StateSpace() = default;

    Index dim() const { return gram_.rows(); }
    const Mat& gram() const { return gram_; }
    FieldTag field() const { return field_; }

    double norm(const Vec& x) const;
    /// <x, y> = y^* G x
    cplx inner(const Vec& x, const Vec& y) const;
    /// Gram-weighted operator norm of M.
    double operator_norm(const Mat& M) const;

    /// L^* x where G = L L^*; ||x||_X = |L^* x|_2.
    Vec whiten(const Vec& x) const;
    Mat whiten(const Mat& X) const;
    /// X L^{-*}
    Mat unwhiten_right(const Mat& X) const;
    /// L^* M L^{-*}: the matrix of M in an X-orthonormal frame.
    Mat to_orthonormal_frame(const Mat& M) const;

    friend StateSpace make_state_space(Index dim, const Mat& gram, FieldTag field);

private:
    Mat gram_;
    Mat upper_;  // L^*
    FieldTag field_ = FieldTag::Complex;
};

/// Validates symmetry (1e-12 relative) and positive definiteness.
StateSpace make_state_space(Index dim, const Mat& gram, FieldTag field = FieldTag::Complex);

/// Grid metadata of second-order (position, velocity) models.
struct WaveLayout {
    Index n = 0;
    Index position = 0;
    Index velocity = 0;
    double h = 0.0;
    std::vector<double> nodes;
};

class Model;
using ModelPtr = std::shared_ptr<const Model>;

struct ModelOptions {
    std::vector<Vec> kernel_basis;
    /// Closed-form projector; computed from the kernel basis when absent.
    std::optional<Mat> pi0;
    std::optional<Mat> control;
    std::optional<WaveLayout> layout;
    std::string label;
};

/// Generator over a StateSpace with a cached factorization of the shifted
/// generator A - Pi0 (equal to A on kernel-free models).
class Model {
public:
    static ModelPtr create(StateSpace space, Mat A, ModelOptions options = {});

    const StateSpace& space() const { return space_; }
    Index dim() const { return space_.dim(); }
    const Mat& generator() const { return A_; }
    const Mat& shifted_generator() const { return As_; }
    const std::vector<Vec>& kernel_basis() const { return kernel_basis_; }
    bool has_kernel() const { return !kernel_basis_.empty(); }
    const Mat& pi0() const { return pi0_; }
    /// I - Pi0
    const Mat& deflation() const { return deflate_; }
    const std::optional<Mat>& control() const { return control_; }
    const std::optional<WaveLayout>& layout() const { return layout_; }
    const std::string& label() const { return label_; }

    /// Eigen data of A - Pi0. Kernel modes have eigenvalue -1 there and are
    /// flagged in kernel_mode().
    bool diagonalizable() const { return diagonalizable_; }
    double eigenvector_condition() const { return cond_; }
    const Vec& shifted_eigenvalues() const { return lambda_; }
    const Mat& eigenvectors() const { return V_; }
    const std::vector<bool>& kernel_mode() const { return kernel_mode_; }
    /// Eigenvalues of A restricted to range(I - Pi0).
    Vec deflated_eigenvalues() const;
    /// Eigenvalues of A (kernel modes reported as 0).
    Vec eigenvalues() const;

    /// y = V^{-1}(I - Pi0) x; rows of kernel modes vanish.
    Vec to_modal(const Vec& x) const;
    Mat modal_map() const { return Vinv_deflated_; }
    Vec from_modal(const Vec& y) const { return V_ * y; }
    /// Whitened factors: ||f(A)(I - Pi0)|| = ||P diag(f(lambda)) Q||_2.
    const Mat& whitened_vectors() const { return P_; }
    const Mat& whitened_modal_map() const { return Q_; }
    /// Eigenvectors orthonormal in X.
    bool normal() const { return normal_; }
    /// ||V diag(d) V^{-1}(I - Pi0)||_X; max |d| over non-kernel modes when normal.
    double modal_operator_norm(const Vec& d) const;

    /// Matrix of a deflated function f(A)(I - Pi0) given f on the spectrum.
    Mat deflated_function(const Vec& f_lambda) const;

    /// e^{tA}; negative t only with group_allowed.
    Mat propagator(double t, bool group_allowed = false) const;
    Vec propagate(double t, const Vec& x, bool group_allowed = false) const;
    /// ||e^{tA}|| in the X operator norm.
    double semigroup_norm(double t, bool group_allowed = false) const;

private:
    Model() = default;
    void factorize();
    void check_time(double t, bool group_allowed) const;

    StateSpace space_;
    Mat A_, As_, pi0_, deflate_;
    std::vector<Vec> kernel_basis_;
    std::optional<Mat> control_;
    std::optional<WaveLayout> layout_;
    std::string label_;

    bool diagonalizable_ = true;
    double cond_ = 1.0;
    bool normal_ = false;
    Vec lambda_;
    Mat V_, Vinv_deflated_;
    Mat P_, Q_;
    std::vector<bool> kernel_mode_;
};

Vec propagate(const Model& model, double t, const Vec& x, bool group_allowed = false);

/// ||x||_X + ||(-A)^alpha x||_X on range(I - Pi0).
double norm_domain(const Model& model, double alpha, const Vec& x);

/// ||(i eta - A)^{-1}|| on the deflated block.
double resolvent_norm(const Model& model, double eta);

/// Principal (-A)^alpha on the deflated block, times (I - Pi0).
Mat fractional_power(const Model& model, double alpha);

/// Spectral projector onto Ker(A) built from the kernel basis and the left
/// null space of A; zero on kernel-free models.
Mat kernel_projector(const Model& model);

struct SpectrumReport {
    Vec eigenvalues;
    double abscissa = 0.0;         ///< max Re over the deflated spectrum
    double distance_to_axis = 0.0;  ///< min |Re| over the deflated spectrum
    double max_real_part = 0.0;     ///< over the whole spectrum of A
    double tolerance = 0.0;         ///< roundoff floor used for the decision
    bool assumptions_ok = false;
};

SpectrumReport spectrum_report(const Model& model);

/// Samples h(t) of an envelope ||e^{tA} x|| <= h(t) ||x||_{D((-A)^alpha)}.
struct DecayFunction {
    std::vector<double> t_grid;
    std::vector<double> values;
    double alpha = 0.0;

    /// Linear interpolation, clamped to the grid ends.
    double operator()(double t) const;
    void validate() const;
};

}  // namespace semiper
