#pragma once

#include "semiper/operator_core.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace semiper {

struct ClassTag {
    enum class Kind { L1Per, Wk1Per0, Wk1Per };
    Kind kind = Kind::L1Per;
    int k = 0;
};

std::string to_string(const ClassTag& tag);

/// Scalar profile p(t) on one period with exact derivatives.
///
///   constant:   1
///   bump:       exp(4 s - s / (tau (1 - tau))), tau = t/T in (0, 1); peak 1 at T/2
///   sin_power:  sin(pi t / T)^p
///   cos:        cos(2 pi k t / T)
///   sin:        sin(2 pi k t / T)
struct TimeProfile {
    enum class Kind { Constant, Bump, SinPower, Cos, Sin };

    Kind kind = Kind::Constant;
    double sharpness = 1.0;
    int power = 2;
    int harmonic = 1;

    static TimeProfile constant() { return {}; }
    static TimeProfile bump(double sharpness = 1.0);
    static TimeProfile sin_power(int p);
    static TimeProfile cosine(int k);
    static TimeProfile sine(int k);

    /// p^{(j)}(t) for j = 0..order, t in [0, T].
    std::vector<double> derivatives(double t, double period, int order) const;
    /// Largest j such that p^{(i)}(0) = p^{(i)}(T) = 0 for all i < j.
    int vanishing_order() const;
};

std::string to_string(TimeProfile::Kind kind);
TimeProfile::Kind time_profile_kind_from_string(const std::string& name);

struct FourierTerm {
    int k = 0;
    Vec coeff;
};

struct SeparableTerm {
    TimeProfile profile;
    Vec vector;
};

/// Two-point Hermite data: stacks[i][j] = f^{(j)}(times[i]).
struct SampledData {
    std::vector<double> times;
    std::vector<std::vector<Vec>> stacks;
};

/// f(s) = scale * e^{(s - T) A} phi / T for s in [0, T).
struct PullbackData {
    ModelPtr model;
    Vec phi;
    cplx scale = 1.0;
};

class PeriodicForcing {
public:
    enum class Representation { Fourier, Separable, Sampled, SemigroupPullback };

    static PeriodicForcing fourier(double period, std::vector<FourierTerm> terms);
    static PeriodicForcing separable(double period, std::vector<SeparableTerm> terms);
    static PeriodicForcing sampled(double period, SampledData data);
    static PeriodicForcing pullback(double period, ModelPtr model, Vec phi, cplx scale);

    double period() const { return period_; }
    Index dim() const { return dim_; }
    Representation representation() const { return rep_; }
    const ClassTag& class_tag() const { return tag_; }
    void set_class_tag(ClassTag tag) { tag_ = tag; }

    /// Highest derivative order available (max() for closed forms).
    int max_order() const;

    /// f^{(order)}(t) of the T-periodic extension.
    Vec eval(double t, int order = 0) const;
    /// One-sided values at 0+ and T-.
    Vec eval_right_of_zero(int order) const;
    Vec eval_left_of_period(int order) const;

    /// f^{(k)} as a forcing of the same representation.
    PeriodicForcing derivative(int k) const;
    /// Scalar forcing mapped through an input matrix B (dim x 1).
    PeriodicForcing with_input_operator(const Mat& B) const;
    /// alpha f + beta g (same representation and period).
    static PeriodicForcing combine(cplx alpha, const PeriodicForcing& f, cplx beta, const PeriodicForcing& g);

    const std::vector<FourierTerm>& fourier_terms() const { return fourier_; }
    const std::vector<SeparableTerm>& separable_terms() const { return separable_; }
    const SampledData& sampled_data() const { return sampled_; }
    const PullbackData& pullback_data() const { return pullback_; }
    int derivative_offset() const { return offset_; }

    /// Largest |angular frequency| present (0 if not band-limited).
    double bandwidth() const;

private:
    Vec eval_in_period(double t, int order) const;

    double period_ = 1.0;
    Index dim_ = 0;
    Representation rep_ = Representation::Fourier;
    ClassTag tag_;
    int offset_ = 0;  // derivative already applied (separable, sampled, pullback)
    std::vector<FourierTerm> fourier_;
    std::vector<SeparableTerm> separable_;
    SampledData sampled_;
    std::vector<RMat> hermite_;  // monomial coefficients of the Hermite basis
    PullbackData pullback_;
};

PeriodicForcing make_fourier_forcing(double period, std::vector<FourierTerm> terms);

struct ForcingNormReport {
    double l1_norm = 0.0;
    double wk1_norm = 0.0;
    bool class_verified = false;
    int k = 0;
    std::vector<double> endpoint_norms;  ///< max(||f^{(j)}(0)||, ||f^{(j)}(T)||), j < k
    std::vector<double> derivative_l1;   ///< ||f^{(j)}||_{L1}, j <= k
};

/// Endpoint test f^{(j)}(0) = f^{(j)}(T) = 0 for j < k, relative to the mean
/// size ||f^{(j)}||_{L1}/T, and the W^{k,1} norm.
ForcingNormReport check_class(const PeriodicForcing& f, const StateSpace& space, int k, double tol = 1e-10);

/// int_0^T norm(f^{(order)}(s)) ds by panel-doubling composite Gauss.
double l1_norm(const PeriodicForcing& f, const std::function<double(const Vec&)>& norm, int order = 0);

struct QuadratureOptions {
    enum class Method { Auto, Quadrature };
    Method method = Method::Auto;
    int order = 16;
    int min_panels = 0;
    int max_panels = 1 << 14;
    double rel_tol = 1e-12;
};

struct DuhamelResult {
    Vec value;
    int panels = 0;           ///< 0 for closed forms
    double estimated_error = 0.0;
};

/// int_{t0}^{t1} e^{A(t1 - s)} f(s) ds.
DuhamelResult duhamel(const Model& model, const PeriodicForcing& f, double t0, double t1,
                      const QuadratureOptions& quad = {});

/// F_T = int_0^T e^{A(T - s)} f(s) ds.
Vec duhamel_FT(const Model& model, const PeriodicForcing& f, const QuadratureOptions& quad = {});

/// F_T(f^{(k)}); the caller compares with A^k F_T(f).
Vec shift_derivative_FT(const Model& model, const PeriodicForcing& f, int k, const QuadratureOptions& quad = {});

/// Phi_tau(g) = int_0^tau e^{A(tau - s)} B g(s) ds for a scalar forcing g.
Vec boundary_response(const Model& model, const PeriodicForcing& g, double tau, const QuadratureOptions& quad = {});

/// Smallest C with ||Phi_tau g||_X <= C ||g||_{L2(0, tau)}.
double admissibility_constant(const Model& model, double tau);

/// sup over s in [0, T] of ||e^{sA}|| sampled on `samples` points.
double semigroup_bound(const Model& model, double T, int samples = 64);

}  // namespace semiper
