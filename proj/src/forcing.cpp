#include "semiper/forcing.hpp"

#include "semiper/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace semiper {

namespace {

constexpr const char* kModule = "forcing";
constexpr double kPi = std::numbers::pi;
constexpr int kSmooth = 64;  // "any order" in class tags

[[noreturn]] void fail(const char* name, const std::string& detail) {
    detail::raise(kModule, name, detail);
}

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

using Poly = std::vector<double>;

Poly poly_mul(const Poly& a, const Poly& b) {
    Poly r(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

Poly poly_pow(const Poly& a, int p) {
    Poly r{1.0};
    for (int i = 0; i < p; ++i) r = poly_mul(r, a);
    return r;
}

/// Two-point Hermite basis on [0, 1] matching derivatives 0..m at both ends.
/// Row j of basis[0] is H0_j, of basis[1] is H1_j, in monomial coefficients.
std::vector<RMat> hermite_basis(int m) {
    const int deg = 2 * m + 1;
    std::vector<RMat> basis(2, RMat::Zero(m + 1, deg + 1));
    for (int j = 0; j <= m; ++j) {
        Poly s0(m - j + 1, 0.0);
        for (int i = 0; i <= m - j; ++i) s0[i] = binomial(m + i, i);  // sum C(m+i,i) tau^i
        Poly left = poly_mul(poly_mul(poly_pow({0.0, 1.0}, j), poly_pow({1.0, -1.0}, m + 1)), s0);
        Poly s1{0.0};
        for (int i = 0; i <= m - j; ++i) {
            Poly term = poly_pow({1.0, -1.0}, i);
            for (double& c : term) c *= binomial(m + i, i);
            if (term.size() > s1.size()) s1.resize(term.size(), 0.0);
            for (std::size_t c = 0; c < term.size(); ++c) s1[c] += term[c];
        }
        Poly right = poly_mul(poly_mul(poly_pow({-1.0, 1.0}, j), poly_pow({0.0, 1.0}, m + 1)), s1);
        for (std::size_t c = 0; c < left.size() && c <= static_cast<std::size_t>(deg); ++c) basis[0](j, c) = left[c] / factorial(j);
        for (std::size_t c = 0; c < right.size() && c <= static_cast<std::size_t>(deg); ++c) basis[1](j, c) = right[c] / factorial(j);
    }
    return basis;
}

/// r-th derivative of each basis row at tau.
RVec basis_derivative(const RMat& basis, double tau, int r) {
    const int deg = static_cast<int>(basis.cols()) - 1;
    RVec powers = RVec::Zero(deg + 1);
    for (int c = r; c <= deg; ++c) {
        double f = 1.0;
        for (int i = 0; i < r; ++i) f *= (c - i);
        powers(c) = f * std::pow(tau, c - r);
    }
    return basis * powers;
}

cplx phi1(cplx z) {
    if (std::abs(z) < 1e-3) return 1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)));
    return (std::exp(z) - 1.0) / z;
}

int count_vanishing(const std::function<Vec(int)>& deriv_at_zero, const std::function<Vec(int)>& deriv_at_T,
                    int max_order, double scale) {
    int k = 0;
    while (k <= max_order && k < kSmooth) {
        const double v = std::max(deriv_at_zero(k).norm(), deriv_at_T(k).norm());
        if (v > 1e-13 * scale) break;
        ++k;
    }
    return k;
}

}  // namespace

std::string to_string(const ClassTag& tag) {
    std::ostringstream os;
    switch (tag.kind) {
        case ClassTag::Kind::L1Per: os << "L1_per"; break;
        case ClassTag::Kind::Wk1Per0: os << "Wk1_per0(" << tag.k << ")"; break;
        case ClassTag::Kind::Wk1Per: os << "Wk1_per(" << tag.k << ")"; break;
    }
    return os.str();
}

// --------------------------------------------------------------- TimeProfile

TimeProfile TimeProfile::bump(double sharpness) {
    TimeProfile p;
    p.kind = Kind::Bump;
    p.sharpness = sharpness;
    return p;
}

TimeProfile TimeProfile::sin_power(int power) {
    TimeProfile p;
    p.kind = Kind::SinPower;
    p.power = power;
    return p;
}

TimeProfile TimeProfile::cosine(int k) {
    TimeProfile p;
    p.kind = Kind::Cos;
    p.harmonic = k;
    return p;
}

TimeProfile TimeProfile::sine(int k) {
    TimeProfile p;
    p.kind = Kind::Sin;
    p.harmonic = k;
    return p;
}

std::vector<double> TimeProfile::derivatives(double t, double period, int order) const {
    std::vector<double> out(order + 1, 0.0);
    switch (kind) {
        case Kind::Constant:
            out[0] = 1.0;
            break;
        case Kind::Bump: {
            const double tau = t / period;
            if (tau <= 0.0 || tau >= 1.0) break;
            const double s = sharpness;
            if (4.0 * s - s / (tau * (1.0 - tau)) < -740.0) break;
            const Jet x = Jet::variable(order, tau, 1.0 / period);
            const Jet g = x * (-x + 1.0);
            const Jet e = exp(Jet(order, -s) / g + 4.0 * s);
            for (int j = 0; j <= order; ++j) out[j] = e.derivative(j);
            break;
        }
        case Kind::SinPower: {
            const Jet x = Jet::variable(order, kPi * t / period, kPi / period);
            Jet sn(order), cs(order);
            sincos(x, sn, cs);
            Jet r(order, 1.0);
            for (int i = 0; i < power; ++i) r = r * sn;
            for (int j = 0; j <= order; ++j) out[j] = r.derivative(j);
            break;
        }
        case Kind::Cos:
        case Kind::Sin: {
            const double w = 2.0 * kPi * harmonic / period;
            const double shift = kind == Kind::Sin ? -0.5 * kPi : 0.0;
            for (int j = 0; j <= order; ++j) out[j] = std::pow(w, j) * std::cos(w * t + shift + 0.5 * kPi * j);
            break;
        }
    }
    return out;
}

int TimeProfile::vanishing_order() const {
    switch (kind) {
        case Kind::Constant: return 0;
        case Kind::Bump: return kSmooth;
        case Kind::SinPower: return power;
        case Kind::Cos: return 0;
        case Kind::Sin: return harmonic == 0 ? kSmooth : 1;
    }
    return 0;
}

std::string to_string(TimeProfile::Kind kind) {
    switch (kind) {
        case TimeProfile::Kind::Constant: return "constant";
        case TimeProfile::Kind::Bump: return "bump";
        case TimeProfile::Kind::SinPower: return "sin_power";
        case TimeProfile::Kind::Cos: return "cos";
        case TimeProfile::Kind::Sin: return "sin";
    }
    return "constant";
}

TimeProfile::Kind time_profile_kind_from_string(const std::string& name) {
    if (name == "constant") return TimeProfile::Kind::Constant;
    if (name == "bump") return TimeProfile::Kind::Bump;
    if (name == "sin_power") return TimeProfile::Kind::SinPower;
    if (name == "cos") return TimeProfile::Kind::Cos;
    if (name == "sin") return TimeProfile::Kind::Sin;
    fail("InvalidForcing", "unknown time profile '" + name + "'");
}

// ----------------------------------------------------------- PeriodicForcing

namespace {

void check_period(double period) {
    if (!(period > 0.0) || !std::isfinite(period)) fail("InvalidForcing", "period must be finite and > 0");
}

}  // namespace

PeriodicForcing PeriodicForcing::fourier(double period, std::vector<FourierTerm> terms) {
    check_period(period);
    if (terms.empty()) fail("InvalidForcing", "fourier forcing needs at least one coefficient");
    PeriodicForcing f;
    f.period_ = period;
    f.rep_ = Representation::Fourier;
    f.dim_ = terms.front().coeff.size();
    for (const auto& t : terms) {
        if (t.coeff.size() != f.dim_) fail("InvalidForcing", "fourier coefficients differ in length");
        if (!t.coeff.allFinite()) fail("InvalidForcing", "non-finite fourier coefficient");
    }
    f.fourier_ = std::move(terms);
    double scale = 0.0;
    for (const auto& t : f.fourier_) scale += t.coeff.norm();
    const int kv = count_vanishing([&](int j) { return f.eval_right_of_zero(j); },
                                   [&](int j) { return f.eval_left_of_period(j); }, kSmooth, scale);
    f.tag_ = kv > 0 ? ClassTag{ClassTag::Kind::Wk1Per0, kv} : ClassTag{ClassTag::Kind::Wk1Per, kSmooth};
    return f;
}

PeriodicForcing make_fourier_forcing(double period, std::vector<FourierTerm> terms) {
    return PeriodicForcing::fourier(period, std::move(terms));
}

PeriodicForcing PeriodicForcing::separable(double period, std::vector<SeparableTerm> terms) {
    check_period(period);
    if (terms.empty()) fail("InvalidForcing", "separable forcing needs at least one term");
    PeriodicForcing f;
    f.period_ = period;
    f.rep_ = Representation::Separable;
    f.dim_ = terms.front().vector.size();
    int kv = kSmooth;
    for (const auto& t : terms) {
        if (t.vector.size() != f.dim_) fail("InvalidForcing", "separable vectors differ in length");
        if (!t.vector.allFinite()) fail("InvalidForcing", "non-finite separable vector");
        if (t.profile.kind == TimeProfile::Kind::Bump && !(t.profile.sharpness > 0.0))
            fail("InvalidForcing", "bump sharpness must be > 0");
        if (t.profile.kind == TimeProfile::Kind::SinPower && t.profile.power < 0)
            fail("InvalidForcing", "sin_power needs p >= 0");
        if (t.vector.norm() > 0.0) kv = std::min(kv, t.profile.vanishing_order());
    }
    f.separable_ = std::move(terms);
    f.tag_ = kv > 0 ? ClassTag{ClassTag::Kind::Wk1Per0, kv} : ClassTag{ClassTag::Kind::Wk1Per, kSmooth};
    return f;
}

PeriodicForcing PeriodicForcing::sampled(double period, SampledData data) {
    check_period(period);
    const std::size_t n = data.times.size();
    if (n == 0 || data.stacks.size() != n) fail("InvalidForcing", "sampled forcing needs matching times and stacks");
    if (data.times.front() != 0.0) fail("InvalidForcing", "first sample time must be 0");
    for (std::size_t i = 1; i < n; ++i)
        if (!(data.times[i] > data.times[i - 1])) fail("InvalidForcing", "sample times must increase");
    if (!(data.times.back() < period)) fail("InvalidForcing", "sample times must lie in [0, T)");
    const std::size_t depth = data.stacks.front().size();
    if (depth == 0) fail("InvalidForcing", "empty derivative stack");
    PeriodicForcing f;
    f.period_ = period;
    f.rep_ = Representation::Sampled;
    f.dim_ = data.stacks.front().front().size();
    for (const auto& stack : data.stacks) {
        if (stack.size() != depth) fail("InvalidForcing", "derivative stacks differ in depth");
        for (const Vec& v : stack) {
            if (v.size() != f.dim_) fail("InvalidForcing", "sample vectors differ in length");
            if (!v.allFinite()) fail("InvalidForcing", "non-finite sample");
        }
    }
    const int kmax = static_cast<int>(depth) - 1;
    f.hermite_ = hermite_basis(kmax);
    f.sampled_ = std::move(data);
    double scale = 0.0;
    for (const auto& stack : f.sampled_.stacks) scale = std::max(scale, stack.front().norm());
    const auto& first = f.sampled_.stacks.front();
    int kv = 0;
    while (kv <= kmax && first[kv].norm() <= 1e-13 * std::max(scale, 1e-300)) ++kv;
    f.tag_ = kv > 0 ? ClassTag{ClassTag::Kind::Wk1Per0, std::min(kv, kmax)} : ClassTag{ClassTag::Kind::Wk1Per, kmax};
    return f;
}

PeriodicForcing PeriodicForcing::pullback(double period, ModelPtr model, Vec phi, cplx scale) {
    check_period(period);
    if (!model) fail("InvalidForcing", "pullback forcing needs a model");
    if (phi.size() != model->dim()) fail("InvalidForcing", "phi has wrong length");
    PeriodicForcing f;
    f.period_ = period;
    f.rep_ = Representation::SemigroupPullback;
    f.dim_ = phi.size();
    f.pullback_ = PullbackData{std::move(model), std::move(phi), scale};
    f.tag_ = ClassTag{ClassTag::Kind::L1Per, 0};
    return f;
}

int PeriodicForcing::max_order() const {
    if (rep_ == Representation::Sampled) return static_cast<int>(sampled_.stacks.front().size()) - 1 - offset_;
    return std::numeric_limits<int>::max() / 2;
}

Vec PeriodicForcing::eval(double t, int order) const {
    if (!std::isfinite(t)) fail("InvalidForcing", "evaluation time is not finite");
    double tt = std::fmod(t, period_);
    if (tt < 0.0) tt += period_;
    if (tt >= period_) tt = 0.0;
    return eval_in_period(tt, order);
}

Vec PeriodicForcing::eval_right_of_zero(int order) const {
    return eval_in_period(0.0, order);
}

Vec PeriodicForcing::eval_left_of_period(int order) const {
    return eval_in_period(period_, order);
}

Vec PeriodicForcing::eval_in_period(double t, int order) const {
    if (order < 0) fail("InvalidForcing", "negative derivative order");
    if (order > max_order()) {
        std::ostringstream msg;
        msg << "derivative of order " << order << " requested, stack holds " << max_order();
        fail("DerivativesUnavailable", msg.str());
    }
    const int r = order + offset_;
    Vec out = Vec::Zero(dim_);
    switch (rep_) {
        case Representation::Fourier:
            for (const auto& term : fourier_) {
                const double w = 2.0 * kPi * term.k / period_;
                out += std::pow(cplx(0.0, w), r) * std::exp(cplx(0.0, w * t)) * term.coeff;
            }
            break;
        case Representation::Separable:
            for (const auto& term : separable_) out += term.profile.derivatives(t, period_, r)[r] * term.vector;
            break;
        case Representation::Sampled: {
            const auto& times = sampled_.times;
            std::size_t i = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin()) - 1;
            const double a = times[i];
            const double b = (i + 1 < times.size()) ? times[i + 1] : period_;
            const auto& left = sampled_.stacks[i];
            const auto& right = sampled_.stacks[(i + 1) % times.size()];
            const double H = b - a;
            const double tau = (t - a) / H;
            const RVec d0 = basis_derivative(hermite_[0], tau, r);
            const RVec d1 = basis_derivative(hermite_[1], tau, r);
            const double scale = std::pow(H, -r);
            for (std::size_t j = 0; j < left.size(); ++j) {
                const double hj = std::pow(H, static_cast<double>(j)) * scale;
                out += hj * (d0(j) * left[j] + d1(j) * right[j]);
            }
            break;
        }
        case Representation::SemigroupPullback: {
            const Model& m = *pullback_.model;
            Vec x = m.propagate(t - period_, pullback_.phi, true);
            for (int i = 0; i < r; ++i) x = m.generator() * x;
            out = (pullback_.scale / period_) * x;
            break;
        }
    }
    return out;
}

PeriodicForcing PeriodicForcing::derivative(int k) const {
    if (k < 0) fail("InvalidForcing", "negative derivative order");
    if (k > max_order()) fail("DerivativesUnavailable", "derivative beyond the stored stack");
    PeriodicForcing d = *this;
    if (rep_ == Representation::Fourier) {
        for (auto& term : d.fourier_) term.coeff *= std::pow(cplx(0.0, 2.0 * kPi * term.k / period_), k);
    } else {
        d.offset_ += k;
    }
    if (tag_.kind == ClassTag::Kind::Wk1Per0 && tag_.k > k) {
        d.tag_ = ClassTag{ClassTag::Kind::Wk1Per0, tag_.k - k};
    } else {
        d.tag_ = ClassTag{ClassTag::Kind::L1Per, 0};
    }
    return d;
}

PeriodicForcing PeriodicForcing::with_input_operator(const Mat& B) const {
    if (dim_ != 1 || B.cols() != 1) fail("InvalidForcing", "input operator needs a scalar forcing and B with one column");
    PeriodicForcing g = *this;
    g.dim_ = B.rows();
    switch (rep_) {
        case Representation::Fourier:
            for (auto& term : g.fourier_) term.coeff = B * term.coeff;
            break;
        case Representation::Separable:
            for (auto& term : g.separable_) term.vector = B * term.vector;
            break;
        case Representation::Sampled:
            for (auto& stack : g.sampled_.stacks)
                for (Vec& v : stack) v = B * v;
            break;
        case Representation::SemigroupPullback:
            fail("InvalidForcing", "pullback forcings cannot be lifted");
    }
    return g;
}

PeriodicForcing PeriodicForcing::combine(cplx alpha, const PeriodicForcing& f, cplx beta, const PeriodicForcing& g) {
    if (f.rep_ != g.rep_ || f.period_ != g.period_ || f.dim_ != g.dim_ || f.offset_ != g.offset_)
        fail("InvalidForcing", "combine needs forcings of the same representation, period and size");
    PeriodicForcing r = f;
    switch (f.rep_) {
        case Representation::Fourier: {
            std::map<int, Vec> acc;
            for (const auto& t : f.fourier_) acc[t.k] = acc.count(t.k) ? Vec(acc[t.k] + alpha * t.coeff) : Vec(alpha * t.coeff);
            for (const auto& t : g.fourier_) acc[t.k] = acc.count(t.k) ? Vec(acc[t.k] + beta * t.coeff) : Vec(beta * t.coeff);
            r.fourier_.clear();
            for (auto& [k, c] : acc) r.fourier_.push_back({k, c});
            break;
        }
        case Representation::Separable:
            r.separable_.clear();
            for (const auto& t : f.separable_) r.separable_.push_back({t.profile, alpha * t.vector});
            for (const auto& t : g.separable_) r.separable_.push_back({t.profile, beta * t.vector});
            break;
        case Representation::Sampled:
            if (f.sampled_.times != g.sampled_.times || f.sampled_.stacks.front().size() != g.sampled_.stacks.front().size())
                fail("InvalidForcing", "combine needs identical sample grids");
            for (std::size_t i = 0; i < r.sampled_.stacks.size(); ++i)
                for (std::size_t j = 0; j < r.sampled_.stacks[i].size(); ++j)
                    r.sampled_.stacks[i][j] = alpha * f.sampled_.stacks[i][j] + beta * g.sampled_.stacks[i][j];
            break;
        case Representation::SemigroupPullback:
            if (f.pullback_.model != g.pullback_.model) fail("InvalidForcing", "combine needs the same pullback model");
            r.pullback_.phi = (alpha * f.pullback_.scale) * f.pullback_.phi + (beta * g.pullback_.scale) * g.pullback_.phi;
            r.pullback_.scale = 1.0;
            break;
    }
    if (f.tag_.kind == g.tag_.kind) {
        r.tag_.k = std::min(f.tag_.k, g.tag_.k);
    } else {
        r.tag_ = ClassTag{ClassTag::Kind::L1Per, 0};
    }
    return r;
}

double PeriodicForcing::bandwidth() const {
    double w = 0.0;
    if (rep_ == Representation::Fourier) {
        for (const auto& t : fourier_) w = std::max(w, std::abs(2.0 * kPi * t.k / period_));
    } else if (rep_ == Representation::Separable) {
        for (const auto& t : separable_) {
            if (t.profile.kind == TimeProfile::Kind::Cos || t.profile.kind == TimeProfile::Kind::Sin)
                w = std::max(w, std::abs(2.0 * kPi * t.profile.harmonic / period_));
            if (t.profile.kind == TimeProfile::Kind::SinPower) w = std::max(w, kPi * t.profile.power / period_);
            if (t.profile.kind == TimeProfile::Kind::Bump) w = std::max(w, 8.0 * kPi * std::sqrt(t.profile.sharpness) / period_);
        }
    }
    return w;
}

// ------------------------------------------------------------------- panels

namespace {

/// Panel edges on [t0, t1]: aligned with sample nodes for sampled forcings,
/// each base interval split into `refine` equal panels.
std::vector<double> panel_edges(const PeriodicForcing& f, double t0, double t1, int base, int refine) {
    std::vector<double> cuts{t0};
    if (f.representation() == PeriodicForcing::Representation::Sampled) {
        const double T = f.period();
        const auto& times = f.sampled_data().times;
        const double first = std::floor(t0 / T);
        for (double m = first; m * T < t1; m += 1.0) {
            for (double s : times) {
                const double x = m * T + s;
                if (x > t0 + 1e-14 * T && x < t1 - 1e-14 * T) cuts.push_back(x);
            }
        }
    } else {
        for (int p = 1; p < base; ++p) cuts.push_back(t0 + (t1 - t0) * p / base);
    }
    cuts.push_back(t1);
    std::vector<double> edges{t0};
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        for (int r = 1; r <= refine; ++r) edges.push_back(cuts[i] + (cuts[i + 1] - cuts[i]) * r / refine);
    }
    edges.back() = t1;
    return edges;
}

/// Barycentric Lagrange basis at x for the nodes of a rule on [0, 1].
class LagrangeBasis {
public:
    explicit LagrangeBasis(const std::vector<double>& nodes) : x_(nodes), w_(nodes.size(), 1.0) {
        for (std::size_t j = 0; j < x_.size(); ++j)
            for (std::size_t k = 0; k < x_.size(); ++k)
                if (k != j) w_[j] /= (x_[j] - x_[k]);
    }
    void eval(double x, RVec& out) const {
        const std::size_t n = x_.size();
        for (std::size_t j = 0; j < n; ++j) {
            if (x == x_[j]) {
                out.setZero();
                out(j) = 1.0;
                return;
            }
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            out(j) = w_[j] / (x - x_[j]);
            denom += out(j);
        }
        out /= denom;
    }

private:
    std::vector<double> x_;
    std::vector<double> w_;
};

/// Exponentially fitted weights W(m, q) = H int_0^1 e^{z(1 - tau)} l_q(tau) dtau, z = lambda_m H.
struct FittedWeights {
    Mat W;
    Vec E;  // e^{lambda H}
};

FittedWeights fitted_weights(const Vec& lambda, const std::vector<bool>& skip, double H,
                             const std::vector<double>& tau_nodes) {
    const int Q = static_cast<int>(tau_nodes.size());
    const Index n = lambda.size();
    FittedWeights fw{Mat::Zero(n, Q), Vec::Zero(n)};
    const GaussRule& inner = gauss_legendre(32);
    const LagrangeBasis basis(tau_nodes);
    RVec l(Q);
    for (Index m = 0; m < n; ++m) {
        if (skip[m]) continue;
        const cplx z = lambda(m) * H;
        fw.E(m) = std::exp(z);
        // Sub-intervals: geometric grading toward tau = 1 for strong decay,
        // and at most half a turn of phase per piece.
        std::vector<double> cuts{1.0};
        if (std::abs(z) > 1.0) {
            const double delta = std::min(1.0, 1.0 / std::max(std::abs(z.real()), 1.0));
            for (double d = delta; d < 1.0; d *= 2.0) cuts.push_back(1.0 - d);
        }
        cuts.push_back(0.0);
        std::reverse(cuts.begin(), cuts.end());
        std::vector<double> pieces{0.0};
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double len = cuts[i + 1] - cuts[i];
            const int split = std::max(1, static_cast<int>(std::ceil(std::abs(z.imag()) * len / kPi)));
            for (int s = 1; s <= split; ++s) pieces.push_back(cuts[i] + len * s / split);
        }
        Eigen::RowVectorXcd acc = Eigen::RowVectorXcd::Zero(Q);
        for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
            const double a = pieces[i], b = pieces[i + 1];
            const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
            for (int g = 0; g < 32; ++g) {
                const double tau = mid + half * inner.nodes[g];
                basis.eval(tau, l);
                const cplx e = half * inner.weights[g] * std::exp(z * (1.0 - tau));
                acc += e * l.transpose().cast<cplx>();
            }
        }
        fw.W.row(m) = H * acc;
    }
    return fw;
}

enum class Path { ClosedFourier, Fitted, Nodal };

Path choose_path(const Model& model, const PeriodicForcing& f, const QuadratureOptions& quad) {
    using R = PeriodicForcing::Representation;
    if (!model.diagonalizable()) return Path::Nodal;
    if (f.representation() == R::SemigroupPullback) return Path::Nodal;
    if (f.representation() == R::Fourier && quad.method == QuadratureOptions::Method::Auto) return Path::ClosedFourier;
    return Path::Fitted;
}

Vec closed_fourier(const Model& model, const PeriodicForcing& f, double t0, double t1) {
    const Vec& lam = model.shifted_eigenvalues();
    const double H = t1 - t0;
    Vec modal = Vec::Zero(model.dim());
    Vec kernel = Vec::Zero(model.dim());
    for (const auto& term : f.fourier_terms()) {
        const double w = 2.0 * kPi * term.k / f.period();
        const Vec c = term.coeff;
        const Vec y = model.to_modal(c);
        const cplx phase = std::exp(cplx(0.0, w * t1));
        for (Index m = 0; m < lam.size(); ++m) {
            if (model.kernel_mode()[m]) continue;
            modal(m) += phase * H * phi1((lam(m) - cplx(0.0, w)) * H) * y(m);
        }
        if (model.has_kernel()) kernel += phase * H * phi1(cplx(0.0, -w * H)) * (model.pi0() * c);
    }
    return model.from_modal(modal) + kernel;
}

struct Pass {
    Vec value;
    double scale = 0.0;  // sum of w ||f(s)||_2, an L1 size for the error floor
};

class Integrator {
public:
    Integrator(const Model& model, const PeriodicForcing& f, double t0, double t1, int order)
        : model_(model), f_(f), t0_(t0), t1_(t1), rule_(gauss_legendre(order)) {
        for (double x : rule_.nodes) tau_.push_back(0.5 * (x + 1.0));
        using R = PeriodicForcing::Representation;
        if (model.diagonalizable()) {
            if (f.representation() == R::Separable) {
                for (const auto& t : f.separable_terms()) modal_vectors_.push_back(model.to_modal(t.vector));
            } else if (f.representation() == R::Fourier) {
                for (const auto& t : f.fourier_terms()) modal_vectors_.push_back(model.to_modal(t.coeff));
            }
        }
    }

    Pass fitted(const std::vector<double>& edges) {
        const Model& m = model_;
        const Index n = m.dim();
        const int Q = static_cast<int>(tau_.size());
        Vec acc = Vec::Zero(n), kern = Vec::Zero(n);
        Pass pass;
        for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
            const double a = edges[p], H = edges[p + 1] - edges[p];
            const FittedWeights& fw = weights_for(H);
            Vec contrib = Vec::Zero(n);
            for (int q = 0; q < Q; ++q) {
                const double s = a + H * tau_[q];
                const Vec fs = f_.eval(s);
                const Vec y = modal_forcing(s, fs);
                contrib += fw.W.col(q).cwiseProduct(y);
                const double w = 0.5 * H * rule_.weights[q];
                if (m.has_kernel()) kern += w * fs;
                pass.scale += w * fs.norm();
            }
            acc = fw.E.cwiseProduct(acc) + contrib;
        }
        pass.value = m.from_modal(acc);
        if (m.has_kernel()) pass.value += m.pi0() * kern;
        return pass;
    }

    Pass nodal(const std::vector<double>& edges) {
        const Model& m = model_;
        const Index n = m.dim();
        Vec acc = Vec::Zero(n), kern = Vec::Zero(n);
        Pass pass;
        for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
            const double a = edges[p], H = edges[p + 1] - edges[p];
            for (std::size_t q = 0; q < tau_.size(); ++q) {
                const double s = a + H * tau_[q];
                const double w = 0.5 * H * rule_.weights[q];
                const Vec fs = f_.eval(s);
                pass.scale += w * fs.norm();
                if (m.diagonalizable()) {
                    Vec y = m.to_modal(fs);
                    y.array() *= ((t1_ - s) * m.shifted_eigenvalues().array()).exp();
                    acc += w * y;
                    if (m.has_kernel()) kern += w * fs;
                } else {
                    acc += w * (m.propagator(t1_ - s) * fs);
                }
            }
        }
        if (!m.diagonalizable()) {
            pass.value = acc;
            return pass;
        }
        pass.value = m.from_modal(acc);
        if (m.has_kernel()) pass.value += m.pi0() * kern;
        return pass;
    }

private:
    Vec modal_forcing(double s, const Vec& fs) const {
        using R = PeriodicForcing::Representation;
        const int r = f_.derivative_offset();
        Vec y = Vec::Zero(model_.dim());
        if (f_.representation() == R::Separable) {
            const double T = f_.period();
            const double tt = s - T * std::floor(s / T);
            const auto& terms = f_.separable_terms();
            for (std::size_t i = 0; i < terms.size(); ++i)
                y += terms[i].profile.derivatives(tt, T, r)[r] * modal_vectors_[i];
            return y;
        }
        if (f_.representation() == R::Fourier) {
            const auto& terms = f_.fourier_terms();
            for (std::size_t i = 0; i < terms.size(); ++i)
                y += std::exp(cplx(0.0, 2.0 * kPi * terms[i].k * s / f_.period())) * modal_vectors_[i];
            return y;
        }
        return model_.to_modal(fs);
    }

    const FittedWeights& weights_for(double H) {
        for (auto& [h, w] : cache_)
            if (std::abs(h - H) <= 1e-13 * H) return w;
        cache_.emplace_back(H, fitted_weights(model_.shifted_eigenvalues(), model_.kernel_mode(), H, tau_));
        return cache_.back().second;
    }

    const Model& model_;
    const PeriodicForcing& f_;
    double t0_, t1_;
    const GaussRule& rule_;
    std::vector<double> tau_;
    std::vector<Vec> modal_vectors_;
    std::vector<std::pair<double, FittedWeights>> cache_;
};

}  // namespace

DuhamelResult duhamel(const Model& model, const PeriodicForcing& f, double t0, double t1, const QuadratureOptions& quad) {
    if (f.dim() != model.dim()) {
        std::ostringstream msg;
        msg << "forcing has length " << f.dim() << ", model has dim " << model.dim();
        fail("DimensionMismatch", msg.str());
    }
    if (!(t1 >= t0) || !std::isfinite(t0) || !std::isfinite(t1)) fail("InvalidInterval", "need finite t0 <= t1");
    DuhamelResult result;
    if (t1 == t0) {
        result.value = Vec::Zero(model.dim());
        return result;
    }
    const Path path = choose_path(model, f, quad);
    if (path == Path::ClosedFourier) {
        result.value = closed_fourier(model, f, t0, t1);
        return result;
    }

    const double span = t1 - t0;
    int base = std::max(quad.min_panels, 2);
    if (path == Path::Fitted) {
        base = std::max(base, static_cast<int>(std::ceil(f.bandwidth() * span / kPi)));
        double im = 0.0;
        for (Index m = 0; m < model.shifted_eigenvalues().size(); ++m)
            im = std::max(im, std::abs(model.shifted_eigenvalues()(m).imag()));
        base = std::max(base, static_cast<int>(std::ceil(im * span / (64.0 * kPi))));
    }
    if (f.representation() == PeriodicForcing::Representation::Sampled) base = 1;

    Integrator integ(model, f, t0, t1, quad.order);
    auto run = [&](int refine) {
        const auto edges = panel_edges(f, t0, t1, base, refine);
        return std::make_pair(path == Path::Fitted ? integ.fitted(edges) : integ.nodal(edges),
                              static_cast<int>(edges.size()) - 1);
    };
    int refine = 1;
    auto [prev, panels] = run(refine);
    const double floor = 1e-14 * prev.scale;
    for (;;) {
        refine *= 2;
        auto [cur, cur_panels] = run(refine);
        const double err = model.space().norm(cur.value - prev.value);
        const double size = model.space().norm(cur.value);
        if (err <= quad.rel_tol * size || err <= floor * std::sqrt(model.space().gram().cwiseAbs().maxCoeff())) {
            result.value = cur.value;
            result.panels = cur_panels;
            result.estimated_error = err;
            return result;
        }
        if (cur_panels * 2 > quad.max_panels) {
            std::ostringstream msg;
            msg << "panel doubling did not converge: change " << err << " at " << cur_panels << " panels";
            fail("QuadratureUnderResolved", msg.str());
        }
        prev = cur;
        panels = cur_panels;
    }
}

Vec duhamel_FT(const Model& model, const PeriodicForcing& f, const QuadratureOptions& quad) {
    return duhamel(model, f, 0.0, f.period(), quad).value;
}

Vec shift_derivative_FT(const Model& model, const PeriodicForcing& f, int k, const QuadratureOptions& quad) {
    const ForcingNormReport report = check_class(f, model.space(), k);
    if (!report.class_verified) {
        std::ostringstream msg;
        msg << "forcing is not in W^{" << k << ",1}_per0";
        fail("ClassViolation", msg.str());
    }
    return duhamel_FT(model, f.derivative(k), quad);
}

// --------------------------------------------------------------------- norms

double l1_norm(const PeriodicForcing& f, const std::function<double(const Vec&)>& norm, int order) {
    const double T = f.period();
    const int Q = 16;
    const GaussRule& rule = gauss_legendre(Q);
    const bool sampled = f.representation() == PeriodicForcing::Representation::Sampled;
    auto integrate = [&](int refine) {
        const auto edges = panel_edges(f, 0.0, T, sampled ? 1 : 16, refine);
        double total = 0.0;
        for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
            const double a = edges[p], H = edges[p + 1] - edges[p];
            for (int q = 0; q < Q; ++q) {
                const double s = a + 0.5 * H * (rule.nodes[q] + 1.0);
                total += 0.5 * H * rule.weights[q] * norm(f.eval(s, order));
            }
        }
        return total;
    };
    double prev = integrate(1);
    for (int refine = 2; refine <= 256; refine *= 2) {
        const double cur = integrate(refine);
        if (std::abs(cur - prev) <= 1e-13 * std::abs(cur)) return cur;
        prev = cur;
    }
    return prev;
}

ForcingNormReport check_class(const PeriodicForcing& f, const StateSpace& space, int k, double tol) {
    if (k < 0) fail("InvalidForcing", "class order must be >= 0");
    if (k > f.max_order()) {
        std::ostringstream msg;
        msg << "class check of order " << k << " needs derivatives the forcing does not store (max " << f.max_order() << ")";
        fail("DerivativesUnavailable", msg.str());
    }
    if (f.dim() != space.dim()) fail("DimensionMismatch", "forcing and space differ in size");
    ForcingNormReport report;
    report.k = k;
    auto xnorm = [&](const Vec& v) { return space.norm(v); };
    for (int j = 0; j <= k; ++j) report.derivative_l1.push_back(l1_norm(f, xnorm, j));
    report.l1_norm = report.derivative_l1.front();
    for (double v : report.derivative_l1) report.wk1_norm += v;
    report.class_verified = true;
    for (int j = 0; j < k; ++j) {
        const double e = std::max(space.norm(f.eval_right_of_zero(j)), space.norm(f.eval_left_of_period(j)));
        report.endpoint_norms.push_back(e);
        const double scale = report.derivative_l1[j] / f.period();
        if (e > tol * scale) report.class_verified = false;
    }
    return report;
}

// ------------------------------------------------------------ boundary input

Vec boundary_response(const Model& model, const PeriodicForcing& g, double tau, const QuadratureOptions& quad) {
    if (!model.control()) fail("MissingControl", "model has no input operator");
    return duhamel(model, g.with_input_operator(*model.control()), 0.0, tau, quad).value;
}

double admissibility_constant(const Model& model, double tau) {
    if (!model.control()) fail("MissingControl", "model has no input operator");
    if (!model.diagonalizable()) fail("NotDiagonalizable", "admissibility constant needs an eigenbasis");
    const Mat& B = *model.control();
    const Index n = model.dim();
    Mat P(n, n + 1);
    P.leftCols(n) = model.whitened_vectors();
    Vec lam(n + 1);
    lam.head(n) = model.shifted_eigenvalues();
    lam(n) = 0.0;
    Mat W = Mat::Zero(n, n);
    for (Index c = 0; c < B.cols(); ++c) {
        Vec b(n + 1);
        b.head(n) = model.to_modal(B.col(c));
        b(n) = 1.0;
        P.col(n) = model.space().whiten(Vec(model.pi0() * B.col(c)));
        Mat M(n + 1, n + 1);
        for (Index k = 0; k <= n; ++k)
            for (Index l = 0; l <= n; ++l)
                M(k, l) = b(k) * std::conj(b(l)) * tau * phi1((lam(k) + std::conj(lam(l))) * tau);
        W += P * M * P.adjoint();
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (W + W.adjoint()), Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double semigroup_bound(const Model& model, double T, int samples) {
    double sup = 1.0;
    for (int i = 1; i <= samples; ++i) sup = std::max(sup, model.semigroup_norm(T * i / samples));
    return sup;
}

}  // namespace semiper
