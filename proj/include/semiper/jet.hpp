#pragma once

#include <cmath>
#include <vector>

namespace semiper {

/// Truncated Taylor series c_0 + c_1 e + ... + c_K e^K, used to get exact
/// derivatives of closed-form time profiles: f^{(j)}(t) = j! c_j.
class Jet {
public:
    explicit Jet(int order, double value = 0.0) : c_(order + 1, 0.0) { c_[0] = value; }

    static Jet variable(int order, double value, double slope = 1.0) {
        Jet j(order, value);
        if (order >= 1) j.c_[1] = slope;
        return j;
    }

    int order() const { return static_cast<int>(c_.size()) - 1; }
    double operator[](int i) const { return c_[i]; }
    double& operator[](int i) { return c_[i]; }

    /// j-th derivative of the underlying function.
    double derivative(int j) const {
        double f = 1.0;
        for (int i = 2; i <= j; ++i) f *= i;
        return f * c_[j];
    }

    Jet operator+(const Jet& o) const {
        Jet r = *this;
        for (int i = 0; i <= order(); ++i) r.c_[i] += o.c_[i];
        return r;
    }
    Jet operator-(const Jet& o) const {
        Jet r = *this;
        for (int i = 0; i <= order(); ++i) r.c_[i] -= o.c_[i];
        return r;
    }
    Jet operator-() const {
        Jet r = *this;
        for (double& v : r.c_) v = -v;
        return r;
    }
    Jet operator+(double s) const {
        Jet r = *this;
        r.c_[0] += s;
        return r;
    }
    Jet operator*(double s) const {
        Jet r = *this;
        for (double& v : r.c_) v *= s;
        return r;
    }
    Jet operator*(const Jet& o) const {
        Jet r(order());
        for (int i = 0; i <= order(); ++i)
            for (int j = 0; j <= i; ++j) r.c_[i] += c_[j] * o.c_[i - j];
        return r;
    }
    Jet operator/(const Jet& o) const {
        Jet r(order());
        for (int i = 0; i <= order(); ++i) {
            double s = c_[i];
            for (int j = 1; j <= i; ++j) s -= o.c_[j] * r.c_[i - j];
            r.c_[i] = s / o.c_[0];
        }
        return r;
    }

    friend Jet exp(const Jet& a) {
        Jet r(a.order(), std::exp(a.c_[0]));
        for (int k = 1; k <= a.order(); ++k) {
            double s = 0.0;
            for (int j = 1; j <= k; ++j) s += j * a.c_[j] * r.c_[k - j];
            r.c_[k] = s / k;
        }
        return r;
    }

    /// sin and cos together: s' = c a', c' = -s a'.
    friend void sincos(const Jet& a, Jet& s, Jet& c) {
        s = Jet(a.order(), std::sin(a.c_[0]));
        c = Jet(a.order(), std::cos(a.c_[0]));
        for (int k = 1; k <= a.order(); ++k) {
            double ss = 0.0, cc = 0.0;
            for (int j = 1; j <= k; ++j) {
                ss += j * a.c_[j] * c.c_[k - j];
                cc -= j * a.c_[j] * s.c_[k - j];
            }
            s.c_[k] = ss / k;
            c.c_[k] = cc / k;
        }
    }

private:
    std::vector<double> c_;
};

}  // namespace semiper
