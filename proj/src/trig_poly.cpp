#include "hopfscope/trig_poly.hpp"

#include "hopfscope/errors.hpp"
#include "hopfscope/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace hopfscope {

void TrigPoly::resize(int deg) {
    if (deg + 1 > static_cast<int>(cos_.size())) {
        cos_.resize(deg + 1, 0.0);
        sin_.resize(deg + 1, 0.0);
    }
}

void TrigPoly::set(int n, double c, double s) {
    if (n < 0) throw DomainError("TrigPoly: negative harmonic");
    resize(n);
    cos_[n] = c;
    sin_[n] = n == 0 ? 0.0 : s;
}

TrigPoly TrigPoly::cos_harmonic(int n, double coeff) {
    TrigPoly t;
    t.set(n, coeff, 0.0);
    return t;
}

TrigPoly TrigPoly::sin_harmonic(int n, double coeff) {
    TrigPoly t;
    t.set(n, 0.0, coeff);
    return t;
}

TrigPoly TrigPoly::from_cos_sin_monomials(const std::vector<double>& m) {
    if (m.empty()) return TrigPoly();
    const int d = static_cast<int>(m.size()) - 1;
    const TrigPoly c = cos_harmonic(1);
    const TrigPoly s = sin_harmonic(1);
    TrigPoly out;
    for (int k = 0; k <= d; ++k) {
        if (m[k] == 0.0) continue;
        TrigPoly term(m[k]);
        for (int i = 0; i < d - k; ++i) term = term * c;
        for (int i = 0; i < k; ++i) term = term * s;
        out = out + term;
    }
    return out;
}

double TrigPoly::operator()(double t) const {
    double v = cos_[0];
    for (int n = 1; n <= degree(); ++n) v += cos_[n] * std::cos(n * t) + sin_[n] * std::sin(n * t);
    return v;
}

TrigPoly TrigPoly::derivative() const {
    TrigPoly d;
    d.resize(degree());
    for (int n = 1; n <= degree(); ++n) {
        d.cos_[n] = n * sin_[n];
        d.sin_[n] = -n * cos_[n];
    }
    return d;
}

TrigPoly TrigPoly::oscillating() const {
    TrigPoly o = *this;
    o.cos_[0] = 0.0;
    return o;
}

TrigPoly TrigPoly::trimmed(double tol) const {
    TrigPoly t = *this;
    while (t.cos_.size() > 1 && std::abs(t.cos_.back()) <= tol && std::abs(t.sin_.back()) <= tol) {
        t.cos_.pop_back();
        t.sin_.pop_back();
    }
    return t;
}

TrigPoly TrigPoly::operator+(const TrigPoly& o) const {
    TrigPoly r = *this;
    r.resize(o.degree());
    for (int n = 0; n <= o.degree(); ++n) {
        r.cos_[n] += o.cos_[n];
        r.sin_[n] += o.sin_[n];
    }
    return r;
}

TrigPoly TrigPoly::operator-(const TrigPoly& o) const { return *this + o * -1.0; }

TrigPoly TrigPoly::operator*(double k) const {
    TrigPoly r = *this;
    for (auto& v : r.cos_) v *= k;
    for (auto& v : r.sin_) v *= k;
    return r;
}

TrigPoly TrigPoly::operator*(const TrigPoly& o) const {
    TrigPoly r;
    r.resize(degree() + o.degree());
    // complex form: f = sum_n F_n e^{int}, F_n = (c_n - i s_n)/2 for n > 0
    auto add = [&r](int n, double re, double im) {
        // contribution re*cos(nt) - im*sin(nt) from a term (re + i im) e^{int} and its conjugate
        if (n == 0) {
            r.cos_[0] += re;
        } else if (n > 0) {
            r.cos_[n] += 2.0 * re;
            r.sin_[n] -= 2.0 * im;
        }
    };
    auto coef = [](const TrigPoly& f, int n, double& re, double& im) {
        const int a = std::abs(n);
        if (a > f.degree()) {
            re = im = 0.0;
            return;
        }
        if (a == 0) {
            re = f.cos_[0];
            im = 0.0;
            return;
        }
        re = 0.5 * f.cos_[a];
        im = n > 0 ? -0.5 * f.sin_[a] : 0.5 * f.sin_[a];
    };
    const int d1 = degree();
    const int d2 = o.degree();
    for (int n = 0; n <= d1 + d2; ++n) {
        double sre = 0.0;
        double sim = 0.0;
        for (int k = -d1; k <= d1; ++k) {
            const int m = n - k;
            if (std::abs(m) > d2) continue;
            double fr, fi, gr, gi;
            coef(*this, k, fr, fi);
            coef(o, m, gr, gi);
            sre += fr * gr - fi * gi;
            sim += fr * gi + fi * gr;
        }
        add(n, sre, sim);
    }
    return r;
}

double TrigPoly::mean_of_product(const TrigPoly& f, const TrigPoly& g) {
    double m = f.cos_[0] * g.cos_[0];
    const int d = std::min(f.degree(), g.degree());
    for (int n = 1; n <= d; ++n) m += 0.5 * (f.cos_[n] * g.cos_[n] + f.sin_[n] * g.sin_[n]);
    return m;
}

double TrigPoly::quadrature_mean(int n) const {
    if (n <= 0) throw DomainError("quadrature_mean: n must be positive");
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += (*this)(2.0 * kPi * i / n);
    return acc / n;
}

}  // namespace hopfscope
