#pragma once

// Real trigonometric polynomial in an angle t:
//   f(t) = c0 + sum_{n>=1} (c_n cos(n t) + s_n sin(n t))

#include <vector>

namespace hopfscope {

class TrigPoly {
public:
    TrigPoly() : cos_(1, 0.0), sin_(1, 0.0) {}
    explicit TrigPoly(double constant) : cos_(1, constant), sin_(1, 0.0) {}

    static TrigPoly cos_harmonic(int n, double coeff = 1.0);
    static TrigPoly sin_harmonic(int n, double coeff = 1.0);

    /// sum_k m[k] cos^{d-k}(t) sin^k(t), d = m.size() - 1 (homogeneous monomials).
    static TrigPoly from_cos_sin_monomials(const std::vector<double>& m);

    int degree() const { return static_cast<int>(cos_.size()) - 1; }
    double cos_coeff(int n) const { return n < static_cast<int>(cos_.size()) ? cos_[n] : 0.0; }
    double sin_coeff(int n) const { return n < static_cast<int>(sin_.size()) ? sin_[n] : 0.0; }
    void set(int n, double c, double s);

    double operator()(double t) const;
    double mean() const { return cos_[0]; }
    /// d/dt
    TrigPoly derivative() const;
    /// f minus its mean
    TrigPoly oscillating() const;
    /// Drops trailing harmonics whose coefficients are below tol.
    TrigPoly trimmed(double tol = 0.0) const;

    TrigPoly operator+(const TrigPoly& o) const;
    TrigPoly operator-(const TrigPoly& o) const;
    TrigPoly operator*(const TrigPoly& o) const;
    TrigPoly operator*(double k) const;

    /// Mean of the product f*g over a period, from matching harmonics only.
    static double mean_of_product(const TrigPoly& f, const TrigPoly& g);

    /// n-point trapezoidal mean over [0, 2 pi); exact for degree < n.
    double quadrature_mean(int n = 1024) const;

private:
    void resize(int deg);
    std::vector<double> cos_;
    std::vector<double> sin_;
};

}  // namespace hopfscope
