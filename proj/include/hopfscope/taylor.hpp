#pragma once

// Quadratic and cubic Taylor coefficients of a vector field at the origin,
// in the ordered-monomial convention
//   f_c(x) = L x + sum_{i<=j} s_ij x_i x_j + sum_{i<=j<=k} s_ijk x_i x_j x_k + O(|x|^4)
// with s = a, b, c for components 1, 2, 3. Indices are 1-based as in the math.

#include "hopfscope/linalg.hpp"

#include <array>

namespace hopfscope::taylor {

enum class Component : int { a = 0, b = 1, c = 2 };

struct TaylorData {
    double alpha = 0.0;
    double beta = 0.0;  // rotation rate of the (x2, x3) block, linear(2,1) 0-based
    Mat3 linear = Mat3::Zero();

    /// sigma_ij; index order is normalized so (2,1) reads sigma_12.
    double quad(Component s, int i, int j) const;
    double cubic(Component s, int i, int j, int k) const;
    void set_quad(Component s, int i, int j, double v);
    void set_cubic(Component s, int i, int j, int k, double v);

    /// Degree-3 polynomial L x + quadratic + cubic.
    Vec3 eval(const Vec3& x) const;

    TaylorData& operator+=(const TaylorData& o);

private:
    std::array<std::array<double, 9>, 3> quad_{};
    std::array<std::array<double, 27>, 3> cubic_{};
};

struct ExtractOptions {
    double h = 1e-3;  // finite-difference step; Richardson uses h and h/2
    bool verify = true;
};

/// Finite-difference extraction: fourth-order 5-point stencils per axis
/// (the 5-point third-derivative stencil is second order), tensor products
/// for mixed partials, Richardson extrapolation over {h, h/2}.
/// With verify on, throws NumericalError if the degree-3 reconstruction residual
/// does not scale like r^4 (exponent outside [3.5, 4.5]).
TaylorData extract_taylor(const VectorField& field, double alpha = 0.0, ExtractOptions opt = {});

struct ReconstructionCheck {
    std::array<double, 3> radii{1e-2, 5e-3, 2.5e-3};
    std::array<double, 3> max_residual{};
    std::array<double, 2> ratio{};  // residual(r_k) / residual(r_{k+1})
    double exponent = 0.0;          // log2 of the mean ratio
    bool exact = false;             // residual at round-off level everywhere
};

ReconstructionCheck check_reconstruction(const VectorField& field, const TaylorData& td);

}  // namespace hopfscope::taylor
