#include "hopfscope/taylor.hpp"

#include "hopfscope/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace hopfscope::taylor {

namespace {

int idx2(int i, int j) {
    if (i > j) std::swap(i, j);
    if (i < 1 || j > 3) throw DomainError("taylor index out of range");
    return (i - 1) * 3 + (j - 1);
}

int idx3(int i, int j, int k) {
    int a[3] = {i, j, k};
    std::sort(a, a + 3);
    if (a[0] < 1 || a[2] > 3) throw DomainError("taylor index out of range");
    return (a[0] - 1) * 9 + (a[1] - 1) * 3 + (a[2] - 1);
}

struct Stencil {
    std::vector<int> offsets;
    std::vector<double> weights;  // to be divided by h^order
    int error_order;
};

// Five-point central stencils (offset 0 omitted where its weight is zero).
const Stencil& stencil(int order) {
    static const Stencil d1{{-2, -1, 1, 2}, {1.0 / 12, -8.0 / 12, 8.0 / 12, -1.0 / 12}, 4};
    static const Stencil d2{{-2, -1, 0, 1, 2},
                            {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12}, 4};
    static const Stencil d3{{-2, -1, 1, 2}, {-0.5, 1.0, -1.0, 0.5}, 2};
    switch (order) {
        case 1: return d1;
        case 2: return d2;
        case 3: return d3;
        default: throw DomainError("stencil order must be 1..3");
    }
}

// Partial derivative of the field with multi-index `orders` (per axis), tensor-product stencil.
Vec3 partial(const VectorField& f, const std::array<int, 3>& orders, double h, int& err_order) {
    std::vector<const Stencil*> axes;
    std::vector<int> axis_id;
    int total = 0;
    err_order = 100;
    for (int a = 0; a < 3; ++a) {
        if (orders[a] == 0) continue;
        axes.push_back(&stencil(orders[a]));
        axis_id.push_back(a);
        total += orders[a];
        err_order = std::min(err_order, axes.back()->error_order);
    }
    Vec3 acc = Vec3::Zero();
    std::vector<std::size_t> pos(axes.size(), 0);
    while (true) {
        Vec3 x = Vec3::Zero();
        double w = 1.0;
        for (std::size_t d = 0; d < axes.size(); ++d) {
            x[axis_id[d]] = axes[d]->offsets[pos[d]] * h;
            w *= axes[d]->weights[pos[d]];
        }
        acc += w * f(x);
        std::size_t d = 0;
        for (; d < axes.size(); ++d) {
            if (++pos[d] < axes[d]->offsets.size()) break;
            pos[d] = 0;
        }
        if (d == axes.size()) break;
    }
    return acc / std::pow(h, total);
}

Vec3 richardson(const VectorField& f, const std::array<int, 3>& orders, double h) {
    int q = 0;
    const Vec3 coarse = partial(f, orders, h, q);
    const Vec3 fine = partial(f, orders, 0.5 * h, q);
    const double s = std::pow(2.0, q);
    return (s * fine - coarse) / (s - 1.0);
}

// Deterministic, roughly uniform directions on the unit sphere.
std::vector<Vec3> sphere_directions(int n) {
    std::vector<Vec3> dirs;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(1.0 - z * z);
        dirs.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
    }
    return dirs;
}

}  // namespace

double TaylorData::quad(Component s, int i, int j) const {
    return quad_[static_cast<int>(s)][idx2(i, j)];
}

double TaylorData::cubic(Component s, int i, int j, int k) const {
    return cubic_[static_cast<int>(s)][idx3(i, j, k)];
}

void TaylorData::set_quad(Component s, int i, int j, double v) {
    quad_[static_cast<int>(s)][idx2(i, j)] = v;
}

void TaylorData::set_cubic(Component s, int i, int j, int k, double v) {
    cubic_[static_cast<int>(s)][idx3(i, j, k)] = v;
}

Vec3 TaylorData::eval(const Vec3& x) const {
    Vec3 out = linear * x;
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = 1; i <= 3; ++i) {
            for (int j = i; j <= 3; ++j) {
                acc += quad_[c][idx2(i, j)] * x[i - 1] * x[j - 1];
                for (int k = j; k <= 3; ++k) {
                    acc += cubic_[c][idx3(i, j, k)] * x[i - 1] * x[j - 1] * x[k - 1];
                }
            }
        }
        out[c] += acc;
    }
    return out;
}

TaylorData& TaylorData::operator+=(const TaylorData& o) {
    linear += o.linear;
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 9; ++i) quad_[c][i] += o.quad_[c][i];
        for (int i = 0; i < 27; ++i) cubic_[c][i] += o.cubic_[c][i];
    }
    beta = linear(2, 1);
    return *this;
}

TaylorData extract_taylor(const VectorField& field, double alpha, ExtractOptions opt) {
    if (!(opt.h > 0.0)) throw DomainError("extract_taylor: step must be positive");
    TaylorData td;
    td.alpha = alpha;
    const double h = opt.h;

    for (int j = 0; j < 3; ++j) {
        std::array<int, 3> o{0, 0, 0};
        o[j] = 1;
        td.linear.col(j) = richardson(field, o, h);
    }
    td.beta = td.linear(2, 1);

    constexpr Component comps[3] = {Component::a, Component::b, Component::c};
    for (int i = 1; i <= 3; ++i) {
        for (int j = i; j <= 3; ++j) {
            std::array<int, 3> o{0, 0, 0};
            o[i - 1] += 1;
            o[j - 1] += 1;
            const Vec3 d = richardson(field, o, h);
            const double factor = (i == j) ? 0.5 : 1.0;
            for (int c = 0; c < 3; ++c) td.set_quad(comps[c], i, j, factor * d[c]);

            for (int k = j; k <= 3; ++k) {
                std::array<int, 3> o3 = o;
                o3[k - 1] += 1;
                const Vec3 d3 = richardson(field, o3, h);
                // d^3 f / dx^o3 = coefficient * prod(o3!)
                double fact = 1.0;
                for (int a = 0; a < 3; ++a) {
                    for (int m = 2; m <= o3[a]; ++m) fact *= m;
                }
                for (int c = 0; c < 3; ++c) td.set_cubic(comps[c], i, j, k, d3[c] / fact);
            }
        }
    }

    if (opt.verify) {
        const auto chk = check_reconstruction(field, td);
        if (!chk.exact && std::abs(chk.exponent - 4.0) > 0.5) {
            std::ostringstream os;
            os << "extract_taylor: reconstruction residual scales like r^" << chk.exponent
               << ", expected r^4";
            throw NumericalError(os.str());
        }
    }
    return td;
}

ReconstructionCheck check_reconstruction(const VectorField& field, const TaylorData& td) {
    ReconstructionCheck chk;
    const auto dirs = sphere_directions(26);
    double scale = 0.0;
    for (std::size_t r = 0; r < chk.radii.size(); ++r) {
        double worst = 0.0;
        for (const auto& d : dirs) {
            const Vec3 x = chk.radii[r] * d;
            const Vec3 fx = field(x);
            scale = std::max(scale, fx.norm());
            worst = std::max(worst, (fx - td.eval(x)).norm());
        }
        chk.max_residual[r] = worst;
    }
    // residual indistinguishable from round-off: the field is (numerically) a cubic polynomial
    const double floor = 1e-12 * std::max(scale, 1e-300);
    chk.exact = chk.max_residual[0] <= floor;
    if (!chk.exact) {
        chk.ratio[0] = chk.max_residual[0] / chk.max_residual[1];
        chk.ratio[1] = chk.max_residual[1] / chk.max_residual[2];
        chk.exponent = std::log2(0.5 * (chk.ratio[0] + chk.ratio[1]));
    }
    return chk;
}

}  // namespace hopfscope::taylor
