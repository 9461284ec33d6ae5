#pragma once

#include <vector>

namespace hopfscope {

/// Consecutive samples (I_k, I_{k+1}) of a first-return map in I = 1/rho^2,
/// with the time of the k-th crossing.
struct ReturnMapData {
    std::vector<double> I_k;
    std::vector<double> I_k1;
    std::vector<double> t_k;
    double theta_bar = 0.0;
    bool multivalued = false;

    std::size_t size() const { return I_k.size(); }
    void push(double ik, double ik1, double tk) {
        I_k.push_back(ik);
        I_k1.push_back(ik1);
        t_k.push_back(tk);
    }
};

}  // namespace hopfscope
