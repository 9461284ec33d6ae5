#pragma once

#include <Eigen/Dense>

#include <functional>

namespace hopfscope {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Autonomous vector field on R^3. Fields may throw DomainError.
using VectorField = std::function<Vec3(const Vec3&)>;

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace hopfscope
