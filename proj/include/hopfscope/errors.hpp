#pragma once

#include <stdexcept>
#include <string>

namespace hopfscope {

// Argument outside the mathematical domain of an operation (v1 >= 1, k'(v1) = 0, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// An iterative or fitting procedure failed to produce a trustworthy answer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hopfscope
