#pragma once
// Shared aliases and error types used across the library.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pw {

using Vec = std::vector<double>;

// Thrown when an input violates a documented precondition (bad bounds,
// dimension mismatch, invalid enum value, ...).
class DomainError : public std::invalid_argument {
public:
    explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Thrown when a numerically required property fails at runtime (matrix not
// positive definite, singular gram system, ...).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown by the sampler when the state stops being finite; carries the
// abort context so drivers can report where the chain blew up.
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(const std::string& msg, int step, int branch, double guidance_norm)
        : std::runtime_error(msg), step(step), branch(branch), guidance_norm(guidance_norm) {}
    int step;
    int branch;            // 0 = low, 1 = high
    double guidance_norm;  // ||g|| at the failing step
};

}  // namespace pw
