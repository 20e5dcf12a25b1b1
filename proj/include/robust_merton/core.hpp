#pragma once

// Shared numeric types and the exception hierarchy used across the library.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace robust_merton {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr const char* kVersion = "0.1.0";

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatches, empty grids, bad piecewise structure.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Arguments outside the mathematical domain (t outside [0,T], non-positive wealth, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed scenario / path files.
class ParseError : public Error {
public:
    using Error::Error;
};

/// One failed invariant. `cell_index` is empty for scenario-level violations.
struct Violation {
    std::optional<std::size_t> cell_index;
    std::string invariant;
    std::string message;
};

inline std::string describe(const Violation& v) {
    std::string out;
    if (v.cell_index) {
        out += "cell " + std::to_string(*v.cell_index) + ": ";
    }
    out += v.invariant + ": " + v.message;
    return out;
}

/// Raised when a scenario or schedule fails validation; carries every violation found.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Violation> violations)
        : Error(summarize(violations)), violations_(std::move(violations)) {}

    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    static std::string summarize(const std::vector<Violation>& vs) {
        std::string msg = "validation failed";
        for (const auto& v : vs) {
            msg += "\n  " + describe(v);
        }
        return msg;
    }

    std::vector<Violation> violations_;
};

namespace detail {

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// pi^T * sigma * pi without temporaries; the scan loops call this millions of times.
inline double quad_form(const Vector& pi, const Matrix& sigma) {
    const Eigen::Index d = pi.size();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            row += sigma(i, j) * pi(j);
        }
        acc += pi(i) * row;
    }
    return acc;
}

}  // namespace detail
}  // namespace robust_merton
