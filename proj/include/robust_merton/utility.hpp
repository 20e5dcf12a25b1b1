#pragma once

#include "robust_merton/core.hpp"

#include <cmath>
#include <string>
#include <variant>
#include <vector>

namespace robust_merton {

struct LogUtility {};

/// u(x) = x^gamma, 0 < gamma < 1.
struct PowerUtility {
    double gamma = 0.5;
};

/// u(x) = -beta * exp(-beta * x), beta > 0.
struct ExponentialUtility {
    double beta = 1.0;
};

using UtilitySpec = std::variant<LogUtility, PowerUtility, ExponentialUtility>;

inline bool is_exponential(const UtilitySpec& u) {
    return std::holds_alternative<ExponentialUtility>(u);
}

/// Log and power strategies are wealth fractions; exponential strategies are cash amounts.
inline bool uses_cash_strategy(const UtilitySpec& u) { return is_exponential(u); }

inline std::string utility_name(const UtilitySpec& u) {
    if (std::holds_alternative<LogUtility>(u)) return "log";
    if (std::holds_alternative<PowerUtility>(u)) return "power";
    return "exponential";
}

inline std::vector<Violation> validate_utility(const UtilitySpec& u) {
    std::vector<Violation> out;
    if (const auto* p = std::get_if<PowerUtility>(&u)) {
        if (!(p->gamma > 0.0 && p->gamma < 1.0)) {
            out.push_back({std::nullopt, "utility", "power utility needs 0 < gamma < 1"});
        }
    } else if (const auto* e = std::get_if<ExponentialUtility>(&u)) {
        if (!(e->beta > 0.0) || !std::isfinite(e->beta)) {
            out.push_back({std::nullopt, "utility", "exponential utility needs beta > 0"});
        }
    }
    return out;
}

/// Whether x lies in the utility's domain (positive wealth for log and power).
inline bool in_domain(const UtilitySpec& u, double x) {
    if (!std::isfinite(x)) return false;
    return is_exponential(u) || x > 0.0;
}

inline double evaluate(const UtilitySpec& u, double x) {
    if (!in_domain(u, x)) {
        throw DomainError("utility evaluated outside its domain at x = " + std::to_string(x));
    }
    if (std::holds_alternative<LogUtility>(u)) {
        return std::log(x);
    }
    if (const auto* p = std::get_if<PowerUtility>(&u)) {
        return std::pow(x, p->gamma);
    }
    const double beta = std::get<ExponentialUtility>(u).beta;
    return -beta * std::exp(-beta * x);
}

}  // namespace robust_merton
