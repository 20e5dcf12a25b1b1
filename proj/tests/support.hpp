#pragma once

#include "robust_merton/robust_merton.hpp"

#include <random>

namespace support {

using namespace robust_merton;

inline Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

inline UncertaintyCell box_cell(double a, double b, Vector lo, Vector hi, double eig_min, double eig_max) {
    return {a, b, BoxSet{std::move(lo), std::move(hi)}, VolSet{eig_min, eig_max}};
}

/// d = 1, r = 0, drift box [0.05, 0.10], variance [0.04, 0.09], T = 1, x0 = 1.
inline Scenario canonical(UtilitySpec u = LogUtility{}) {
    Scenario s;
    s.d = 1;
    s.r = 0.0;
    s.x0 = 1.0;
    s.utility = u;
    s.schedule.dimension = 1;
    s.schedule.cells.push_back(box_cell(0.0, 1.0, vec({0.05}), vec({0.10}), 0.04, 0.09));
    return s;
}

/// Three cells with a box, a ball and a box; d = 2, r = 0.02.
inline Scenario three_cell(UtilitySpec u = LogUtility{}) {
    Scenario s;
    s.d = 2;
    s.r = 0.02;
    s.x0 = 1.5;
    s.utility = u;
    s.schedule.dimension = 2;
    s.schedule.cells.push_back(box_cell(0.0, 0.3, vec({0.04, 0.05}), vec({0.08, 0.12}), 0.02, 0.05));
    s.schedule.cells.push_back({0.3, 0.7, BallSet{vec({0.07, 0.09}), 0.03}, VolSet{0.03, 0.08}});
    s.schedule.cells.push_back(box_cell(0.7, 1.2, vec({0.00, 0.03}), vec({0.04, 0.10}), 0.04, 0.06));
    return s;
}

inline std::vector<UtilitySpec> all_utilities() {
    return {LogUtility{}, PowerUtility{0.5}, ExponentialUtility{1.0}};
}

/// Random scenario with 1..4 cells, d in 1..3, mixing boxes and balls.
inline Scenario random_scenario(std::mt19937_64& rng, UtilitySpec u) {
    std::uniform_int_distribution<int> dim(1, 3), ncell(1, 4), kind(0, 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Scenario s;
    s.d = dim(rng);
    s.r = 0.05 * unif(rng);
    s.x0 = 0.5 + 2.0 * unif(rng);
    s.utility = u;
    s.schedule.dimension = s.d;
    const int n = ncell(rng);
    double t = 0.0;
    for (int i = 0; i < n; ++i) {
        const double len = 0.1 + unif(rng);
        UncertaintyCell c;
        c.t_start = t;
        c.t_end = t + len;
        t = c.t_end;
        if (kind(rng) == 0) {
            Vector lo(s.d), hi(s.d);
            for (Eigen::Index k = 0; k < s.d; ++k) {
                lo(k) = -0.02 + 0.12 * unif(rng);
                hi(k) = lo(k) + 0.08 * unif(rng);
            }
            c.drift = BoxSet{lo, hi};
        } else {
            Vector center(s.d);
            for (Eigen::Index k = 0; k < s.d; ++k) center(k) = 0.12 * unif(rng);
            c.drift = BallSet{center, 0.05 * unif(rng)};
        }
        const double lo = 0.01 + 0.1 * unif(rng);
        c.vol = {lo, lo + 0.1 * unif(rng)};
        s.schedule.cells.push_back(std::move(c));
    }
    return s;
}

}  // namespace support
