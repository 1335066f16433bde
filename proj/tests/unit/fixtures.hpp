#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "n2f/experiments.hpp"

namespace fixtures {

// Relative L2 distance between two equally sized sequences.
template <typename A, typename B>
double rel_l2(const A& a, const B& b) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        num += d * d;
        den += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

template <typename A, typename B>
double max_abs_diff(const A& a, const B& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

inline n2f::Sinogram random_sinogram(const n2f::Geometry& g, std::uint64_t seed) {
    n2f::Sinogram s = n2f::Sinogram::zeros(g);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (float& v : s.data)
        v = u(rng);
    return s;
}

inline n2f::Volume random_volume(n2f::VolumeShape shape, std::uint64_t seed) {
    n2f::Volume v = n2f::Volume::zeros(shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (float& x : v.data)
        x = u(rng);
    return v;
}

// 64^3 foam, 192 angles, 64 x 96 detector.
inline const n2f::Scenario& small_scenario() {
    static const n2f::Scenario s = [] {
        n2f::DeskConfig d;
        d.n = 64;
        d.n_angles = 192;
        d.det_cols = 96;
        d.n_balls = 300;
        return n2f::make_scenario(d, 11);
    }();
    return s;
}

inline const n2f::Scenario& desk_scenario() {
    static const n2f::Scenario s = n2f::make_scenario(n2f::DeskConfig{}, 200);
    return s;
}

} // namespace fixtures
