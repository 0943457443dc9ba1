#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "kamtree/modes.hpp"

namespace kamtree {

inline const double kGolden = (1 + std::sqrt(5.0)) / 2;

// Three rotors j = -1, 0, 1 with unit weights inside the window,
// omega = (sqrt 2, 1, golden), f = cos(theta_0) + cos(theta_0 + theta_1).
struct Fixture {
    Weights weights;
    Frequency omega;
    ScalarSeries f;
    double s;
    double q;
};

inline Fixture three_rotor_fixture() {
    ScalarSeries f;
    for (const Mode& nu : {Mode::unit(0), Mode::from_entries({{0, 1}, {1, 1}})}) {
        f.set(nu, 0.5);
        f.set(-nu, 0.5);
    }
    return {Weights::finite_window(1, Weights::constant(1.0)), Frequency({std::sqrt(2.0), 1.0, kGolden}), f, 0.5,
            1.0};
}

// Hermitian potential with `harmonics` random pairs on the window [-J, J];
// entries in [-max_entry, max_entry], coefficients of modulus <= 0.5.
inline ScalarSeries random_potential(std::uint64_t seed, int harmonics, int J, int max_entry) {
    std::mt19937_64 gen(seed);
    auto uniform = [&] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
    ScalarSeries f;
    while (static_cast<int>(f.size()) < 2 * harmonics) {
        std::vector<Mode::Entry> e;
        for (int j = -J; j <= J; ++j) {
            int v = static_cast<int>(gen() % static_cast<std::uint64_t>(2 * max_entry + 1)) - max_entry;
            e.push_back({j, v});
        }
        Mode nu = Mode::from_entries(std::move(e));
        if (nu.is_zero() || f.contains(nu)) continue;
        cplx c = std::polar(0.1 + 0.4 * uniform(), 2 * M_PI * uniform());
        f.set(nu, c);
        f.set(-nu, std::conj(c));
    }
    return f;
}

}  // namespace kamtree
