#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "kamtree/modes.hpp"
#include "kamtree/smalldiv.hpp"

namespace kamtree {

// u^(1), ..., u^(K): orders[k-1] holds u^(k).
struct OrderedCoefficients {
    std::vector<VectorSeries> orders;

    int K() const { return static_cast<int>(orders.size()); }
    // Missing orders read as the empty series.
    const VectorSeries& at(int k) const {
        static const VectorSeries empty;
        return (k >= 1 && k <= K()) ? orders[static_cast<std::size_t>(k - 1)] : empty;
    }
};

// Angles phi_0 on the frequency window; empty means 0.
using Angles = std::vector<double>;

inline double phase(const Mode& nu, const Angles& phi, int J) {
    if (phi.empty()) return 0;
    double s = 0;
    for (const auto& [j, v] : nu.entries()) s += v * phi.at(static_cast<std::size_t>(j + J));
    return s;
}

// i nu as a window vector.
inline Vec i_nu(const Mode& nu, const Frequency& omega) {
    omega.require_covers(nu);
    Vec v(omega.size());
    for (const auto& [j, n] : nu.entries()) v[static_cast<std::size_t>(j + omega.half_width())] = cplx(0, n);
    return v;
}

// (i nu) . z, without complex conjugation.
inline cplx i_nu_dot(const Mode& nu, const Vec& z, int J) {
    cplx s{};
    for (const auto& [j, n] : nu.entries()) s += cplx(0, n) * z[static_cast<std::size_t>(j + J)];
    return s;
}

namespace detail {

inline ScalarSeries convolve(const ScalarSeries& a, const ScalarSeries& b) {
    ScalarSeries c;
    for (const auto& [na, ca] : a)
        for (const auto& [nb, cb] : b) c.add(na + nb, ca * cb);
    return c;
}

}  // namespace detail

// nu -> [d_theta f(phi + phi0 + u)]_nu at order eps^(k-1):
//   sum_p 1/p! sum_{k_1+..+k_p = k-1} sum_{nu_0+..+nu_p = nu}
//     f_{nu_0} e^{i nu_0 . phi0} (i nu_0) prod_r (i nu_0 . u^(k_r)_{nu_r})
// The p = 0 term only exists for k = 1.  Orders of u beyond u.K() count as zero.
inline VectorSeries vector_field_order(const ScalarSeries& f, const OrderedCoefficients& u, int k,
                                       const Frequency& omega, const Angles& phi0 = {}) {
    if (k < 1) throw DomainError("vector field order needs k >= 1");
    const int J = omega.half_width();
    const int m = k - 1;
    VectorSeries out;
    for (const auto& [nu0, f0] : f) {
        const cplx c0 = f0 * std::polar(1.0, phase(nu0, phi0, J));
        const Vec inu0 = i_nu(nu0, omega);
        if (m == 0) {
            Vec v(inu0);
            for (auto& x : v) x *= c0;
            out.add(nu0, v);
            continue;
        }
        // a[j](nu') = i nu_0 . u^(j)_{nu'}
        std::vector<ScalarSeries> a(static_cast<std::size_t>(m + 1));
        for (int j = 1; j <= m; ++j)
            for (const auto& [nu, uv] : u.at(j)) a[static_cast<std::size_t>(j)].add(nu, i_nu_dot(nu0, uv, J));
        // P[p][j]: sum over compositions of j into p parts of the convolution products.
        std::vector<std::vector<ScalarSeries>> P(static_cast<std::size_t>(m + 1),
                                                 std::vector<ScalarSeries>(static_cast<std::size_t>(m + 1)));
        for (int j = 1; j <= m; ++j) P[1][static_cast<std::size_t>(j)] = a[static_cast<std::size_t>(j)];
        for (int p = 2; p <= m; ++p)
            for (int j = p; j <= m; ++j)
                for (int i = 1; i <= j - p + 1; ++i) {
                    auto c = detail::convolve(a[static_cast<std::size_t>(i)],
                                              P[static_cast<std::size_t>(p - 1)][static_cast<std::size_t>(j - i)]);
                    for (const auto& [nu, x] : c) P[static_cast<std::size_t>(p)][static_cast<std::size_t>(j)].add(nu, x);
                }
        ScalarSeries total;
        double fact = 1;
        for (int p = 1; p <= m; ++p) {
            fact *= p;
            for (const auto& [nu, x] : P[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)])
                total.add(nu, x / fact);
        }
        for (const auto& [nu, x] : total) {
            Vec v(inu0);
            for (auto& y : v) y *= c0 * x;
            out.add(nu0 + nu, v);
        }
    }
    return out;
}

// Optional restriction of every divisor to scales strictly below `below`.
struct ScaleCut {
    std::optional<int> below;
};

// u^(k)_nu = G(omega . nu) [d f]^(k-1)_nu for nu != 0; the zero mode is left to kernel_check.
inline VectorSeries recursion_order(const ScalarSeries& f, const DivisorContext& ctx, const OrderedCoefficients& u,
                                    int k, const Angles& phi0 = {}, ScaleCut cut = {}) {
    VectorSeries F = vector_field_order(f, u, k, ctx.omega, phi0);
    VectorSeries out;
    for (const auto& [nu, v] : F) {
        if (nu.is_zero()) continue;
        double x = ctx.omega.dot(nu);
        int n = ctx.require_scale(x, nu);
        if (cut.below && n >= *cut.below) continue;
        double g = propagator(x, n, ctx.beta, ctx.scales);
        Vec w(v);
        for (auto& y : w) y *= g;
        out.set(nu, std::move(w));
    }
    return out;
}

inline OrderedCoefficients lindstedt_series(const ScalarSeries& f, const DivisorContext& ctx, int K,
                                            const Angles& phi0 = {}, ScaleCut cut = {}) {
    OrderedCoefficients u;
    for (int k = 1; k <= K; ++k) u.orders.push_back(recursion_order(f, ctx, u, k, phi0, cut));
    return u;
}

// Sup-component magnitude of [d f]^(k-1)_0.
inline double kernel_check(const ScalarSeries& f, const OrderedCoefficients& u, int k, const Frequency& omega,
                           const Angles& phi0 = {}) {
    VectorSeries F = vector_field_order(f, u, k, omega, phi0);
    const Vec* z = F.find(Mode{});
    return z ? magnitude(*z) : 0.0;
}

// Componentwise gap between two coefficient sets at order k over the union of
// their supports (absent reads as zero), and the sup of b for scaling.
struct OrderGap {
    double abs = 0;
    double scale = 0;
    double rel() const { return scale > 0 ? abs / scale : abs; }
};

inline OrderGap order_gap(const OrderedCoefficients& a, const OrderedCoefficients& b, int k) {
    OrderGap g;
    auto one = [&](const VectorSeries& x, const VectorSeries& y, bool count_scale) {
        for (const auto& [nu, v] : x) {
            const Vec* w = y.find(nu);
            if (count_scale) g.scale = std::max(g.scale, magnitude(v));
            for (std::size_t i = 0; i < v.size(); ++i)
                g.abs = std::max(g.abs, std::abs(v[i] - (w ? (*w)[i] : cplx{})));
        }
    };
    one(b.at(k), a.at(k), true);
    one(a.at(k), b.at(k), false);
    return g;
}

}  // namespace kamtree
