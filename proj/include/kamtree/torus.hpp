#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "kamtree/errors.hpp"
#include "kamtree/lindstedt.hpp"
#include "kamtree/modes.hpp"
#include "kamtree/smalldiv.hpp"
#include "kamtree/trees.hpp"

namespace kamtree {

enum class Engine { recursion, trees };

inline std::string to_string(Engine e) { return e == Engine::recursion ? "recursion" : "trees"; }

struct SeriesSolution {
    OrderedCoefficients u;
    double eps = 0;
    Frequency omega;
    Weights weights = Weights::constant(1.0);
    ScalarSeries f;
    double s = 0.5, s2 = 0.25;
    Engine engine = Engine::recursion;
    std::vector<double> per_order_norms;  // ||u^(k)||_{s,*}
};

inline SeriesSolution synthesize(const ScalarSeries& f, const DivisorContext& ctx, const Weights& w, double eps, int K,
                                 Engine engine = Engine::recursion, double s = 0.5, double s2 = 0.25,
                                 EnumerationLimits lim = {}) {
    if (K < 1) throw DomainError("synthesis needs K >= 1");
    if (!(s2 > 0 && s2 < s)) throw DomainError("need 0 < s2 < s");
    SeriesSolution sol;
    sol.u = engine == Engine::recursion ? lindstedt_series(f, ctx, K) : tree_expansion(f, ctx, K, lim);
    sol.eps = eps;
    sol.omega = ctx.omega;
    sol.weights = w;
    sol.f = f;
    sol.s = s;
    sol.s2 = s2;
    sol.engine = engine;
    for (int k = 1; k <= K; ++k) sol.per_order_norms.push_back(series_norm(sol.u.at(k), s, w));
    return sol;
}

struct Displacement {
    std::vector<double> value;
    double imag_residue = 0;
};

// sum_k eps^k sum_nu e^{i nu.phi} u^(k)_nu; the imaginary part is reported and dropped.
inline Displacement evaluate_displacement(const SeriesSolution& sol, const std::vector<double>& phi) {
    const std::size_t D = sol.omega.size();
    if (phi.size() != D) throw DomainError("angle vector does not match the frequency window");
    Vec acc(D);
    double ek = 1;
    for (int k = 1; k <= sol.u.K(); ++k) {
        ek *= sol.eps;
        for (const auto& [nu, c] : sol.u.at(k)) {
            const cplx e = ek * std::polar(1.0, phase(nu, phi, sol.omega.half_width()));
            for (std::size_t i = 0; i < D; ++i) acc[i] += e * c[i];
        }
    }
    Displacement d;
    for (const auto& c : acc) {
        d.value.push_back(c.real());
        d.imag_residue = std::max(d.imag_residue, std::abs(c.imag()));
    }
    return d;
}

// Coefficients of (omega.d)^2 u + eps d f(phi + u) by eps-order j = 1..K+2:
// R_j = -(omega.nu)^2 u^(j) + [d f]^(j-1), with u^(j) = 0 beyond K.
struct ResidualSpectrum {
    std::vector<VectorSeries> orders;  // orders[j-1] = R_j
    std::vector<double> source_scale;  // sup |[d f]^(j-1)| per order

    int K = 0;
};

inline ResidualSpectrum residual_spectrum(const SeriesSolution& sol) {
    ResidualSpectrum r;
    r.K = sol.u.K();
    for (int j = 1; j <= r.K + 2; ++j) {
        VectorSeries F = vector_field_order(sol.f, sol.u, j, sol.omega);
        double scale = 0;
        for (const auto& [nu, v] : F) scale = std::max(scale, magnitude(v));
        for (const auto& [nu, c] : sol.u.at(j)) {
            const double x = sol.omega.dot(nu);
            Vec v(c);
            for (auto& y : v) y *= -x * x;
            F.add(nu, v);
        }
        r.orders.push_back(std::move(F));
        r.source_scale.push_back(scale);
    }
    return r;
}

// sum_j eps^j R_j, mode by mode.
inline VectorSeries residual_at(const ResidualSpectrum& r, double eps) {
    VectorSeries out;
    double ej = 1;
    for (const auto& R : r.orders) {
        ej *= eps;
        for (const auto& [nu, v] : R) {
            Vec w(v);
            for (auto& y : w) y *= ej;
            out.add(nu, w);
        }
    }
    return out;
}

inline double sup_coefficient(const VectorSeries& F) {
    double m = 0;
    for (const auto& [nu, v] : F) m = std::max(m, magnitude(v));
    return m;
}

struct ActionCurve {
    std::vector<std::vector<double>> I;  // per sample
    double lq_norm = 0;                  // sup_j |I_j| <j>^q, max over samples
    double ms2_norm = 0;                 // sup_j e^{s2 h_j} |I_j - omega_j|, max over samples
    double deviation = 0;                // sup_j |I_j - omega_j|
    double triangle_bound = 0;           // sum_k eps^k sum_nu |omega.nu| |u_nu|
    double imag_residue = 0;
};

// I(phi) = omega + omega.d_phi u(phi)
inline ActionCurve action_curve(const SeriesSolution& sol, const std::vector<std::vector<double>>& phis, double q = 1.0) {
    ActionCurve a;
    const int J = sol.omega.half_width();
    const std::size_t D = sol.omega.size();
    double ek = 1;
    for (int k = 1; k <= sol.u.K(); ++k) {
        ek *= sol.eps;
        for (const auto& [nu, c] : sol.u.at(k)) a.triangle_bound += std::abs(ek) * std::abs(sol.omega.dot(nu)) * magnitude(c);
    }
    for (const auto& phi : phis) {
        Vec acc(D);
        ek = 1;
        for (int k = 1; k <= sol.u.K(); ++k) {
            ek *= sol.eps;
            for (const auto& [nu, c] : sol.u.at(k)) {
                const cplx e = ek * cplx(0, sol.omega.dot(nu)) * std::polar(1.0, phase(nu, phi, J));
                for (std::size_t i = 0; i < D; ++i) acc[i] += e * c[i];
            }
        }
        std::vector<double> I(D);
        for (std::size_t i = 0; i < D; ++i) {
            const int j = static_cast<int>(i) - J;
            I[i] = sol.omega[j] + acc[i].real();
            a.imag_residue = std::max(a.imag_residue, std::abs(acc[i].imag()));
            a.lq_norm = std::max(a.lq_norm, std::abs(I[i]) * std::pow(bracket(j), q));
            const double dev = std::abs(acc[i].real());
            a.deviation = std::max(a.deviation, dev);
            const double h = sol.weights.h(j);
            if (dev > 0) a.ms2_norm = std::max(a.ms2_norm, std::exp(sol.s2 * h) * dev);
        }
        a.I.push_back(std::move(I));
    }
    return a;
}

// Threshold constants.  Beyond the computed beta range the tail of
// sum 2^{-m_n} log(1/beta(m_n)) is majorized with the Diophantine margin
// gamma_D certified up to |nu|* <= certify_N:
//   log(1/beta(m)) <= log(1/gamma_D) + sum_{j: h_j <= 2^m} log(1 + <j>^mu1 (2^m/h_j)^mu2).
struct ThresholdOptions {
    double c0 = 1.0;
    double mu1 = 2.5;
    double mu2 = 1.5;
    double certify_N = 128;
    std::optional<double> gamma;  // omega = gamma omega_*: also compute the rescaled variant
};

struct ThresholdCore {
    int n0 = 0;
    int m_n0 = 0;
    double beta_n0 = 0;
    double tail = 0;  // 8 * sum_{n > n0}, to compare against s/2
    double C0 = 0, C0p = 0, eps1 = 0, eps2 = 0;
};

struct Thresholds {
    ThresholdCore main;
    std::optional<ThresholdCore> scaled;
    double c0 = 1, c1 = 1, norm_f = 0, gamma_D = 0;
    double s = 0, s2 = 0;
};

namespace detail {

// sum_{m > m_max} 2^{-m} [log(1/gamma_D) + sum_j log(1 + <j>^mu1 (2^m/h_j)^mu2)]
inline double tail_majorant(const Weights& w, int J, int m_max, double log_inv_gamma, double mu1, double mu2) {
    double total = 0;
    for (int m = m_max + 1; m < m_max + 400; ++m) {
        const double N = std::ldexp(1.0, m);
        double term = std::max(log_inv_gamma, 0.0);
        for (int j = -J; j <= J; ++j) {
            const double h = w.h(j);
            if (h <= N) term += std::log1p(std::pow(bracket(j), mu1) * std::pow(N / h, mu2));
        }
        const double add = term * std::ldexp(1.0, -m);
        total += add;
        if (add < 1e-18 * total) break;
    }
    return total;
}

inline ThresholdCore threshold_core(const DivisorContext& ctx, const Weights& w, double s, double s2, double norm_f,
                                    double c0, double c1, double log_gamma_shift, double log_inv_gamma_D,
                                    const ThresholdOptions& opt, double prefactor) {
    const auto& ms = ctx.scales.m;
    const int nmax = ctx.scales.n_max();
    const double beyond = tail_majorant(w, ctx.omega.half_width(), ctx.beta.m_max(), log_inv_gamma_D, opt.mu1, opt.mu2);
    // log(1/beta) with beta replaced by beta / gamma in the rescaled variant
    auto term = [&](int n) {
        const int m = ms[static_cast<std::size_t>(n)];
        return std::ldexp(1.0, -m) * (std::log(1 / ctx.beta(m)) + log_gamma_shift);
    };
    for (int n0 = 0; n0 <= nmax; ++n0) {
        double tail = beyond;
        for (int n = n0 + 1; n <= nmax; ++n) tail += term(n);
        if (8 * tail < s / 2) {
            ThresholdCore c;
            c.n0 = n0;
            c.m_n0 = ms[static_cast<std::size_t>(n0)];
            c.beta_n0 = ctx.beta(c.m_n0) * std::exp(-log_gamma_shift);
            c.tail = 8 * tail;
            const double r = 16 * c1 / (s * c.beta_n0);
            c.C0 = prefactor * r * r * norm_f;
            c.C0p = prefactor * c0 * r * r * r * r * norm_f;
            c.eps1 = 1 / c.C0p;
            c.eps2 = c.eps1 * (s - s2) / (s - s2 + 2);
            return c;
        }
    }
    throw TruncationError("tail condition for n0 cannot be certified with beta computed to m = " +
                          std::to_string(ctx.beta.m_max()));
}

}  // namespace detail

inline Thresholds threshold_estimates(const ScalarSeries& f, const Weights& w, double s, double s2,
                                      const DivisorContext& ctx, const ThresholdOptions& opt = {}) {
    if (!(s > 0 && s2 > 0 && s2 < s)) throw DomainError("need 0 < s2 < s");
    Thresholds t;
    t.c0 = opt.c0;
    t.c1 = w.c1();
    t.s = s;
    t.s2 = s2;
    t.norm_f = series_norm(f, 2 * s, w);
    t.gamma_D = diophantine_margin(ctx.omega, opt.mu1, opt.mu2, w, opt.certify_N).margin;
    if (!(t.gamma_D > 0)) throw ResonanceError("zero Diophantine margin", "");
    t.main = detail::threshold_core(ctx, w, s, s2, t.norm_f, t.c0, t.c1, 0.0, std::log(1 / t.gamma_D), opt, 1.0);
    if (opt.gamma) {
        const double g = *opt.gamma;
        if (!(g > 0)) throw DomainError("gamma must be positive");
        // beta -> beta/gamma and a factor gamma^{-2} per order in front
        t.scaled = detail::threshold_core(ctx, w, s, s2, t.norm_f, t.c0, t.c1, std::log(g), std::log(g / t.gamma_D),
                                          opt, 1 / (g * g));
    }
    return t;
}

struct RadiusFit {
    double eps_hat = 0;
    double slope = 0;
    bool defined = false;
};

// Least squares of log ||u^(k)|| against k over k = ceil(K/2)..K; eps_hat = exp(-slope).
inline RadiusFit empirical_radius(const std::vector<double>& norms) {
    const int K = static_cast<int>(norms.size());
    if (K < 4) throw DomainError("empirical radius needs K >= 4");
    std::vector<double> xs, ys;
    for (int k = (K + 1) / 2; k <= K; ++k) {
        const double v = norms[static_cast<std::size_t>(k - 1)];
        if (v > 0) {
            xs.push_back(k);
            ys.push_back(std::log(v));
        }
    }
    RadiusFit r;
    if (xs.size() < 2) return r;
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    r.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    r.eps_hat = std::exp(-r.slope);
    r.defined = true;
    return r;
}

inline RadiusFit empirical_radius(const SeriesSolution& sol) { return empirical_radius(sol.per_order_norms); }

}  // namespace kamtree
