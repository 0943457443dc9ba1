#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kamtree/fixtures.hpp"
#include "kamtree/integrate.hpp"
#include "kamtree/lindstedt.hpp"
#include "kamtree/renorm.hpp"
#include "kamtree/smalldiv.hpp"
#include "kamtree/torus.hpp"
#include "kamtree/trees.hpp"

namespace kamtree {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0;
    double time_limit = 0;  // 0: none
};

struct AcceptanceOptions {
    EnumerationLimits limits{};
    int measure_samples = 2000;
    int sampled_frequencies = 3;
    std::uint64_t seed = 2024;
};

namespace accept {

using Clock = std::chrono::steady_clock;

inline std::string fmt(double x) {
    std::ostringstream s;
    s.precision(3);
    s << x;
    return s.str();
}

// The two random potentials shared by the oracle and cluster criteria.
inline ScalarSeries oracle_potential(int i) { return random_potential(3 + static_cast<std::uint64_t>(i), 4, 1, 1); }
inline ScalarSeries cluster_potential() { return random_potential(6, 3, 1, 1); }

// A mode whose divisor sits in a shell m_n >= 3, added to f so chains through it have weight.
inline Mode deep_mode(const DivisorContext& ctx) {
    for (int m = 3; m <= ctx.beta.m_max(); ++m) {
        const Mode& nu = ctx.beta.witness[static_cast<std::size_t>(m)];
        const int n = ctx.scale(ctx.omega.dot(nu)).n;
        if (ctx.scales.m[static_cast<std::size_t>(n)] >= 3) return nu;
    }
    throw TruncationError("no mode with a deep divisor in the computed range");
}

// k odd: a_i carry -nu0 with children (b_i, a_{i+1}), b_i carry nu0, the last leaf carries nu.
inline Tree chain_tree(int k, const Mode& nu0, const Mode& nu) {
    Tree t;
    t.shape.parent.assign(static_cast<std::size_t>(k), -1);
    t.modes.assign(static_cast<std::size_t>(k), Mode{});
    for (int i = 0; i < (k - 1) / 2; ++i) {
        const auto a = static_cast<std::size_t>(2 * i);
        t.modes[a] = -nu0;
        t.modes[a + 1] = nu0;
        t.shape.parent[a + 1] = static_cast<int>(a);
        t.shape.parent[a + 2] = static_cast<int>(a);
    }
    t.modes.back() = nu;
    return t;
}

inline double rel_gap(const Vec& a, const Vec& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    const double m = magnitude(b);
    return m > 0 ? d / m : d;
}

inline CriterionResult oracle_equivalence(const AcceptanceOptions& opt) {
    CriterionResult r{1, "oracle equivalence", false, "", 0, 120};
    auto fx = three_rotor_fixture();
    auto ctx = DivisorContext::build(fx.omega, fx.weights, 10);
    double worst = 0;
    bool supports = true;
    long long modes = 0;
    for (const auto& f : {fx.f, oracle_potential(0), oracle_potential(1)}) {
        auto rec = lindstedt_series(f, ctx, 6);
        auto tr = tree_expansion(f, ctx, 6, opt.limits);
        for (int k = 1; k <= 6; ++k) {
            worst = std::max(worst, order_gap(tr, rec, k).rel());
            supports = supports && tr.at(k).size() == rec.at(k).size();
            modes += static_cast<long long>(rec.at(k).size());
        }
    }
    r.pass = worst <= 1e-10 && supports;
    r.detail = "max relative gap " + fmt(worst) + " over " + std::to_string(modes) + " coefficients, k <= 6";
    return r;
}

inline CriterionResult residual_order(const AcceptanceOptions&) {
    CriterionResult r{2, "residual order", false, "", 0, 60};
    auto fx = three_rotor_fixture();
    auto ctx = DivisorContext::build(fx.omega, fx.weights, 10);
    double worst = 0, ratio = kInf;
    for (Engine e : {Engine::recursion, Engine::trees}) {
        auto rs = residual_spectrum(synthesize(fx.f, ctx, fx.weights, 1e-3, 6, e));
        for (int j = 1; j <= 6; ++j) {
            const auto jj = static_cast<std::size_t>(j - 1);
            worst = std::max(worst, sup_coefficient(rs.orders[jj]) / rs.source_scale[jj]);
        }
        ratio = std::min(ratio, sup_coefficient(residual_at(rs, 2e-3)) / sup_coefficient(residual_at(rs, 1e-3)));
    }
    r.pass = worst <= 1e-12 && ratio >= std::pow(2.0, 6.5);
    r.detail = "orders <= 6 relative " + fmt(worst) + ", sup ratio 2^" + fmt(std::log2(ratio));
    return r;
}

inline CriterionResult ode_validation(const AcceptanceOptions&) {
    CriterionResult r{3, "ODE validation", false, "", 0, 120};
    auto fx = three_rotor_fixture();
    auto ctx = DivisorContext::build(fx.omega, fx.weights, 10);
    auto sol = synthesize(fx.f, ctx, fx.weights, 1e-3, 8);
    auto v = validate_torus(sol, 1e-3, 100);
    auto free = sol;
    free.eps = 0;
    auto v0 = validate_torus(free, 1e-3, 100);
    r.pass = v.sup_error <= 1e-6 && v0.sup_error <= 1e-10;
    r.detail = "sup error " + fmt(v.sup_error) + " at eps = 1e-3, " + fmt(v0.sup_error) + " at eps = 0, energy drift " +
               fmt(v.energy_drift);
    return r;
}

// k = 2 at the top scale: per tree three summands.  The entering line attaches
// to the root before or after its child, giving (1/2) P (i nu0)(i nu0)^T each, or
// to the child in the middle, giving -P w^2/(w + x)^2 (i nu0)(i nu0)^T, where
// P = |f_nu0|^2 (nu0.nu0)/w^2.
inline bool second_order_structure(const ScalarSeries& f, const DivisorContext& ctx, std::string& why) {
    const int n = ctx.scales.n_max();
    for (double x : {0.0, 0.05}) {
        auto M = self_energy(2, n, x, f, ctx, 0, true);
        int before = 0, after = 0, middle = 0;
        for (const auto& term : M.terms) {
            const Mode nu0 = term.tree.mode(1);
            const double w = ctx.omega.dot(nu0);
            const cplx P = std::norm(*f.find(nu0)) * static_cast<double>(dot(nu0, nu0)) / (w * w);
            LinearKernel want;
            if (term.attach == 0) {
                if (term.x_dependent) return why = "root-attached term depends on x", false;
                want = LinearKernel::outer(0.5 * P, nu0, nu0, ctx.omega);
                ++(term.position == 0 ? before : after);
            } else {
                if (!term.x_dependent) return why = "lower term does not depend on x", false;
                want = LinearKernel::outer(-P * (w * w) / ((w + x) * (w + x)), nu0, nu0, ctx.omega);
                ++middle;
            }
            if ((term.W - want).norm() > 1e-14 * want.norm()) return why = "summand differs from the explicit form", false;
        }
        if (middle == 0 || before != middle || after != middle) return why = "unexpected family sizes", false;
    }
    return true;
}

inline CriterionResult cancellations(const AcceptanceOptions& opt) {
    CriterionResult r{4, "self-energy cancellations", false, "", 0, 300};
    auto fx = three_rotor_fixture();
    auto ctx = DivisorContext::build(fx.omega, fx.weights, 10);
    double w0 = 0, w1 = 0;
    int realized = 0;
    for (const auto& f : {fx.f, cluster_potential()}) {
        for (const auto& row : cancellation_report(4, f, ctx, opt.limits)) {
            if (row.raw0 == 0) continue;
            ++realized;
            w0 = std::max(w0, row.ratio0());
            w1 = std::max(w1, row.ratio1());
        }
    }
    std::string why;
    const bool structure = second_order_structure(fx.f, ctx, why);
    r.pass = realized > 0 && w0 <= 1e-10 && w1 <= 1e-9 && structure;
    r.detail = std::to_string(realized) + " realized (k, n), max |M(0)|/raw " + fmt(w0) + ", max |dM(0)|/raw " + fmt(w1) +
               (structure ? ", k = 2 structure matches" : ", k = 2 structure: " + why);
    return r;
}

inline CriterionResult counting_bound(const AcceptanceOptions& opt) {
    CriterionResult r{5, "counting bound", false, "", 0, 0};
    auto fx = three_rotor_fixture();
    auto ctx = DivisorContext::build(fx.omega, fx.weights, 10);
    // a third potential with a deep harmonic, so that resonant clusters occur
    ScalarSeries deep = fx.f;
    const Mode nu = deep_mode(ctx);
    deep.set(nu, 0.25);
    deep.set(-nu, 0.25);
    long long trees = 0, violations = 0, clusters = 0;
    std::string first;
    for (const auto& f : {fx.f, cluster_potential(), deep}) {
        auto c = counting_bound_check(5, f, fx.weights, ctx, opt.limits);
        trees += c.trees;
        violations += c.violations;
        clusters += c.clusters;
        if (first.empty()) first = c.first_violation;
    }
    r.pass = trees > 0 && violations == 0;
    r.detail = std::to_string(trees) + " trees, " + std::to_string(clusters) + " resonant clusters, " +
               std::to_string(violations) + " violations" + (first.empty() ? "" : " (" + first + ")");
    return r;
}

inline CriterionResult worked_examples(const AcceptanceOptions&) {
    CriterionResult r{6, "worked examples", false, "", 0, 0};
    auto fx = three_rotor_fixture();
    auto ctx = DivisorContext::build(fx.omega, fx.weights, 10);
    const Mode nu = deep_mode(ctx);
    ScalarSeries f = fx.f;
    f.set(Mode{}, 0.3);
    f.set(nu, cplx(0.2, 0.1));
    f.set(-nu, cplx(0.2, -0.1));

    // zero modes along a path ending in nu: every line carries nu, value exactly 0
    bool zero = true;
    for (int k = 2; k <= 7; ++k) {
        Tree t;
        for (int i = 0; i < k; ++i) t.shape.parent.push_back(i - 1);
        t.modes.assign(static_cast<std::size_t>(k), Mode{});
        t.modes.back() = nu;
        for (const auto& m : line_momenta(t)) zero = zero && m == nu;
        for (const auto& c : tree_value(t, f, ctx)) zero = zero && c == cplx{};
    }

    const Mode nu0 = Mode::unit(0);
    const double a = std::norm(*f.find(nu0)) / 2;
    const double x0 = ctx.omega.dot(nu0), x = ctx.omega.dot(nu);
    double worst = 0;
    for (int k : {3, 5, 7}) {
        const int h = (k - 1) / 2;
        // i^k nu (-|f0|^2/2)^h f_nu (-nu0.nu0)^h (nu0.nu0)^(h-1) (omega.nu0)^(-2h) (omega.nu)^(-(k+1)),
        // with nu replaced by nu0 (nu0.nu) away from the aligned case
        const cplx s = std::pow(cplx(0, 1), k) * std::pow(-a, h) * *f.find(nu) *
                       std::pow(-static_cast<double>(dot(nu0, nu0)), h) * std::pow(static_cast<double>(dot(nu0, nu0)), h - 1) *
                       static_cast<double>(dot(nu0, nu)) / (std::pow(x0, 2 * h) * std::pow(x, k + 1));
        Vec closed = scale_by_i_nu(nu0, s / cplx(0, 1), ctx.omega);
        worst = std::max(worst, rel_gap(tree_value(chain_tree(k, nu0, nu), f, ctx), closed));
    }
    r.pass = zero && worst <= 1e-12;
    r.detail = std::string("zero-mode path value ") + (zero ? "exactly 0" : "nonzero") + ", chain closed form gap " + fmt(worst);
    return r;
}

inline CriterionResult scale_machinery(const AcceptanceOptions&) {
    CriterionResult r{7, "scale machinery", false, "", 0, 0};
    auto fx = three_rotor_fixture();
    auto b = beta_sequence(fx.omega, fx.weights, 10);
    auto ms = scale_sequence(b);
    bool ok = std::abs(b(0) - 1) <= 1e-12 && std::abs(b(1) - (kGolden - std::sqrt(2.0))) <= 1e-12;
    bool halving = true;
    for (int n = 0; n < ms.n_max(); ++n) {
        const int lo = ms.m[static_cast<std::size_t>(n)], hi = ms.m[static_cast<std::size_t>(n + 1)];
        halving = halving && b(hi) <= 0.5 * b(lo);
        for (int m = lo + 1; m < hi; ++m) halving = halving && b(m) > 0.5 * b(lo);
    }
    // indicator of shell n straight from the definition
    auto psi = [&](int n, double x) {
        const double lo = 0.25 * b(ms.m[static_cast<std::size_t>(n)]);
        const double hi = n == 0 ? kInf : 0.25 * b(ms.m[static_cast<std::size_t>(n - 1)]);
        return std::abs(x) >= lo && std::abs(x) < hi ? 1 : 0;
    };
    std::vector<double> xs;
    for (int n = 0; n <= ms.n_max(); ++n) {
        const double edge = 0.25 * b(ms.m[static_cast<std::size_t>(n)]);
        xs.insert(xs.end(), {edge, std::nextafter(edge, 0.0), std::nextafter(edge, 1.0), -edge});
    }
    const double floor = 0.25 * b(ms.m.back());
    for (double t = std::log(floor); t < std::log(10.0); t += 0.01) xs.push_back(std::exp(t));
    bool unity = true;
    for (double x : xs) {
        int total = 0, which = -1;
        for (int n = 0; n <= ms.n_max(); ++n)
            if (psi(n, x)) {
                ++total;
                which = n;
            }
        const bool inside = std::abs(x) >= floor;
        unity = unity && total == (inside ? 1 : 0);
        const Scale s = scale_of(x, b, ms);
        unity = unity && (inside ? (s.is_value() && s.n == which) : s.kind == Scale::Kind::none);
    }
    r.pass = ok && halving && unity;
    r.detail = "beta(0) = " + fmt(b(0)) + ", beta(1) = " + std::to_string(b(1)) + ", scales m_n up to " +
               std::to_string(ms.m.back()) + ", halving " + (halving ? "ok" : "broken") + ", partition of unity " +
               (unity ? "ok" : "broken") + " on " + std::to_string(xs.size()) + " points";
    return r;
}

inline CriterionResult kernel_identity(const AcceptanceOptions& opt) {
    CriterionResult r{8, "kernel identity and invariants", false, "", 0, 0};
    auto fx = three_rotor_fixture();
    auto ctx = DivisorContext::build(fx.omega, fx.weights, 10);
    auto u = lindstedt_series(fx.f, ctx, 8);
    double kernel = 0, real = 0, cov = 0;
    for (int k = 1; k <= 8; ++k) {
        kernel = std::max(kernel, kernel_check(fx.f, u, k, fx.omega));
        real = std::max(real, hermitian_defect(u.at(k)) / std::max(1e-300, series_norm(u.at(k), 0, fx.weights)));
    }
    std::mt19937_64 gen(opt.seed);
    std::uniform_real_distribution<double> U(-std::numbers::pi, std::numbers::pi);
    for (int trial = 0; trial < 3; ++trial) {
        Angles phi0{U(gen), U(gen), U(gen)};
        auto shifted = lindstedt_series(fx.f, ctx, 6, phi0);
        for (int k = 1; k <= 6; ++k) {
            kernel = std::max(kernel, kernel_check(fx.f, shifted, k, fx.omega, phi0));
            if (shifted.at(k).size() != u.at(k).size()) cov = kInf;
            for (const auto& [nu, c] : u.at(k)) {
                const Vec* s = shifted.at(k).find(nu);
                if (!s) {
                    cov = kInf;
                    continue;
                }
                const cplx e = std::polar(1.0, phase(nu, phi0, 1));
                Vec want(c);
                for (auto& z : want) z *= e;
                cov = std::max(cov, rel_gap(*s, want));
            }
        }
    }
    r.pass = kernel <= 1e-12 && real <= 1e-12 && cov <= 1e-12;
    r.detail = "max |[df]_0| " + fmt(kernel) + ", reality defect " + fmt(real) + ", translation covariance " + fmt(cov);
    return r;
}

inline CriterionResult product_chain(const AcceptanceOptions& opt) {
    CriterionResult r{9, "product bound and beta lower bound", false, "", 0, 0};
    const double mu1 = 2.5, mu2 = 1.5, sigma = 2.5;
    // log weights on all of Z, N <= 12, checked at every jump of the step function
    ProductProfile prof(Weights::log_power(sigma), 12, mu1, mu2);
    auto K = calibrate_product_constants(prof, 2, 12, sigma);
    int points = 0;
    bool holds = true;
    for (double N : product_checkpoints(prof, 2, 12, sigma)) {
        holds = holds && product_sup_bound(prof, N, K, sigma).holds;
        ++points;
    }
    // sampled frequencies on the window |j| <= 1, certified up to 2^8
    const int M = 8;
    const double N8 = std::ldexp(1.0, M);
    auto w = Weights::finite_window(1, Weights::log_power(sigma));
    ProductProfile wprof(w, N8, mu1, mu2);
    auto Kw = calibrate_product_constants(wprof, 2, N8, sigma);
    bool above = true;
    double min_log_ratio = kInf;
    for (int i = 0; i < opt.sampled_frequencies; ++i) {
        Frequency omega = sample_frequency(1, 1.0, 1.0, opt.seed, static_cast<std::uint64_t>(i));
        const double gamma = diophantine_margin(omega, mu1, mu2, w, N8).margin;
        auto b = beta_sequence(omega, w, M);
        for (int m = 1; m <= M; ++m) {
            const double lr = std::log(b(m)) - log_beta_star(m, gamma, Kw.K1, Kw.K2, sigma);
            min_log_ratio = std::min(min_log_ratio, lr);
            above = above && lr >= 0;
        }
    }
    r.pass = holds && above;
    r.detail = "K1 = " + fmt(K.K1) + ", K2 = " + fmt(K.K2) + " hold at " + std::to_string(points) + " checkpoints; " +
               std::to_string(opt.sampled_frequencies) + " sampled frequencies, min log(beta/beta_*) = " + fmt(min_log_ratio);
    return r;
}

inline CriterionResult measure_trend(const AcceptanceOptions& opt) {
    CriterionResult r{10, "measure trend", false, "", 0, 180};
    auto w = Weights::log_power(2.5);
    auto margins = measure_margins(2.5, 1.5, 1.0, 1.0, w, 4, opt.measure_samples, opt.seed);
    const std::vector<double> grid{1e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
    bool monotone = true;
    double prev = 1;
    for (double g : grid) {
        const double p = pass_fraction(margins, g);
        monotone = monotone && p <= prev;
        prev = p;
    }
    const double at4 = pass_fraction(margins, 1e-4);
    const std::vector<double> gs{1e-3, 3e-3, 1e-2};
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double g : gs) {
        const double y = 1 - pass_fraction(margins, g);
        sx += g;
        sy += y;
        sxx += g * g;
        sxy += g * y;
    }
    const double n = static_cast<double>(gs.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    r.pass = monotone && at4 >= 0.9 && slope > 0;
    r.detail = "fraction " + fmt(at4) + " at gamma = 1e-4, " + fmt(pass_fraction(margins, 1e-2)) +
               " at 1e-2, monotone " + (monotone ? "yes" : "no") + ", slope of 1 - fraction " + fmt(slope);
    return r;
}

inline CriterionResult thresholds(const AcceptanceOptions&) {
    CriterionResult r{11, "thresholds", false, "", 0, 0};
    auto fx = three_rotor_fixture();
    auto ctx = DivisorContext::build(fx.omega, fx.weights, 12);
    const double s = fx.s, s2 = 0.25;
    auto th = threshold_estimates(fx.f, fx.weights, s, s2, ctx);
    auto radius = empirical_radius(synthesize(fx.f, ctx, fx.weights, 1e-3, 8));
    const double want = (s - s2) / (s - s2 + 2);
    const bool ratio = std::abs(th.main.eps2 / th.main.eps1 - want) <= 4 * std::numeric_limits<double>::epsilon() * want;
    std::vector<double> lx, ly;
    for (double g : {1e-3, 1e-2, 1e-1}) {
        ThresholdOptions o;
        o.gamma = g;
        auto t = threshold_estimates(fx.f, fx.weights, s, s2, ctx.scaled(g), o);
        lx.push_back(std::log(g));
        ly.push_back(std::log(t.scaled->eps1 / t.main.eps1));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i] / 3;
        my += ly[i] / 3;
    }
    double num = 0, den = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    const double slope = num / den;
    r.pass = radius.defined && radius.eps_hat >= th.main.eps1 && ratio && std::abs(slope + 2) <= 0.2;
    r.detail = "eps_hat " + fmt(radius.eps_hat) + " >= eps1 " + fmt(th.main.eps1) + " (n0 = " + std::to_string(th.main.n0) +
               "), eps2/eps1 " + (ratio ? "exact" : "off") + ", gamma slope " + fmt(slope);
    return r;
}

}  // namespace accept

// Runs criteria 1..11 in order; `on_result` sees each one as soon as it finishes.
inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt = {},
                                                   const std::function<void(const CriterionResult&)>& on_result = {}) {
    using Fn = CriterionResult (*)(const AcceptanceOptions&);
    const Fn all[] = {accept::oracle_equivalence, accept::residual_order, accept::ode_validation, accept::cancellations,
                      accept::counting_bound,     accept::worked_examples, accept::scale_machinery, accept::kernel_identity,
                      accept::product_chain,      accept::measure_trend,  accept::thresholds};
    const char* names[] = {"oracle equivalence", "residual order", "ODE validation", "self-energy cancellations",
                           "counting bound", "worked examples", "scale machinery", "kernel identity and invariants",
                           "product bound and beta lower bound", "measure trend", "thresholds"};
    std::vector<CriterionResult> out;
    for (int i = 0; i < 11; ++i) {
        const auto t0 = accept::Clock::now();
        CriterionResult r;
        try {
            r = all[i](opt);
        } catch (const std::exception& e) {
            r = {i + 1, names[i], false, std::string("error: ") + e.what(), 0, 0};
        }
        r.seconds = std::chrono::duration<double>(accept::Clock::now() - t0).count();
        if (r.time_limit > 0 && r.seconds > r.time_limit) {
            r.pass = false;
            r.detail += ", over the " + accept::fmt(r.time_limit) + " s budget";
        }
        out.push_back(r);
        if (on_result) on_result(out.back());
    }
    return out;
}

inline std::string format_result(const CriterionResult& r) {
    std::ostringstream s;
    s << "criterion " << r.id << ' ' << (r.pass ? "PASS" : "FAIL") << "  " << r.name << ": " << r.detail << " ["
      << accept::fmt(r.seconds) << " s]";
    return s.str();
}

}  // namespace kamtree
