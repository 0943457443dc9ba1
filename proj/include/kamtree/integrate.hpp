#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "kamtree/errors.hpp"
#include "kamtree/torus.hpp"

namespace kamtree {

struct TrajectorySample {
    double t = 0;
    std::vector<double> theta, I;
    double H = 0;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    long long steps = 0;

    double energy_drift() const {
        if (samples.empty()) return 0;
        const double H0 = samples.front().H;
        double d = 0;
        for (const auto& s : samples) d = std::max(d, std::abs(s.H - H0));
        return d / std::max(std::abs(H0), 1e-300);
    }
};

namespace detail {

// f restricted to the window, as flat index/exponent lists.
class WindowPotential {
public:
    WindowPotential(const ScalarSeries& f, const Frequency& omega) : J_(omega.half_width()) {
        for (const auto& [nu, c] : f) {
            if (c == cplx{}) continue;
            omega.require_covers(nu);
            Term t{{}, c};
            for (const auto& [j, v] : nu.entries()) t.entries.push_back({static_cast<std::size_t>(j + J_), v});
            terms_.push_back(std::move(t));
        }
    }

    // Re sum_nu f_nu e^{i nu.theta}
    double value(const std::vector<double>& theta) const {
        double s = 0;
        for (const auto& t : terms_) s += (t.c * std::polar(1.0, angle(t, theta))).real();
        return s;
    }

    // d_j f = Re sum_nu i nu_j f_nu e^{i nu.theta}
    void gradient(const std::vector<double>& theta, std::vector<double>& g) const {
        std::fill(g.begin(), g.end(), 0.0);
        for (const auto& t : terms_) {
            const double im = -(t.c * std::polar(1.0, angle(t, theta))).imag();
            for (const auto& [i, v] : t.entries) g[i] += v * im;
        }
    }

private:
    struct Term {
        std::vector<std::pair<std::size_t, int>> entries;
        cplx c;
    };
    static double angle(const Term& t, const std::vector<double>& theta) {
        double a = 0;
        for (const auto& [i, v] : t.entries) a += v * theta[i];
        return a;
    }
    int J_;
    std::vector<Term> terms_;
};

// Compensated running sum.
struct Kahan {
    double sum = 0, c = 0;
    void add(double x) {
        const double y = x - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

}  // namespace detail

// Kick-drift-kick leapfrog for theta' = I, I' = -eps d f(theta).
inline Trajectory integrate_ode(const ScalarSeries& f, const Frequency& omega, double eps, const std::vector<double>& theta0,
                                const std::vector<double>& I0, double dt, double T, int stride = 100) {
    if (!(dt > 0) || !(T > 0)) throw DomainError("integrator needs dt > 0 and T > 0");
    if (stride < 1) throw DomainError("sample stride must be positive");
    const std::size_t D = omega.size();
    if (theta0.size() != D || I0.size() != D) throw DomainError("initial data does not match the frequency window");
    const detail::WindowPotential V(f, omega);
    std::vector<detail::Kahan> th(D), act(D);
    for (std::size_t i = 0; i < D; ++i) {
        th[i].sum = theta0[i];
        act[i].sum = I0[i];
    }
    std::vector<double> theta(theta0), I(I0), g(D);
    Trajectory out;
    out.steps = std::llround(T / dt);
    auto record = [&](long long n) {
        double kin = 0;
        for (double x : I) kin += x * x;
        out.samples.push_back({static_cast<double>(n) * dt, theta, I, 0.5 * kin + eps * V.value(theta)});
    };
    record(0);
    V.gradient(theta, g);
    for (long long n = 1; n <= out.steps; ++n) {
        for (std::size_t i = 0; i < D; ++i) {
            act[i].add(-0.5 * dt * eps * g[i]);
            I[i] = act[i].sum;
            th[i].add(dt * I[i]);
            theta[i] = th[i].sum;
        }
        V.gradient(theta, g);
        for (std::size_t i = 0; i < D; ++i) {
            act[i].add(-0.5 * dt * eps * g[i]);
            I[i] = act[i].sum;
        }
        if (n % stride == 0 || n == out.steps) record(n);
    }
    return out;
}

// sup_j min_k |a_j - b_j - 2 pi k|
inline double torus_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double r = std::remainder(a[i] - b[i], 2 * std::numbers::pi);
        d = std::max(d, std::abs(r));
    }
    return d;
}

struct ValidationRow {
    double t = 0;
    double error = 0;
};

struct Validation {
    double sup_error = 0;
    double energy_drift = 0;
    double imag_residue = 0;
    std::vector<ValidationRow> rows;
};

// theta0 = u(0), I0 = I(0); compare theta(t) with omega t + u(omega t).
inline Validation validate_torus(const SeriesSolution& sol, double dt, double T, int stride = 100) {
    const std::size_t D = sol.omega.size();
    const int J = sol.omega.half_width();
    const std::vector<double> origin(D, 0.0);
    Displacement u0 = evaluate_displacement(sol, origin);
    ActionCurve a = action_curve(sol, {origin});
    Trajectory tr = integrate_ode(sol.f, sol.omega, sol.eps, u0.value, a.I.front(), dt, T, stride);
    Validation v;
    v.energy_drift = tr.energy_drift();
    v.imag_residue = std::max(u0.imag_residue, a.imag_residue);
    std::vector<double> phi(D);
    for (const auto& s : tr.samples) {
        for (std::size_t i = 0; i < D; ++i) phi[i] = sol.omega[static_cast<int>(i) - J] * s.t;
        Displacement u = evaluate_displacement(sol, phi);
        v.imag_residue = std::max(v.imag_residue, u.imag_residue);
        for (std::size_t i = 0; i < D; ++i) phi[i] += u.value[i];
        const double e = torus_distance(s.theta, phi);
        v.rows.push_back({s.t, e});
        v.sup_error = std::max(v.sup_error, e);
    }
    return v;
}

}  // namespace kamtree
