#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "kamtree/modes.hpp"

namespace kamtree {

inline constexpr double kResonanceThreshold = 1e-300;

struct BetaSequence {
    enum class Provenance { empirical, analytic };

    std::vector<double> beta;    // index m = 0..m_max
    std::vector<Mode> witness;   // argmin mode per m (empirical only)
    Provenance provenance = Provenance::empirical;

    int m_max() const { return static_cast<int>(beta.size()) - 1; }
    double operator()(int m) const { return beta.at(static_cast<std::size_t>(m)); }
};

namespace detail {

// min |omega . nu| over 0 < |nu|* <= N.  All coordinates but one are enumerated;
// the remaining one (smallest weight) is solved as the nearest admissible integer.
inline std::pair<double, Mode> min_divisor(const Frequency& omega, const Weights& w, double N) {
    int R = w.reach(N);
    if (R < 0) return {kInf, Mode{}};
    if (R > omega.half_width())
        throw DomainError("frequency window [-" + std::to_string(omega.half_width()) + "," +
                          std::to_string(omega.half_width()) + "] does not cover |j| <= " + std::to_string(R));

    std::vector<int> idx;
    for (int j = -R; j <= R; ++j)
        if (!std::isinf(w.h(j))) idx.push_back(j);
    std::size_t solve = 0;
    for (std::size_t i = 1; i < idx.size(); ++i) {
        double hi = w.h(idx[i]), hs = w.h(idx[solve]);
        if (hi < hs || (hi == hs && std::abs(idx[i]) < std::abs(idx[solve]))) solve = i;
    }
    const int js = idx[solve];
    const double hs = w.h(js), ws = omega[js];
    std::vector<int> others;
    std::vector<double> h;
    for (std::size_t i = 0; i < idx.size(); ++i)
        if (i != solve) {
            others.push_back(idx[i]);
            h.push_back(w.h(idx[i]));
        }

    double best = kInf;
    std::vector<std::pair<int, std::vector<int>>> ties;  // (n_s, others) achieving best
    for_each_lattice_point(h, N, [&](std::span<const int> n, double used) {
        double a = 0;
        bool all_zero = true;
        for (std::size_t i = 0; i < n.size(); ++i) {
            a += omega[others[i]] * n[i];
            all_zero = all_zero && n[i] == 0;
        }
        const int r = max_multiplicity(hs, used, N);
        auto consider = [&](int ns) {
            if (ns < -r || ns > r || (all_zero && ns == 0)) return;
            double x = std::abs(a + ws * ns);
            if (x < best) {
                best = x;
                ties.clear();
            }
            if (x == best) ties.push_back({ns, std::vector<int>(n.begin(), n.end())});
        };
        if (ws == 0) {
            consider(0);
            consider(1);
            consider(-1);
            return;
        }
        double c = -a / ws;
        long long k = std::llround(c);
        k = std::clamp<long long>(k, -r, r);
        for (long long d = -1; d <= 1; ++d) consider(static_cast<int>(k + d));
        if (all_zero) {
            consider(1);
            consider(-1);
        }
    });

    Mode witness;
    bool have = false;
    for (const auto& [ns, n] : ties) {
        std::vector<Mode::Entry> e{{js, ns}};
        for (std::size_t i = 0; i < n.size(); ++i) e.push_back({others[i], n[i]});
        Mode m = Mode::from_entries(std::move(e));
        if (!have || CanonicalLess{&w}(m, witness)) witness = std::move(m);
        have = true;
    }
    if (!have) return {kInf, Mode{}};
    return {std::abs(omega.dot(witness)), witness};
}

}  // namespace detail

// beta(m) = min |omega . nu| over 0 < |nu|* <= 2^m, with an argmin witness.
inline BetaSequence beta_sequence(const Frequency& omega, const Weights& w, int m_max) {
    if (m_max < 0) throw DomainError("m_max must be nonnegative");
    BetaSequence b;
    for (int m = 0; m <= m_max; ++m) {
        auto [x, nu] = detail::min_divisor(omega, w, std::ldexp(1.0, m));
        if (x < kResonanceThreshold)
            throw ResonanceError("resonant frequency: omega . nu = 0 for nu = " + nu.str(), nu.str());
        b.beta.push_back(x);
        b.witness.push_back(std::move(nu));
    }
    return b;
}

struct BryunoSum {
    double sum;
    double last_increment;
};

// sum_{m=1}^{M} 2^{-m} log(1/beta(m))
inline BryunoSum bryuno_sum(const BetaSequence& b, int M) {
    if (M > b.m_max()) throw TruncationError("Bryuno sum beyond the computed beta range");
    BryunoSum r{0, 0};
    for (int m = 1; m <= M; ++m) {
        double beta = b(m);
        if (!(beta > 0) || std::isinf(beta)) throw DomainError("beta values must lie in (0, inf)");
        r.last_increment = std::ldexp(1.0, -m) * std::log(1 / beta);
        r.sum += r.last_increment;
    }
    return r;
}

struct ScaleSequence {
    std::vector<int> m;      // m_0 = 0 < m_1 < ...
    bool truncated = false;  // beta stopped halving before m_max
    int n_max() const { return static_cast<int>(m.size()) - 1; }
};

// m_{n+1} = m_n + i_n + 1 with i_n = max{i : beta(m_n) < 2 beta(m_n + i)}, i.e. the
// first m > m_n with beta(m) <= beta(m_n)/2.
inline ScaleSequence scale_sequence(const BetaSequence& b) {
    if (b.beta.empty()) throw DomainError("empty beta sequence");
    ScaleSequence s;
    s.m.push_back(0);
    for (;;) {
        int cur = s.m.back();
        int next = -1;
        for (int m = cur + 1; m <= b.m_max(); ++m)
            if (b(m) <= 0.5 * b(cur)) {
                next = m;
                break;
            }
        if (next < 0) break;
        s.m.push_back(next);
    }
    s.truncated = s.m.back() < b.m_max();
    return s;
}

struct Scale {
    enum class Kind { zero, value, none };
    Kind kind = Kind::none;
    int n = -1;

    bool is_value() const { return kind == Kind::value; }
    friend bool operator==(const Scale&, const Scale&) = default;
};

// n with beta(m_n)/4 <= |x| < beta(m_{n-1})/4, beta(m_{-1}) = +inf.
inline Scale scale_of(double x, const BetaSequence& b, const ScaleSequence& ms) {
    if (x == 0) return {Scale::Kind::zero, -1};
    double ax = std::abs(x);
    for (int n = 0; n <= ms.n_max(); ++n)
        if (ax >= 0.25 * b(ms.m[static_cast<std::size_t>(n)])) return {Scale::Kind::value, n};
    return {Scale::Kind::none, -1};
}

// Psi_n(x)/x^2, and 1 at x = 0.
inline double propagator(double x, int n, const BetaSequence& b, const ScaleSequence& ms) {
    if (x == 0) return 1.0;
    Scale s = scale_of(x, b, ms);
    return (s.is_value() && s.n == n) ? 1.0 / (x * x) : 0.0;
}

// Bundles what every propagator evaluation needs.
struct DivisorContext {
    Frequency omega;
    BetaSequence beta;
    ScaleSequence scales;

    static DivisorContext build(Frequency omega, const Weights& w, int m_max) {
        auto b = beta_sequence(omega, w, m_max);
        auto s = scale_sequence(b);
        return {std::move(omega), std::move(b), std::move(s)};
    }

    Scale scale(double x) const { return scale_of(x, beta, scales); }

    // omega -> c omega multiplies every divisor by |c|; the halving pattern is unchanged.
    DivisorContext scaled(double c) const {
        if (!(c != 0 && std::isfinite(c))) throw DomainError("scale factor must be finite and nonzero");
        BetaSequence b = beta;
        for (auto& x : b.beta) x *= std::abs(c);
        return {omega.scaled(c), std::move(b), scales};
    }

    // Scale of a nonzero divisor, or a truncation error naming the culprit.
    int require_scale(double x, const Mode& nu) const {
        Scale s = scale(x);
        if (s.kind == Scale::Kind::zero)
            throw ResonanceError("zero divisor on mode " + nu.str(), nu.str());
        if (s.kind == Scale::Kind::none)
            throw TruncationError("divisor of mode " + nu.str() + " is below the computed scale range");
        return s.n;
    }
};

struct DiophantineParams {
    double gamma = 1e-3;
    double mu1 = 2.5;
    double mu2 = 1.5;
};

// prod_j (1 + <j>^mu1 |nu_j|^mu2)
inline double diophantine_product(const Mode& nu, double mu1, double mu2) {
    double p = 1;
    for (const auto& [j, v] : nu.entries())
        p *= 1 + std::pow(bracket(j), mu1) * std::pow(std::abs(v), mu2);
    return p;
}

struct DiophantineResult {
    bool pass;
    std::optional<Mode> witness;  // first violating mode in canonical order
};

inline DiophantineResult diophantine_check(const Frequency& omega, const DiophantineParams& p, const Weights& w,
                                           double N, long long cap = kDefaultModeCap) {
    for (const auto& nu : enumerate_modes(w, N, true, cap))
        if (std::abs(omega.dot(nu)) < p.gamma / diophantine_product(nu, p.mu1, p.mu2)) return {false, nu};
    return {true, std::nullopt};
}

struct DiophantineMargin {
    double margin;  // min |omega . nu| prod_j(...), the largest admissible gamma
    Mode witness;
};

// omega passes diophantine_check at level N exactly when margin >= gamma.
inline DiophantineMargin diophantine_margin(const Frequency& omega, double mu1, double mu2, const Weights& w,
                                            double N) {
    int R = w.reach(N);
    if (R < 0) return {kInf, Mode{}};
    if (R > omega.half_width()) throw DomainError("frequency window does not cover the enumeration range");
    std::vector<double> h;
    for (int j = -R; j <= R; ++j) h.push_back(w.h(j));
    // factor table per slot and |n|
    std::vector<std::vector<double>> fac(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        int r = 0;
        if (!std::isinf(h[i]))
            r = max_multiplicity(h[i], 0.0, N);
        for (int a = 0; a <= r; ++a)
            fac[i].push_back(1 + std::pow(bracket(static_cast<int>(i) - R), mu1) * std::pow(a, mu2));
    }
    double best = kInf;
    std::vector<int> arg;
    for_each_lattice_point(h, N, [&](std::span<const int> n, double) {
        double x = 0, p = 1;
        bool zero = true;
        for (std::size_t i = 0; i < n.size(); ++i) {
            if (n[i] == 0) continue;
            zero = false;
            x += omega[static_cast<int>(i) - R] * n[i];
            p *= fac[i][static_cast<std::size_t>(std::abs(n[i]))];
        }
        if (zero) return;
        double v = std::abs(x) * p;
        if (v < best) {
            best = v;
            arg.assign(n.begin(), n.end());
        }
    });
    return {best, arg.empty() ? Mode{} : Mode::from_dense(-R, arg)};
}

// (gamma/K1) exp(-K2 2^m (log 2^m)^{-(sigma-1)}), m >= 1; log form avoids underflow.
inline double log_beta_star(int m, double gamma, double K1, double K2, double sigma) {
    if (m < 1) throw DomainError("the analytic beta bound is defined for m >= 1");
    double N = std::ldexp(1.0, m);
    return std::log(gamma / K1) - K2 * N * std::pow(m * std::log(2.0), -(sigma - 1));
}

inline double beta_star_lower_bound(int m, double gamma, double K1, double K2, double sigma) {
    return std::exp(log_beta_star(m, gamma, K1, K2, sigma));
}

// Step function N -> max log prod_j(1 + <j>^mu1 |nu_j|^mu2) over 0 < |nu|* <= N.
// The objective depends on |nu_j| only, so nonnegative magnitudes suffice.
class ProductProfile {
public:
    ProductProfile(const Weights& w, double N_max, double mu1, double mu2, long long cap = kDefaultModeCap) {
        int R = w.reach(N_max);
        // Pareto frontier of (star, log product), merged one coordinate at a time.
        // The objective is separable, so a dominated partial sum never becomes optimal.
        std::vector<std::pair<double, double>> front{{0.0, 0.0}};
        for (int j = -R; j <= R; ++j) {
            const double h = w.h(j);
            if (std::isinf(h)) continue;
            const double b = std::pow(bracket(j), mu1);
            std::vector<std::pair<double, double>> next;
            for (const auto& [used, lp] : front)
                for (int a = 0; within_budget(used + a * h, N_max); ++a) {
                    next.push_back({used + a * h, a ? lp + std::log1p(b * std::pow(a, mu2)) : lp});
                    if (static_cast<long long>(next.size()) > cap)
                        throw ResourceError("product profile exceeded cap", static_cast<long long>(next.size()));
                }
            front = pareto(std::move(next));
        }
        // the zero mode is the only point with star 0
        for (const auto& [st, lp] : front)
            if (st > 0) {
                star_.push_back(st);
                log_best_.push_back(lp);
            }
        N_max_ = N_max;
    }

    // 1 when no nonzero mode fits (empty max).
    double lhs(double N) const { return std::exp(log_lhs(N)); }
    double log_lhs(double N) const {
        if (N > N_max_ * (1 + 1e-12)) throw DomainError("profile queried beyond its range");
        double r = 0;
        for (std::size_t i = 0; i < star_.size() && within_budget(star_[i], N); ++i) r = log_best_[i];
        return r;
    }
    // Points where the step function jumps.
    const std::vector<double>& jumps() const { return star_; }

private:
    // Points with strictly larger log product than every point of smaller or equal star.
    static std::vector<std::pair<double, double>> pareto(std::vector<std::pair<double, double>> pts) {
        std::sort(pts.begin(), pts.end(), [](const auto& x, const auto& y) {
            return x.first < y.first || (x.first == y.first && x.second > y.second);
        });
        std::vector<std::pair<double, double>> out;
        double run = -kInf;
        for (const auto& p : pts)
            if (p.second > run) {
                run = p.second;
                out.push_back(p);
            }
        return out;
    }

    std::vector<double> star_, log_best_;
    double N_max_ = 0;
};

struct ProductConstants {
    double K1;
    double K2;
};

struct ProductBound {
    double lhs;
    double rhs;
    bool holds;
};

inline double product_rhs(double N, const ProductConstants& K, double sigma) {
    return K.K1 * std::exp(K.K2 * N / std::pow(std::log(N), sigma - 1));
}

inline ProductBound product_sup_bound(const ProductProfile& prof, double N, const ProductConstants& K,
                                      double sigma) {
    if (!(N > 1)) throw DomainError("product bound needs N > 1");
    double l = prof.lhs(N), r = product_rhs(N, K, sigma);
    return {l, r, l <= r};
}

inline ProductBound product_sup_bound(const Weights& w, double N, double mu1, double mu2, double sigma,
                                      const ProductConstants& K) {
    return product_sup_bound(ProductProfile(w, N, mu1, mu2), N, K, sigma);
}

// Points of [N_lo, N_hi] where lhs <= rhs can first fail: the jumps of lhs, the
// ends, and the minimum of N/(log N)^(sigma-1).
inline std::vector<double> product_checkpoints(const ProductProfile& prof, double N_lo, double N_hi, double sigma) {
    std::vector<double> pts{N_lo, N_hi};
    for (double s : prof.jumps())
        if (s >= N_lo && s <= N_hi) pts.push_back(s);
    double turn = std::exp(sigma - 1);
    if (turn > N_lo && turn < N_hi) pts.push_back(turn);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

// K1 = max(1, lhs(N_lo)); K2 = the smallest value making lhs <= rhs on [N_lo, N_hi].
inline ProductConstants calibrate_product_constants(const ProductProfile& prof, double N_lo, double N_hi,
                                                    double sigma) {
    if (!(N_lo > 1) || N_hi < N_lo) throw DomainError("calibration range must satisfy 1 < N_lo <= N_hi");
    ProductConstants K{std::max(1.0, prof.lhs(N_lo)), 0.0};
    for (double N : product_checkpoints(prof, N_lo, N_hi, sigma)) {
        double need = (prof.log_lhs(N) - std::log(K.K1)) * std::pow(std::log(N), sigma - 1) / N;
        K.K2 = std::max(K.K2, need);
    }
    K.K2 = K.K2 * (1 + 1e-12) + 1e-300;
    return K;
}

// Uniform draw of omega_j in [-<j>^{-q} rho, <j>^{-q} rho], j in [-R, R], from sub-stream `index`.
inline Frequency sample_frequency(int R, double q, double rho, std::uint64_t seed, std::uint64_t index) {
    std::mt19937_64 gen(seed ^ index);
    std::vector<double> v;
    for (int j = -R; j <= R; ++j) {
        double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        double a = std::pow(bracket(j), -q) * rho;
        v.push_back((2 * u - 1) * a);
    }
    return Frequency(std::move(v));
}

// Diophantine margins of `samples` random frequencies on the window h_j <= N.
inline std::vector<double> measure_margins(double mu1, double mu2, double q, double rho, const Weights& w, double N,
                                           int samples, std::uint64_t seed) {
    if (samples < 1) throw DomainError("need at least one sample");
    int R = w.reach(N);
    if (R < 0) R = 0;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
        Frequency omega = sample_frequency(R, q, rho, seed, static_cast<std::uint64_t>(i));
        out.push_back(diophantine_margin(omega, mu1, mu2, w, N).margin);
    }
    return out;
}

inline double pass_fraction(const std::vector<double>& margins, double gamma) {
    std::size_t pass = 0;
    for (double m : margins) pass += m >= gamma;
    return static_cast<double>(pass) / static_cast<double>(margins.size());
}

inline double measure_estimate(const DiophantineParams& p, double q, double rho, const Weights& w, double N,
                               int samples, std::uint64_t seed) {
    return pass_fraction(measure_margins(p.mu1, p.mu2, q, rho, w, N, samples, seed), p.gamma);
}

}  // namespace kamtree
