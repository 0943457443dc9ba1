#pragma once

#include <climits>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "kamtree/errors.hpp"
#include "kamtree/modes.hpp"
#include "kamtree/smalldiv.hpp"
#include "kamtree/trees.hpp"

namespace kamtree {

// Square complex matrix on the frequency window, acting as z -> A z.
class LinearKernel {
public:
    explicit LinearKernel(std::size_t n = 0) : n_(n), a_(n * n) {}

    std::size_t size() const { return n_; }
    cplx& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    cplx operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

    Vec apply(const Vec& z) const {
        Vec out(n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) out[i] += (*this)(i, j) * z[j];
        return out;
    }

    // Operator norm induced by the sup norm: largest row sum.
    double norm() const {
        double m = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            double r = 0;
            for (std::size_t j = 0; j < n_; ++j) r += std::abs((*this)(i, j));
            m = std::max(m, r);
        }
        return m;
    }

    LinearKernel& operator+=(const LinearKernel& o) {
        if (n_ == 0) *this = LinearKernel(o.n_);
        if (o.n_ != n_) throw DomainError("kernel size mismatch");
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }
    friend LinearKernel operator-(LinearKernel a, const LinearKernel& b) {
        for (std::size_t i = 0; i < a.a_.size(); ++i) a.a_[i] -= b.a_[i];
        return a;
    }
    friend LinearKernel operator*(cplx c, LinearKernel a) {
        for (auto& x : a.a_) x *= c;
        return a;
    }

    // c (i a)(i b)^T
    static LinearKernel outer(cplx c, const Mode& a, const Mode& b, const Frequency& omega) {
        LinearKernel k(omega.size());
        const int J = omega.half_width();
        for (const auto& [ja, va] : a.entries())
            for (const auto& [jb, vb] : b.entries())
                k(static_cast<std::size_t>(ja + J), static_cast<std::size_t>(jb + J)) = -c * static_cast<double>(va * vb);
        return k;
    }

private:
    std::size_t n_;
    std::vector<cplx> a_;
};

// A resonant cluster inside a host tree: the nodes of subtree(top) outside
// subtree(entering).  `entering` is the node whose exit line enters the cluster.
struct ResonantCluster {
    int top = 0;
    int entering = 0;
    std::vector<int> nodes;
    std::vector<int> path;  // cluster nodes from parent(entering) up to, not including, top
    double K = 0;
    int n_bar = INT_MIN;    // max internal scale, INT_MIN when there is no internal line
    int n_T = 0;
};

namespace detail {

inline std::vector<double> subtree_weight(const Tree& t, const Weights& w) {
    std::vector<double> K(static_cast<std::size_t>(t.k()));
    for (int v = 0; v < t.k(); ++v) K[static_cast<std::size_t>(v)] = star_norm(t.mode(v), w);
    for (int v = t.k() - 1; v >= 1; --v) K[static_cast<std::size_t>(t.parent(v))] += K[static_cast<std::size_t>(v)];
    return K;
}

}  // namespace detail

// All clusters meeting: one entering and one exiting line, equal momenta on
// both, K(T) < 2^(m_{n_T} - 1), internal scales below n_T.
inline std::vector<ResonantCluster> find_resonant_clusters(const Tree& t, const std::vector<LineData>& lines,
                                                           const Weights& w, const DivisorContext& ctx) {
    std::vector<ResonantCluster> out;
    const auto Ksub = detail::subtree_weight(t, w);
    for (int top = 0; top < t.k(); ++top) {
        const auto& Lt = lines[static_cast<std::size_t>(top)];
        if (!Lt.scale.is_value()) continue;
        for (int e = top + 1; e < t.k(); ++e) {
            if (!descends_from(t.shape, e, top)) continue;
            const auto& Le = lines[static_cast<std::size_t>(e)];
            if (Le.momentum != Lt.momentum) continue;
            ResonantCluster c;
            c.top = top;
            c.entering = e;
            c.n_T = std::min(Lt.scale.n, Le.scale.n);
            c.K = Ksub[static_cast<std::size_t>(top)] - Ksub[static_cast<std::size_t>(e)];
            if (!(c.K < std::ldexp(1.0, ctx.scales.m[static_cast<std::size_t>(c.n_T)] - 1))) continue;
            for (int v = top; v < t.k(); ++v)
                if (descends_from(t.shape, v, top) && !descends_from(t.shape, v, e)) {
                    c.nodes.push_back(v);
                    if (v != top) c.n_bar = std::max(c.n_bar, lines[static_cast<std::size_t>(v)].scale.n);
                }
            if (!(c.n_bar < c.n_T)) continue;
            for (int v = t.parent(e); v != top; v = t.parent(v)) c.path.push_back(v);
            out.push_back(std::move(c));
        }
    }
    return out;
}

// Lines exiting some cluster.
inline std::vector<bool> resonant_lines(const Tree& t, const std::vector<ResonantCluster>& clusters) {
    std::vector<bool> r(static_cast<std::size_t>(t.k()), false);
    for (const auto& c : clusters) r[static_cast<std::size_t>(c.top)] = true;
    return r;
}

// Non-resonant lines on scale >= n.
inline int nonresonant_count(const std::vector<LineData>& lines, const std::vector<bool>& resonant, int n) {
    int count = 0;
    for (std::size_t v = 0; v < lines.size(); ++v)
        if (!resonant[v] && lines[v].scale.is_value() && lines[v].scale.n >= n) ++count;
    return count;
}

// Value with the propagators of resonant lines dropped.
inline Vec nonresonant_value(const Tree& t, const ScalarSeries& f, const DivisorContext& ctx, const std::vector<LineData>& lines,
                             const std::vector<bool>& resonant) {
    Vec v = node_factor_product(t, f, ctx.omega);
    cplx g = 1;
    for (std::size_t l = 0; l < lines.size(); ++l) {
        if (resonant[l] || lines[l].momentum.is_zero()) continue;
        g *= propagator(lines[l].divisor, lines[l].scale.n, ctx.beta, ctx.scales);
    }
    for (auto& c : v) c *= g;
    return v;
}

namespace detail {

// Truncated Taylor jet (value, first, second derivative / 2).
struct Jet {
    double c[3] = {1, 0, 0};
    Jet& operator*=(const Jet& o) {
        double r[3] = {c[0] * o.c[0], c[0] * o.c[1] + c[1] * o.c[0], c[0] * o.c[2] + c[1] * o.c[1] + c[2] * o.c[0]};
        c[0] = r[0], c[1] = r[1], c[2] = r[2];
        return *this;
    }
    double derivative(int order) const { return order == 2 ? 2 * c[2] : c[order]; }
};

// Jet of 1/xi^2 in x where xi = xi0 + x.
inline Jet inverse_square(double xi) {
    Jet j;
    j.c[0] = 1 / (xi * xi);
    j.c[1] = -2 / (xi * xi * xi);
    j.c[2] = 3 / (xi * xi * xi * xi);
    return j;
}

struct ClusterLine {
    double xi0;     // omega . nu^0
    bool on_path;
    int host_scale; // used when the indicator is the host one
};

// d^order/dx^order of prod_l [indicator] 1/xi_l^2; the indicators are held
// fixed.
template <class Indicator>
double propagator_product(const std::vector<ClusterLine>& ls, double x, int order, Indicator&& ind) {
    if (order < 0 || order > 2) throw DomainError("derivative order must be 0, 1 or 2");
    Jet total;
    for (const auto& l : ls) {
        const double xi = l.on_path ? l.xi0 + x : l.xi0;
        if (xi == 0) throw DomainError("singular cluster evaluation: vanishing internal divisor");
        if (!ind(xi, l)) return 0.0;
        if (l.on_path) {
            total *= inverse_square(xi);
        } else {
            Jet c;
            c.c[0] = 1 / (xi * xi);
            total *= c;
        }
    }
    return total.derivative(order);
}

}  // namespace detail

// W_T(x) or one of its first two x-derivatives, with the host tree's node
// factors and the host line scales n_l as indicators.
inline LinearKernel cluster_operator(const Tree& t, const std::vector<LineData>& lines, const ResonantCluster& c, double x,
                                     const ScalarSeries& f, const DivisorContext& ctx, int derivative_order = 0) {
    const auto ch = t.shape.children();
    const int p_top = static_cast<int>(ch[static_cast<std::size_t>(c.top)].size());
    const cplx* ft = f.find(t.mode(c.top));
    cplx scalar = ft ? *ft / factorial(p_top) : cplx{};
    std::vector<detail::ClusterLine> ls;
    const Mode& entering_momentum = lines[static_cast<std::size_t>(c.entering)].momentum;
    for (int v : c.nodes) {
        if (v == c.top) continue;
        const cplx* fv = f.find(t.mode(v));
        const int pv = static_cast<int>(ch[static_cast<std::size_t>(v)].size());
        scalar *= (fv ? *fv : cplx{}) / factorial(pv) * -static_cast<double>(dot(t.mode(t.parent(v)), t.mode(v)));
        const bool on_path = std::find(c.path.begin(), c.path.end(), v) != c.path.end();
        const auto& L = lines[static_cast<std::size_t>(v)];
        const double xi0 = on_path ? ctx.omega.dot(L.momentum - entering_momentum) : L.divisor;
        ls.push_back({xi0, on_path, L.scale.n});
    }
    const double g = detail::propagator_product(ls, x, derivative_order, [&](double xi, const detail::ClusterLine& l) {
        Scale s = ctx.scale(xi);
        return s.is_value() && s.n == l.host_scale;
    });
    return LinearKernel::outer(scalar * g, t.mode(c.top), t.mode(t.parent(c.entering)), ctx.omega);
}

// Exhaustive check of N_n(tree) <= max{4 K(tree) 2^(-m_n) - 1, 0} over every
// tree of order <= k_max with nonzero value and nonzero root momentum.
struct CountingCheck {
    long long trees = 0;
    long long comparisons = 0;
    long long violations = 0;
    long long clusters = 0;
    long long clusters_equal_scales = 0;  // n_T equal on both external lines
    std::string first_violation;
};

inline CountingCheck counting_bound_check(int k_max, const ScalarSeries& f, const Weights& w, const DivisorContext& ctx,
                                          EnumerationLimits lim = {}) {
    CountingCheck out;
    const auto support = f.support();
    for (int k = 1; k <= k_max; ++k)
        for_each_labeled_tree(
            k, support, ctx.omega,
            [&](const TreeShape& shape, std::span<const int> labels, std::span<const int> mom) {
                if (std::all_of(mom.begin(), mom.begin() + static_cast<std::ptrdiff_t>(ctx.omega.size()),
                                [](int v) { return v == 0; }))
                    return;
                Tree t = make_tree(shape, labels, support);
                for (int v = 0; v < k; ++v) {
                    if (t.mode(v).is_zero()) return;
                    if (v > 0 && dot(t.mode(t.parent(v)), t.mode(v)) == 0) return;
                }
                auto lines = annotate(t, ctx);
                auto cl = find_resonant_clusters(t, lines, w, ctx);
                auto res = resonant_lines(t, cl);
                out.clusters += static_cast<long long>(cl.size());
                for (const auto& c : cl)
                    if (lines[static_cast<std::size_t>(c.top)].scale.n == lines[static_cast<std::size_t>(c.entering)].scale.n)
                        ++out.clusters_equal_scales;
                double K = 0;
                for (const auto& m : t.modes) K += star_norm(m, w);
                ++out.trees;
                for (int n = 0; n <= ctx.scales.n_max(); ++n) {
                    const int N = nonresonant_count(lines, res, n);
                    const double bound = std::max(4 * K * std::ldexp(1.0, -ctx.scales.m[static_cast<std::size_t>(n)]) - 1, 0.0);
                    ++out.comparisons;
                    if (static_cast<double>(N) > bound) {
                        if (out.violations++ == 0)
                            out.first_violation = t.shape.str() + " n=" + std::to_string(n) + " N=" + std::to_string(N) +
                                                  " K=" + std::to_string(K);
                    }
                }
            },
            lim);
    return out;
}

// One summand of the self-energy: tree, node receiving the entering line, and
// the slot among that node's p_w + 1 insertion positions.
struct SelfEnergyTerm {
    Tree tree;
    int attach = 0;
    int position = 0;
    bool x_dependent = false;  // entering node below the top, so the path is nonempty
    LinearKernel W;
};

struct SelfEnergy {
    LinearKernel M;
    double raw = 0;  // sum of the summands' norms
    long long summands = 0;
    std::vector<SelfEnergyTerm> terms;  // filled only on request
};

// M_n^(k)(x): trees with root momentum 0 and k nodes, entering line attached at
// every node and slot, propagators cut to [scale(xi) < n] / xi^2.
inline SelfEnergy self_energy(int k, int n, double x, const ScalarSeries& f, const DivisorContext& ctx,
                              int derivative_order = 0, bool keep_terms = false, EnumerationLimits lim = {}) {
    if (k < 1) throw DomainError("self energy needs k >= 1");
    SelfEnergy out;
    out.M = LinearKernel(ctx.omega.size());
    const auto support = f.support();
    const std::size_t D = ctx.omega.size();
    auto cut = [&](double xi, const detail::ClusterLine&) {
        Scale s = ctx.scale(xi);
        if (s.kind == Scale::Kind::zero) throw DomainError("singular cluster evaluation: vanishing internal divisor");
        return s.is_value() && s.n < n;
    };
    for_each_labeled_tree(
        k, support, ctx.omega,
        [&](const TreeShape& shape, std::span<const int> labels, std::span<const int> mom) {
            if (!std::all_of(mom.begin(), mom.begin() + static_cast<std::ptrdiff_t>(D), [](int v) { return v == 0; })) return;
            Tree t = make_tree(shape, labels, support);
            auto lines = line_momenta(t);
            const auto p = branching(shape);
            cplx base = 1;
            for (int v = 0; v < k; ++v) {
                base *= *f.find(t.mode(v));
                if (v > 0) base *= -static_cast<double>(dot(t.mode(t.parent(v)), t.mode(v)));
            }
            for (int w = 0; w < k; ++w) {
                // path: lines from w up to, not including, the root line
                std::vector<detail::ClusterLine> ls;
                for (int v = 1; v < k; ++v)
                    ls.push_back({ctx.omega.dot(lines[static_cast<std::size_t>(v)]), descends_from(shape, w, v), -1});
                const double g = detail::propagator_product(ls, x, derivative_order, cut);
                cplx scalar = base;
                for (int v = 0; v < k; ++v)
                    scalar /= factorial(p[static_cast<std::size_t>(v)] + (v == w ? 1 : 0));
                LinearKernel W = LinearKernel::outer(scalar * g, t.mode(0), t.mode(w), ctx.omega);
                const double nw = W.norm();
                for (int pos = 0; pos <= p[static_cast<std::size_t>(w)]; ++pos) {
                    out.M += W;
                    out.raw += nw;
                    ++out.summands;
                    if (keep_terms) out.terms.push_back({t, w, pos, w != 0, W});
                }
            }
        },
        lim);
    return out;
}

struct CancellationRow {
    int k = 0;
    int n = 0;
    double norm_M0 = 0, norm_dM0 = 0;
    double raw0 = 0, raw1 = 0;
    double x_sample = 0, remainder = 0;
    long long summands = 0;

    double ratio0() const { return raw0 > 0 ? norm_M0 / raw0 : 0; }
    double ratio1() const { return raw1 > 0 ? norm_dM0 / raw1 : 0; }
};

// M(0), dM(0) and the Taylor remainder (M(x) - M(0) - x dM(0)) / x^2 at x at
// the lower edge of shell n, for each k <= k_max and n = 1..n_max.
inline std::vector<CancellationRow> cancellation_report(int k_max, const ScalarSeries& f, const DivisorContext& ctx,
                                                        EnumerationLimits lim = {}) {
    std::vector<CancellationRow> rows;
    for (int k = 1; k <= k_max; ++k)
        for (int n = 1; n <= ctx.scales.n_max(); ++n) {
            CancellationRow r;
            r.k = k;
            r.n = n;
            auto m0 = self_energy(k, n, 0.0, f, ctx, 0, false, lim);
            auto m1 = self_energy(k, n, 0.0, f, ctx, 1, false, lim);
            r.norm_M0 = m0.M.norm();
            r.norm_dM0 = m1.M.norm();
            r.raw0 = m0.raw;
            r.raw1 = m1.raw;
            r.summands = m0.summands;
            r.x_sample = 0.25 * ctx.beta(ctx.scales.m[static_cast<std::size_t>(n)]);
            auto mx = self_energy(k, n, r.x_sample, f, ctx, 0, false, lim);
            LinearKernel R = mx.M - m0.M - r.x_sample * m1.M;
            r.remainder = R.norm() / (r.x_sample * r.x_sample);
            rows.push_back(r);
        }
    return rows;
}

}  // namespace kamtree
