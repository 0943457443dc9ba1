#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kamtree/errors.hpp"
#include "kamtree/lindstedt.hpp"
#include "kamtree/modes.hpp"
#include "kamtree/smalldiv.hpp"

namespace kamtree {

// Plane rooted tree shape in preorder: parent[0] = -1, parent[i] < i.  Children
// of a node are ordered by index.
struct TreeShape {
    std::vector<int> parent;

    int size() const { return static_cast<int>(parent.size()); }

    std::vector<std::vector<int>> children() const {
        std::vector<std::vector<int>> c(parent.size());
        for (std::size_t i = 1; i < parent.size(); ++i) c[static_cast<std::size_t>(parent[i])].push_back(static_cast<int>(i));
        return c;
    }

    // Balanced parentheses, one pair per node.
    std::string str() const {
        auto ch = children();
        std::string s;
        auto rec = [&](auto&& self, int v) -> void {
            s += '(';
            for (int c : ch[static_cast<std::size_t>(v)]) self(self, c);
            s += ')';
        };
        if (!parent.empty()) rec(rec, 0);
        return s;
    }

    friend bool operator==(const TreeShape&, const TreeShape&) = default;
};

// All plane trees with k nodes; node i hangs off the rightmost path of nodes 0..i-1.
inline std::vector<TreeShape> plane_shapes(int k) {
    if (k < 1) throw DomainError("trees need k >= 1");
    std::vector<TreeShape> out;
    std::vector<int> parent{-1};
    auto rec = [&](auto&& self) -> void {
        if (static_cast<int>(parent.size()) == k) {
            out.push_back({parent});
            return;
        }
        for (int a = static_cast<int>(parent.size()) - 1; a >= 0; a = parent[static_cast<std::size_t>(a)]) {
            parent.push_back(a);
            self(self);
            parent.pop_back();
        }
    };
    rec(rec);
    return out;
}

// A labeled tree: shape plus one Fourier mode per node.
struct Tree {
    TreeShape shape;
    std::vector<Mode> modes;

    int k() const { return shape.size(); }
    int parent(int v) const { return shape.parent[static_cast<std::size_t>(v)]; }
    const Mode& mode(int v) const { return modes[static_cast<std::size_t>(v)]; }
};

// nu_l for the line exiting each node: sum of the modes at or below it.
inline std::vector<Mode> line_momenta(const Tree& t) {
    std::vector<Mode> mom(t.modes);
    for (int v = t.k() - 1; v >= 1; --v) {
        auto& p = mom[static_cast<std::size_t>(t.parent(v))];
        p = p + mom[static_cast<std::size_t>(v)];
    }
    return mom;
}

inline std::vector<int> branching(const TreeShape& s) {
    std::vector<int> p(s.parent.size(), 0);
    for (std::size_t i = 1; i < s.parent.size(); ++i) ++p[static_cast<std::size_t>(s.parent[i])];
    return p;
}

inline bool descends_from(const TreeShape& s, int v, int a) {
    while (v >= 0 && v != a) v = s.parent[static_cast<std::size_t>(v)];
    return v == a;
}

// Momentum, divisor and scale of the line exiting each node.
struct LineData {
    Mode momentum;
    double divisor = 0;
    Scale scale;
};

inline std::vector<LineData> annotate(const Tree& t, const DivisorContext& ctx) {
    auto mom = line_momenta(t);
    std::vector<LineData> out;
    out.reserve(mom.size());
    for (std::size_t v = 0; v < mom.size(); ++v) {
        double x = ctx.omega.dot(mom[v]);
        Scale sc = ctx.scale(x);
        if (v > 0 && mom[v].is_zero()) throw DomainError("non-root line with zero momentum");
        if (!mom[v].is_zero() && sc.kind == Scale::Kind::none)
            throw TruncationError("divisor of mode " + mom[v].str() + " is below the computed scale range");
        out.push_back({std::move(mom[v]), x, sc});
    }
    return out;
}

inline double factorial(int n) {
    double r = 1;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

// Scalar part c of the subtree value at v: V_v = (i nu_v) c_v, including the
// propagator of the line exiting v.
inline cplx subtree_scalar(const Tree& t, int v, const ScalarSeries& f, const std::vector<LineData>& lines,
                           const DivisorContext& ctx) {
    const auto ch = t.shape.children();
    auto rec = [&](auto&& self, int a) -> cplx {
        const cplx* fa = f.find(t.mode(a));
        if (!fa) return 0.0;
        const auto& kids = ch[static_cast<std::size_t>(a)];
        cplx c = *fa / factorial(static_cast<int>(kids.size()));
        for (int b : kids) c *= -static_cast<double>(dot(t.mode(a), t.mode(b))) * self(self, b);
        const auto& L = lines[static_cast<std::size_t>(a)];
        c *= L.momentum.is_zero() ? 1.0 : propagator(L.divisor, L.scale.n, ctx.beta, ctx.scales);
        return c;
    };
    return rec(rec, v);
}

// Ordered node-factor product alone, without propagators.
inline Vec node_factor_product(const Tree& t, const ScalarSeries& f, const Frequency& omega) {
    const auto ch = t.shape.children();
    auto rec = [&](auto&& self, int a) -> cplx {
        const cplx* fa = f.find(t.mode(a));
        if (!fa) return 0.0;
        const auto& kids = ch[static_cast<std::size_t>(a)];
        cplx c = *fa / factorial(static_cast<int>(kids.size()));
        for (int b : kids) c *= -static_cast<double>(dot(t.mode(a), t.mode(b))) * self(self, b);
        return c;
    };
    Vec v = i_nu(t.mode(0), omega);
    const cplx c = rec(rec, 0);
    for (auto& x : v) x *= c;
    return v;
}

inline Vec scale_by_i_nu(const Mode& nu, cplx c, const Frequency& omega) {
    Vec v = i_nu(nu, omega);
    for (auto& x : v) x *= c;
    return v;
}

// V(tree): ordered node factors f_v/p_v! (i nu_v)^(p_v+1) contracted along the
// lines, times every propagator including the root line's.
inline Vec tree_value(const Tree& t, const ScalarSeries& f, const DivisorContext& ctx) {
    auto lines = annotate(t, ctx);
    return scale_by_i_nu(t.mode(0), subtree_scalar(t, 0, f, lines, ctx), ctx.omega);
}

inline Vec subtree_value(const Tree& t, int v, const ScalarSeries& f, const DivisorContext& ctx) {
    auto lines = annotate(t, ctx);
    return scale_by_i_nu(t.mode(v), subtree_scalar(t, v, f, lines, ctx), ctx.omega);
}

// Visits every plane tree with k nodes labeled from `support` whose non-root
// lines all carry nonzero momentum.  `visit(shape, labels, momenta)` receives
// indices into `support` and dense window momenta.  Returns the number visited.
struct EnumerationLimits {
    long long cap = 50'000'000;
};

namespace detail {

struct DenseSupport {
    int J = 0;
    std::size_t D = 0;
    std::vector<std::vector<int>> dense;

    DenseSupport(const std::vector<Mode>& support, const Frequency& omega) : J(omega.half_width()), D(omega.size()) {
        for (const auto& nu : support) {
            omega.require_covers(nu);
            std::vector<int> d(D, 0);
            for (const auto& [j, v] : nu.entries()) d[static_cast<std::size_t>(j + J)] = v;
            dense.push_back(std::move(d));
        }
    }

    Mode to_mode(const int* d) const { return Mode::from_dense(-J, std::span<const int>(d, D)); }
};

}  // namespace detail

template <class Visit>
long long for_each_labeled_tree(int k, const std::vector<Mode>& support, const Frequency& omega, Visit&& visit,
                                EnumerationLimits lim = {}) {
    const detail::DenseSupport ds(support, omega);
    const std::size_t D = ds.D;
    const int S = static_cast<int>(support.size());
    long long count = 0;
    if (S == 0) return 0;
    std::vector<int> label(static_cast<std::size_t>(k), 0);
    std::vector<int> mom(static_cast<std::size_t>(k) * D);
    for (const auto& shape : plane_shapes(k)) {
        std::fill(label.begin(), label.end(), 0);
        for (;;) {
            std::fill(mom.begin(), mom.end(), 0);
            bool ok = true;
            for (int v = k - 1; v >= 0 && ok; --v) {
                int* m = &mom[static_cast<std::size_t>(v) * D];
                const auto& d = ds.dense[static_cast<std::size_t>(label[static_cast<std::size_t>(v)])];
                bool nonzero = false;
                for (std::size_t i = 0; i < D; ++i) {
                    m[i] += d[i];
                    nonzero |= m[i] != 0;
                }
                if (v > 0) {
                    if (!nonzero) ok = false;
                    int* pm = &mom[static_cast<std::size_t>(shape.parent[static_cast<std::size_t>(v)]) * D];
                    for (std::size_t i = 0; i < D; ++i) pm[i] += m[i];
                }
            }
            if (ok) {
                if (++count > lim.cap)
                    throw ResourceError("tree enumeration exceeded the cap", count - 1);
                visit(shape, std::span<const int>(label), std::span<const int>(mom));
            }
            int i = k - 1;
            while (i >= 0 && ++label[static_cast<std::size_t>(i)] == S) label[static_cast<std::size_t>(i--)] = 0;
            if (i < 0) break;
        }
    }
    return count;
}

inline Tree make_tree(const TreeShape& shape, std::span<const int> labels, const std::vector<Mode>& support) {
    Tree t{shape, {}};
    for (int l : labels) t.modes.push_back(support[static_cast<std::size_t>(l)]);
    return t;
}

// Trees of order k with root momentum nu, in deterministic order.
inline std::vector<Tree> enumerate_trees(int k, const Mode& nu, const std::vector<Mode>& support,
                                         const Frequency& omega, EnumerationLimits lim = {}) {
    if (k < 1) throw DomainError("trees need k >= 1");
    omega.require_covers(nu);
    const int J = omega.half_width();
    std::vector<int> target(omega.size(), 0);
    for (const auto& [j, v] : nu.entries()) target[static_cast<std::size_t>(j + J)] = v;
    std::vector<Tree> out;
    for_each_labeled_tree(
        k, support, omega,
        [&](const TreeShape& s, std::span<const int> labels, std::span<const int> mom) {
            if (std::equal(target.begin(), target.end(), mom.begin())) out.push_back(make_tree(s, labels, support));
        },
        lim);
    return out;
}

inline Vec sum_tree_values(int k, const Mode& nu, const ScalarSeries& f, const DivisorContext& ctx,
                           EnumerationLimits lim = {}) {
    Vec total(ctx.omega.size(), cplx{});
    for (const auto& t : enumerate_trees(k, nu, f.support(), ctx.omega, lim)) accumulate(total, tree_value(t, f, ctx));
    return total;
}

// u^(1..K) as sums over trees, all root momenta at once.  Every labeled tree is
// evaluated independently; nothing is shared with the recursion.
inline OrderedCoefficients tree_expansion(const ScalarSeries& f, const DivisorContext& ctx, int K,
                                          EnumerationLimits lim = {}) {
    const auto support = f.support();
    const detail::DenseSupport ds(support, ctx.omega);
    const std::size_t D = ds.D;
    std::vector<cplx> fv;
    for (const auto& nu : support) fv.push_back(*f.find(nu));
    const std::size_t S = support.size();
    std::vector<long long> dots(S * S);
    for (std::size_t a = 0; a < S; ++a)
        for (std::size_t b = 0; b < S; ++b) dots[a * S + b] = dot(support[a], support[b]);

    OrderedCoefficients out;
    for (int k = 1; k <= K; ++k) {
        std::map<std::vector<int>, Vec> acc;
        std::vector<int> p(static_cast<std::size_t>(k));
        for_each_labeled_tree(
            k, support, ctx.omega,
            [&](const TreeShape& s, std::span<const int> labels, std::span<const int> mom) {
                const int* root = mom.data();
                bool root_zero = std::all_of(root, root + D, [](int x) { return x == 0; });
                if (root_zero) return;
                std::fill(p.begin(), p.end(), 0);
                for (int v = 1; v < k; ++v) ++p[static_cast<std::size_t>(s.parent[static_cast<std::size_t>(v)])];
                cplx c = 1;
                for (int v = 0; v < k; ++v) {
                    const auto lv = static_cast<std::size_t>(labels[static_cast<std::size_t>(v)]);
                    c *= fv[lv] / factorial(p[static_cast<std::size_t>(v)]);
                    if (v > 0) {
                        const auto lp = static_cast<std::size_t>(labels[static_cast<std::size_t>(s.parent[static_cast<std::size_t>(v)])]);
                        c *= -static_cast<double>(dots[lp * S + lv]);
                    }
                    // divisor summed over nonzero entries in window order, as Frequency::dot does
                    const int* m = mom.data() + static_cast<std::size_t>(v) * D;
                    double x = 0;
                    for (std::size_t i = 0; i < D; ++i)
                        if (m[i]) x += ctx.omega.values()[i] * m[i];
                    Scale sc = ctx.scale(x);
                    if (sc.kind != Scale::Kind::value) {
                        Mode bad = ds.to_mode(m);
                        ctx.require_scale(x, bad);
                    }
                    c *= propagator(x, sc.n, ctx.beta, ctx.scales);
                }
                // V = (i nu_root) c with nu_root the root's own label
                const auto& lr = ds.dense[static_cast<std::size_t>(labels[0])];
                auto& slot = acc[std::vector<int>(root, root + D)];
                if (slot.empty()) slot.assign(D, cplx{});
                for (std::size_t i = 0; i < D; ++i)
                    if (lr[i]) slot[i] += cplx(0, lr[i]) * c;
            },
            lim);
        VectorSeries u;
        for (const auto& [key, v] : acc) u.set(ds.to_mode(key.data()), v);
        out.orders.push_back(std::move(u));
    }
    return out;
}

// One dump row per tree: shape, labels, per-line (momentum, divisor, scale), value.
inline std::string tree_dump_row(const Tree& t, const ScalarSeries& f, const DivisorContext& ctx) {
    auto lines = annotate(t, ctx);
    Vec v = scale_by_i_nu(t.mode(0), subtree_scalar(t, 0, f, lines, ctx), ctx.omega);
    std::string row = t.shape.str() + ",";
    for (int i = 0; i < t.k(); ++i) row += (i ? "|" : "") + t.mode(i).str();
    row += ",";
    char buf[64];
    for (int i = 0; i < t.k(); ++i) {
        const auto& L = lines[static_cast<std::size_t>(i)];
        std::snprintf(buf, sizeof buf, "%.17g", L.divisor);
        row += (i ? "|" : "") + L.momentum.str() + "/" + buf + "/" +
               (L.scale.is_value() ? std::to_string(L.scale.n) : std::string("-"));
    }
    for (const auto& c : v) {
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g", c.real(), c.imag());
        row += buf;
    }
    return row;
}

inline std::string tree_dump_header(const Frequency& omega) {
    std::string h = "shape,modes,lines";
    for (int j = -omega.half_width(); j <= omega.half_width(); ++j)
        h += ",re_" + std::to_string(j) + ",im_" + std::to_string(j);
    return h;
}

}  // namespace kamtree
