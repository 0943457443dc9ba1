#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "kamtree/errors.hpp"

namespace kamtree {

using cplx = std::complex<double>;
using Vec = std::vector<cplx>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative slack used in every "|nu|* <= N" membership test so that weights
// which are not exactly representable do not drop boundary modes.
inline bool within_budget(double star, double N) {
    return star <= N + 1e-12 * std::max(1.0, std::abs(N));
}

// Finite-support integer vector, stored as sorted (index, nonzero value) pairs.
class Mode {
public:
    using Entry = std::pair<int, int>;

    Mode() = default;

    static Mode from_entries(std::vector<Entry> entries) {
        std::sort(entries.begin(), entries.end());
        Mode m;
        for (const auto& [j, v] : entries) {
            if (!m.e_.empty() && m.e_.back().first == j)
                m.e_.back().second += v;
            else
                m.e_.push_back({j, v});
            if (m.e_.back().second == 0) m.e_.pop_back();
        }
        return m;
    }

    static Mode unit(int j, int v = 1) { return from_entries({{j, v}}); }

    // Dense values over indices lo, lo+1, ...
    static Mode from_dense(int lo, std::span<const int> values) {
        Mode m;
        for (std::size_t i = 0; i < values.size(); ++i)
            if (values[i] != 0) m.e_.push_back({lo + static_cast<int>(i), values[i]});
        return m;
    }

    std::span<const Entry> entries() const { return e_; }
    bool is_zero() const { return e_.empty(); }
    std::size_t support_size() const { return e_.size(); }

    int operator[](int j) const {
        auto it = std::lower_bound(e_.begin(), e_.end(), Entry{j, std::numeric_limits<int>::min()});
        return (it != e_.end() && it->first == j) ? it->second : 0;
    }

    Mode operator-() const {
        Mode m = *this;
        for (auto& entry : m.e_) entry.second = -entry.second;
        return m;
    }

    Mode operator+(const Mode& o) const {
        Mode m;
        m.e_.reserve(e_.size() + o.e_.size());
        std::size_t a = 0, b = 0;
        while (a < e_.size() || b < o.e_.size()) {
            if (b == o.e_.size() || (a < e_.size() && e_[a].first < o.e_[b].first)) {
                m.e_.push_back(e_[a++]);
            } else if (a == e_.size() || o.e_[b].first < e_[a].first) {
                m.e_.push_back(o.e_[b++]);
            } else {
                int v = e_[a].second + o.e_[b].second;
                if (v != 0) m.e_.push_back({e_[a].first, v});
                ++a;
                ++b;
            }
        }
        return m;
    }

    Mode operator-(const Mode& o) const { return *this + (-o); }
    Mode& operator+=(const Mode& o) { return *this = *this + o; }

    long long l1() const {
        long long s = 0;
        for (const auto& entry : e_) s += std::abs(entry.second);
        return s;
    }

    int sup() const {
        int s = 0;
        for (const auto& entry : e_) s = std::max(s, std::abs(entry.second));
        return s;
    }

    int min_index() const { return e_.empty() ? 0 : e_.front().first; }
    int max_index() const { return e_.empty() ? 0 : e_.back().first; }

    friend bool operator==(const Mode&, const Mode&) = default;
    friend auto operator<=>(const Mode&, const Mode&) = default;

    // "j:n;j:n", or "0" for the zero mode.
    std::string str() const {
        if (e_.empty()) return "0";
        std::ostringstream os;
        for (std::size_t i = 0; i < e_.size(); ++i) {
            if (i) os << ';';
            os << e_[i].first << ':' << e_[i].second;
        }
        return os.str();
    }

private:
    std::vector<Entry> e_;
};

// Euclidean pairing of integer vectors.
inline long long dot(const Mode& a, const Mode& b) {
    long long s = 0;
    auto ea = a.entries(), eb = b.entries();
    std::size_t i = 0, k = 0;
    while (i < ea.size() && k < eb.size()) {
        if (ea[i].first < eb[k].first)
            ++i;
        else if (eb[k].first < ea[i].first)
            ++k;
        else
            s += static_cast<long long>(ea[i++].second) * eb[k++].second;
    }
    return s;
}

inline int bracket(int j) { return std::max(1, std::abs(j)); }

// Weight sequence h_j defining the star norm.
class Weights {
public:
    enum class Extension { infinite, hold };

    static Weights log_power(double sigma) {
        if (!(sigma > 0)) throw DomainError("log_power weights need sigma > 0");
        return Weights(LogPower{sigma});
    }
    static Weights polynomial(double alpha) {
        if (!(alpha > 0)) throw DomainError("polynomial weights need alpha > 0");
        return Weights(Polynomial{alpha});
    }
    // h_j = c for every j; only meaningful as the inside of a finite window.
    static Weights constant(double c) {
        if (!(c > 0)) throw DomainError("constant weight must be positive");
        return Weights(Constant{c});
    }
    static Weights finite_window(int j0, Weights inner) {
        if (j0 < 0) throw DomainError("window half-width must be nonnegative");
        return Weights(Window{j0, std::make_shared<const Weights>(std::move(inner))});
    }
    // values[i] = h_j for |j| = i; beyond the table either +inf or the last value.
    static Weights table(std::vector<double> values, Extension ext) {
        if (values.empty()) throw DomainError("weight table is empty");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!(values[i] > 0)) throw DomainError("weights must be positive");
            if (i && values[i] < values[i - 1]) throw DomainError("weights must be nondecreasing in |j|");
        }
        return Weights(Table{std::move(values), ext});
    }

    double h(int j) const {
        return std::visit([j](const auto& k) { return value(k, j); }, kind_);
    }

    double min_weight() const { return h(0); }
    // Sharp constant in ||nu||_1 <= c1 |nu|*.
    double c1() const { return 1.0 / min_weight(); }

    // Largest |j| with h_j <= N, or -1 when even h_0 exceeds N.
    int reach(double N) const {
        if (!within_budget(h(0), N)) return -1;
        if (auto lim = hard_limit(); lim >= 0) {
            int j = 0;
            while (j < lim && within_budget(h(j + 1), N)) ++j;
            return j;
        }
        if (std::holds_alternative<Constant>(kind_) ||
            (std::holds_alternative<Table>(kind_) &&
             std::get<Table>(kind_).ext == Extension::hold &&
             within_budget(std::get<Table>(kind_).values.back(), N)))
            throw DomainError("weights do not diverge; the set |nu|* <= N is infinite");
        int j = 0;
        while (within_budget(h(j + 1), N)) {
            ++j;
            if (j > 10'000'000) throw DomainError("weight reach exceeds 1e7 indices");
        }
        return j;
    }

    std::string describe() const {
        return std::visit([](const auto& k) { return text(k); }, kind_);
    }

private:
    struct LogPower { double sigma; };
    struct Polynomial { double alpha; };
    struct Constant { double c; };
    struct Window { int j0; std::shared_ptr<const Weights> inner; };
    struct Table { std::vector<double> values; Extension ext; };
    using Kind = std::variant<LogPower, Polynomial, Constant, Window, Table>;

    explicit Weights(Kind k) : kind_(std::move(k)) {}

    static double value(const LogPower& k, int j) { return std::pow(std::log(1.0 + bracket(j)), k.sigma); }
    static double value(const Polynomial& k, int j) { return std::pow(bracket(j), k.alpha); }
    static double value(const Constant& k, int) { return k.c; }
    static double value(const Window& k, int j) { return std::abs(j) <= k.j0 ? k.inner->h(j) : kInf; }
    static double value(const Table& k, int j) {
        auto a = static_cast<std::size_t>(std::abs(j));
        if (a < k.values.size()) return k.values[a];
        return k.ext == Extension::infinite ? kInf : k.values.back();
    }

    // Largest |j| with finite weight, or -1 when unbounded.
    int hard_limit() const {
        if (auto w = std::get_if<Window>(&kind_)) return w->j0;
        if (auto t = std::get_if<Table>(&kind_); t && t->ext == Extension::infinite)
            return static_cast<int>(t->values.size()) - 1;
        return -1;
    }

    static std::string text(const LogPower& k) { return "log_power(sigma=" + num(k.sigma) + ")"; }
    static std::string text(const Polynomial& k) { return "polynomial(alpha=" + num(k.alpha) + ")"; }
    static std::string text(const Constant& k) { return "constant(" + num(k.c) + ")"; }
    static std::string text(const Window& k) {
        return "finite_window(j0=" + std::to_string(k.j0) + ", " + k.inner->describe() + ")";
    }
    static std::string text(const Table& k) {
        std::string s = "table(";
        for (std::size_t i = 0; i < k.values.size(); ++i) s += (i ? "," : "") + num(k.values[i]);
        return s + (k.ext == Extension::infinite ? "; inf)" : "; hold)");
    }
    static std::string num(double x) {
        std::ostringstream os;
        os.precision(17);
        os << x;
        return os.str();
    }

    Kind kind_;
};

struct ModeNorms {
    double star;
    long long l1;
    int sup;
};

// sum_j h_j |nu_j|; only nonzero entries contribute, so 0 * inf never arises.
inline double star_norm(const Mode& nu, const Weights& w) {
    double s = 0;
    for (const auto& [j, v] : nu.entries()) s += w.h(j) * std::abs(v);
    return s;
}

inline ModeNorms mode_norms(const Mode& nu, const Weights& w) { return {star_norm(nu, w), nu.l1(), nu.sup()}; }

// Real frequency vector on the window [-J, J].
class Frequency {
public:
    Frequency() = default;
    // values.size() must be odd; values[i] is omega_{i - J}.
    explicit Frequency(std::vector<double> values) : v_(std::move(values)) {
        if (v_.size() % 2 == 0) throw DomainError("frequency window must have odd length");
        for (double x : v_)
            if (!std::isfinite(x)) throw DomainError("frequency entries must be finite");
        J_ = static_cast<int>(v_.size() / 2);
    }

    int half_width() const { return J_; }
    std::size_t size() const { return v_.size(); }
    bool contains(int j) const { return std::abs(j) <= J_; }
    double operator[](int j) const { return v_.at(static_cast<std::size_t>(j + J_)); }
    std::span<const double> values() const { return v_; }

    void require_covers(const Mode& nu) const {
        if (!nu.is_zero() && (!contains(nu.min_index()) || !contains(nu.max_index())))
            throw DomainError("mode " + nu.str() + " lies outside the frequency window");
    }

    double dot(const Mode& nu) const {
        require_covers(nu);
        double s = 0;
        for (const auto& [j, v] : nu.entries()) s += v_[static_cast<std::size_t>(j + J_)] * v;
        return s;
    }

    Frequency scaled(double c) const {
        auto v = v_;
        for (auto& x : v) x *= c;
        return Frequency(std::move(v));
    }

private:
    std::vector<double> v_{0.0};
    int J_ = 0;
};

inline double magnitude(const cplx& c) { return std::abs(c); }
inline double magnitude(const Vec& v) {
    double m = 0;
    for (const auto& c : v) m = std::max(m, std::abs(c));
    return m;
}

inline void accumulate(cplx& into, const cplx& x) { into += x; }
inline void accumulate(Vec& into, const Vec& x) {
    if (into.empty()) into.assign(x.size(), cplx{});
    if (into.size() != x.size()) throw DomainError("vector coefficients of different lengths");
    for (std::size_t i = 0; i < x.size(); ++i) into[i] += x[i];
}

inline cplx conjugate(const cplx& c) { return std::conj(c); }
inline Vec conjugate(Vec v) {
    for (auto& c : v) c = std::conj(c);
    return v;
}

// Sparse Fourier series: mode -> coefficient (complex scalar or window vector).
template <class V>
class Series {
public:
    using value_type = V;
    using map_type = std::map<Mode, V>;

    void add(const Mode& nu, const V& c) { accumulate(terms_[nu], c); }
    void set(const Mode& nu, V c) { terms_[nu] = std::move(c); }
    void erase(const Mode& nu) { terms_.erase(nu); }

    const V* find(const Mode& nu) const {
        auto it = terms_.find(nu);
        return it == terms_.end() ? nullptr : &it->second;
    }
    bool contains(const Mode& nu) const { return terms_.count(nu) != 0; }

    auto begin() const { return terms_.begin(); }
    auto end() const { return terms_.end(); }
    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }
    const map_type& terms() const { return terms_; }

    std::vector<Mode> support() const {
        std::vector<Mode> s;
        s.reserve(terms_.size());
        for (const auto& kv : terms_) s.push_back(kv.first);
        return s;
    }

private:
    map_type terms_;
};

using ScalarSeries = Series<cplx>;
using VectorSeries = Series<Vec>;

// Largest |F_{-nu} - conj(F_nu)| over stored modes (missing mirrors count fully).
template <class V>
double hermitian_defect(const Series<V>& F) {
    double d = 0;
    for (const auto& [nu, c] : F) {
        const V* m = F.find(-nu);
        if (!m) {
            d = std::max(d, magnitude(c));
            continue;
        }
        V diff = conjugate(c);
        if constexpr (std::is_same_v<V, cplx>)
            diff -= *m;
        else
            for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= (*m)[i];
        d = std::max(d, magnitude(diff));
    }
    return d;
}

// Orders modes by |nu|*, ties broken lexicographically on the (j, nu_j) pairs.
struct CanonicalLess {
    const Weights* w;
    bool operator()(const Mode& a, const Mode& b) const {
        double sa = star_norm(a, *w), sb = star_norm(b, *w);
        if (sa != sb) return sa < sb;
        return a < b;
    }
};

inline void sort_canonical(std::vector<Mode>& modes, const Weights& w) {
    std::vector<std::pair<double, Mode>> keyed;
    keyed.reserve(modes.size());
    for (auto& m : modes) keyed.emplace_back(star_norm(m, w), std::move(m));
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t i = 0; i < keyed.size(); ++i) modes[i] = std::move(keyed[i].second);
}

template <class V>
std::vector<Mode> canonical_support(const Series<V>& F, const Weights& w) {
    auto s = F.support();
    sort_canonical(s, w);
    return s;
}

// sum_nu |F_nu|_X e^{s |nu|*}
template <class V>
double series_norm(const Series<V>& F, double s, const Weights& w) {
    if (s < 0) throw DomainError("series norm needs s >= 0");
    double total = 0;
    for (const auto& nu : canonical_support(F, w)) {
        double st = star_norm(nu, w);
        if (std::isinf(st)) throw DomainError("mode " + nu.str() + " has infinite star norm");
        total += magnitude(*F.find(nu)) * std::exp(s * st);
    }
    return total;
}

// Largest r >= 0 with used + r h within budget N.
inline int max_multiplicity(double h, double used, double N) {
    if (!within_budget(used, N)) return 0;
    int r = static_cast<int>(std::max(0.0, std::floor((N - used) / h)));
    while (within_budget(used + (r + 1) * h, N)) ++r;
    while (r > 0 && !within_budget(used + r * h, N)) --r;
    return r;
}

// Calls f(values, star) for every signed integer vector over the given slot
// weights with sum h_i |n_i| <= N.  Slots with infinite weight stay zero.
template <class F>
void for_each_lattice_point(std::span<const double> h, double N, F&& f) {
    std::vector<int> n(h.size(), 0);
    auto rec = [&](auto&& self, std::size_t i, double used) -> void {
        if (i == h.size()) {
            f(std::span<const int>(n), used);
            return;
        }
        if (std::isinf(h[i])) {
            n[i] = 0;
            self(self, i + 1, used);
            return;
        }
        const int r = max_multiplicity(h[i], used, N);
        for (int v = -r; v <= r; ++v) {
            n[i] = v;
            self(self, i + 1, used + std::abs(v) * h[i]);
        }
        n[i] = 0;
    };
    rec(rec, 0, 0.0);
}

inline constexpr long long kDefaultModeCap = 20'000'000;

// Every mode with |nu|* <= N in canonical order.
inline std::vector<Mode> enumerate_modes(const Weights& w, double N, bool exclude_zero,
                                         long long cap = kDefaultModeCap) {
    if (N < 0) throw DomainError("enumeration radius must be nonnegative");
    std::vector<Mode> out;
    int R = w.reach(N);
    if (R < 0) {
        if (!exclude_zero) out.emplace_back();
        return out;
    }
    std::vector<double> h;
    for (int j = -R; j <= R; ++j) h.push_back(w.h(j));
    for_each_lattice_point(h, N, [&](std::span<const int> n, double) {
        Mode m = Mode::from_dense(-R, n);
        if (exclude_zero && m.is_zero()) return;
        if (static_cast<long long>(out.size()) >= cap)
            throw ResourceError("mode enumeration exceeded cap", static_cast<long long>(out.size()));
        out.push_back(std::move(m));
    });
    sort_canonical(out, w);
    return out;
}

}  // namespace kamtree
