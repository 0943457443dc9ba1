#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "kamtree/fixtures.hpp"
#include "kamtree/renorm.hpp"
#include "kamtree/torus.hpp"

using namespace kamtree;
using Catch::Approx;

namespace {

const Mode e0 = Mode::unit(0);
const Mode e1 = Mode::unit(1);

// Deep enough for the threshold tail; built once.
const DivisorContext& deep_context() {
    static const DivisorContext ctx = [] {
        auto fx = three_rotor_fixture();
        return DivisorContext::build(fx.omega, fx.weights, 12);
    }();
    return ctx;
}

std::vector<double> random_angles(std::mt19937_64& gen, std::size_t D) {
    std::uniform_real_distribution<double> U(-M_PI, M_PI);
    std::vector<double> phi(D);
    for (auto& x : phi) x = U(gen);
    return phi;
}

// -sum_nu nu sin(nu.phi)/(omega.nu)^2 over the positive half of the cosine potential
std::vector<double> first_order_displacement(const std::vector<double>& phi) {
    auto fx = three_rotor_fixture();
    std::vector<double> u(3, 0.0);
    for (const Mode& nu : {e0, e0 + e1}) {
        double a = 0;
        for (const auto& [j, v] : nu.entries()) a += v * phi[static_cast<std::size_t>(j + 1)];
        const double w = fx.omega.dot(nu);
        for (const auto& [j, v] : nu.entries()) u[static_cast<std::size_t>(j + 1)] -= v * std::sin(a) / (w * w);
    }
    return u;
}

ScalarSeries times(const ScalarSeries& f, double c) {
    ScalarSeries g;
    for (const auto& [nu, v] : f) g.set(nu, c * v);
    return g;
}

}  // namespace

TEST_CASE("synthesis with both engines", "[torus]") {
    auto fx = three_rotor_fixture();
    const auto& ctx = deep_context();
    auto rec = synthesize(fx.f, ctx, fx.weights, 1e-3, 6);
    auto tr = synthesize(fx.f, ctx, fx.weights, 1e-3, 6, Engine::trees);
    REQUIRE(rec.per_order_norms.size() == 6);
    for (int k = 1; k <= 6; ++k) {
        CHECK(order_gap(tr.u, rec.u, k).rel() <= 1e-10);
        CHECK(tr.per_order_norms[static_cast<std::size_t>(k - 1)] ==
              Approx(rec.per_order_norms[static_cast<std::size_t>(k - 1)]).epsilon(1e-10));
    }
    // first order norm: sum over +-nu of e^{s|nu|*} |nu|_inf |f_nu| / (omega.nu)^2
    const double s = 0.5;
    const double w0 = fx.omega.dot(e0), w1 = fx.omega.dot(e0 + e1);
    CHECK(rec.per_order_norms[0] == Approx(2 * 0.5 * (std::exp(s) / (w0 * w0) + std::exp(2 * s) / (w1 * w1))).epsilon(1e-13));

    auto zero = synthesize(fx.f, ctx, fx.weights, 0.0, 3);
    for (double x : evaluate_displacement(zero, {0.3, 0.2, 0.1}).value) CHECK(x == 0);
    CHECK_THROWS_AS(synthesize(fx.f, ctx, fx.weights, 1e-3, 0), DomainError);
    CHECK_THROWS_AS(synthesize(fx.f, ctx, fx.weights, 1e-3, 2, Engine::recursion, 0.5, 0.5), DomainError);
}

TEST_CASE("displacement is real, odd and first-order dominated", "[torus]") {
    auto fx = three_rotor_fixture();
    const auto& ctx = deep_context();
    const double eps = 1e-3;
    auto sol = synthesize(fx.f, ctx, fx.weights, eps, 6);
    std::mt19937_64 gen(11);
    for (int i = 0; i < 100; ++i) {
        auto phi = random_angles(gen, 3);
        auto u = evaluate_displacement(sol, phi);
        CHECK(u.imag_residue <= 1e-12);
        std::vector<double> mphi(phi);
        for (auto& x : mphi) x = -x;
        auto um = evaluate_displacement(sol, mphi);
        auto u1 = first_order_displacement(phi);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(std::abs(u.value[j] + um.value[j]) <= 1e-15);
            CHECK(std::abs(u.value[j] - eps * u1[j]) <= 10 * eps * eps);
        }
    }
    // odd, so u(0) = 0
    for (double x : evaluate_displacement(sol, {0, 0, 0}).value) CHECK(std::abs(x) <= 1e-18);
    // golden value at a generic angle
    auto g = evaluate_displacement(sol, {0.4, -0.3, 1.2});
    CHECK(g.value[0] == 0);
    CHECK(g.value[1] == Approx(1.8104158420e-4).epsilon(1e-9));
    CHECK(g.value[2] == Approx(-1.1443721354e-4).epsilon(1e-9));
    auto empty = synthesize(ScalarSeries{}, ctx, fx.weights, eps, 3);
    for (double x : evaluate_displacement(empty, {0.1, 0.2, 0.3}).value) CHECK(x == 0);
}

TEST_CASE("residual vanishes through order K", "[torus]") {
    auto fx = three_rotor_fixture();
    const auto& ctx = deep_context();
    SECTION("K = 1") {
        auto r = residual_spectrum(synthesize(fx.f, ctx, fx.weights, 1e-3, 1));
        REQUIRE(r.orders.size() == 3);
        CHECK(sup_coefficient(r.orders[0]) <= 1e-13);
        CHECK(sup_coefficient(r.orders[1]) > 0.1);
    }
    SECTION("K = 6, both engines") {
        for (Engine e : {Engine::recursion, Engine::trees}) {
            auto r = residual_spectrum(synthesize(fx.f, ctx, fx.weights, 1e-3, 6, e));
            for (int j = 1; j <= 6; ++j) {
                const auto jj = static_cast<std::size_t>(j - 1);
                CHECK(sup_coefficient(r.orders[jj]) <= 1e-12 * r.source_scale[jj]);
            }
            CHECK(sup_coefficient(r.orders[6]) > 1e-3);
            const double ratio = sup_coefficient(residual_at(r, 2e-3)) / sup_coefficient(residual_at(r, 1e-3));
            CHECK(ratio >= std::pow(2.0, 6.5));
        }
    }
    SECTION("zero potential") {
        auto r = residual_spectrum(synthesize(ScalarSeries{}, ctx, fx.weights, 1e-3, 4));
        for (const auto& R : r.orders) CHECK(R.size() == 0);
    }
}

TEST_CASE("action curve", "[torus]") {
    auto fx = three_rotor_fixture();
    const auto& ctx = deep_context();
    std::mt19937_64 gen(5);
    std::vector<std::vector<double>> phis;
    for (int i = 0; i < 50; ++i) phis.push_back(random_angles(gen, 3));
    auto zero = action_curve(synthesize(fx.f, ctx, fx.weights, 0.0, 4), phis);
    CHECK(zero.deviation == 0);
    CHECK(zero.ms2_norm == 0);
    CHECK(zero.lq_norm == Approx(kGolden));
    for (const auto& I : zero.I)
        for (int j = -1; j <= 1; ++j) CHECK(I[static_cast<std::size_t>(j + 1)] == fx.omega[j]);

    auto sol = synthesize(fx.f, ctx, fx.weights, 1e-2, 6);
    auto a = action_curve(sol, phis);
    CHECK(a.imag_residue <= 1e-12);
    CHECK(std::isfinite(a.lq_norm));
    CHECK(std::isfinite(a.ms2_norm));
    CHECK(a.deviation > 0);
    CHECK(a.deviation <= a.triangle_bound);
    CHECK(a.ms2_norm == Approx(std::exp(0.25) * a.deviation));  // unit weights inside the window
    // I_j = omega_j + eps d_t u_j along the flow; compare with a finite difference of u(omega t)
    const double h = 1e-5;
    auto phi = phis.front();
    auto shift = [&](double t) {
        std::vector<double> p(phi);
        for (int j = -1; j <= 1; ++j) p[static_cast<std::size_t>(j + 1)] += fx.omega[j] * t;
        return evaluate_displacement(sol, p).value;
    };
    auto up = shift(h), um = shift(-h);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(a.I.front()[j] - fx.omega[static_cast<int>(j) - 1] == Approx((up[j] - um[j]) / (2 * h)).margin(1e-9));
}

TEST_CASE("threshold constants", "[torus]") {
    auto fx = three_rotor_fixture();
    const auto& ctx = deep_context();
    const double s = 0.5, s2 = 0.25;
    auto th = threshold_estimates(fx.f, fx.weights, s, s2, ctx);
    const auto& c = th.main;
    CHECK(c.eps2 / c.eps1 == Approx(1.0 / 9).epsilon(1e-15));
    CHECK(c.eps2 < c.eps1);
    CHECK(c.eps1 == 1 / c.C0p);
    const double r = 16 * th.c1 / (s * c.beta_n0);
    CHECK(c.C0p / c.C0 == Approx(th.c0 * r * r).epsilon(1e-14));
    CHECK(c.tail < s / 2);
    CHECK(c.beta_n0 == ctx.beta(c.m_n0));
    CHECK(th.norm_f == Approx(series_norm(fx.f, 2 * s, fx.weights)));
    // the chosen n0 is minimal
    if (c.n0 > 0) {
        double tail = 8 * std::ldexp(1.0, -ctx.scales.m[static_cast<std::size_t>(c.n0)]) * std::log(1 / ctx.beta(c.m_n0));
        CHECK(c.tail + tail >= s / 2);
    }

    ScalarSeries f2 = times(fx.f, 2.0);
    auto th2 = threshold_estimates(f2, fx.weights, s, s2, ctx);
    CHECK(th2.main.eps1 == Approx(c.eps1 / 2).epsilon(1e-14));

    ThresholdOptions opt;
    opt.c0 = 3;
    CHECK(threshold_estimates(fx.f, fx.weights, s, s2, ctx, opt).main.eps1 == Approx(c.eps1 / 3).epsilon(1e-14));

    // a shallow beta table cannot certify the tail
    auto shallow = DivisorContext::build(fx.omega, fx.weights, 6);
    CHECK_THROWS_AS(threshold_estimates(fx.f, fx.weights, s, s2, shallow), TruncationError);
    CHECK_THROWS_AS(threshold_estimates(fx.f, fx.weights, s, s, ctx), DomainError);
}

TEST_CASE("rescaled thresholds follow gamma squared", "[torus]") {
    auto fx = three_rotor_fixture();
    const auto& ctx = deep_context();
    // rescaling the context matches rebuilding it
    auto direct = DivisorContext::build(fx.omega.scaled(0.01), fx.weights, 8);
    auto scaled = DivisorContext::build(fx.omega, fx.weights, 8).scaled(0.01);
    // divisors are differences of O(2^m) terms, so agreement is to rounding of those terms
    for (int m = 0; m <= 8; ++m) CHECK(std::abs(scaled.beta(m) - direct.beta(m)) <= 1e-15 * std::ldexp(0.01, m + 4));
    CHECK(scaled.scales.m == direct.scales.m);

    std::vector<double> lx, ly;
    for (double g : {1e-3, 1e-2, 1e-1}) {
        ThresholdOptions opt;
        opt.gamma = g;
        auto th = threshold_estimates(fx.f, fx.weights, 0.5, 0.25, ctx.scaled(g), opt);
        REQUIRE(th.scaled);
        CHECK(th.scaled->eps2 / th.scaled->eps1 == Approx(1.0 / 9).epsilon(1e-15));
        lx.push_back(std::log(g));
        ly.push_back(std::log(th.scaled->eps1 / th.main.eps1));
    }
    const double slope = (ly[2] - ly[0]) / (lx[2] - lx[0]);
    CHECK(slope == Approx(-2).margin(0.2));
    CHECK((ly[1] - ly[0]) / (lx[1] - lx[0]) == Approx(-2).margin(0.2));
}

TEST_CASE("empirical radius", "[torus]") {
    std::vector<double> geo;
    for (int k = 1; k <= 8; ++k) geo.push_back(std::pow(3.0, k));
    CHECK(empirical_radius(geo).eps_hat == Approx(1.0 / 3).epsilon(1e-12));
    CHECK_FALSE(empirical_radius(std::vector<double>(8, 0.0)).defined);
    CHECK_THROWS_AS(empirical_radius(std::vector<double>(3, 1.0)), DomainError);

    auto fx = three_rotor_fixture();
    const auto& ctx = deep_context();
    auto sol = synthesize(fx.f, ctx, fx.weights, 1e-3, 8);
    auto r = empirical_radius(sol);
    REQUIRE(r.defined);
    auto th = threshold_estimates(fx.f, fx.weights, 0.5, 0.25, ctx);
    CHECK(r.eps_hat >= th.main.eps1);

    ScalarSeries f2 = times(fx.f, 2.0);
    auto r2 = empirical_radius(synthesize(f2, ctx, fx.weights, 1e-3, 8));
    CHECK(r2.eps_hat == Approx(r.eps_hat / 2).epsilon(0.2));
}

TEST_CASE("non-resonant tree values obey the order constant", "[torus]") {
    // sum_nu e^{s|nu|*} sum_trees |V_NR| <= C0^k
    auto fx = three_rotor_fixture();
    const auto& ctx = deep_context();
    auto th = threshold_estimates(fx.f, fx.weights, 0.5, 0.25, ctx);
    const auto supp = fx.f.support();
    for (int k = 1; k <= 5; ++k) {
        double total = 0;
        for_each_labeled_tree(k, supp, fx.omega, [&](const TreeShape& shape, std::span<const int> labels, auto&&) {
            Tree t = make_tree(shape, labels, supp);
            auto lines = annotate(t, ctx);
            auto res = resonant_lines(t, find_resonant_clusters(t, lines, fx.weights, ctx));
            total += std::exp(0.5 * star_norm(lines.front().momentum, fx.weights)) *
                     magnitude(nonresonant_value(t, fx.f, ctx, lines, res));
        });
        INFO("k = " << k << " total " << total);
        CHECK(total > 0);
        CHECK(std::log(total) <= k * std::log(th.main.C0));
    }
}
