#include <catch_amalgamated.hpp>

#include <cmath>

#include "kamtree/fixtures.hpp"
#include "kamtree/smalldiv.hpp"

using namespace kamtree;
using Catch::Approx;

namespace {

// Independent oracle: min over an explicit enumeration.
double brute_beta(const Frequency& omega, const Weights& w, double N) {
    double best = kInf;
    for (const auto& nu : enumerate_modes(w, N, true)) best = std::min(best, std::abs(omega.dot(nu)));
    return best;
}

BetaSequence make_beta(std::vector<double> v) {
    BetaSequence b;
    b.beta = std::move(v);
    return b;
}

}  // namespace

TEST_CASE("beta sequence of the three-rotor frequency", "[smalldiv]") {
    auto fx = three_rotor_fixture();
    auto b = beta_sequence(fx.omega, fx.weights, 10);
    CHECK(std::abs(b(0) - 1.0) <= 1e-12);
    CHECK(std::abs(b(1) - (kGolden - std::sqrt(2.0))) <= 1e-12);
    CHECK((b.witness[0] == Mode::unit(0) || b.witness[0] == Mode::unit(0, -1)));
    Mode w1 = Mode::unit(1) - Mode::unit(-1);
    CHECK((b.witness[1] == w1 || b.witness[1] == -w1));
    for (int m = 0; m <= 6; ++m) CHECK(b(m) == brute_beta(fx.omega, fx.weights, std::ldexp(1.0, m)));
    for (int m = 1; m <= 10; ++m) {
        CHECK(b(m) <= b(m - 1));
        CHECK(star_norm(b.witness[static_cast<std::size_t>(m)], fx.weights) <= std::ldexp(1.0, m));
        CHECK(std::abs(fx.omega.dot(b.witness[static_cast<std::size_t>(m)])) == b(m));
    }
}

TEST_CASE("beta sequence on unbounded log weights matches brute force", "[smalldiv]") {
    auto w = Weights::log_power(2.5);
    int R = w.reach(4);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Frequency omega = sample_frequency(R, 1.0, 1.0, seed, 0);
        auto b = beta_sequence(omega, w, 2);
        for (int m = 0; m <= 2; ++m) CHECK(b(m) == brute_beta(omega, w, std::ldexp(1.0, m)));
    }
    CHECK_THROWS_AS(beta_sequence(Frequency({1.0, 2.0, 3.0}), w, 2), DomainError);
}

TEST_CASE("exact resonance is reported with its witness", "[smalldiv]") {
    auto fx = three_rotor_fixture();
    Frequency res({std::sqrt(2.0), 1.0, 1.0});
    CHECK_NOTHROW(beta_sequence(res, fx.weights, 0));
    try {
        beta_sequence(res, fx.weights, 1);
        FAIL("expected a resonance error");
    } catch (const ResonanceError& e) {
        CHECK((e.witness == "0:1;1:-1" || e.witness == "0:-1;1:1"));
    }
}

TEST_CASE("Bryuno partial sums", "[smalldiv]") {
    auto ones = make_beta(std::vector<double>(9, 1.0));
    for (int M = 0; M <= 8; ++M) CHECK(bryuno_sum(ones, M).sum == 0);

    std::vector<double> v;
    for (int m = 0; m <= 12; ++m) v.push_back(std::ldexp(1.0, -m));
    auto dyadic = make_beta(v);
    for (int M = 1; M <= 12; ++M)
        CHECK(bryuno_sum(dyadic, M).sum ==
              Approx(std::log(2.0) * (2 - (M + 2) * std::ldexp(1.0, -M))).epsilon(1e-13));

    auto fx = three_rotor_fixture();
    auto b = beta_sequence(fx.omega, fx.weights, 6);
    auto r = bryuno_sum(b, 6);
    CHECK(r.sum == Approx(2.4815549958).epsilon(1e-9));
    CHECK(r.last_increment > 0);
    double prev = 0;
    for (int M = 1; M <= 6; ++M) {
        CHECK(bryuno_sum(b, M).sum >= prev);
        prev = bryuno_sum(b, M).sum;
    }
    CHECK_THROWS_AS(bryuno_sum(b, 7), TruncationError);
}

TEST_CASE("scale sequences follow the halving rule", "[smalldiv]") {
    std::vector<double> two, four;
    for (int m = 0; m <= 8; ++m) {
        two.push_back(std::ldexp(1.0, -m));
        four.push_back(std::ldexp(1.0, -2 * m));
    }
    for (const auto& v : {two, four}) {
        auto s = scale_sequence(make_beta(v));
        REQUIRE(s.m.size() == 9);
        for (int n = 0; n <= 8; ++n) CHECK(s.m[static_cast<std::size_t>(n)] == n);
        CHECK_FALSE(s.truncated);
    }
    auto flat = scale_sequence(make_beta(std::vector<double>(6, 0.3)));
    CHECK(flat.m == std::vector<int>{0});
    CHECK(flat.truncated);

    auto fx = three_rotor_fixture();
    auto b = beta_sequence(fx.omega, fx.weights, 10);
    auto s = scale_sequence(b);
    for (int n = 0; n + 1 <= s.n_max(); ++n) {
        int a = s.m[static_cast<std::size_t>(n)], c = s.m[static_cast<std::size_t>(n + 1)];
        CHECK(b(c) <= 0.5 * b(a));
        for (int m = a + 1; m < c; ++m) CHECK(b(m) > 0.5 * b(a));
    }
}

TEST_CASE("scale assignment and propagators", "[smalldiv]") {
    auto fx = three_rotor_fixture();
    auto b = beta_sequence(fx.omega, fx.weights, 10);
    auto s = scale_sequence(b);
    double phi2 = kGolden * kGolden;
    CHECK(scale_of(phi2, b, s) == Scale{Scale::Kind::value, 0});
    CHECK(scale_of(0.25, b, s).n == 0);
    CHECK(scale_of(0.0, b, s).kind == Scale::Kind::zero);
    CHECK(scale_of(1e-30, b, s).kind == Scale::Kind::none);
    CHECK(propagator(0.0, 3, b, s) == 1.0);
    CHECK(propagator(phi2, 0, b, s) == Approx(1 / std::pow(kGolden, 4)).epsilon(1e-15));
    CHECK(propagator(phi2, 0, b, s) == Approx(0.1458980).margin(1e-7));
    CHECK(propagator(phi2, 3, b, s) == 0.0);

    // partition of unity over the computed range
    std::mt19937_64 gen(7);
    double lo = 0.25 * b(s.m.back());
    for (int i = 0; i < 2000; ++i) {
        double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        double x = std::exp(std::log(lo) + u * (std::log(10.0) - std::log(lo))) * (i % 2 ? 1 : -1);
        int hits = 0;
        double sum = 0;
        for (int n = 0; n <= s.n_max(); ++n) {
            double g = propagator(x, n, b, s);
            hits += g != 0;
            sum += g * x * x;
        }
        CHECK(hits == 1);
        CHECK(sum == Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("Diophantine checks", "[smalldiv]") {
    auto fx = three_rotor_fixture();
    CHECK(diophantine_check(fx.omega, {1e-12, 2.5, 1.5}, fx.weights, 4).pass);
    auto fail = diophantine_check(fx.omega, {10, 2.5, 1.5}, fx.weights, 1);
    CHECK_FALSE(fail.pass);
    REQUIRE(fail.witness);
    CHECK(star_norm(*fail.witness, fx.weights) == 1);
    auto res = diophantine_check(Frequency({1.0, 1.0, 2.0}), {1e-12, 2.5, 1.5}, fx.weights, 2);
    CHECK_FALSE(res.pass);
    CHECK(fx.omega.dot(*res.witness) != 0);  // witness was computed on the resonant frequency
    CHECK(Frequency({1.0, 1.0, 2.0}).dot(*res.witness) == 0);

    // the margin is the exact admissible gamma
    for (double N : {2.0, 4.0}) {
        auto mg = diophantine_margin(fx.omega, 2.5, 1.5, fx.weights, N);
        CHECK(diophantine_check(fx.omega, {mg.margin, 2.5, 1.5}, fx.weights, N).pass);
        CHECK_FALSE(diophantine_check(fx.omega, {mg.margin * (1 + 1e-9), 2.5, 1.5}, fx.weights, N).pass);
        CHECK(std::abs(fx.omega.dot(mg.witness)) * diophantine_product(mg.witness, 2.5, 1.5) ==
              Approx(mg.margin).epsilon(1e-14));
    }
}

TEST_CASE("analytic beta lower bound", "[smalldiv]") {
    for (int m = 1; m <= 12; ++m) CHECK(beta_star_lower_bound(m, 2.0, 2.0, 0.0, 2.5) == Approx(1.0));
    for (int m = 1; m <= 12; ++m)
        CHECK(beta_star_lower_bound(m, 2e-3, 1.5, 0.7, 2.5) ==
              Approx(2 * beta_star_lower_bound(m, 1e-3, 1.5, 0.7, 2.5)).epsilon(1e-14));
    // 2^m / (m log 2)^(sigma-1) has its minimum near m = 2 for sigma = 2.5, so the
    // bound decreases strictly only from there on.
    CHECK(beta_star_lower_bound(2, 1e-3, 1.5, 0.7, 2.5) > beta_star_lower_bound(1, 1e-3, 1.5, 0.7, 2.5));
    for (int m = 3; m <= 12; ++m)
        CHECK(beta_star_lower_bound(m, 1e-3, 1.5, 0.7, 2.5) < beta_star_lower_bound(m - 1, 1e-3, 1.5, 0.7, 2.5));
    CHECK_THROWS_AS(beta_star_lower_bound(0, 1e-3, 1.5, 0.7, 2.5), DomainError);
}

TEST_CASE("product bound profile matches brute force", "[smalldiv]") {
    auto w = Weights::log_power(2.5);
    const double mu1 = 2.5, mu2 = 1.5;
    ProductProfile prof(w, 6, mu1, mu2);
    CHECK(prof.lhs(0.3) == 1.0);  // nothing fits
    CHECK(prof.lhs(w.h(0) * 1.01) == Approx(2.0));
    for (double N : {1.0, 2.5, 4.0, 6.0}) {
        double best = 1;
        for (const auto& nu : enumerate_modes(w, N, true)) best = std::max(best, diophantine_product(nu, mu1, mu2));
        CHECK(prof.lhs(N) == Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("calibrated constants make the product bound hold", "[smalldiv]") {
    auto w = Weights::log_power(2.5);
    const double sigma = 2.5;
    ProductProfile prof(w, 12, 2.5, 1.5);
    auto K = calibrate_product_constants(prof, 2, 12, sigma);
    CHECK(K.K1 >= 1);
    CHECK(K.K2 > 0);
    for (double N : product_checkpoints(prof, 2, 12, sigma)) CHECK(product_sup_bound(prof, N, K, sigma).holds);
    for (double N = 2; N <= 12; N += 0.01) CHECK(product_sup_bound(prof, N, K, sigma).holds);
    // the constant is tight: shrinking K2 breaks the bound somewhere
    ProductConstants smaller{K.K1, K.K2 * 0.999};
    bool broken = false;
    for (double N : product_checkpoints(prof, 2, 12, sigma)) broken |= !product_sup_bound(prof, N, smaller, sigma).holds;
    CHECK(broken);
}

TEST_CASE("Diophantine frequencies respect the product lower bound on beta", "[smalldiv]") {
    auto w = Weights::finite_window(1, Weights::log_power(2.5));
    const double mu1 = 2.5, mu2 = 1.5;
    for (std::uint64_t i = 0; i < 5; ++i) {
        Frequency omega = sample_frequency(1, 1.0, 1.0, 99, i);
        auto b = beta_sequence(omega, w, 4);
        for (int m = 0; m <= 4; ++m) {
            double N = std::ldexp(1.0, m);
            double gamma = diophantine_margin(omega, mu1, mu2, w, N).margin;
            ProductProfile prof(w, N, mu1, mu2);
            CHECK(b(m) >= gamma / prof.lhs(N) * (1 - 1e-12));
        }
    }
}

TEST_CASE("Monte-Carlo measure estimate", "[smalldiv]") {
    auto w = Weights::log_power(2.5);
    auto margins = measure_margins(2.5, 1.5, 1.0, 1.0, w, 2, 200, 5);
    CHECK(pass_fraction(margins, 1e-300) == 1.0);
    CHECK(pass_fraction(margins, 1e6) == 0.0);
    double prev = 1;
    for (double g : {1e-4, 1e-3, 1e-2, 1e-1}) {
        double f = pass_fraction(margins, g);
        CHECK(f <= prev);
        prev = f;
    }
    CHECK(measure_estimate({1e-3, 2.5, 1.5}, 1.0, 1.0, w, 2, 200, 5) == pass_fraction(margins, 1e-3));
    CHECK(measure_margins(2.5, 1.5, 1.0, 1.0, w, 2, 50, 5) == std::vector<double>(margins.begin(), margins.begin() + 50));
}
