#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "kamtree/fixtures.hpp"
#include "kamtree/lindstedt.hpp"
#include "kamtree/trees.hpp"

using namespace kamtree;
using Catch::Approx;

namespace {

const Mode e0 = Mode::unit(0);
const Mode e1 = Mode::unit(1);

DivisorContext fixture_context() {
    auto fx = three_rotor_fixture();
    return DivisorContext::build(fx.omega, fx.weights, 10);
}

double vec_diff(const Vec& a, const Vec& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

long long catalan(int n) {
    long long c = 1;
    for (int i = 0; i < n; ++i) c = c * 2 * (2 * i + 1) / (i + 2);
    return c;
}

Tree make(std::vector<int> parent, std::vector<Mode> modes) { return Tree{TreeShape{std::move(parent)}, std::move(modes)}; }

Mode random_mode(std::mt19937_64& gen, int J) {
    std::uniform_int_distribution<int> d(-3, 3);
    std::vector<Mode::Entry> e;
    for (int j = -J; j <= J; ++j) e.push_back({j, d(gen)});
    return Mode::from_entries(std::move(e));
}

}  // namespace

TEST_CASE("plane tree shapes are counted by Catalan numbers", "[trees]") {
    CHECK(catalan(0) == 1);
    CHECK(catalan(7) == 429);
    for (int k = 1; k <= 8; ++k) {
        auto shapes = plane_shapes(k);
        CHECK(static_cast<long long>(shapes.size()) == catalan(k - 1));
        CHECK(static_cast<double>(shapes.size()) <= std::pow(4.0, k));
        std::set<std::string> seen;
        for (const auto& s : shapes) {
            seen.insert(s.str());
            auto p = branching(s);
            int total = 0;
            for (int x : p) total += x;
            CHECK(total == k - 1);
        }
        CHECK(seen.size() == shapes.size());
    }
    auto three = plane_shapes(3);
    std::set<std::string> names;
    for (const auto& s : three) names.insert(s.str());
    CHECK(names == std::set<std::string>{"((()))", "(()())"});
    CHECK_THROWS_AS(plane_shapes(0), DomainError);
}

TEST_CASE("single node trees", "[trees]") {
    auto fx = three_rotor_fixture();
    auto supp = fx.f.support();
    CHECK(enumerate_trees(1, e0, supp, fx.omega).size() == 1);
    CHECK(enumerate_trees(1, e1, supp, fx.omega).empty());
    auto ctx = fixture_context();
    Tree t = make({-1}, {e0 + e1});
    CHECK(line_momenta(t).front() == e0 + e1);
    const double g4 = std::pow(kGolden, 4);
    CHECK(vec_diff(tree_value(t, fx.f, ctx), Vec{0, cplx(0, 0.5 / g4), cplx(0, 0.5 / g4)}) < 1e-16);
    CHECK(vec_diff(sum_tree_values(1, e0, fx.f, ctx), Vec{0, cplx(0, 0.5), 0}) == 0);
}

TEST_CASE("line momenta follow the conservation law", "[trees]") {
    // path with zero modes everywhere except the last node
    const int k = 5;
    std::vector<int> parent{-1, 0, 1, 2, 3};
    std::vector<Mode> modes(k);
    const Mode nu = Mode::from_entries({{-1, 1}, {1, -1}});
    modes.back() = nu;
    for (const auto& m : line_momenta(make(parent, modes))) CHECK(m == nu);

    Tree cherry = make({-1, 0, 0}, {e0, e1, -e0 - e0});
    CHECK(line_momenta(cherry)[0] == e1 - e0);

    // every enumerated tree conserves momentum node by node
    auto fx = three_rotor_fixture();
    auto supp = fx.f.support();
    for (const auto& t : enumerate_trees(4, e0 + e0, supp, fx.omega)) {
        auto mom = line_momenta(t);
        auto ch = t.shape.children();
        for (int v = 0; v < t.k(); ++v) {
            Mode sum = t.mode(v);
            for (int c : ch[static_cast<std::size_t>(v)]) sum = sum + mom[static_cast<std::size_t>(c)];
            CHECK(sum == mom[static_cast<std::size_t>(v)]);
            if (v > 0) CHECK_FALSE(mom[static_cast<std::size_t>(v)].is_zero());
        }
        CHECK(mom[0] == e0 + e0);
    }
}

TEST_CASE("zero modes along a path give an exactly vanishing value", "[trees]") {
    auto fx = three_rotor_fixture();
    ScalarSeries f = fx.f;
    f.set(Mode{}, 0.3);
    auto ctx = fixture_context();
    for (int k : {2, 3, 6}) {
        std::vector<int> parent{-1};
        for (int i = 1; i < k; ++i) parent.push_back(i - 1);
        std::vector<Mode> modes(static_cast<std::size_t>(k));
        modes.back() = e0 + e1;
        Tree t = make(parent, modes);
        for (const auto& m : line_momenta(t)) CHECK(m == e0 + e1);
        for (const auto& c : tree_value(t, f, ctx)) CHECK(c == cplx{});
    }
}

TEST_CASE("node factor products match the four-node tensor formulas", "[trees]") {
    std::mt19937_64 gen(42);
    std::uniform_real_distribution<double> U(-1, 1);
    const int J = 2;
    Frequency omega({0.3, 1.1, 1.7, 2.3, 0.9});
    for (int trial = 0; trial < 25; ++trial) {
        Mode n1 = random_mode(gen, J), n2 = random_mode(gen, J), n3 = random_mode(gen, J), n4 = random_mode(gen, J);
        ScalarSeries f;
        cplx c1(U(gen), U(gen)), c2(U(gen), U(gen)), c3(U(gen), U(gen)), c4(U(gen), U(gen));
        // distinct modes keep the coefficients apart
        std::set<Mode> distinct{n1, n2, n3, n4};
        if (distinct.size() < 4) continue;
        f.set(n1, c1);
        f.set(n2, c2);
        f.set(n3, c3);
        f.set(n4, c4);
        const cplx i7 = std::pow(cplx(0, 1), 7);
        const cplx F = c1 * c2 * c3 * c4;
        auto d = [](const Mode& a, const Mode& b) { return static_cast<double>(dot(a, b)); };
        auto expect = [&](double scalar) {
            Vec v(omega.size());
            for (const auto& [j, n] : n1.entries()) v[static_cast<std::size_t>(j + J)] = i7 * F * static_cast<double>(n) * scalar;
            return v;
        };
        struct Case {
            std::vector<int> parent;
            std::vector<Mode> modes;
            double scalar;
        };
        const Case cases[] = {
            {{-1, 0, 1, 2}, {n1, n2, n3, n4}, d(n1, n2) * d(n2, n3) * d(n3, n4)},
            {{-1, 0, 0, 0}, {n1, n2, n3, n4}, d(n1, n2) * d(n1, n3) * d(n1, n4) / 6},
            {{-1, 0, 1, 1}, {n1, n2, n3, n4}, d(n1, n2) * d(n2, n3) * d(n2, n4) / 2},
            {{-1, 0, 0, 2}, {n1, n3, n2, n4}, d(n1, n2) * d(n1, n3) * d(n2, n4) / 2},
        };
        for (const auto& c : cases) {
            Vec got = node_factor_product(make(c.parent, c.modes), f, omega);
            Vec want = expect(c.scalar);
            CHECK(vec_diff(got, want) <= 1e-13 * std::max(1.0, magnitude(want)));
        }
    }
}

TEST_CASE("tree sums reproduce low orders of the recursion", "[trees]") {
    auto fx = three_rotor_fixture();
    auto ctx = fixture_context();
    const Mode nu = e0 + e0 + e1;
    Vec two = sum_tree_values(2, nu, fx.f, ctx);
    auto u = lindstedt_series(fx.f, ctx, 2);
    CHECK(vec_diff(two, *u.at(2).find(nu)) <= 1e-16);
    CHECK(two[1].imag() == Approx(-0.021885).margin(1e-6));
    CHECK(two[2].imag() == Approx(-0.019098).margin(1e-6));
    // outside the 3-fold sumset
    CHECK(magnitude(sum_tree_values(3, Mode::unit(1, 4), fx.f, ctx)) == 0);
    CHECK(enumerate_trees(3, Mode::unit(1, 4), fx.f.support(), fx.omega).empty());
}

TEST_CASE("tree expansion agrees with the recursion", "[trees]") {
    auto fx = three_rotor_fixture();
    auto ctx = fixture_context();
    SECTION("three rotor fixture through order 6") {
        auto rec = lindstedt_series(fx.f, ctx, 6);
        auto tr = tree_expansion(fx.f, ctx, 6);
        for (int k = 1; k <= 6; ++k) {
            INFO("k = " << k);
            auto g = order_gap(tr, rec, k);
            CHECK(g.scale > 0);
            CHECK(g.rel() <= 1e-10);
            CHECK(tr.at(k).size() == rec.at(k).size());
        }
    }
    SECTION("random potentials through order 4") {
        for (std::uint64_t seed : {3u, 4u}) {
            auto f = random_potential(seed, 4, 1, 1);
            auto rec = lindstedt_series(f, ctx, 4);
            auto tr = tree_expansion(f, ctx, 4);
            for (int k = 1; k <= 4; ++k) CHECK(order_gap(tr, rec, k).rel() <= 1e-10);
        }
    }
    SECTION("explicit per-mode sums match the grouped expansion") {
        auto tr = tree_expansion(fx.f, ctx, 3);
        for (const auto& [nu, v] : tr.at(3)) CHECK(vec_diff(sum_tree_values(3, nu, fx.f, ctx), v) <= 1e-15);
    }
}

TEST_CASE("tree enumeration respects the resource cap", "[trees]") {
    auto fx = three_rotor_fixture();
    try {
        for_each_labeled_tree(5, fx.f.support(), fx.omega, [](auto&&...) {}, EnumerationLimits{100});
        FAIL("cap not enforced");
    } catch (const ResourceError& e) {
        CHECK(e.partial == 100);
    }
}

TEST_CASE("tree dump rows", "[trees]") {
    auto fx = three_rotor_fixture();
    auto ctx = fixture_context();
    Tree t = make({-1, 0}, {e0, e1 + e0});
    auto row = tree_dump_row(t, fx.f, ctx);
    CHECK(row.rfind("(()),0:1|0:1;1:1,0:2;1:1/", 0) == 0);
    CHECK(std::count(row.begin(), row.end(), ',') == 3 + 6 - 1);
    CHECK(tree_dump_header(fx.omega) == "shape,modes,lines,re_-1,im_-1,re_0,im_0,re_1,im_1");
}
