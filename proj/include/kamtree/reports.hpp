#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "kamtree/config.hpp"
#include "kamtree/integrate.hpp"
#include "kamtree/lindstedt.hpp"
#include "kamtree/renorm.hpp"
#include "kamtree/smalldiv.hpp"
#include "kamtree/torus.hpp"

namespace kamtree {

// Shortest round-trip text for a double.
inline std::string num(double x) {
    char buf[32];
    for (int p = 15; p <= 17; ++p) {
        std::snprintf(buf, sizeof buf, "%.*g", p, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

inline std::string csv_header_comment(const Json& config) { return "# config: " + config.dump() + "\n"; }

inline std::string betaseq_csv(const BetaSequence& b) {
    std::string s = "m,two_pow_m,beta,witness_mode\n";
    for (int m = 0; m <= b.m_max(); ++m)
        s += std::to_string(m) + "," + num(std::ldexp(1.0, m)) + "," + num(b(m)) + "," +
             b.witness[static_cast<std::size_t>(m)].str() + "\n";
    return s;
}

// k, mode, j, re, im in canonical mode order; zero components are skipped.
inline std::string coefficients_csv(const OrderedCoefficients& u, const Weights& w, const Frequency& omega) {
    std::string s = "k,mode,j,re,im\n";
    const int J = omega.half_width();
    for (int k = 1; k <= u.K(); ++k)
        for (const auto& nu : canonical_support(u.at(k), w)) {
            const Vec& v = *u.at(k).find(nu);
            for (int j = -J; j <= J; ++j) {
                const cplx c = v[static_cast<std::size_t>(j + J)];
                if (c == cplx{}) continue;
                s += std::to_string(k) + "," + nu.str() + "," + std::to_string(j) + "," + num(c.real()) + "," +
                     num(c.imag()) + "\n";
            }
        }
    return s;
}

inline std::string cancel_csv(const std::vector<CancellationRow>& rows) {
    std::string s = "k,n,norm_M0,norm_dM0,raw_scale,ratio0,ratio1\n";
    for (const auto& r : rows)
        s += std::to_string(r.k) + "," + std::to_string(r.n) + "," + num(r.norm_M0) + "," + num(r.norm_dM0) + "," +
             num(r.raw0) + "," + num(r.ratio0()) + "," + num(r.ratio1()) + "\n";
    return s;
}

inline Json thresholds_json(const Thresholds& t) {
    auto core = [](const ThresholdCore& c) {
        return Json{{"n0", c.n0},   {"m_n0", c.m_n0}, {"beta_n0", c.beta_n0}, {"tail", c.tail},
                    {"C0", c.C0},   {"C0p", c.C0p},   {"eps1", c.eps1},       {"eps2", c.eps2}};
    };
    Json j{{"c0", t.c0}, {"c1", t.c1}, {"norm_f", t.norm_f}, {"gamma_D", t.gamma_D}, {"s", t.s}, {"s2", t.s2},
           {"main", core(t.main)}};
    j["scaled"] = t.scaled ? core(*t.scaled) : Json(nullptr);
    return j;
}

inline Json synthesize_json(const SeriesSolution& sol, const RadiusFit& r, const Json& thresholds) {
    return Json{{"epsilon", sol.eps},
                {"K", sol.u.K()},
                {"engine", to_string(sol.engine)},
                {"per_order_norms", sol.per_order_norms},
                {"epsilon_hat", r.defined ? Json(r.eps_hat) : Json(nullptr)},
                {"thresholds", thresholds}};
}

inline std::string validation_csv(const Validation& v) {
    std::string s = "t,error\n";
    for (const auto& row : v.rows) s += num(row.t) + "," + num(row.error) + "\n";
    return s;
}

}  // namespace kamtree
