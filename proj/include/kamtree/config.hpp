#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kamtree/errors.hpp"
#include "kamtree/fixtures.hpp"
#include "kamtree/modes.hpp"
#include "kamtree/potential.hpp"
#include "kamtree/torus.hpp"

namespace kamtree {

using Json = nlohmann::ordered_json;

// Everything a command needs.  `source` keeps the merged JSON for report headers.
struct RunConfig {
    Weights weights = Weights::constant(1.0);
    Frequency omega;
    ScalarSeries f;
    double s = 0.5, s2 = 0.25, q = 1.0, rho = 1.0;
    double gamma = 1e-3, mu1 = 2.5, mu2 = 1.5, sigma = 2.5;
    double c0 = 1.0;
    std::optional<double> scaled_gamma;
    double certify_N = 128;  // enumeration level for the threshold margin
    double N = 8;  // enumeration level for dioph and measure
    int samples = 2000;
    int K = 6;
    std::vector<double> eps{1e-3};
    int m_max = 12;
    std::optional<int> n_max;
    int bryuno_M = 10;
    Engine engine = Engine::recursion;
    long long tree_cap = 50'000'000;
    long long mode_cap = kDefaultModeCap;
    double dt = 1e-3, T = 100;
    int stride = 100;
    int dump_order = 0;
    std::string out = "out";
    std::uint64_t seed = 2024;
    Json source;
};

// The three-rotor fixture as a configuration document.
inline Json default_config() {
    return Json{
        {"weights", {{"kind", "finite_window"}, {"R", 1}, {"inner", {{"kind", "constant"}, {"value", 1.0}}}}},
        {"frequency", {{"values", {std::sqrt(2.0), 1.0, kGolden}}}},
        {"potential", nullptr},
        {"s", 0.5},
        {"s2", 0.25},
        {"q", 1.0},
        {"rho", 1.0},
        {"gamma", 1e-3},
        {"mu1", 2.5},
        {"mu2", 1.5},
        {"sigma", 2.5},
        {"c0", 1.0},
        {"scaled_gamma", nullptr},
        {"certify_N", 128},
        {"N", 8},
        {"samples", 2000},
        {"K", 6},
        {"eps", {1e-3}},
        {"m_max", 12},
        {"n_max", nullptr},
        {"bryuno_M", 10},
        {"engine", "recursion"},
        {"caps", {{"trees", 50'000'000}, {"modes", kDefaultModeCap}}},
        {"integrator", {{"dt", 1e-3}, {"T", 100.0}, {"stride", 100}}},
        {"dump_order", 0},
        {"out", "out"},
        {"seed", 2024},
    };
}

namespace detail {

inline Weights parse_weights(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return Weights::constant(j.at("value").get<double>());
    if (kind == "log_power") return Weights::log_power(j.at("sigma").get<double>());
    if (kind == "polynomial") return Weights::polynomial(j.at("alpha").get<double>());
    if (kind == "finite_window") return Weights::finite_window(j.at("R").get<int>(), parse_weights(j.at("inner")));
    if (kind == "table") {
        const std::string ext = j.value("extension", "infinite");
        if (ext != "infinite" && ext != "hold") throw ParseError("weight table extension must be 'infinite' or 'hold'");
        return Weights::table(j.at("values").get<std::vector<double>>(),
                              ext == "hold" ? Weights::Extension::hold : Weights::Extension::infinite);
    }
    throw ParseError("unknown weight kind '" + kind + "'");
}

inline Frequency parse_frequency(const Json& j) {
    if (j.contains("values")) return Frequency(j.at("values").get<std::vector<double>>());
    if (j.contains("sample")) {
        const auto& s = j.at("sample");
        return sample_frequency(s.at("R").get<int>(), s.value("q", 1.0), s.value("rho", 1.0), s.value("seed", 2024ULL),
                                s.value("index", 0ULL));
    }
    throw ParseError("frequency needs 'values' or 'sample'");
}

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ParseError(what);
}

}  // namespace detail

// Overrides `key=value` on top of `doc`; dotted keys reach into objects and the
// value is read as JSON, falling back to a plain string.
inline void apply_override(Json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    Json* node = &doc;
    std::string::size_type start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (!node->is_object() && !node->is_null()) throw ParseError("override key '" + key + "' crosses a value");
        start = dot + 1;
    }
}

// Builds and validates a RunConfig; `base_dir` resolves a relative potential path.
inline RunConfig load_config(Json doc, const std::filesystem::path& base_dir = {}) {
    using detail::require;
    Json merged = default_config();
    // weight and frequency entries are replaced whole, not merged key by key
    if (doc.is_object())
        for (const char* key : {"weights", "frequency"})
            if (doc.contains(key)) merged.erase(key);
    merged.merge_patch(doc);
    RunConfig c;
    try {
        c.weights = detail::parse_weights(merged.at("weights"));
        c.omega = detail::parse_frequency(merged.at("frequency"));
        // merge_patch drops keys set to null, so absent and null read the same
        auto given = [&](const char* key) { return merged.contains(key) && !merged.at(key).is_null(); };
        if (!given("potential")) {
            c.f = three_rotor_fixture().f;
        } else {
            std::filesystem::path p = merged.at("potential").get<std::string>();
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            c.f = load_potential(p.string());
        }
        c.s = merged.at("s").get<double>();
        c.s2 = merged.at("s2").get<double>();
        c.q = merged.at("q").get<double>();
        c.rho = merged.at("rho").get<double>();
        c.gamma = merged.at("gamma").get<double>();
        c.mu1 = merged.at("mu1").get<double>();
        c.mu2 = merged.at("mu2").get<double>();
        c.sigma = merged.at("sigma").get<double>();
        c.c0 = merged.at("c0").get<double>();
        if (given("scaled_gamma")) c.scaled_gamma = merged.at("scaled_gamma").get<double>();
        c.certify_N = merged.at("certify_N").get<double>();
        c.N = merged.at("N").get<double>();
        c.samples = merged.at("samples").get<int>();
        c.K = merged.at("K").get<int>();
        const auto& e = merged.at("eps");
        c.eps = e.is_array() ? e.get<std::vector<double>>() : std::vector<double>{e.get<double>()};
        c.m_max = merged.at("m_max").get<int>();
        if (given("n_max")) c.n_max = merged.at("n_max").get<int>();
        c.bryuno_M = merged.at("bryuno_M").get<int>();
        const std::string engine = merged.at("engine").get<std::string>();
        require(engine == "recursion" || engine == "trees", "engine must be 'recursion' or 'trees'");
        c.engine = engine == "trees" ? Engine::trees : Engine::recursion;
        c.tree_cap = merged.at("caps").at("trees").get<long long>();
        c.mode_cap = merged.at("caps").at("modes").get<long long>();
        c.dt = merged.at("integrator").at("dt").get<double>();
        c.T = merged.at("integrator").at("T").get<double>();
        c.stride = merged.at("integrator").at("stride").get<int>();
        c.dump_order = merged.at("dump_order").get<int>();
        c.out = merged.at("out").get<std::string>();
        c.seed = merged.at("seed").get<std::uint64_t>();
    } catch (const Json::exception& ex) {
        throw ParseError(std::string("configuration: ") + ex.what());
    } catch (const DomainError& ex) {
        throw ParseError(std::string("configuration: ") + ex.what());
    }
    require(c.s > 0 && c.s2 > 0 && c.s2 < c.s, "need 0 < s2 < s");
    require(c.q >= 0, "q must be nonnegative");
    require(c.rho > 0, "rho must be positive");
    require(c.gamma > 0, "gamma must be positive");
    require(c.mu1 > 0 && c.mu2 > 0, "mu1 and mu2 must be positive");
    require(c.sigma > 1, "sigma must exceed 1");
    require(c.c0 > 0, "c0 must be positive");
    require(!c.scaled_gamma || *c.scaled_gamma > 0, "scaled_gamma must be positive");
    require(c.N > 0 && c.certify_N > 0, "N and certify_N must be positive");
    require(c.samples >= 1, "samples must be positive");
    require(c.K >= 1, "K must be at least 1");
    require(!c.eps.empty(), "eps list is empty");
    for (double x : c.eps) require(std::isfinite(x), "eps values must be finite");
    require(c.m_max >= 0 && c.m_max <= 24, "m_max must lie in [0, 24]");
    require(!c.n_max || *c.n_max >= 0, "n_max must be nonnegative");
    require(c.bryuno_M >= 1 && c.bryuno_M <= c.m_max, "bryuno_M must lie in [1, m_max]");
    require(c.tree_cap > 0 && c.mode_cap > 0, "caps must be positive");
    require(c.dt > 0 && c.T > 0 && c.stride >= 1, "integrator needs dt > 0, T > 0, stride >= 1");
    require(c.dump_order >= 0 && c.dump_order <= c.K, "dump_order must lie in [0, K]");
    for (const auto& [nu, v] : c.f)
        require(nu.is_zero() || (c.omega.contains(nu.min_index()) && c.omega.contains(nu.max_index())),
                "potential mode " + nu.str() + " lies outside the frequency window");
    c.source = std::move(merged);
    return c;
}

inline RunConfig load_config_file(const std::string& path, const std::vector<std::string>& overrides = {}) {
    Json doc = Json::object();
    std::filesystem::path base;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open configuration '" + path + "'");
        doc = Json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) throw ParseError("configuration '" + path + "' is not a JSON object");
        base = std::filesystem::path(path).parent_path();
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return load_config(std::move(doc), base);
}

}  // namespace kamtree
