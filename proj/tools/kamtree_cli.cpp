#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kamtree/acceptance.hpp"
#include "kamtree/reports.hpp"

namespace fs = std::filesystem;
using namespace kamtree;

namespace {

enum Exit { ok = 0, config_error = 2, resonance = 3, resource = 4, acceptance_failed = 5, internal = 1 };

// Files are collected first and written only once the command has finished.
using Outputs = std::map<std::string, std::string>;

void write_outputs(const std::string& dir, const Outputs& files) {
    fs::create_directories(dir);
    for (const auto& [name, content] : files) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
        out << content;
    }
}

std::string json_text(Json j, const RunConfig& c) {
    Json doc{{"config", c.source}};
    for (auto& [k, v] : j.items()) doc[k] = v;
    return doc.dump(2) + "\n";
}

DivisorContext context(const RunConfig& c) { return DivisorContext::build(c.omega, c.weights, c.m_max); }

EnumerationLimits limits(const RunConfig& c) { return {c.tree_cap}; }

int cmd_betaseq(const RunConfig& c, Outputs& out) {
    auto ctx = context(c);
    out["betaseq.csv"] = csv_header_comment(c.source) + betaseq_csv(ctx.beta);
    std::cout << "beta(0.." << c.m_max << ") computed; scale indices m_n =";
    for (int m : ctx.scales.m) std::cout << ' ' << m;
    std::cout << (ctx.scales.truncated ? " (halving stops before m_max)" : "") << "\n";
    return ok;
}

int cmd_bryuno(const RunConfig& c, Outputs& out) {
    auto b = beta_sequence(c.omega, c.weights, c.m_max);
    Json partial = Json::array();
    for (int M = 1; M <= c.bryuno_M; ++M) partial.push_back(bryuno_sum(b, M).sum);
    auto total = bryuno_sum(b, c.bryuno_M);
    out["bryuno.json"] = json_text({{"M", c.bryuno_M}, {"sum", total.sum}, {"last_increment", total.last_increment},
                                    {"partial_sums", partial}},
                                   c);
    std::cout << "Bryuno partial sum to M = " << c.bryuno_M << ": " << num(total.sum) << "\n";
    return ok;
}

int cmd_dioph(const RunConfig& c, Outputs& out) {
    auto res = diophantine_check(c.omega, {c.gamma, c.mu1, c.mu2}, c.weights, c.N, c.mode_cap);
    auto margin = diophantine_margin(c.omega, c.mu1, c.mu2, c.weights, c.N);
    out["dioph.json"] = json_text({{"gamma", c.gamma},
                                   {"mu1", c.mu1},
                                   {"mu2", c.mu2},
                                   {"N", c.N},
                                   {"pass", res.pass},
                                   {"witness", res.witness ? Json(res.witness->str()) : Json(nullptr)},
                                   {"margin", margin.margin},
                                   {"margin_witness", margin.witness.str()}},
                                  c);
    std::cout << (res.pass ? "Diophantine up to N = " + num(c.N) : "fails at " + res.witness->str()) << "; margin "
              << num(margin.margin) << "\n";
    return ok;
}

int cmd_measure(const RunConfig& c, Outputs& out) {
    auto margins = measure_margins(c.mu1, c.mu2, c.q, c.rho, c.weights, c.N, c.samples, c.seed);
    const double fraction = pass_fraction(margins, c.gamma);
    out["measure.json"] = json_text({{"gamma", c.gamma},
                                     {"mu1", c.mu1},
                                     {"mu2", c.mu2},
                                     {"q", c.q},
                                     {"rho", c.rho},
                                     {"N", c.N},
                                     {"samples", c.samples},
                                     {"seed", c.seed},
                                     {"fraction", fraction}},
                                    c);
    std::cout << "pass fraction " << num(fraction) << " over " << c.samples << " samples\n";
    return ok;
}

int cmd_expand(const RunConfig& c, Outputs& out) {
    auto ctx = context(c);
    auto u = lindstedt_series(c.f, ctx, c.K);
    double kernel = 0;
    Json sizes = Json::array();
    for (int k = 1; k <= c.K; ++k) {
        kernel = std::max(kernel, kernel_check(c.f, u, k, c.omega));
        sizes.push_back(u.at(k).size());
    }
    out["coeffs.csv"] = csv_header_comment(c.source) + coefficients_csv(u, c.weights, c.omega);
    out["expand.json"] = json_text({{"K", c.K}, {"modes_per_order", sizes}, {"kernel_max", kernel}}, c);
    std::cout << "orders 1.." << c.K << " computed; max |[df]_0| = " << num(kernel) << "\n";
    return ok;
}

int cmd_trees(const RunConfig& c, Outputs& out) {
    auto ctx = context(c);
    auto u = tree_expansion(c.f, ctx, c.K, limits(c));
    out["coeffs_trees.csv"] = csv_header_comment(c.source) + coefficients_csv(u, c.weights, c.omega);
    if (c.dump_order > 0) {
        std::string dump = csv_header_comment(c.source) + tree_dump_header(c.omega) + "\n";
        const auto supp = c.f.support();
        long long rows = 0;
        for_each_labeled_tree(
            c.dump_order, supp, c.omega,
            [&](const TreeShape& shape, std::span<const int> labels, auto&&) {
                dump += tree_dump_row(make_tree(shape, labels, supp), c.f, ctx) + "\n";
                ++rows;
            },
            limits(c));
        out["trees_dump.csv"] = std::move(dump);
        std::cout << rows << " trees of order " << c.dump_order << " dumped\n";
    }
    std::cout << "tree expansion through order " << c.K << " computed\n";
    return ok;
}

int cmd_cancel(const RunConfig& c, Outputs& out) {
    auto ctx = context(c);
    auto rows = cancellation_report(c.K, c.f, ctx, limits(c));
    if (c.n_max) std::erase_if(rows, [&](const CancellationRow& r) { return r.n > *c.n_max; });
    out["cancel.csv"] = csv_header_comment(c.source) + cancel_csv(rows);
    double w0 = 0, w1 = 0;
    for (const auto& r : rows) {
        w0 = std::max(w0, r.ratio0());
        w1 = std::max(w1, r.ratio1());
    }
    std::cout << rows.size() << " rows; max ratio0 " << num(w0) << ", max ratio1 " << num(w1) << "\n";
    return ok;
}

Json try_thresholds(const RunConfig& c, const DivisorContext& ctx) {
    ThresholdOptions o;
    o.c0 = c.c0;
    o.mu1 = c.mu1;
    o.mu2 = c.mu2;
    o.gamma = c.scaled_gamma;
    o.certify_N = c.certify_N;
    return thresholds_json(threshold_estimates(c.f, c.weights, c.s, c.s2, ctx, o));
}

int cmd_synthesize(const RunConfig& c, Outputs& out) {
    auto ctx = context(c);
    Json th;
    try {
        th = try_thresholds(c, ctx);
    } catch (const TruncationError& e) {
        th = Json{{"error", e.what()}};
    }
    auto base = synthesize(c.f, ctx, c.weights, c.eps.front(), c.K, c.engine, c.s, c.s2, limits(c));
    auto radius = c.K >= 4 ? empirical_radius(base) : RadiusFit{};
    Json runs = Json::array();
    for (double e : c.eps) {
        auto sol = base;
        sol.eps = e;
        runs.push_back(synthesize_json(sol, radius, th));
    }
    out["synthesize.json"] = json_text({{"runs", runs}}, c);
    out["coeffs.csv"] = csv_header_comment(c.source) + coefficients_csv(base.u, c.weights, c.omega);
    std::cout << "K = " << c.K << " (" << to_string(c.engine) << "), epsilon_hat "
              << (radius.defined ? num(radius.eps_hat) : std::string("undefined")) << "\n";
    return ok;
}

int cmd_validate(const RunConfig& c, Outputs& out) {
    auto ctx = context(c);
    auto base = synthesize(c.f, ctx, c.weights, c.eps.front(), c.K, c.engine, c.s, c.s2, limits(c));
    Json runs = Json::array();
    for (std::size_t i = 0; i < c.eps.size(); ++i) {
        auto sol = base;
        sol.eps = c.eps[i];
        auto v = validate_torus(sol, c.dt, c.T, c.stride);
        runs.push_back({{"epsilon", sol.eps},
                        {"sup_error", v.sup_error},
                        {"energy_drift", v.energy_drift},
                        {"imag_residue", v.imag_residue}});
        out["validate_" + std::to_string(i) + ".csv"] = csv_header_comment(c.source) + validation_csv(v);
        std::cout << "eps = " << num(sol.eps) << ": sup error " << num(v.sup_error) << ", energy drift "
                  << num(v.energy_drift) << "\n";
    }
    out["validate.json"] = json_text({{"K", c.K}, {"dt", c.dt}, {"T", c.T}, {"runs", runs}}, c);
    return ok;
}

int cmd_thresholds(const RunConfig& c, Outputs& out) {
    auto ctx = context(c);
    Json th = try_thresholds(c, ctx);
    out["thresholds.json"] = json_text({{"thresholds", th}}, c);
    std::cout << "n0 = " << th["main"]["n0"] << ", eps1 = " << num(th["main"]["eps1"].get<double>())
              << ", eps2 = " << num(th["main"]["eps2"].get<double>()) << "\n";
    return ok;
}

int cmd_all(const RunConfig& c, Outputs& out) {
    AcceptanceOptions opt;
    opt.limits = limits(c);
    opt.seed = c.seed;
    std::string text;
    int failed = 0;
    run_acceptance(opt, [&](const CriterionResult& r) {
        const std::string line = format_result(r);
        std::cout << line << std::endl;
        text += line + "\n";
        failed += !r.pass;
    });
    out["acceptance.txt"] = text;
    return failed ? acceptance_failed : ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lindstedt series, tree expansions and torus validation for weakly coupled rotators"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path, out_dir, potential, engine;
    std::vector<std::string> sets;
    std::vector<double> eps;
    int K = -1, m_max = -1, dump = -1;
    app.add_option("-c,--config", config_path, "JSON configuration file (defaults to the three-rotor fixture)");
    app.add_option("-o,--out", out_dir, "report directory");
    app.add_option("--set", sets, "override a configuration key, e.g. --set integrator.dt=5e-4");
    app.add_option("--potential", potential, "potential file");
    app.add_option("--engine", engine, "recursion or trees")->check(CLI::IsMember({"recursion", "trees"}));
    app.add_option("-K,--order", K, "truncation order");
    app.add_option("--eps", eps, "epsilon values");
    app.add_option("--m-max", m_max, "depth of the beta table");
    app.add_option("--dump", dump, "dump every tree of this order (trees command)");

    using Command = int (*)(const RunConfig&, Outputs&);
    const std::vector<std::tuple<std::string, std::string, Command>> commands{
        {"betaseq", "beta sequence and scale indices", cmd_betaseq},
        {"bryuno", "Bryuno partial sums", cmd_bryuno},
        {"dioph", "Diophantine check and margin", cmd_dioph},
        {"measure", "Monte-Carlo Diophantine pass fraction", cmd_measure},
        {"expand", "Lindstedt coefficients by recursion", cmd_expand},
        {"trees", "Lindstedt coefficients by tree sums, optional dump", cmd_trees},
        {"cancel", "self-energy cancellation report", cmd_cancel},
        {"synthesize", "series solution, per-order norms, radius and thresholds", cmd_synthesize},
        {"validate", "compare the series torus with a leapfrog integration", cmd_validate},
        {"thresholds", "threshold constants", cmd_thresholds},
        {"all", "run every acceptance criterion", cmd_all},
    };
    for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        std::vector<std::string> overrides = sets;
        if (!out_dir.empty()) overrides.push_back("out=\"" + out_dir + "\"");
        if (!potential.empty()) overrides.push_back("potential=\"" + potential + "\"");
        if (!engine.empty()) overrides.push_back("engine=\"" + engine + "\"");
        if (K >= 0) overrides.push_back("K=" + std::to_string(K));
        if (m_max >= 0) {
            overrides.push_back("m_max=" + std::to_string(m_max));
            overrides.push_back("bryuno_M=" + std::to_string(std::clamp(m_max, 1, 10)));
        }
        if (dump >= 0) overrides.push_back("dump_order=" + std::to_string(dump));
        if (!eps.empty()) overrides.push_back("eps=" + Json(eps).dump());
        RunConfig cfg = load_config_file(config_path, overrides);

        for (const auto& [name, help, fn] : commands) {
            if (!app.got_subcommand(name)) continue;
            Outputs out;
            const int code = fn(cfg, out);
            write_outputs(cfg.out, out);
            return code;
        }
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return config_error;
    } catch (const ResonanceError& e) {
        std::cerr << "resonance: " << e.what() << "\n";
        return resonance;
    } catch (const TruncationError& e) {
        std::cerr << "truncation: " << e.what() << "\n";
        return resonance;
    } catch (const ResourceError& e) {
        std::cerr << "resource cap: " << e.what() << " (" << e.partial << " items enumerated)\n";
        return resource;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return internal;
    }
    return internal;
}
