// SPDX-License-Identifier: MIT
#include "twoscale/experiments.hpp"
#include "twoscale/model_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace twoscale;
using nlohmann::json;

namespace {

/// "a:b:n" for linspace, otherwise a comma-separated list.
std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> out;
    try {
        if (std::count(s.begin(), s.end(), ':') == 2) {
            const auto p1 = s.find(':'), p2 = s.find(':', p1 + 1);
            const double a = std::stod(s.substr(0, p1)), b = std::stod(s.substr(p1 + 1, p2 - p1 - 1));
            const long n = std::stol(s.substr(p2 + 1));
            if (n < 1) throw std::invalid_argument("n");
            for (long k = 0; k < n; ++k) out.push_back(n == 1 ? a : a + (b - a) * double(k) / double(n - 1));
            return out;
        }
        std::stringstream ss(s);
        for (std::string tok; std::getline(ss, tok, ',');) out.push_back(std::stod(tok));
    } catch (const std::exception&) {
        throw ValidationError("config", "bad grid '" + s + "' (use a:b:n or v1,v2,...)");
    }
    if (out.empty()) throw ValidationError("config", "empty grid '" + s + "'");
    return out;
}

Vec parse_vec(const std::string& s, std::size_t dim, const char* what) {
    const auto v = parse_grid(s);
    if (v.size() != dim) throw ValidationError("config", std::string(what) + " has wrong length");
    return Eigen::Map<const Vec>(v.data(), Eigen::Index(v.size()));
}

json read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("config", "cannot open " + path);
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw ValidationError("config", path + ": " + e.what());
    }
}

ModelSpec load_spec(const std::string& path) {
    const json doc = read_json(path);
    if (doc.is_object() && doc.value("type", "") == "reaction_diffusion") return reaction_diffusion_model(doc);
    return parse_model(doc).build();
}

struct LambdaOptions {
    std::string x_grid = "0", z_grid = "-2:2:9", x_ref, x_dir, z_dir, method = "ergodic_bsde", table;
    std::size_t n_paths = 1000;
    double dt = 0.02, L1x = 1.0, L1z = 1.0;
    std::uint64_t seed = 2024;

    void attach(CLI::App* app) {
        app->add_option("--x-grid", x_grid, "slow-axis coordinates, a:b:n or list");
        app->add_option("--z-grid", z_grid, "z-axis coordinates, a:b:n or list");
        app->add_option("--x-ref", x_ref, "slow-axis origin (default x0)");
        app->add_option("--x-dir", x_dir, "slow-axis direction (default e1)");
        app->add_option("--z-dir", z_dir, "z-axis direction (default e1)");
        app->add_option("--method", method, "ergodic_bsde | time_average")
            ->check(CLI::IsMember({"ergodic_bsde", "time_average"}));
        app->add_option("--lambda-paths", n_paths, "paths per node");
        app->add_option("--lambda-dt", dt, "frozen-fast step");
        app->add_option("--L1x", L1x);
        app->add_option("--L1z", L1z);
        app->add_option("--lambda-seed", seed);
        app->add_option("--lambda-table", table, "reuse a persisted lambda CSV");
    }

    EffectiveHamiltonianTable make(const ModelSpec& spec) const {
        if (!table.empty()) {
            std::ifstream is(table);
            if (!is) throw ValidationError("config", "cannot open " + table);
            return EffectiveHamiltonianTable::read_csv(is);
        }
        LambdaTableConfig c;
        const auto n = spec.slow_dim();
        c.x_grid = parse_grid(x_grid);
        c.z_grid = parse_grid(z_grid);
        c.x_ref = x_ref.empty() ? spec.x0 : parse_vec(x_ref, n, "--x-ref");
        c.x_dir = x_dir.empty() ? Vec(Vec::Unit(Eigen::Index(n), 0)) : parse_vec(x_dir, n, "--x-dir");
        c.z_dir = z_dir.empty() ? Vec(Vec::Unit(Eigen::Index(n), 0)) : parse_vec(z_dir, n, "--z-dir");
        c.method = method == "time_average" ? LambdaMethod::TimeAverage : LambdaMethod::ErgodicBsde;
        c.ergodic.n_paths = n_paths;
        c.ergodic.dt = dt;
        c.L1x = L1x;
        c.L1z = L1z;
        c.seed = seed;
        return build_lambda_table(spec, c);
    }
};

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    body(os);
    std::cout << "wrote " << path << '\n';
}

std::string stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

void print_report(const ConvergenceReport& r, const std::vector<std::string>& files) {
    std::cout.precision(6);
    std::cout << "Ybar_0 = " << r.ybar << " +- " << r.ybar_ci << " (table ci " << r.table_ci << ")\n";
    for (const auto& row : r.rows)
        std::cout << "eps=" << row.eps << "  Y=" << row.y << " +- " << row.ci << "  |err|=" << row.error
                  << " +- " << row.error_ci << "  " << row.status << '\n';
    std::cout << "empirical slope " << r.empirical_slope << (r.partial ? "  [partial]" : "") << '\n';
    for (const auto& f : files) std::cout << "wrote " << f << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"twoscale: two-scale FBSDE singular-limit toolkit"};
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "worker threads (default TWOSCALE_THREADS or hardware)");

    std::string model_path, out_path, out_dir, study_path, report_path;
    std::size_t n_steps = 50, n_paths = 10000;
    int degree = 2;
    std::uint64_t seed = 11;
    double eps = 0.1;

    auto* validate = app.add_subcommand("validate", "check every standing hypothesis of a model file");
    validate->add_option("model", model_path)->required()->check(CLI::ExistingFile);

    LambdaOptions lam;
    auto* lambda = app.add_subcommand("lambda", "tabulate the effective Hamiltonian");
    lambda->add_option("model", model_path)->required()->check(CLI::ExistingFile);
    lam.attach(lambda);
    lambda->add_option("-o,--out", out_path, "output CSV (default <out-dir>/<model>_lambda.csv)");
    lambda->add_option("--out-dir", out_dir);

    auto add_solver_options = [&](CLI::App* s) {
        s->add_option("model", model_path)->required()->check(CLI::ExistingFile);
        s->add_option("--n-steps", n_steps);
        s->add_option("--n-paths", n_paths);
        s->add_option("--degree", degree);
        s->add_option("--seed", seed);
        s->add_option("-o,--out", out_path, "output JSON");
        s->add_option("--out-dir", out_dir);
    };
    auto* limit = app.add_subcommand("solve-limit", "solve the reduced limit BSDE");
    add_solver_options(limit);
    lam.attach(limit);
    auto* solve_eps = app.add_subcommand("solve-eps", "solve the two-scale BSDE at one eps");
    add_solver_options(solve_eps);
    solve_eps->add_option("--eps", eps)->required();

    std::vector<double> eps_override;
    std::size_t study_paths = 0, study_steps = 0;
    auto* converge = app.add_subcommand("converge", "run a convergence study");
    converge->add_option("study", study_path)->required()->check(CLI::ExistingFile);
    converge->add_option("--eps", eps_override, "override the eps list");
    converge->add_option("--n-paths", study_paths);
    converge->add_option("--n-steps", study_steps);
    converge->add_option("--out-dir", out_dir);

    std::size_t n_modes = 1;
    auto* rd = app.add_subcommand("example-rd", "reaction-diffusion showcase");
    rd->add_option("--n-modes", n_modes)->check(CLI::Range(1, 8));
    rd->add_option("--n-paths", study_paths);
    rd->add_option("--eps", eps_override);
    rd->add_option("--out-dir", out_dir);

    auto* plots = app.add_subcommand("plots", "render SVG plots from a report JSON");
    plots->add_option("report", report_path)->required()->check(CLI::ExistingFile);
    plots->add_option("--out-dir", out_dir);

    CLI11_PARSE(app, argc, argv);
    if (threads) set_worker_threads(threads);

    try {
        if (*validate) {
            const ModelSpec spec = load_spec(model_path);
            std::cout << spec.report.to_string() << "model valid: mu = " << spec.mu << '\n';
        } else if (*lambda) {
            const ModelSpec spec = load_spec(model_path);
            const auto table = lam.make(spec);
            const std::string path = out_path.empty()
                ? (std::filesystem::path(resolve_output_dir(out_dir)) / (stem(model_path) + "_lambda.csv")).string()
                : out_path;
            write_file(path, [&](std::ostream& os) { table.write_csv(os); });
            for (const auto& f : table.certificate_failures) std::cerr << "certificate: " << f << '\n';
            if (!table.all_valid()) throw NumericalError("lambda table has invalid nodes");
        } else if (*limit || *solve_eps) {
            const ModelSpec spec = load_spec(model_path);
            const TimeGrid grid{0.0, 1.0, n_steps};
            BsdeSolution s;
            EffectiveHamiltonianTable table;
            if (*limit) {
                table = lam.make(spec);
                s = solve_limit_bsde(spec, LambdaSource(&table), grid, n_paths, degree, seed);
            } else {
                s = solve_epsilon_bsde(spec, eps, grid, n_paths, degree, seed);
            }
            std::cout.precision(10);
            std::cout << "Y0 = " << s.y0 << " +- " << s.ci << '\n';
            const std::string path = out_path.empty()
                ? (std::filesystem::path(resolve_output_dir(out_dir)) /
                   (stem(model_path) + (*limit ? "_limit.json" : "_eps.json"))).string()
                : out_path;
            write_file(path, [&](std::ostream& os) { write_solution_json(os, s); });
        } else if (*converge || *rd) {
            StudyConfig cfg = *converge ? load_study_file(study_path) : reaction_diffusion_study(n_modes);
            if (!eps_override.empty()) cfg.eps = eps_override;
            if (study_paths) cfg.n_paths = study_paths;
            if (study_steps) cfg.n_steps = study_steps;
            cfg.source["eps"] = cfg.eps;
            cfg.source["n_paths"] = cfg.n_paths;
            cfg.source["n_steps"] = cfg.n_steps;
            cfg.validate();
            const auto report = *converge ? run_convergence_study(cfg) : run_reaction_diffusion_example(cfg);
            const std::string dir = resolve_output_dir(out_dir.empty() ? cfg.output_dir : out_dir);
            auto files = write_report(report, dir);
            const auto pf = emit_plots(report, dir);
            files.insert(files.end(), pf.begin(), pf.end());
            print_report(report, files);
        } else if (*plots) {
            const auto report = ConvergenceReport::from_json(read_json(report_path));
            const std::string dir = out_dir.empty()
                ? std::filesystem::path(report_path).parent_path().string()
                : out_dir;
            for (const auto& f : emit_plots(report, dir.empty() ? "." : dir)) std::cout << "wrote " << f << '\n';
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation failure: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
