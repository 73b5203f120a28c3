// SPDX-License-Identifier: MIT
#include "twoscale/experiments.hpp"

#include "twoscale/model_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace twoscale {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& what) { throw ValidationError("config", what); }

std::vector<double> dvec(const json& j, const char* key) {
    if (!j.is_array()) bad(std::string(key) + " must be an array");
    std::vector<double> v;
    for (const auto& e : j) {
        if (!e.is_number()) bad(std::string(key) + " must contain numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

Vec evec(const json& j, const char* key) {
    const auto v = dvec(j, key);
    return Eigen::Map<const Vec>(v.data(), Eigen::Index(v.size()));
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t k = 0; k < n; ++k) g[k] = n == 1 ? a : a + (b - a) * double(k) / double(n - 1);
    return g;
}

void read_lambda_block(const json& lj, StudyConfig& cfg, std::string& table_file) {
    auto& L = cfg.lambda;
    if (lj.contains("x_grid")) L.x_grid = dvec(lj["x_grid"], "lambda.x_grid");
    if (lj.contains("z_grid")) L.z_grid = dvec(lj["z_grid"], "lambda.z_grid");
    if (lj.contains("x_ref")) L.x_ref = evec(lj["x_ref"], "lambda.x_ref");
    if (lj.contains("x_dir")) L.x_dir = evec(lj["x_dir"], "lambda.x_dir");
    if (lj.contains("z_dir")) L.z_dir = evec(lj["z_dir"], "lambda.z_dir");
    const std::string method = lj.value("method", "ergodic_bsde");
    if (method == "ergodic_bsde") L.method = LambdaMethod::ErgodicBsde;
    else if (method == "time_average") L.method = LambdaMethod::TimeAverage;
    else bad("lambda.method must be ergodic_bsde or time_average");
    L.ergodic.n_paths = lj.value("n_paths", L.ergodic.n_paths);
    L.ergodic.dt = lj.value("dt", L.ergodic.dt);
    L.ergodic.horizon = lj.value("horizon", L.ergodic.horizon);
    L.ergodic.degree = lj.value("degree", L.ergodic.degree);
    L.ergodic.cauchy_tol = lj.value("cauchy_tol", L.ergodic.cauchy_tol);
    L.ergodic.growth_c = lj.value("growth_c", L.ergodic.growth_c);
    L.ergodic.warmup = lj.value("warmup", L.ergodic.warmup);
    if (lj.contains("deltas")) L.ergodic.deltas = dvec(lj["deltas"], "lambda.deltas");
    L.L1x = lj.value("L1x", L.L1x);
    L.L1z = lj.value("L1z", L.L1z);
    table_file = lj.value("table_file", table_file);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ordered_json table_json(const EffectiveHamiltonianTable& t) {
    ordered_json j;
    j["method"] = t.method;
    j["x_grid"] = t.x_grid;
    j["z_grid"] = t.z_grid;
    j["x_ref"] = vec_json(t.x_ref);
    j["x_dir"] = vec_json(t.x_dir);
    j["z_dir"] = vec_json(t.z_dir);
    std::vector<std::vector<double>> vals, cis;
    std::vector<std::vector<int>> valid;
    for (std::size_t i = 0; i < t.x_grid.size(); ++i) {
        vals.emplace_back();
        cis.emplace_back();
        valid.emplace_back();
        for (std::size_t k = 0; k < t.z_grid.size(); ++k) {
            vals.back().push_back(t.values(Eigen::Index(i), Eigen::Index(k)));
            cis.back().push_back(t.ci(Eigen::Index(i), Eigen::Index(k)));
            valid.back().push_back(t.valid[i][k]);
        }
    }
    j["values"] = vals;
    j["ci"] = cis;
    j["valid"] = valid;
    j["L1x"] = t.L1x;
    j["L1z"] = t.L1z;
    j["concave_ok"] = t.concave_ok;
    j["lipschitz_ok"] = t.lipschitz_ok;
    j["certificate_failures"] = t.certificate_failures;
    j["node_errors"] = t.node_errors;
    ordered_json traces = ordered_json::array();
    for (std::size_t i = 0; i < t.traces.size(); ++i)
        for (std::size_t k = 0; k < t.traces[i].size(); ++k) {
            if (t.traces[i][k].empty()) continue;
            ordered_json tr;
            tr["x"] = t.x_grid[i];
            tr["z"] = t.z_grid[k];
            for (const auto& [d, l] : t.traces[i][k]) tr["trace"].push_back({d, l});
            traces.push_back(tr);
        }
    j["discount_traces"] = traces;
    return j;
}

double num_or_nan(const json& j) { return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN(); }

EffectiveHamiltonianTable table_from_json(const json& j) {
    EffectiveHamiltonianTable t;
    t.method = j.value("method", "");
    t.x_grid = j.at("x_grid").get<std::vector<double>>();
    t.z_grid = j.at("z_grid").get<std::vector<double>>();
    t.x_ref = evec(j.at("x_ref"), "x_ref");
    t.x_dir = evec(j.at("x_dir"), "x_dir");
    t.z_dir = evec(j.at("z_dir"), "z_dir");
    const auto nx = t.x_grid.size(), nz = t.z_grid.size();
    t.values.resize(Eigen::Index(nx), Eigen::Index(nz));
    t.ci.resize(Eigen::Index(nx), Eigen::Index(nz));
    t.valid.assign(nx, std::vector<char>(nz, 0));
    t.traces.assign(nx, std::vector<std::vector<std::pair<double, double>>>(nz));
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t k = 0; k < nz; ++k) {
            t.values(Eigen::Index(i), Eigen::Index(k)) = num_or_nan(j.at("values")[i][k]);
            t.ci(Eigen::Index(i), Eigen::Index(k)) = num_or_nan(j.at("ci")[i][k]);
            t.valid[i][k] = static_cast<char>(j.at("valid")[i][k].get<int>());
        }
    t.L1x = j.value("L1x", 0.0);
    t.L1z = j.value("L1z", 0.0);
    t.concave_ok = j.value("concave_ok", true);
    t.lipschitz_ok = j.value("lipschitz_ok", true);
    for (const auto& tr : j.value("discount_traces", json::array())) {
        const double x = tr.at("x").get<double>(), z = tr.at("z").get<double>();
        const auto i = std::size_t(std::find(t.x_grid.begin(), t.x_grid.end(), x) - t.x_grid.begin());
        const auto k = std::size_t(std::find(t.z_grid.begin(), t.z_grid.end(), z) - t.z_grid.begin());
        if (i >= nx || k >= nz) continue;
        for (const auto& p : tr.at("trace")) t.traces[i][k].emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    return t;
}

}  // namespace

void StudyConfig::validate() const {
    if (eps.empty()) bad("eps list is empty");
    for (std::size_t k = 0; k < eps.size(); ++k) {
        if (!(eps[k] > 0.0 && eps[k] <= 1.0)) bad("every eps must lie in (0, 1]");
        if (k && !(eps[k] < eps[k - 1])) bad("eps list must be strictly decreasing");
    }
    if (n_steps == 0 || n_paths < 2) bad("budgets must be positive (n_steps >= 1, n_paths >= 2)");
    if (1.0 / double(n_steps) > eps.back() / 10.0 * (1.0 + 1e-12))
        bad("n_steps too small: dt must be <= min(eps)/10");
    if (degree < 1) bad("degree must be >= 1");
}

std::string StudyConfig::hash() const {
    json h = source;
    h.erase("output_dir");
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canonical_dump(h));
    return os.str();
}

StudyConfig parse_study(const json& doc, const std::string& base_dir) {
    if (!doc.is_object()) bad("study config must be a JSON object");
    StudyConfig cfg;
    json src = doc;
    cfg.name = doc.value("name", cfg.name);
    if (!doc.contains("model")) bad("study config needs \"model\"");
    if (doc["model"].is_string()) {
        fs::path p = doc["model"].get<std::string>();
        if (p.is_relative()) p = fs::path(base_dir) / p;
        std::ifstream is(p);
        if (!is) bad("cannot open model file " + p.string());
        try {
            cfg.model = json::parse(is);
        } catch (const json::exception& e) {
            bad(p.string() + ": " + e.what());
        }
    } else {
        cfg.model = doc["model"];
    }
    src["model"] = cfg.model;
    if (doc.contains("eps")) cfg.eps = dvec(doc["eps"], "eps");
    cfg.n_steps = doc.value("n_steps", cfg.n_steps);
    cfg.n_paths = doc.value("n_paths", cfg.n_paths);
    cfg.degree = doc.value("degree", cfg.degree);
    const json seeds = doc.value("seeds", json::object());
    cfg.path_seed = seeds.value("paths", cfg.path_seed);
    cfg.lambda.seed = seeds.value("lambda", cfg.lambda.seed);
    read_lambda_block(doc.value("lambda", json::object()), cfg, cfg.lambda_table_file);
    if (!cfg.lambda_table_file.empty() && fs::path(cfg.lambda_table_file).is_relative())
        cfg.lambda_table_file = (fs::path(base_dir) / cfg.lambda_table_file).string();
    cfg.output_dir = doc.value("output_dir", "");
    cfg.source = src;
    cfg.validate();
    return cfg;
}

StudyConfig load_study_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) bad("cannot open study file " + path);
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::exception& e) {
        bad(path + ": " + e.what());
    }
    return parse_study(doc, fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string());
}

ordered_json ConvergenceReport::to_json() const {
    ordered_json j;
    j["name"] = name;
    j["config_hash"] = config_hash;
    j["ybar"] = ybar;
    j["ybar_ci"] = ybar_ci;
    j["table_ci"] = table_ci;
    j["partial"] = partial;
    j["empirical_slope"] = empirical_slope;
    ordered_json rs = ordered_json::array();
    for (const auto& r : rows) {
        ordered_json o;
        o["eps"] = r.eps;
        o["y"] = r.y;
        o["ci"] = r.ci;
        o["error"] = r.error;
        o["error_ci"] = r.error_ci;
        o["paired_ci"] = r.paired_ci;
        o["xi_median_scaled"] = r.xi_median_scaled;
        o["status"] = r.status;
        rs.push_back(o);
    }
    j["rows"] = rs;
    j["lambda_table"] = table_json(table);
    return j;
}

ConvergenceReport ConvergenceReport::from_json(const json& j) {
    ConvergenceReport r;
    r.name = j.value("name", "");
    r.config_hash = j.value("config_hash", "");
    r.ybar = num_or_nan(j.at("ybar"));
    r.ybar_ci = num_or_nan(j.at("ybar_ci"));
    r.table_ci = num_or_nan(j.value("table_ci", json(0.0)));
    r.partial = j.value("partial", false);
    r.empirical_slope = num_or_nan(j.value("empirical_slope", json()));
    for (const auto& o : j.at("rows")) {
        ConvergenceRow row;
        row.eps = o.at("eps").get<double>();
        row.y = num_or_nan(o.at("y"));
        row.ci = num_or_nan(o.at("ci"));
        row.error = num_or_nan(o.at("error"));
        row.error_ci = num_or_nan(o.at("error_ci"));
        row.paired_ci = num_or_nan(o.value("paired_ci", json(0.0)));
        row.xi_median_scaled = num_or_nan(o.value("xi_median_scaled", json(0.0)));
        row.status = o.value("status", "ok");
        r.rows.push_back(row);
    }
    if (j.contains("lambda_table")) r.table = table_from_json(j["lambda_table"]);
    return r;
}

ConvergenceReport run_study_on_spec(const ModelSpec& spec, const StudyConfig& cfg) {
    cfg.validate();
    ConvergenceReport rep;
    rep.name = cfg.name;
    rep.config_hash = cfg.hash();
    const TimeGrid grid{0.0, 1.0, cfg.n_steps};

    auto t0 = std::chrono::steady_clock::now();
    try {
        if (!cfg.lambda_table_file.empty()) {
            std::ifstream is(cfg.lambda_table_file);
            if (!is) bad("cannot open lambda table " + cfg.lambda_table_file);
            rep.table = EffectiveHamiltonianTable::read_csv(is);
        } else {
            rep.table = build_lambda_table(spec, cfg.lambda);
        }
    } catch (const ValidationError& e) {
        throw ValidationError(e.tag(), std::string("[lambda] ") + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("[lambda] ") + e.what());
    }
    if (!rep.table.all_valid()) {
        std::string msg = "[lambda] table has invalid nodes";
        if (!rep.table.node_errors.empty()) msg += ": " + rep.table.node_errors.front();
        throw NumericalError(msg);
    }
    rep.timings.emplace_back("lambda_table", seconds_since(t0));

    t0 = std::chrono::steady_clock::now();
    BsdeSolution limit;
    try {
        limit = solve_limit_bsde(spec, LambdaSource(&rep.table), grid, cfg.n_paths, cfg.degree, cfg.path_seed);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("[limit] ") + e.what());
    }
    rep.ybar = limit.y0;
    rep.ybar_ci = limit.ci;
    rep.table_ci = limit.table_ci;
    rep.timings.emplace_back("limit_bsde", seconds_since(t0));
    const double ybar_total_ci = joint_ci(limit.ci, limit.table_ci);

    for (double eps : cfg.eps) {
        ConvergenceRow row;
        row.eps = eps;
        t0 = std::chrono::steady_clock::now();
        try {
            const BsdeSolution s = solve_epsilon_bsde(spec, eps, grid, cfg.n_paths, cfg.degree, cfg.path_seed);
            row.y = s.y0;
            row.ci = s.ci;
            row.error = std::abs(s.y0 - limit.y0);
            row.error_ci = joint_ci(s.ci, ybar_total_ci);
            std::vector<double> diff(s.realized0.size());
            for (std::size_t p = 0; p < diff.size(); ++p) diff[p] = s.realized0[p] - limit.realized0[p];
            row.paired_ci = mean_ci(diff).ci;
            row.xi_median_scaled = s.xi_median_scaled;
        } catch (const std::exception& e) {
            row.status = std::string("failed: ") + e.what();
            rep.partial = true;
        }
        std::ostringstream stage;
        stage << "eps_bsde[" << eps << "]";
        rep.timings.emplace_back(stage.str(), seconds_since(t0));
        rep.rows.push_back(row);
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& r : rep.rows)
        if (r.status == "ok" && r.error > 0.0) {
            const double lx = std::log(r.eps), ly = std::log(r.error);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++n;
        }
    if (n >= 2 && n * sxx - sx * sx > 0.0) rep.empirical_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return rep;
}

ModelSpec reaction_diffusion_model(const json& doc) {
    const std::size_t modes = doc.value("n_modes", std::size_t(1));
    if (modes < 1 || modes > 8) bad("reaction_diffusion n_modes must lie in [1, 8]");
    ReactionDiffusionParams p;
    p.m = doc.value("m", p.m);
    p.probes.n_probes = doc.value("probes", p.probes.n_probes);
    return galerkin_truncate(p, modes);
}

ConvergenceReport run_convergence_study(const StudyConfig& cfg) {
    const bool rd = cfg.model.is_object() && cfg.model.value("type", "") == "reaction_diffusion";
    const ModelSpec spec = rd ? reaction_diffusion_model(cfg.model) : parse_model(cfg.model).build();
    return run_study_on_spec(spec, cfg);
}

StudyConfig reaction_diffusion_study(std::size_t n_modes) {
    json doc;
    doc["name"] = "reaction_diffusion_n" + std::to_string(n_modes);
    doc["model"] = {{"type", "reaction_diffusion"}, {"n_modes", n_modes}, {"m", 1.0}};
    doc["eps"] = {0.4, 0.2, 0.1, 0.05};
    doc["n_steps"] = 200;
    doc["n_paths"] = 10000;
    doc["degree"] = 2;
    doc["seeds"] = {{"paths", 11}, {"lambda", 2024}};
    const Vec c = constant_profile(n_modes);
    const Vec x_dir = Vec::Unit(Eigen::Index(n_modes), 0);
    doc["lambda"] = {{"x_grid", {0.0}},
                     {"z_grid", linspace(-2.0, 2.0, 9)},
                     {"x_ref", vec_json(Vec::Zero(Eigen::Index(n_modes)))},
                     {"x_dir", vec_json(x_dir)},
                     {"z_dir", vec_json(c / c.norm())},
                     {"method", "ergodic_bsde"},
                     {"n_paths", 1000},
                     {"dt", 0.01},
                     {"L1x", 1.0},
                     {"L1z", 1.0}};
    return parse_study(doc);
}

ConvergenceReport run_reaction_diffusion_example(const StudyConfig& cfg) {
    if (!cfg.model.is_object() || cfg.model.value("type", "") != "reaction_diffusion")
        bad("example-rd expects a reaction_diffusion model");
    return run_study_on_spec(reaction_diffusion_model(cfg.model), cfg);
}

std::string report_prefix(const ConvergenceReport& r) { return r.name + "_" + r.config_hash; }

std::string resolve_output_dir(const std::string& explicit_dir) {
    if (!explicit_dir.empty()) return explicit_dir;
    if (const char* env = std::getenv("TWOSCALE_OUTPUT_DIR"); env && *env) return env;
    return "twoscale_out";
}

std::vector<std::string> write_report(const ConvergenceReport& r, const std::string& dir) {
    fs::create_directories(dir);
    const std::string base = (fs::path(dir) / report_prefix(r)).string();
    std::vector<std::string> files;
    auto open = [&](const std::string& path) {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write " + path);
        files.push_back(path);
        return os;
    };
    {
        auto os = open(base + ".csv");
        os << std::setprecision(17) << "eps,y_eps,ci,abs_error,error_ci,paired_ci,xi_median_scaled,ybar,ybar_ci,status\n";
        for (const auto& row : r.rows)
            os << row.eps << ',' << row.y << ',' << row.ci << ',' << row.error << ',' << row.error_ci << ','
               << row.paired_ci << ',' << row.xi_median_scaled << ',' << r.ybar << ',' << r.ybar_ci << ','
               << '"' << row.status << '"' << '\n';
    }
    {
        auto os = open(base + ".json");
        os << std::setw(2) << r.to_json() << '\n';
    }
    {
        auto os = open(base + "_lambda.csv");
        r.table.write_csv(os);
    }
    {
        auto os = open(base + "_timing.json");
        ordered_json t;
        for (const auto& [stage, sec] : r.timings) t[stage] = sec;
        os << std::setw(2) << t << '\n';
    }
    return files;
}

}  // namespace twoscale
